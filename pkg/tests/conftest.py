import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import ocsolve as oc


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the integration kernels once so timed tests measure the
    computation, not JIT startup."""
    prob = oc.scalar_lqr_problem()
    oc.solve(prob, oc.SolverConfig(n_intervals=16, eps_t=1e-6, max_iters=2))
