"""Command-line entry point.

``ocsolve solve`` runs one of the built-in benchmark problems (or a problem
file) and writes the trajectory, per-iteration residuals, and a JSON report
into the output directory.  Exit codes: 0 when converged, 2 when the
iteration budget or residual floor was hit first, 1 on numerical failure,
64 on usage errors.  The OCSOLVE_LOG environment variable (error|info|debug)
controls logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .ncp import NcpKind
from .ocp import OcpProblem, load_problem
from .problems import (
    LaneChangeParams,
    double_integrator_problem,
    lane_change_outputs,
    lane_change_problem,
    scalar_lqr_problem,
)
from .riccati import assemble_weights, solve_riccati
from .solver import SolverConfig, SolverReport, solve

log = logging.getLogger("ocsolve")

_EXIT_USAGE = 64
_NCP_BY_FLAG = {"min": NcpKind.MIN, "fb": NcpKind.FISCHER_BURMEISTER}
_DAMPING_BY_FLAG = {"full": "full_step", "merit": "merit_backtracking"}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_help(sys.stderr)
        self.exit(_EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="ocsolve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("solve", help="solve a benchmark or problem file")
    run.add_argument(
        "--problem",
        required=True,
        help="scalar-lqr | double-integrator | lane-change | file:<path>",
    )
    run.add_argument("--ncp", choices=sorted(_NCP_BY_FLAG), default=None)
    run.add_argument("--delta", type=float, default=None)
    run.add_argument("--tol", type=float, default=None)
    run.add_argument("--grid", type=int, default=None)
    run.add_argument("--max-iters", type=int, default=None)
    run.add_argument("--damping", choices=sorted(_DAMPING_BY_FLAG), default=None)
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--config", default=None, help="JSON/TOML solver config file")
    run.add_argument("--s0", type=float, default=3.5, help="lane-change initial offset [m]")
    run.add_argument("--umax", type=float, default=0.5, help="double-integrator input bound")
    run.add_argument(
        "--terminal-dare",
        type=float,
        default=None,
        metavar="DT",
        help="use the discrete Riccati terminal weight with this sample time",
    )
    run.add_argument(
        "--dump-riccati",
        action="store_true",
        help="also write the final backward-pass P(t), p(t) to riccati.csv",
    )
    return parser


def _make_config(args: argparse.Namespace, parser: _Parser, grid_hint: int | None) -> SolverConfig:
    if args.config is not None:
        try:
            cfg = SolverConfig.from_file(args.config)
        except (OSError, ValueError, TypeError) as exc:
            parser.error(f"bad config file: {exc}")
    else:
        cfg = SolverConfig()
    if args.ncp is not None:
        cfg.ncp_kind = _NCP_BY_FLAG[args.ncp]
    if args.delta is not None:
        cfg.delta = args.delta
    if args.tol is not None:
        cfg.eps_t = args.tol
    if args.grid is not None:
        cfg.n_intervals = args.grid
    elif grid_hint is not None:
        cfg.n_intervals = grid_hint
    if args.max_iters is not None:
        cfg.max_iters = args.max_iters
    if args.damping is not None:
        cfg.damping = _DAMPING_BY_FLAG[args.damping]
    cfg.__post_init__()
    return cfg


def _make_problem(args: argparse.Namespace, parser: _Parser) -> tuple[OcpProblem, int | None]:
    name = args.problem
    if name == "scalar-lqr":
        return scalar_lqr_problem(), None
    if name == "double-integrator":
        return double_integrator_problem(umax=args.umax), None
    if name == "lane-change":
        return lane_change_problem(s0=args.s0, terminal_dare_dt=args.terminal_dare), None
    if name.startswith("file:"):
        path = name[len("file:") :]
        try:
            return load_problem(path)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            parser.error(f"cannot load problem file {path!r}: {exc}")
    parser.error(f"unknown problem {name!r}")
    raise AssertionError("unreachable")


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], columns: list[np.ndarray]) -> str:
    table = np.column_stack(columns)
    lines = [",".join(header)]
    for row in table:
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def _write_outputs(
    out_dir: Path,
    problem_name: str,
    prob: OcpProblem,
    report: SolverReport,
    cfg: SolverConfig,
    dump_riccati: bool,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = [
        {"iter": k, **r.to_dict()} for k, r in enumerate(report.residual_history)
    ]
    res_text = "iter,r4_sq,r5_sq,r6_sq,total\n" + "".join(
        "{iter},{r4_sq:.17g},{r5_sq:.17g},{r6_sq:.17g},{total:.17g}\n".format(**row)
        for row in rows
    )
    _atomic_write(out_dir / "residuals.csv", res_text)

    payload = report.to_dict()
    payload["problem"] = problem_name
    payload["config"] = cfg.to_dict()
    _atomic_write(out_dir / "report.json", json.dumps(payload, indent=2) + "\n")

    z = report.final_iterate
    if z is None:
        return
    ts = z.grid.times()
    n, m, p = prob.n, prob.m, prob.p
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"u{i + 1}" for i in range(m)]
        + [f"lam{i + 1}" for i in range(n)]
        + [f"mu{i + 1}" for i in range(p)]
    )
    cols = [ts, z.x.values, z.u.values, z.lam.values, z.mu.values]
    _atomic_write(out_dir / "trajectory.csv", _csv_text(header, cols))

    if problem_name == "lane-change":
        outs = np.degrees(lane_change_outputs(LaneChangeParams(), z.x.values))
        _atomic_write(
            out_dir / "outputs.csv",
            _csv_text(["t", "alpha_f_deg", "alpha_r_deg", "delta_f_deg"], [ts, outs]),
        )

    if dump_riccati:
        w = assemble_weights(prob, z, cfg.ncp_kind, cfg.resolved_delta)
        ric = solve_riccati(prob, w, xT=z.x.values[-1])
        pcols = [f"P{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        _atomic_write(
            out_dir / "riccati.csv",
            _csv_text(
                ["t"] + pcols + [f"p{i + 1}" for i in range(n)],
                [ts, ric.P.values.reshape(len(ts), -1), ric.p.values],
            ),
        )


def main(argv: list[str] | None = None) -> int:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("OCSOLVE_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    parser = _build_parser()
    args = parser.parse_args(argv)

    prob, grid_hint = _make_problem(args, parser)
    cfg = _make_config(args, parser, grid_hint)

    report = solve(prob, cfg)
    _write_outputs(Path(args.out), args.problem, prob, report, cfg, args.dump_riccati)

    final = report.residual_history[-1].total if report.residual_history else float("nan")
    print(
        f"{args.problem}: {report.status} after {report.iterations} iterations, "
        f"residual {final:.3e}, {report.wall_time:.2f}s"
    )
    if report.status == "converged":
        return 0
    if report.status == "failed":
        log.error("solve failed: %s", report.failure_reason)
        return 1
    return 2


def entry() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entry()
