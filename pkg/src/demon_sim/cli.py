"""Command-line front end.

Exit codes: 0 success, 1 validation error, 2 numerical-guard error
(truncation / leak / missing local maximum), 3 I/O error.  All numeric
stdout uses fixed scientific notation with 12 significant digits so
golden outputs diff cleanly.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .errors import (EXIT_IO, EXIT_NUMERICAL, EXIT_OK, ConfigError,
                     DemonSimError, exit_code_for)
from .experiments import (FIGURE_IDS, load_config, reproduce_figure,
                          run_config, sweep)
from .fock import default_n_max, moments, thermal_distribution
from .jc import (SearchOptions, first_local_optimal_theta_nonlinear,
                 optimal_theta_linear)
from .oracle import montecarlo_protocol, recursion_equivalence_check

DEFAULT_MC_SEED = 20240
SEED_ENV_VAR = "DEMON_SIM_SEED"


def _fmt(x: float) -> str:
    return f"{x:.11e}"


def _add_search_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-points", type=int, default=2048,
                        help="grid size for the linear-angle search")
    parser.add_argument("--window-factor", type=float, default=4.0,
                        help="search window as a multiple of the seed angle")
    parser.add_argument("--refine-tol", type=float, default=1e-10,
                        help="relative tolerance of the angle refinement")
    parser.add_argument("--scan-step-divisor", type=int, default=256,
                        help="seed divisor setting the nonlinear scan step")


def _search_options(args: argparse.Namespace) -> SearchOptions:
    return SearchOptions(grid_points=args.grid_points,
                         window_factor=args.window_factor,
                         refine_tol=args.refine_tol,
                         scan_step_divisor=args.scan_step_divisor)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demon-sim",
        description="Phonon-subtraction protocol simulator and analysis toolkit.")
    parser.add_argument("--version", action="version",
                        version=f"demon-sim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thermal-stats",
                       help="print the moments of a truncated thermal state")
    p.add_argument("--nbar", type=float, required=True, help="mean occupation")
    p.add_argument("--n-max", type=int, default=0,
                   help="truncation level (0 = automatic)")

    p = sub.add_parser("optimize",
                       help="search the optimal interaction angle for a thermal state")
    p.add_argument("--nbar", type=float, required=True, help="mean occupation")
    p.add_argument("--n-max", type=int, default=0,
                   help="truncation level (0 = automatic)")
    p.add_argument("--nonlinear", action="store_true",
                   help="search the first local optimum of the two-quantum coupling")
    _add_search_args(p)

    p = sub.add_parser("run", help="execute a configured schedule")
    p.add_argument("--config", required=True, help="path to a JSON config")

    p = sub.add_parser("reproduce", help="run a bundled study pipeline")
    p.add_argument("--figure", required=True, choices=sorted(FIGURE_IDS))
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("oracle-check",
                       help="validate the recursion against the joint-unitary oracle")
    p.add_argument("--config", required=True, help="path to a JSON config")
    p.add_argument("--mc-traj", type=int, default=0,
                   help="also sample this many Monte-Carlo trajectories")
    p.add_argument("--seed", type=int, default=DEFAULT_MC_SEED,
                   help=f"Monte-Carlo seed (env {SEED_ENV_VAR} overrides)")

    p = sub.add_parser("sweep", help="run every *.json config in a directory")
    p.add_argument("--configs", required=True, help="directory of JSON configs")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    return parser


def _cmd_thermal_stats(args) -> int:
    n_max = args.n_max or default_n_max(args.nbar)
    mo = moments(thermal_distribution(args.nbar, n_max))
    print(f"nbar = {_fmt(args.nbar)}")
    print(f"n_max = {n_max}")
    for name in ("mean", "variance", "g2", "fano", "mdr"):
        print(f"{name} = {_fmt(getattr(mo, name))}")
    return EXIT_OK


def _cmd_optimize(args) -> int:
    n_max = args.n_max or default_n_max(args.nbar)
    dist = thermal_distribution(args.nbar, n_max)
    opts = _search_options(args)
    if args.nonlinear:
        rep = first_local_optimal_theta_nonlinear(dist, opts)
    else:
        rep = optimal_theta_linear(dist, opts)
    print(f"kind = {rep.kind}")
    print(f"theta_star = {_fmt(rep.theta_star)}")
    print(f"p_success = {_fmt(rep.p_success)}")
    print(f"seed_theta = {_fmt(rep.seed_theta)}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    manifest = run_config(cfg)
    print(f"outputs = {cfg.outputs}")
    for entry in manifest["outputs"]:
        print(f"wrote {entry['path']}")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    manifest = reproduce_figure(args.figure, args.out)
    print(f"figure = {args.figure}")
    print(f"outputs = {args.out}")
    for entry in manifest["outputs"]:
        print(f"wrote {entry['path']}")
    return EXIT_OK


def _cmd_oracle_check(args) -> int:
    cfg = load_config(args.config)
    # the oracle validates the truncated dynamics against itself, so any
    # truncation level is acceptable here; leak plays no role in the check
    initial = thermal_distribution(cfg.nbar, cfg.resolve_n_max(), leak_tol=1.0)
    schedule = cfg.build_schedule()
    report = recursion_equivalence_check(initial, schedule, cfg.search)
    seed = int(os.environ.get(SEED_ENV_VAR, args.seed))
    if args.mc_traj > 0:
        import numpy as np

        mc = montecarlo_protocol(initial, schedule, args.mc_traj, seed, cfg.search)
        from .protocols import run_schedule

        ens = run_schedule(initial, schedule, cfg.search,
                           leak_budget=math.inf).final_dist
        tv = 0.5 * float(np.abs(mc.probs - ens.probs).sum()) + 0.5 * abs(mc.leak - ens.leak)
        report["montecarlo"] = {"n_traj": args.mc_traj, "seed": seed,
                                "total_variation": tv}
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "oracle_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                           encoding="ascii")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if report["pass"] else EXIT_NUMERICAL


def _cmd_sweep(args) -> int:
    root = Path(args.configs)
    if not root.is_dir():
        raise ConfigError([f"{root} is not a directory"])
    paths = sorted(root.glob("*.json"))
    if not paths:
        raise ConfigError([f"no *.json configs found under {root}"])
    results = sweep(paths, jobs=args.jobs)
    failed = 0
    for res in results:
        if res["status"] == "ok":
            print(f"ok {res['config']}")
        else:
            failed += 1
            print(f"error {res['config']}: {res['error']}", file=sys.stderr)
    print(f"swept {len(results)} configs, {failed} failed")
    return EXIT_OK if failed == 0 else 1


_COMMANDS = {
    "thermal-stats": _cmd_thermal_stats,
    "optimize": _cmd_optimize,
    "run": _cmd_run,
    "reproduce": _cmd_reproduce,
    "oracle-check": _cmd_oracle_check,
    "sweep": _cmd_sweep,
}


def dispatch(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DemonSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
