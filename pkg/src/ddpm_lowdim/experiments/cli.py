"""``ddpm-lowdim`` command-line interface.

Subcommands: dump-schedule, figure1, theorem2, rate, perturb, covering,
validate. Every subcommand accepts ``--config PATH`` (flat ``key = value``
file, lists comma-separated), ``--out PATH`` (CSV, default stdout),
``--seed U64`` and ``--threads N``.

Exit codes: 0 success, 1 validation failure, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import os
import sys

from ..errors import InvalidParameterError
from ..kernels import BACKEND
from ..schedules import DESIGNS
from . import config as cfgmod
from .config import ConfigError
from .csvio import SCHEDULE_COLUMNS, schedule_rows, trajectory_columns, trajectory_rows, write_csv
from .sweeps import (
    make_design,
    make_schedule,
    run_covering,
    run_figure1_sweep,
    run_perturbation_sweep,
    run_rate_sweep,
    run_theorem2_grid,
)
from .validation import run_validate

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG = 0, 1, 2

DEFAULTS = {
    "dump-schedule": cfgmod.DUMP_SCHEDULE,
    "figure1": cfgmod.FIGURE1,
    "theorem2": cfgmod.THEOREM2,
    "rate": cfgmod.RATE,
    "perturb": cfgmod.PERTURB,
    "covering": cfgmod.COVERING,
}

HELP = {
    "dump-schedule": "write t, beta, alpha, alpha_bar, eta, sigma2 for one schedule and design",
    "figure1": "exact KL and MC TV between q_1 and p_1 over designs x T x d",
    "theorem2": "per-step expected KL vs the d-linear lower bound on an (eta, sigma) grid",
    "rate": "exact KL(q_1 || p_1) against T, with the log-log slope",
    "perturb": "TV of the reverse output under a biased score, for a list of eps",
    "covering": (
        "greedy eps-net and dimension estimate for a point cloud; 'points' names a CSV "
        "with one point per row (PointMixture atom files use 'weight, x_1..x_d')"
    ),
    "validate": "run every invariant check at fixed seeds",
}


def _config_keys_help(defaults):
    lines = ["config keys (defaults):"]
    for key, val in defaults.items():
        shown = ", ".join(str(v) for v in val) if isinstance(val, list) else val
        lines.append(f"  {key} = {shown}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddpm-lowdim", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s 0.1.0 (kernels: {BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in HELP.items():
        p = sub.add_parser(
            name,
            help=help_text,
            description=help_text,
            epilog=_config_keys_help(DEFAULTS[name]) if name in DEFAULTS else None,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--out", metavar="PATH", help="CSV output path (default: stdout)")
        p.add_argument("--seed", type=int, default=None, metavar="U64", help="master seed (overrides config)")
        p.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads")
        if name == "perturb":
            p.add_argument("--trajectory-out", metavar="PATH", help="also dump recorded trajectories (large)")
            p.add_argument("--trajectory-n", type=int, default=16, metavar="N", help="trajectories to record")
        if name == "covering":
            p.add_argument("--net-out", metavar="PATH", help="write net point indices to this CSV")
    return parser


def _seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if seed < 0 or seed >= 1 << 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _dispatch(args)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        # downstream closed early (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "validate":
        if args.config:
            raise ConfigError("validate takes no config file")
        report = run_validate() if args.seed is None else run_validate(args.seed)
        lines = [c.line() for c in report]
        failed = sum(not c.passed for c in report)
        lines.append(f"{len(report) - failed}/{len(report)} checks passed")
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        sys.stdout.write(text)
        return EXIT_VALIDATION if failed else EXIT_OK

    cfg = cfgmod.load_config(args.config, DEFAULTS[cmd])
    seed = _seed(args, cfg)
    if cmd == "dump-schedule":
        s = make_schedule(cfg, cfg["T"])
        if cfg["design"] not in DESIGNS:
            raise ConfigError(f"unknown design {cfg['design']!r}")
        write_csv(args.out, SCHEDULE_COLUMNS, schedule_rows(s, make_design(cfg["design"], s)))
    elif cmd == "figure1":
        write_csv(args.out, *run_figure1_sweep(cfg, seed, args.threads))
    elif cmd == "theorem2":
        cols, rows = run_theorem2_grid(cfg, seed, args.threads)
        write_csv(args.out, cols, rows)
        diffs = [r["difference"] for r in rows if "difference" in r]
        if diffs:
            print(f"min(step_kl - lower_bound) = {min(diffs):.6g} over {len(diffs)} points", file=sys.stderr)
    elif cmd == "rate":
        cols, rows, slope = run_rate_sweep(cfg, seed, args.threads)
        write_csv(args.out, cols, rows)
        print(f"least-squares slope of log kl_exact vs log T: {slope:.6g}", file=sys.stderr)
    elif cmd == "perturb":
        n_traj = args.trajectory_n if args.trajectory_out else 0
        cols, rows, traj = run_perturbation_sweep(cfg, seed, args.threads, trajectory_n=n_traj)
        write_csv(args.out, cols, rows)
        if traj is not None:
            write_csv(args.trajectory_out, trajectory_columns(cfg["d"]), trajectory_rows(traj))
    elif cmd == "covering":
        if args.net_out:
            cfg["net_out"] = args.net_out
        cols, rows, net = run_covering(cfg, seed, args.threads)
        write_csv(args.out, cols, rows)
        if cfg["net_out"]:
            write_csv(cfg["net_out"], ["net_index", "point_index"], ({"net_index": i, "point_index": int(p)} for i, p in enumerate(net)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
