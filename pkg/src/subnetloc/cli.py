"""Command-line front end.

    subnetloc simulate --config cfg.txt [--trials N] [--seed S]
                       [--workers W] [--out DIR] [--experiment NAME]
    subnetloc validate --config cfg.txt
    subnetloc presets

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .config import PRESET_DESCRIPTIONS, ConfigError, load_config, preset
from .harness import run_experiment, write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subnetloc",
        description="Cooperative RSS localization simulator for ISAC subnetworks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment and write CSV/JSON outputs")
    sim.add_argument("--config", help="flat key=value config file")
    sim.add_argument("--trials", type=int, help="override the trial count")
    sim.add_argument("--seed", type=int, help="override the experiment seed")
    sim.add_argument("--workers", type=int, default=1, help="trial worker processes")
    sim.add_argument("--out", default="out", help="output directory (default: out)")
    sim.add_argument(
        "--experiment",
        help="preset name when no config is given, otherwise overrides the config's experiment",
    )

    val = sub.add_parser("validate", help="check a config file without running")
    val.add_argument("--config", required=True)

    sub.add_parser("presets", help="list the figure presets")
    return parser


def _resolve_config(args: argparse.Namespace):
    overrides = {"trials": args.trials, "seed": args.seed, "experiment": args.experiment}
    if args.config:
        return load_config(args.config, overrides)
    if args.experiment:
        cfg = preset(
            args.experiment,
            trials=args.trials if args.trials is not None else 2000,
            seed=args.seed if args.seed is not None else 1,
        )
        return cfg
    raise ConfigError(["simulate needs --config and/or --experiment"])


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "presets":
        for name, description in PRESET_DESCRIPTIONS.items():
            print(f"{name:24s} {description}")
        return EXIT_OK

    if args.command == "validate":
        try:
            load_config(args.config)
        except FileNotFoundError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except ConfigError as exc:
            for problem in exc.problems:
                print(f"config error: {problem}", file=sys.stderr)
            return EXIT_CONFIG
        print("config ok")
        return EXIT_OK

    # simulate
    try:
        cfg = _resolve_config(args)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run_experiment(cfg, workers=max(1, args.workers))
        write_outputs(result, args.out)
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME

    for cell in result.cells:
        s = cell.stats
        print(
            f"{cell.sweep_point.label:>16s}  {cell.strategy.label:14s} "
            f"mean={s.mean:.9g} m  ci90=[{s.ci90_low:.9g}, {s.ci90_high:.9g}]  n={s.count}"
        )
    if result.failed_trials:
        print(f"failed trials (no feasible subset): {result.failed_trials}", file=sys.stderr)
    print(f"wrote records.csv, summary.csv, meta.json to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
