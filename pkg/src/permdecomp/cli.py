"""Command-line entry point.

Exit codes: 0 all checks passed, 2 a check failed, 3 configuration or
resolution error, 4 numerical or resource error, 5 every check skipped.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as _config
from .errors import (ConfigError, InvalidInputError, NotFoundError, NumericalError,
                     ResourceLimitError)
from .scenarios import EXIT_CONFIG, EXIT_NUMERICAL, RunReport, run

ENV_HELP = ("environment overrides: PERMDECOMP_OUT_DIR, PERMDECOMP_SEED, PERMDECOMP_GRID_N, "
            "PERMDECOMP_T_MAX (command-line flags win over these, these win over --config)")


def _common(p: argparse.ArgumentParser, config_required: bool = False):
    p.add_argument("--config", type=Path, required=config_required,
                   help="scenario JSON file (unknown keys are rejected)")
    p.add_argument("--out-dir", help="directory for data files and report.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--grid-n", type=int, help="number of grid cells (power of two)")
    p.add_argument("--t-max", type=float, help="last sample time")
    p.add_argument("--fail-fast", action="store_true", default=None,
                   help="stop at the first failing lane or suite")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permdecomp", epilog=ENV_HELP,
                                     description="Run decomposition scenarios and checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("gaussian", help="two Gaussian packets", epilog=ENV_HELP))
    _common(sub.add_parser("scattering", help="asymptotic-velocity channels", epilog=ENV_HELP))
    _common(sub.add_parser("custom-tree", help="position-cut tree of packets", epilog=ENV_HELP))
    v = sub.add_parser("verify", help="randomised property suite", epilog=ENV_HELP)
    _common(v)
    v.add_argument("--trials", type=int, help="trial count for every suite (0 skips them)")
    v.add_argument("--inject-fault", metavar="CHECK",
                   help="make one named check fail (harness self-test)")
    _common(sub.add_parser("run", help="run the scenario named in --config", epilog=ENV_HELP),
            config_required=True)
    return parser


def _overrides(args) -> dict:
    keys = ("out_dir", "seed", "grid_n", "t_max", "fail_fast", "trials", "inject_fault")
    return {k: getattr(args, k, None) for k in keys if getattr(args, k, None) is not None}


def _print_summary(report: RunReport, out=None):
    out = out or sys.stdout
    for c in report.checks:
        print(f"{c.status.upper():5s} {c.name}", file=out)
    for w in report.warnings:
        print(f"WARN  {w}", file=out)
    print(f"{report.status}: report at {report.out_dir / 'report.json'}", file=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = None if args.command == "run" else args.command
    try:
        cfg = _config.resolve(kind, args.config, _overrides(args))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report = run(cfg)
    except (ConfigError, InvalidInputError) as exc:
        return _abort(cfg, exc, EXIT_CONFIG, "configuration error")
    except (NumericalError, ResourceLimitError, NotFoundError) as exc:
        return _abort(cfg, exc, EXIT_NUMERICAL, "numerical error")
    report.write()
    _print_summary(report)
    return report.final_exit_code()


def _abort(cfg, exc, code: int, label: str) -> int:
    print(f"{label}: {exc}", file=sys.stderr)
    report = RunReport(cfg.scenario, cfg.to_dict(), Path(cfg.out_dir),
                       error=f"{type(exc).__name__}: {exc}", exit_code=code)
    report.write()
    return code


if __name__ == "__main__":
    sys.exit(main())
