"""Command-line front end: ``noma-lab <command> --config <path> [...]``.

Exit codes: 0 on success, 2 for configuration problems, 3 for an
infeasible antenna/cluster geometry, 4 when the validation suite fails.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .errors import ConfigError, InfeasibleGeometryError

_COMMAND_HELP = {
    "simulate": "Monte Carlo per-user rates over the configured sweep",
    "analytic": "closed-form per-user rates over the configured sweep",
    "optimize-power": "inverse-interference cluster power split",
    "optimize-feedback": "integer feedback-bit split across users",
    "select-mode": "best clustering mode per sweep point, equal power",
    "joint": "joint mode + power + feedback optimization per sweep point",
    "fig2": "per-user closed-form vs Monte Carlo rates over SNR",
    "fig3": "sum rate over SNR for three power allocation schemes",
    "fig4": "sum rate over SNR for equal vs optimized feedback bits",
    "fig5": "per-user rates vs total feedback bits at fixed SNR",
    "fig6": "mode sum rates and their envelope over the accuracy grid",
    "fig7": "joint scheme vs fixed mode vs orthogonal baseline",
    "validate": "run every structural invariant check",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noma-lab",
        description="numerical laboratory for clustered downlink "
        "transmission with imperfect channel knowledge",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in experiments.COMMANDS:
        p = sub.add_parser(name, help=_COMMAND_HELP[name])
        p.add_argument("--config", default=None,
                       help="TOML config file (default: built-in preset)")
        p.add_argument("--trials", type=int, default=None,
                       help="override Monte Carlo trial count")
        p.add_argument("--seed", type=int, default=None,
                       help="override the base random seed")
        p.add_argument("--out", default=None,
                       help="override the output directory")
    return parser


def _run_validate() -> int:
    # imported lazily: the validation suite pulls in scipy
    from .validate import run_validation

    results = run_validation()
    failures = 0
    for res in results:
        tag = "ok" if res.passed else "FAIL"
        line = f"[{tag:>4}] {res.name}"
        if res.detail:
            line += f" — {res.detail}"
        print(line)
        failures += 0 if res.passed else 1
    total = len(results)
    print(f"{total - failures}/{total} checks passed")
    return 0 if failures == 0 else 4


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return _run_validate()
    try:
        cfg = experiments.load_config(args.config)
        if args.trials is not None:
            if args.trials <= 0:
                raise ConfigError("--trials must be positive")
            cfg.trials = args.trials
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out
        paths = experiments.run_command(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleGeometryError as exc:
        print(f"infeasible geometry: {exc}", file=sys.stderr)
        return 3
    for path in paths:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
