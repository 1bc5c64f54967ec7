#!/usr/bin/env python3
"""Produce every figure dataset (fig2..fig7) plus the companion plot
scripts in one go.  Equivalent to running the individual CLI commands."""

import argparse
import time

from noma_lab import experiments


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="TOML config (default preset)")
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    cfg = experiments.load_config(args.config)
    if args.trials is not None:
        cfg.trials = args.trials
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.out_dir = args.out

    for command in ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7"):
        t0 = time.time()
        for path in experiments.run_command(command, cfg):
            print(f"{command}: wrote {path}  ({time.time() - t0:.1f}s)")


if __name__ == "__main__":
    main()
