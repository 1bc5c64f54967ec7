#!/usr/bin/env python3
"""Scan CSI accuracy and report which clustering mode wins where.

Prints one line per grid point with every feasible mode's closed-form sum
rate under equal power, marking the winner, then summarizes the crossover
intervals.  Useful for picking a static mode when the accuracy of the
deployment is roughly known.
"""

import argparse
import warnings

import numpy as np

from noma_lab import allocation as alloc
from noma_lab.analytic import MixtureConditioningWarning
from noma_lab.experiments import table1_geometry


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--snr", type=float, default=10.0, help="SNR in dB")
    ap.add_argument("--antennas", type=int, default=6)
    ap.add_argument("--points", type=int, default=21)
    ap.add_argument(
        "--gains", type=float, nargs="+", default=None,
        help="per-user path gains (default: the reference six-user table)",
    )
    args = ap.parse_args()

    gains = np.asarray(
        args.gains if args.gains is not None else table1_geometry().alpha.ravel()
    )
    p_tot = 10.0 ** (args.snr / 10.0)
    modes = alloc.enumerate_modes(args.antennas, gains.size)
    header = "rho      " + "  ".join(f"({m.N},{m.K})" for m in modes)
    print(header)

    winners = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MixtureConditioningWarning)
        for rho in np.linspace(0.0, 1.0, args.points):
            evs = alloc.evaluate_modes(gains, args.antennas, float(rho), p_tot)
            best = max(range(len(evs)), key=lambda i: evs[i].sum_rate)
            cells = "  ".join(
                f"{e.sum_rate:6.3f}{'*' if i == best else ' '}"
                for i, e in enumerate(evs)
            )
            print(f"{rho:5.3f}  {cells}")
            winners.append((float(rho), evs[best].mode))

    print()
    start, current = winners[0][0], winners[0][1]
    for rho, mode in winners[1:]:
        if (mode.N, mode.K) != (current.N, current.K):
            print(f"best mode ({current.N},{current.K}) for rho in "
                  f"[{start:.3f}, {rho:.3f})")
            start, current = rho, mode
    print(f"best mode ({current.N},{current.K}) for rho in [{start:.3f}, 1.000]")


if __name__ == "__main__":
    main()
