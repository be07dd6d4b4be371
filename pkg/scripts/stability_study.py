"""Reconstruction error against data perturbation size, for each perturbation mode.

Prints delta, error per mode and the fitted log-log slope.
"""
import argparse
import sys

import numpy as np

from heatid.harness import Experiment, stability_study
from heatid.kirchhoff import builtin_law


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--law", default="tanh:0.5,2")
    p.add_argument("--n", type=int, default=65)
    p.add_argument("--modes", nargs="+", default=["flux", "source", "measurement"])
    p.add_argument("--deltas", type=float, nargs="+", default=list(np.logspace(-1, -5, 9)))
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    truth = builtin_law(args.law)
    print("mode,delta,error")
    for mode in args.modes:
        study = stability_study(truth, args.deltas, mode, Experiment(n=args.n), jobs=args.jobs)
        for d, e in study["rows"]:
            print(f"{mode},{d!r},{e!r}")
        print(f"# {mode}: slope {study['slope']:.3f}", file=sys.stderr)


if __name__ == "__main__":
    main()
