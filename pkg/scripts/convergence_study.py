"""Grid refinement: Poisson, quasilinear forward and reconstruction errors.

    python scripts/convergence_study.py --law tanh:0.5,2 --sizes 33 65 129 257
"""
import argparse
import csv
import sys

from heatid.harness import Experiment, convergence_study
from heatid.kirchhoff import builtin_law


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--law", default="tanh:0.5,2")
    p.add_argument("--sizes", type=int, nargs="+", default=[33, 65, 129, 257])
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    study = convergence_study(builtin_law(args.law), args.sizes, Experiment(amplitude=args.amplitude),
                              jobs=args.jobs)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "h", "poisson_error", "forward_error", "reconstruction_error"])
    w.writerows(study["rows"])
    for key in ("poisson_orders", "forward_orders", "reconstruction_orders"):
        print(f"# {key}: " + " ".join(f"{p:.3f}" for p in study[key]), file=sys.stderr)


if __name__ == "__main__":
    main()
