"""Quasi-stationary identification under slower and slower ramps.

Designs a ramp for the requested accuracy, then runs it stretched by each
factor and compares against the equilibrium-mode result and the elliptic
baseline on the same grid.
"""
import argparse
import sys

from heatid.harness import design_ramp, equilibrium_mode, ramp_experiment, result_distance
from heatid.inverse import error_sup
from heatid.kirchhoff import builtin_law


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--law", default="tanh:0.5,2")
    p.add_argument("--n", type=int, default=65)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--g1", type=float, default=0.2)
    p.add_argument("--g2", type=float, default=0.8)
    p.add_argument("--factors", type=float, nargs="+", default=[0.25, 0.5, 1, 2, 4, 8])
    args = p.parse_args()

    truth = builtin_law(args.law)
    design = design_ramp((truth.a_lower, truth.a_upper), args.g1, args.g2, args.eps, n=args.n)
    print(f"# amplitude {design.amplitude:.4g}, t_ramp {design.t_ramp:.4g}, budget {design.ut_budget:.3g}",
          file=sys.stderr)
    eq = equilibrium_mode(truth, design)
    exp = design.experiment
    baseline = error_sup(exp.reconstruct(exp.trace(truth)), truth)
    print("factor,t_ramp,max_ut,sup_error,distance_to_equilibrium")
    for m in args.factors:
        d = design.with_ramp(m * design.t_ramp)
        r, ut = ramp_experiment(truth, d)
        print(f"{m!r},{d.t_ramp!r},{ut!r},{error_sup(r, truth)!r},{result_distance(r, eq)!r}")
    print(f"# elliptic baseline {baseline:.3e}, equilibrium error {error_sup(eq, truth):.3e}", file=sys.stderr)


if __name__ == "__main__":
    main()
