"""Wentzell boundary residual of the plate at t=1 under grid refinement."""
import argparse

import numpy as np

from dynbc.coupling import assemble
from dynbc.discretize import build_interval_plate
from dynbc.semigroup import evolve, initial_state, wentzell_residual


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--lam", type=float, default=1.0)
    args = ap.parse_args()
    prev = None
    for n in args.grids:
        P = build_interval_plate(n)
        R = assemble(P, args.lam)
        x = P.nodes
        z0 = initial_state(R, P, np.cos(np.pi * x) + x**2, np.zeros_like(x))
        r = wentzell_residual(P, evolve(R.G, z0, 1.0, 20, R), 20)
        order = f"{np.log2(prev / r):6.2f}" if prev else ""
        print(f"n={n:4d}  residual={r:.3e}  {order}")
        prev = r


if __name__ == "__main__":
    main()
