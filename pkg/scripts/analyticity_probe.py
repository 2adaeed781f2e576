"""Resolvent-ray probe sup for the plate and the strongly damped interval.

The plate is probed in both the Euclidean block coordinates and the energy
norm; only the latter stays bounded as the grid is refined.
"""
import argparse

from dynbc.coupling import assemble
from dynbc.discretize import build_interval_plate, build_strongly_damped_interval
from dynbc.matcore import spectral_abscissa
from dynbc.semigroup import check_analyticity, energy_scaled_generator


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--lam", type=float, default=1.0)
    args = ap.parse_args()
    for n in args.grids:
        P = build_interval_plate(n)
        R = assemble(P, args.lam)
        eucl = check_analyticity(R.G, 1e-3).worst
        energy = check_analyticity(energy_scaled_generator(P, R), 1e-3).worst
        Q = build_strongly_damped_interval(1.0, (1, 0, 0, -1), n)
        S = assemble(Q, args.lam)
        damped = check_analyticity(S.G, max(spectral_abscissa(S.G), 0) + 1e-3).worst
        print(f"n={n:3d}  plate euclidean {eucl:10.3g}  plate energy {energy:7.3g}  damped interval {damped:7.3g}")


if __name__ == "__main__":
    main()
