"""Dyson-Phillips error on the scalar test system versus step count.

Splits the error into the truncation part (exact truncated series against
exp(TH)) and the quadrature part (trapezoid series against the exact truncated
series), so the second-order behaviour is visible below the truncation floor.
"""
import argparse

import numpy as np

from dynbc.matcore import matrix_exponential, operator_norm
from dynbc.stability import BlockSystem2x2, dyson_phillips, exact_dyson_terms


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, default=5.0)
    ap.add_argument("--k-max", type=int, default=12)
    ap.add_argument("--steps", type=int, nargs="+", default=[125, 250, 500, 1000, 2000])
    args = ap.parse_args()
    sys = BlockSystem2x2([[-1.0]], [[1.0]], [[1.0]], [[-2.0]])
    exact = sum(exact_dyson_terms(sys, args.T, args.k_max))
    trunc = operator_norm(exact - matrix_exponential(sys.assembled(), args.T))
    print(f"truncation error (k_max={args.k_max}): {trunc:.4e}")
    print(f"{'steps':>6} {'total':>11} {'quadrature':>11} {'ratio':>7}")
    prev = None
    for s in args.steps:
        exp = dyson_phillips(sys, args.T, s, args.k_max)
        quad = operator_norm(exp.partial_sum() - exact)
        ratio = f"{prev / quad:7.3f}" if prev else " " * 7
        print(f"{s:6d} {exp.partial_sum_error:11.4e} {quad:11.4e} {ratio}")
        prev = quad


if __name__ == "__main__":
    main()
