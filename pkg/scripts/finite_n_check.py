"""Finite-n law of Z_n from the exact recurrence against the limit quantities."""

import argparse

import numpy as np

from qstail.dist_core import CONSTANTS
from qstail.exact_engine import exact_pmf, normalize, pmf_tail
from qstail.mgf_solver import find_lemma_constant, solve_mgf
from qstail.tail_bounds import chernoff_from_table, closed_form_right


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[25, 50, 100, 200])
    args = ap.parse_args()

    for n in args.n:
        z = normalize(exact_pmf(n, exact=False))
        print(f"n={n:4d} Var Z_n = {z.variance():.5f} (limit {CONSTANTS.var_z:.5f})")

    table = solve_mgf()
    a = find_lemma_constant("right", table).a
    z = normalize(exact_pmf(max(args.n), exact=False))
    print(f"\nright tails at n = {max(args.n)} against the limit-law bounds")
    for x in np.linspace(1.0, 4.0, 7):
        p = pmf_tail(z, x, "right")
        ch, t = chernoff_from_table(x, "right", table)
        print(f"x={x:4.2f} P(Z_n >= x)={p:.3e} chernoff={ch:.3e} (t={t:.2f}) closed form={closed_form_right(x, a):.3e}")


if __name__ == "__main__":
    main()
