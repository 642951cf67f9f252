"""Export every tail bound over an x grid for plotting (CSV, log values included)."""

import argparse
import warnings
from pathlib import Path

import numpy as np

from qstail.mgf_solver import find_lemma_constant, solve_mgf
from qstail.tail_bounds import ChernoffBoundaryWarning, bound_curves_csv, make_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/bound_curves.csv")
    ap.add_argument("--c1", type=float, default=1.0, help="left reference-curve constant")
    ap.add_argument("--c2", type=float, default=1.0, help="left reference-curve constant")
    args = ap.parse_args()

    table = solve_mgf()
    a_left = find_lemma_constant("left", table).a
    a_right = find_lemma_constant("right", table).a
    print(f"lemma constants on the table: left a = {a_left}, right a = {a_right}")

    left = [
        make_bound("chernoff", "left", table),
        make_bound("closed_form", "left", a=a_left),
        make_bound("fj", "left"),
        make_bound("ks", "left", c1=args.c1, c2=args.c2),
        make_bound("envelope_lower", "left"),
        make_bound("envelope_upper", "left"),
    ]
    right = [
        make_bound("chernoff", "right", table),
        make_bound("closed_form", "right", a=a_right),
        make_bound("fj", "right"),
        make_bound("ks", "right"),
        make_bound("envelope_lower", "right"),
        make_bound("envelope_upper", "right"),
    ]
    xs_left = np.round(np.linspace(3.0, 8.0, 51), 6)
    xs_right = np.round(np.geomspace(3.0, 1000.0, 61), 6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ChernoffBoundaryWarning)
        text = bound_curves_csv(xs_left, left)
        text += "".join(bound_curves_csv(xs_right, right).splitlines(keepends=True)[1:])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(f"wrote {out} ({len(text.splitlines()) - 1} rows)")


if __name__ == "__main__":
    main()
