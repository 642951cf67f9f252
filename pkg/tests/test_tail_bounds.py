import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qstail.dist_core import CONSTANTS
from qstail.exact_engine import exact_pmf, normalize, pmf_tail
from qstail.mgf_solver import find_lemma_constant
from qstail.tail_bounds import (
    ChernoffBoundaryWarning,
    bound_curves_csv,
    chernoff_from_table,
    closed_form_left,
    closed_form_right,
    fj_bound,
    ks_reference,
    log_chernoff_from_table,
    log_closed_form_left,
    log_closed_form_right,
    log_fj_bound,
    log_ks_reference,
    log_theorem_envelope,
    make_bound,
    theorem_envelope,
)

K, G = CONSTANTS.kappa, CONSTANTS.gamma


def quiet_chernoff(x, side, table):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ChernoffBoundaryWarning)
        return chernoff_from_table(x, side, table)


def test_chernoff_at_zero(mgf_table):
    for side in ("left", "right"):
        b, t = chernoff_from_table(0.0, side, mgf_table)
        assert b == 1.0 and t == pytest.approx(0.0, abs=1e-6)


def test_chernoff_right_vs_closed_form(mgf_table):
    a = find_lemma_constant("right", mgf_table).a
    b, t = chernoff_from_table(5.0, "right", mgf_table)
    assert 0 < t < 10
    assert b <= math.exp(-5 * math.log(5) + 5 + a * math.log(5))


def test_chernoff_left_monotone(mgf_table):
    vals = [quiet_chernoff(x, "left", mgf_table)[0] for x in (1, 2, 3)]
    assert vals[0] >= vals[1] >= vals[2]


def test_chernoff_boundary_warning(mgf_table):
    with pytest.warns(ChernoffBoundaryWarning):
        chernoff_from_table(3.0, "left", mgf_table)


def test_chernoff_refines_grid_minimum(mgf_table):
    x = 1.3
    log_b, t = log_chernoff_from_table(x, "right", mgf_table)
    grid = mgf_table.t_grid[mgf_table.t_grid >= 0]
    c = mgf_table.config.grid_points // 2
    assert log_b <= np.min(-grid * x + mgf_table.log_psi[c:]) + 1e-15


@pytest.mark.parametrize("side", ["left", "right"])
def test_dominance_over_closed_forms(mgf_table, side):
    a = find_lemma_constant(side, mgf_table).a
    for x in np.linspace(1.0, 8.0, 15):
        if side == "left":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ChernoffBoundaryWarning)
                lb, t = log_chernoff_from_table(x, side, mgf_table)
            # the closed form uses t = exp((x - a)/kappa - 1); only comparable when that t is on the table
            if math.exp((x - a) / K - 1) > 10:
                continue
            ref = log_closed_form_left(x, a)
        else:
            lb, _ = log_chernoff_from_table(x, side, mgf_table)
            ref = log_closed_form_right(x, a)
        assert lb <= ref + 1e-12 * abs(ref)


def test_closed_form_left_examples():
    assert closed_form_left(K, 0.0) == 1.0  # exp(1 - kappa) > 1 is clipped
    xs = np.linspace(2.0, 6.0, 20)
    vals = [log_closed_form_left(x) for x in xs]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        closed_form_left(1.0, -0.1)


def test_closed_form_left_slope():
    h = 1e-3
    for x in np.linspace(10, 15, 6):
        d = (math.log(-log_closed_form_left(x + h, 0.7)) - math.log(-log_closed_form_left(x - h, 0.7))) / (2 * h)
        assert abs(d - G) < 1e-6


def test_closed_form_left_slope_of_exponent():
    # ln(kappa t) with t = exp((x - a)/kappa - 1) has slope exactly gamma
    for x in np.linspace(5, 10, 6):
        f = lambda y: math.log(K * math.exp((y - 0.3) / K - 1))
        assert abs((f(x + 1e-4) - f(x - 1e-4)) / 2e-4 - G) < 1e-8


def test_closed_form_right_examples():
    assert closed_form_right(math.e, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert log_closed_form_right(10.0) == pytest.approx(-10 * math.log(10) + 10, abs=1e-12)
    assert log_closed_form_right(10.0) == pytest.approx(-13.0259, abs=1e-4)
    with pytest.raises(ValueError):
        closed_form_right(0.5)
    x = 1e6
    assert -log_closed_form_right(x) / (x * math.log(x)) == pytest.approx(1 - 1 / math.log(x), abs=1e-12)


@given(st.floats(303, 1e5), st.floats(0, 5))
def test_closed_form_right_tighter_than_fj(x, a):
    assert log_closed_form_right(x, a) <= log_fj_bound(x, "right")[0]


def test_fj_examples():
    assert fj_bound(0.0, "left") == (1.0, True)
    v, ok = fj_bound(5.0, "left")
    assert v == pytest.approx(math.exp(-5)) and ok
    lv, ok = log_fj_bound(303.0, "right")
    assert ok and lv == pytest.approx(-303 * math.log(303) + (1 + math.log(2)) * 303)
    assert fj_bound(100.0, "right")[1] is False


def test_ks_examples():
    assert ks_reference(0.0, "left", 1.0, 1.0) == pytest.approx(math.exp(-1))
    ref = -100 * math.log(100) - 100 * math.log(math.log(100)) + (1 + math.log(2)) * 100
    assert log_ks_reference(100.0, "right") == pytest.approx(ref)
    with pytest.raises(ValueError):
        ks_reference(1.0, "left")
    with pytest.raises(ValueError):
        ks_reference(2.0, "right")


@given(st.floats(0.01, 100), st.floats(-3, 3))
def test_ks_left_double_log_slope(c2, x):
    f = lambda y: math.log(-(log_ks_reference(y, "left", 1.0, c2)))
    assert (f(x + 1e-5) - f(x - 1e-5)) / 2e-5 == pytest.approx(G, rel=1e-6)


def test_envelope_examples():
    lo, hi = log_theorem_envelope(10.0, "left")
    assert lo <= hi
    lo, hi = log_theorem_envelope(10.0, "right")
    l10 = math.log(10)
    assert lo == pytest.approx(-10 * l10 - 10 * math.log(l10))
    assert hi == pytest.approx(-10 * l10)
    with pytest.raises(ValueError):
        theorem_envelope(2.0, "left")


@given(st.floats(303, 1e4))
def test_envelope_contains_fj(x):
    _, hi = log_theorem_envelope(x, "right", (0.0, 1 + math.log(2)))
    assert log_fj_bound(x, "right")[0] <= hi + 1e-9 * abs(hi)


@given(st.floats(2.8, 30), st.floats(-2, 2), st.floats(-1, 1))
def test_envelope_ordering(x, c_lo, frac):
    # ordered whenever |C_hi - C_lo| <= ln ln x
    c_hi = c_lo + frac * math.log(math.log(x))
    for side in ("left", "right"):
        lo, hi = log_theorem_envelope(x, side, (c_lo, c_hi))
        assert lo <= hi + 1e-12


@pytest.mark.parametrize(
    "name, side, params",
    [
        ("closed_form", "left", {}),
        ("closed_form", "right", {"a": 0.5}),
        ("fj", "left", {}),
        ("fj", "right", {}),
        ("ks", "left", {"c1": 2.0, "c2": 0.5}),
        ("ks", "right", {}),
        ("envelope_lower", "left", {}),
        ("envelope_upper", "right", {"offsets": (0.0, 1.0)}),
    ],
)
def test_named_bounds_in_unit_interval_and_monotone(name, side, params):
    b = make_bound(name, side, **params)
    lo = max(b.validity[0], 3.0)
    xs = np.linspace(lo, lo + 5, 12)
    logs = [b.log_value(x) for x in xs]
    assert all(v <= 0 for v in logs)
    assert all(0 < b.value(x) <= 1 for x in xs[:2] if logs[0] > -700)
    assert all(v2 <= v1 + 1e-12 for v1, v2 in zip(logs, logs[1:]))


def test_chernoff_named_bound(mgf_table):
    b = make_bound("chernoff", "right", mgf_table)
    lv, t = b.evaluate(2.0)
    assert lv < 0 and t > 0
    with pytest.raises(ValueError):
        make_bound("chernoff", "right")
    with pytest.raises(ValueError):
        make_bound("nope", "right")


def test_upper_bounds_dominate_finite_n_tails(mgf_table):
    z = normalize(exact_pmf(200, exact=False))
    a = find_lemma_constant("right", mgf_table).a
    for x in np.linspace(2, 4, 9):
        p = pmf_tail(z, x, "right")
        assert p <= 1.5 * chernoff_from_table(x, "right", mgf_table)[0]
        assert p <= 1.5 * closed_form_right(x, a)
        assert p <= 1.5 * fj_bound(x, "right")[0]


def test_curve_export():
    text = bound_curves_csv([1.0, 2.0], [make_bound("fj", "left")])
    lines = text.splitlines()
    assert lines[0] == "x,bound_name,value,log_value,t_opt,valid"
    assert lines[1].startswith("1.0,fj_left,")
