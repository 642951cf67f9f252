import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from qstail.dist_core import CONSTANTS, HarmonicCache, g_split, h_split, harmonic

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_constants():
    c = CONSTANTS
    assert abs(c.gamma * c.kappa - 1) < 4e-16
    assert 0.55 < c.kappa < 0.56
    assert 1.79 < c.gamma < 1.80
    assert c.var_z == pytest.approx(0.42026373260709, abs=1e-13)
    assert c.ln2 == math.log(2)


@pytest.mark.parametrize(
    "u, g, h",
    [
        (0.5, 1 - 2 * math.log(2), -math.log(2)),
        (0.0, 1.0, 0.0),
        (1.0, 1.0, 0.0),
        (0.25, -0.1246703, -0.5623351),
    ],
)
def test_known_values(u, g, h):
    assert g_split(u) == pytest.approx(g, abs=5e-8)
    assert h_split(u) == pytest.approx(h, abs=5e-8)


def test_quarter_against_mpmath():
    u = mpmath.mpf("0.25")
    ref = 2 * u * mpmath.log(u) + 2 * (1 - u) * mpmath.log(1 - u) + 1
    assert g_split(0.25) == pytest.approx(float(ref), rel=1e-15)


def test_scalar_and_array():
    assert isinstance(g_split(0.3), float)
    arr = g_split(np.array([0.0, 0.5, 1.0]))
    assert arr.shape == (3,)


@pytest.mark.parametrize("bad", [-1e-12, 1.0 + 1e-12, float("nan"), 2.0])
def test_domain(bad):
    with pytest.raises(ValueError):
        g_split(bad)
    with pytest.raises(ValueError):
        h_split(bad)


@given(unit)
def test_symmetry(u):
    assert abs(g_split(u) - g_split(1 - u)) <= 1e-14
    assert abs(h_split(u) - h_split(1 - u)) <= 1e-14


@given(unit)
def test_g_is_2h_plus_1(u):
    assert abs(g_split(u) - (2 * h_split(u) + 1)) <= 1e-14


@given(unit)
def test_range(u):
    assert 1 - 2 * math.log(2) - 1e-15 <= g_split(u) <= 1.0 + 1e-15


@given(unit)
def test_taylor_lower_bound(u):
    assert h_split(u) >= -math.log(2) + 2 * (u - 0.5) ** 2 - 1e-15


@given(unit)
def test_positivity(u):
    lhs = (2 - CONSTANTS.kappa) * h_split(u) + 1
    assert lhs >= (2 / math.log(2)) * (u - 0.5) ** 2 - 1e-15
    assert lhs >= (u - 0.5) ** 2 - 1e-15


def test_integral_of_g_vanishes():
    val, _ = integrate.quad(g_split, 0, 1, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert abs(val) < 1e-10


def test_integral_of_g_squared():
    val, _ = integrate.quad(lambda u: g_split(u) ** 2, 0, 1, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert abs(val - CONSTANTS.var_z / 3) < 1e-8


def test_harmonic_examples():
    assert harmonic(0) == 0
    assert harmonic(1) == 1
    assert harmonic(3) == Fraction(11, 6)
    with pytest.raises(ValueError):
        harmonic(-1)


@given(st.integers(1, 300))
def test_harmonic_increments(n):
    cache = HarmonicCache()
    assert cache[n] - cache[n - 1] == Fraction(1, n)
    assert harmonic(n) == sum(Fraction(1, k) for k in range(1, n + 1))
