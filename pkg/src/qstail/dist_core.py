"""Split-cost functions, constants and harmonic numbers for the Quicksort limit law.

The limit variable Z satisfies ``Z = U Z' + (1 - U) Z'' + g(U)`` with ``U``
uniform on (0, 1).  Everything else in the package is built from the toll
function ``g`` defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "SplitConstants",
    "CONSTANTS",
    "HarmonicCache",
    "g_split",
    "h_split",
    "harmonic",
]


@dataclass(frozen=True)
class SplitConstants:
    """Constants attached to the limit law.

    kappa = 2 - 1/ln 2 is the growth coefficient of log psi(-t) / (t ln t),
    gamma = 1/kappa is the rate inside the doubly exponential left tail and
    var_z = 7 - 2 pi^2 / 3 is Var Z.
    """

    kappa: float
    gamma: float
    var_z: float
    ln2: float

    @classmethod
    def compute(cls) -> "SplitConstants":
        ln2 = math.log(2.0)
        kappa = 2.0 - 1.0 / ln2
        return cls(kappa=kappa, gamma=1.0 / kappa, var_z=7.0 - 2.0 * math.pi**2 / 3.0, ln2=ln2)


CONSTANTS = SplitConstants.compute()


def _xlogx(x):
    # x ln x with the limit value 0 at x = 0
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0.0, x, 1.0)
    return np.where(x > 0.0, x * np.log(safe), 0.0)


def _check_unit(u) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("split fraction must lie in [0, 1]")
    return arr


def h_split(u):
    """Return ``u ln u + (1 - u) ln(1 - u)`` (scalar in, float out; arrays broadcast)."""
    arr = _check_unit(u)
    out = _xlogx(arr) + _xlogx(1.0 - arr)
    return float(out) if out.ndim == 0 else out


def g_split(u):
    """Toll added at a split with fraction ``u``: ``2u ln u + 2(1-u) ln(1-u) + 1``.

    Symmetric about 1/2, maximal (= 1) at the endpoints and minimal
    (= 1 - 2 ln 2) at u = 1/2.
    """
    arr = _check_unit(u)
    out = 2.0 * (_xlogx(arr) + _xlogx(1.0 - arr)) + 1.0
    return float(out) if out.ndim == 0 else out


class HarmonicCache:
    """Exact harmonic numbers H_0..H_N, grown on demand."""

    def __init__(self) -> None:
        self.values: list[Fraction] = [Fraction(0)]

    def __getitem__(self, n: int) -> Fraction:
        if n < 0:
            raise ValueError("harmonic number index must be nonnegative")
        while len(self.values) <= n:
            k = len(self.values)
            self.values.append(self.values[-1] + Fraction(1, k))
        return self.values[n]


_HARMONIC = HarmonicCache()


def harmonic(n: int) -> Fraction:
    """Exact n-th harmonic number ``sum_{k<=n} 1/k`` (H_0 = 0)."""
    return _HARMONIC[int(n)]

