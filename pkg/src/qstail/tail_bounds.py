"""Tail bounds and reference curves for P(Z <= -x) and P(Z >= x).

Every evaluator has a ``log_`` twin; the probabilities underflow long before
the x range of interest ends (the left bounds are doubly exponential).  All
values are clipped to 1.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .dist_core import CONSTANTS
from .mgf_solver import MgfTable

__all__ = [
    "TailBound",
    "ChernoffBoundaryWarning",
    "chernoff_from_table",
    "log_chernoff_from_table",
    "closed_form_left",
    "log_closed_form_left",
    "closed_form_right",
    "log_closed_form_right",
    "fj_bound",
    "log_fj_bound",
    "ks_reference",
    "log_ks_reference",
    "theorem_envelope",
    "log_theorem_envelope",
    "make_bound",
    "bound_curves_csv",
    "BOUND_NAMES",
]

FJ_RIGHT_MIN_X = 303.0
BOUND_NAMES = ("chernoff", "closed_form", "fj", "ks", "envelope_lower", "envelope_upper")


class ChernoffBoundaryWarning(UserWarning):
    """The optimal Chernoff parameter sits at the edge of the table grid."""


def _check_side(side: str) -> None:
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _exp(log_value: float) -> float:
    return math.exp(min(0.0, log_value))


# ---------------------------------------------------------------------------
# Chernoff bound from a computed MGF table

def log_chernoff_from_table(x: float, side: str, table: MgfTable) -> tuple[float, float]:
    """min over 0 <= t <= t_max of -t x + log psi(-+t); returns (log bound, t_opt)."""
    _check_side(side)
    sign = 1.0 if side == "right" else -1.0
    t = table.t_grid[table.t_grid >= 0]
    c = table.config.grid_points // 2
    lp = table.log_psi[c:] if side == "right" else table.log_psi[c::-1]
    obj = -t * x + lp
    k = int(np.argmin(obj))
    best_t, best = float(t[k]), float(obj[k])
    lo, hi = t[max(k - 1, 0)], t[min(k + 1, len(t) - 1)]
    if hi > lo:
        res = minimize_scalar(
            lambda s: -s * x + table.log_psi_at(sign * s),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if res.fun < best:
            best_t, best = float(res.x), float(res.fun)
    if k == len(t) - 1:
        warnings.warn(
            f"Chernoff optimum for x={x} on the {side} side is at t_max={t[-1]}; "
            "the bound is valid but not optimal",
            ChernoffBoundaryWarning,
            stacklevel=2,
        )
    return min(0.0, best), best_t


def chernoff_from_table(x: float, side: str, table: MgfTable) -> tuple[float, float]:
    """Optimised Chernoff bound e^{-tx} psi(+-t) over the table grid: (bound, t_opt)."""
    log_b, t_opt = log_chernoff_from_table(x, side, table)
    return math.exp(log_b), t_opt


# ---------------------------------------------------------------------------
# closed forms obtained by plugging the lemma bounds into Chernoff

def log_closed_form_left(x: float, a: float = 0.0) -> float:
    """log of exp(-kappa t + 1) at t = exp((x - a)/kappa - 1), clipped at 0."""
    if a < 0:
        raise ValueError("lemma constant a must be nonnegative")
    k = CONSTANTS.kappa
    return min(0.0, 1.0 - k * math.exp((x - a) / k - 1.0))


def closed_form_left(x: float, a: float = 0.0) -> float:
    return _exp(log_closed_form_left(x, a))


def log_closed_form_right(x: float, a: float = 0.0) -> float:
    """-tx + e^t + a t at t = ln x, i.e. -x ln x + x + a ln x, clipped at 0."""
    if x < 1:
        raise ValueError("closed-form right bound needs x >= 1 (t = ln x)")
    if a < 0:
        raise ValueError("lemma constant a must be nonnegative")
    lx = math.log(x)
    return min(0.0, -x * lx + x + a * lx)


def closed_form_right(x: float, a: float = 0.0) -> float:
    return _exp(log_closed_form_right(x, a))


# ---------------------------------------------------------------------------
# previously published explicit bounds

def log_fj_bound(x: float, side: str) -> tuple[float, bool]:
    _check_side(side)
    if side == "left":
        return min(0.0, -x * x / 5.0), x >= 0
    if x <= 0:
        return 0.0, False
    return min(0.0, -x * math.log(x) + (1.0 + CONSTANTS.ln2) * x), x >= FJ_RIGHT_MIN_X


def fj_bound(x: float, side: str) -> tuple[float, bool]:
    """exp(-x^2/5) (left, x >= 0) or exp(-x ln x + (1 + ln 2) x) (right, x >= 303).

    Returns (value, valid); the value is computed even outside validity.
    """
    log_b, valid = log_fj_bound(x, side)
    return math.exp(log_b), valid


# ---------------------------------------------------------------------------
# non-rigorous asymptotic reference curves, constants supplied by the caller

def log_ks_reference(x: float, side: str, c1: float | None = None, c2: float | None = None) -> float:
    _check_side(side)
    if side == "left":
        if c1 is None or c2 is None:
            raise ValueError("left reference curve needs constants c1 and c2")
        if c1 <= 0 or c2 <= 0:
            raise ValueError("c1 and c2 must be positive")
        return min(0.0, math.log(c1) - c2 * math.exp(CONSTANTS.gamma * x))
    if x <= math.e:
        raise ValueError("right reference curve needs x > e")
    lx = math.log(x)
    return min(0.0, -x * lx - x * math.log(lx) + (1.0 + CONSTANTS.ln2) * x)


def ks_reference(x: float, side: str, c1: float | None = None, c2: float | None = None) -> float:
    """c1 exp(-c2 e^{gamma x}) (left) or exp(-x ln x - x ln ln x + (1 + ln 2) x) (right)."""
    return math.exp(log_ks_reference(x, side, c1, c2))


# ---------------------------------------------------------------------------
# two-sided envelope with explicit stand-ins for the unknown O(.) constants

def log_theorem_envelope(x: float, side: str, offsets: tuple[float, float] = (0.0, 0.0)) -> tuple[float, float]:
    _check_side(side)
    if x <= math.e:
        raise ValueError("envelope needs x > e so that ln ln x > 0")
    c_lo, c_hi = offsets
    lx = math.log(x)
    if side == "left":
        g = CONSTANTS.gamma
        lower = -math.exp(g * x + math.log(lx) + c_lo)
        upper = -math.exp(g * x + c_hi)
    else:
        lower = -x * lx - x * math.log(lx) + c_lo * x
        upper = -x * lx + c_hi * x
    return min(0.0, lower), min(0.0, upper)


def theorem_envelope(x: float, side: str, offsets: tuple[float, float] = (0.0, 0.0)) -> tuple[float, float]:
    """(lower, upper) curves of the two-sided tail asymptotics.

    left:  exp(-e^{gamma x + ln ln x + C_lo}) and exp(-e^{gamma x + C_hi})
    right: exp(-x ln x - x ln ln x + C_lo x) and exp(-x ln x + C_hi x)
    """
    lo, hi = log_theorem_envelope(x, side, offsets)
    return math.exp(lo), math.exp(hi)


# ---------------------------------------------------------------------------
# named bounds for batch evaluation

@dataclass(frozen=True)
class TailBound:
    """A named curve x -> bound with its validity interval and parameters."""

    name: str
    side: str
    validity: tuple[float, float]
    params: dict = field(default_factory=dict)
    _log_eval: Callable[[float], tuple[float, float | None]] = field(default=None, repr=False, compare=False)

    def valid(self, x: float) -> bool:
        return self.validity[0] <= x <= self.validity[1]

    def log_value(self, x: float) -> float:
        return self._log_eval(x)[0]

    def value(self, x: float) -> float:
        return math.exp(self.log_value(x))

    def evaluate(self, x: float) -> tuple[float, float | None]:
        """(log value, Chernoff parameter or None)."""
        return self._log_eval(x)


def make_bound(name: str, side: str, table: MgfTable | None = None, **params) -> TailBound:
    """Build a named bound; ``params`` carries a, offsets or c1/c2 as needed."""
    _check_side(side)
    inf = math.inf
    if name == "chernoff":
        if table is None:
            raise ValueError("the chernoff bound needs an MGF table")
        return TailBound(name, side, (0.0, inf), {}, lambda x: log_chernoff_from_table(x, side, table))
    if name == "closed_form":
        a = float(params.get("a", 0.0))
        if side == "left":
            return TailBound(name, side, (0.0, inf), {"a": a}, lambda x: (log_closed_form_left(x, a), None))
        return TailBound(name, side, (1.0, inf), {"a": a}, lambda x: (log_closed_form_right(x, a), None))
    if name == "fj":
        lo = 0.0 if side == "left" else FJ_RIGHT_MIN_X
        return TailBound(name, side, (lo, inf), {}, lambda x: (log_fj_bound(x, side)[0], None))
    if name == "ks":
        c1, c2 = params.get("c1"), params.get("c2")
        if side == "left" and (c1 is None or c2 is None):
            raise ValueError("the left ks curve needs c1 and c2")
        lo = -inf if side == "left" else math.e
        kept = {"c1": c1, "c2": c2} if side == "left" else {}
        return TailBound(name, side, (lo, inf), kept, lambda x: (log_ks_reference(x, side, c1, c2), None))
    if name in ("envelope_lower", "envelope_upper"):
        offsets = tuple(float(v) for v in params.get("offsets", (0.0, 0.0)))
        which = 0 if name == "envelope_lower" else 1
        return TailBound(
            name, side, (math.e, inf), {"offsets": list(offsets)},
            lambda x: (log_theorem_envelope(x, side, offsets)[which], None),
        )
    raise ValueError(f"unknown bound {name!r}; choose from {', '.join(BOUND_NAMES)}")


def bound_curve_rows(xs, bounds: list[TailBound]) -> list[dict]:
    rows = []
    for b in bounds:
        for x in xs:
            log_v, t_opt = b.evaluate(float(x))
            rows.append(
                {
                    "x": float(x),
                    "bound_name": f"{b.name}_{b.side}",
                    "value": math.exp(log_v),
                    "log_value": log_v,
                    "t_opt": "" if t_opt is None else t_opt,
                    "valid": b.valid(float(x)),
                }
            )
    return rows


def bound_curves_csv(xs, bounds: list[TailBound]) -> str:
    """CSV with columns x, bound_name, value, log_value, t_opt, valid."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, ["x", "bound_name", "value", "log_value", "t_opt", "valid"], lineterminator="\n")
    w.writeheader()
    for row in bound_curve_rows(xs, bounds):
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
