"""Exact distribution of the Quicksort comparison count X_n.

Two backends share one recurrence,

    n * P(X_n = k) = sum_{i=0}^{n-1} P(X_i + X*_{n-1-i} = k - (n - 1)),

which is the law of ``X_{U-1} + X*_{n-U} + n - 1`` with U uniform on 1..n.

* rational: integer permutation counts ``c_n = n! * pmf_n`` satisfy
  ``c_n = shift(sum_i C(n-1, i) c_i * c_{n-1-i}, n-1)``; the convolutions are
  done exactly by packing each count vector into one big integer
  (Kronecker substitution), so the whole table is exact.
* float: the same recurrence evaluated pointwise on the discrete Fourier
  grid, followed by one inverse transform and renormalisation.

``brute_force_pmf`` counts comparisons of textbook Quicksort over every input
order and is the independent oracle for both.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dist_core import harmonic

__all__ = [
    "Pmf",
    "NormalizedPmf",
    "brute_force_pmf",
    "exact_pmf",
    "mean_comparisons",
    "normalize",
    "pmf_tail",
    "RATIONAL_MAX_N",
    "FLOAT_MAX_N",
    "BRUTE_FORCE_MAX_N",
]

RATIONAL_MAX_N = 60
FLOAT_MAX_N = 200
BRUTE_FORCE_MAX_N = 9


class ResourceLimitError(ValueError):
    """Requested size exceeds a configured computational guard."""


@dataclass(frozen=True, eq=False)
class Pmf:
    """Law of X_n on the integer support ``offset, offset + 1, ...``.

    ``weights`` is a tuple of Fractions (exact backend) or a float ndarray.
    """

    offset: int
    weights: Sequence
    n: int

    @property
    def exact(self) -> bool:
        return not isinstance(self.weights, np.ndarray)

    @property
    def support(self) -> range:
        return range(self.offset, self.offset + len(self.weights))

    def as_dict(self) -> dict:
        return {k: w for k, w in zip(self.support, self.weights) if w != 0}

    def total(self):
        return sum(self.weights) if self.exact else float(np.sum(self.weights))

    def mean(self):
        if self.exact:
            return sum(k * w for k, w in zip(self.support, self.weights))
        return float(np.dot(np.arange(self.offset, self.offset + len(self.weights)), self.weights))

    def variance(self):
        m = self.mean()
        if self.exact:
            return sum((k - m) ** 2 * w for k, w in zip(self.support, self.weights))
        k = np.arange(self.offset, self.offset + len(self.weights)) - m
        return float(np.dot(k * k, self.weights))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.n == other.n and self.as_dict() == other.as_dict()

    def to_rows(self) -> list[tuple[int, float, str]]:
        rows = []
        for k, w in zip(self.support, self.weights):
            if w == 0:
                continue
            rows.append((k, float(w), str(w) if self.exact else ""))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["value", "probability", "fraction"])
        for k, p, frac in self.to_rows():
            writer.writerow([k, repr(p), frac])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "exact": self.exact,
                "offset": self.offset,
                "rows": [{"value": k, "probability": p, "fraction": f} for k, p, f in self.to_rows()],
            },
            indent=2,
        )


@dataclass(frozen=True)
class NormalizedPmf:
    """Law of Z_n = (X_n - E X_n) / n as (value, probability) pairs."""

    points: tuple
    n: int

    def mean(self):
        return sum(v * p for v, p in self.points)

    def variance(self):
        m = self.mean()
        return sum((v - m) ** 2 * p for v, p in self.points)


def _quicksort_comparisons(seq: list) -> int:
    # first element as pivot; every other element is compared with it once
    if len(seq) <= 1:
        return 0
    pivot = seq[0]
    left = [v for v in seq[1:] if v < pivot]
    right = [v for v in seq[1:] if v > pivot]
    return len(seq) - 1 + _quicksort_comparisons(left) + _quicksort_comparisons(right)


def brute_force_pmf(n: int) -> Pmf:
    """Exact law of X_n by sorting all n! input orders (n <= 9)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > BRUTE_FORCE_MAX_N:
        raise ResourceLimitError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    counts: dict[int, int] = {}
    for perm in itertools.permutations(range(n)):
        c = _quicksort_comparisons(list(perm))
        counts[c] = counts.get(c, 0) + 1
    total = math.factorial(n)
    lo, hi = min(counts), max(counts)
    return Pmf(lo, tuple(Fraction(counts.get(k, 0), total) for k in range(lo, hi + 1)), n)


# ---------------------------------------------------------------------------
# rational backend: permutation counts with Kronecker-packed convolution

_COUNTS: list[list[int]] = [[1]]  # c_0 = [1] (support starts at 0 for every n)


def _pack(coeffs: list[int], nbytes: int) -> int:
    return int.from_bytes(b"".join(c.to_bytes(nbytes, "little") for c in coeffs), "little")


def _unpack(value: int, nbytes: int, length: int) -> list[int]:
    raw = value.to_bytes(nbytes * length, "little")
    return [int.from_bytes(raw[i * nbytes : (i + 1) * nbytes], "little") for i in range(length)]


def _extend_counts(n: int) -> None:
    while len(_COUNTS) <= n:
        m = len(_COUNTS)  # building c_m
        # every coefficient of the level-m sum is at most m!
        nbytes = (math.factorial(m).bit_length() + 8) // 8 + 1
        packed = [_pack(c, nbytes) for c in _COUNTS]
        acc = 0
        for i in range((m - 1) // 2 + 1):
            j = m - 1 - i
            term = packed[i] * packed[j] * math.comb(m - 1, i)
            acc += term if i == j else 2 * term
        length = len(_COUNTS[m - 1]) + (m - 1)  # sum of supports of c_i, c_j spans this
        conv = _unpack(acc, nbytes, length)
        _COUNTS.append([0] * (m - 1) + conv)
        while len(_COUNTS[m]) > 1 and _COUNTS[m][-1] == 0:
            _COUNTS[m].pop()


def _rational_pmf(n: int) -> Pmf:
    _extend_counts(n)
    counts = _COUNTS[n]
    lo = next(k for k, c in enumerate(counts) if c)
    total = math.factorial(n)
    return Pmf(lo, tuple(Fraction(c, total) for c in counts[lo:]), n)


# ---------------------------------------------------------------------------
# float backend: the recurrence on the Fourier grid

def _min_comparisons(n: int) -> int:
    best = [0]
    for m in range(1, n + 1):
        best.append(m - 1 + min(best[i] + best[m - 1 - i] for i in range(m)))
    return best[n]


def _float_pmf(n: int) -> Pmf:
    top = n * (n - 1) // 2
    lo = _min_comparisons(n)
    size = 1 << max(1, (top + 1).bit_length())
    freq = np.arange(size // 2 + 1)
    base = np.exp(-2j * np.pi * freq / size)  # transform of a unit shift
    table = [np.ones(size // 2 + 1, dtype=complex)]
    for m in range(1, n + 1):
        acc = np.zeros(size // 2 + 1, dtype=complex)
        for i in range((m - 1) // 2 + 1):
            j = m - 1 - i
            term = table[i] * table[j]
            acc += term if i == j else 2.0 * term
        table.append(acc * base ** (m - 1) / m)
    # absolute accuracy is ~1e-16; anything outside the true support is noise
    dens = np.clip(np.fft.irfft(table[n], size)[lo : top + 1], 0.0, None)
    dens /= dens.sum()
    return Pmf(lo, dens, n)


def exact_pmf(n: int, exact: bool | None = None, max_n: int | None = None) -> Pmf:
    """Law of X_n from the distributional recurrence.

    ``exact=None`` picks the rational backend for n <= 60 and floats above.
    ``max_n`` overrides the size guard of the chosen backend.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if exact is None:
        exact = n <= RATIONAL_MAX_N
    limit = max_n if max_n is not None else (RATIONAL_MAX_N if exact else FLOAT_MAX_N)
    if n > limit:
        raise ResourceLimitError(f"n={n} exceeds the {'rational' if exact else 'float'} limit {limit}")
    return _rational_pmf(n) if exact else _float_pmf(n)


def mean_comparisons(n: int) -> Fraction:
    """Closed form E X_n = 2(n + 1) H_n - 4n."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 2 * (n + 1) * harmonic(n) - 4 * n


def normalize(pmf: Pmf) -> NormalizedPmf:
    """Map X_n to Z_n = (X_n - E X_n) / n; exact backends stay exact."""
    n = pmf.n
    if n < 1:
        raise ValueError("normalisation divides by n; n must be >= 1")
    mean = mean_comparisons(n)
    points = []
    for k, w in zip(pmf.support, pmf.weights):
        if w == 0:
            continue
        if pmf.exact:
            points.append(((k - mean) / n, w))
        else:
            points.append(((k - float(mean)) / n, float(w)))
    return NormalizedPmf(tuple(points), n)


def pmf_tail(pmf: NormalizedPmf, x: float, side: str):
    """P(Z_n <= -x) for side 'left', P(Z_n >= x) for side 'right'."""
    if side == "left":
        return sum((p for v, p in pmf.points if v <= -x), start=0)
    if side == "right":
        return sum((p for v, p in pmf.points if v >= x), start=0)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")
