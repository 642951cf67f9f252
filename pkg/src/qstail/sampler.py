"""Monte Carlo for Z by truncated expansion of Z = U Z' + (1 - U) Z'' + g(U).

A sample is a random binary split tree walked depth first by a compiled
kernel.  Each node draws its U from a counter-based hash of
(seed, sample index, path), so sample i is the same whatever batch it is
computed in, and no generator state is shared.

Node kinds:

* free      -- U ~ Uniform(0, 1); the subtree is cut (replaced by its mean 0)
               after ``depth`` levels or once the ancestral fraction drops
               below ``prune``.
* balanced  -- first m generations of the left-tail sampler,
               U ~ Uniform(1/2 - eps, 1/2 + eps).
* spine     -- first m spine nodes of the right-tail sampler,
               U ~ Uniform(0, delta); the spine continues on the 1 - U side.

With ``check=True`` the tracked nodes draw unconditioned U and the kernel
reports whether the conditioning event happened, which is what the
importance weights have to reproduce.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numba as nb
import numpy as np
from scipy import stats

from .dist_core import CONSTANTS, g_split

__all__ = [
    "WeightedSample",
    "TailEstimate",
    "SamplerBudgetError",
    "DEFAULT_PRUNE",
    "DEFAULT_IS_DEPTH",
    "MAX_DEPTH",
    "MAX_GENERATIONS",
    "sample_z",
    "sample_values",
    "conditioned_values",
    "estimate_tail_plain",
    "plain_estimates",
    "balanced_plan",
    "spine_plan",
    "estimate_left_tail_is",
    "estimate_right_tail_is",
    "tune_spine",
    "slope_diagnostic",
    "truncated_variance",
    "estimates_csv",
    "estimates_json",
]

DEFAULT_PRUNE = 1e-3
DEFAULT_IS_DEPTH = 20
MAX_DEPTH = 64
MAX_GENERATIONS = 20  # 2^20 conditioned nodes per left-tail sample
_CHUNK = 1 << 16


class SamplerBudgetError(ValueError):
    """The requested conditioning would exceed the node budget."""


# ---------------------------------------------------------------------------
# compiled kernel

@nb.njit(inline="always", cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always", cache=True)
def _uniform(key):
    return (_mix(key ^ np.uint64(0x2545F4914F6CDD1D)) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(inline="always", cache=True)
def _g(u):
    r = 1.0
    if u > 0.0:
        r += 2.0 * u * math.log(u)
    if u < 1.0:
        r += 2.0 * (1.0 - u) * math.log1p(-u)
    return r


@nb.njit(cache=True)
def _root_key(seed, index):
    return _mix(_mix(np.uint64(seed)) ^ _mix(np.uint64(index) + np.uint64(0x632BE59BD9B4E019)))


@nb.njit(cache=True)
def _tree(root, depth, prune, m_bal, eps, m_spine, delta, two_sided, check, keys, ps, lev, kind):
    keys[0] = root
    ps[0] = 1.0
    if m_bal > 0:
        kind[0] = 1
        lev[0] = 0
    elif m_spine > 0:
        kind[0] = 2
        lev[0] = 0
    else:
        kind[0] = 0
        lev[0] = depth
    top = 1
    val = 0.0
    ok = True
    while top > 0:
        top -= 1
        k = keys[top]
        p = ps[top]
        l = lev[top]
        kd = kind[top]
        if kd == 0 and (l <= 0 or p < prune):
            continue
        v = _uniform(k)
        if kd == 1 and not check:
            u = 0.5 + eps * (2.0 * v - 1.0)
        elif kd == 2 and not check:
            u = delta * v
        else:
            u = v
        val += p * _g(u)
        k0 = _mix(k + np.uint64(0x9E3779B97F4A7C15))
        k1 = _mix(k + np.uint64(0x3C6EF372FE94F82A))
        if kd == 0:
            keys[top], ps[top], lev[top], kind[top] = k0, p * u, l - 1, 0
            top += 1
            keys[top], ps[top], lev[top], kind[top] = k1, p * (1.0 - u), l - 1, 0
            top += 1
        elif kd == 1:
            if check and abs(u - 0.5) > eps:
                ok = False
            nk = 1 if l + 1 < m_bal else 0
            nl = l + 1 if nk == 1 else depth
            keys[top], ps[top], lev[top], kind[top] = k0, p * u, nl, nk
            top += 1
            keys[top], ps[top], lev[top], kind[top] = k1, p * (1.0 - u), nl, nk
            top += 1
        else:
            small, big = u, 1.0 - u
            ks, kb = k0, k1
            if check:
                if two_sided and u > 0.5:
                    small, big = 1.0 - u, u
                    ks, kb = k1, k0
                if small > delta:
                    ok = False
            keys[top], ps[top], lev[top], kind[top] = ks, p * small, depth, 0
            top += 1
            if l + 1 < m_spine:
                keys[top], ps[top], lev[top], kind[top] = kb, p * big, l + 1, 2
            else:
                keys[top], ps[top], lev[top], kind[top] = kb, p * big, depth, 0
            top += 1
    return val, ok


@nb.njit(cache=True)
def _batch(seed, start, count, depth, prune, m_bal, eps, m_spine, delta, two_sided, check):
    size = 2 * (m_bal + m_spine + depth) + 16
    keys = np.empty(size, np.uint64)
    ps = np.empty(size)
    lev = np.empty(size, np.int64)
    kind = np.empty(size, np.int64)
    out = np.empty(count)
    flags = np.empty(count, np.bool_)
    for i in range(count):
        root = _root_key(seed, start + i)
        out[i], flags[i] = _tree(root, depth, prune, m_bal, eps, m_spine, delta, two_sided, check, keys, ps, lev, kind)
    return out, flags


def _run(seed, n, depth, prune, m_bal=0, eps=0.0, m_spine=0, delta=0.0, two_sided=False, check=False, start=0):
    # numba types plain ints as int64; pass the seed's 64-bit pattern
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    if seed >= 1 << 63:
        seed -= 1 << 64
    vals = np.empty(n)
    flags = np.empty(n, dtype=bool)
    for lo in range(0, n, _CHUNK):
        hi = min(n, lo + _CHUNK)
        v, f = _batch(
            seed, start + lo, hi - lo, int(depth), float(prune),
            int(m_bal), float(eps), int(m_spine), float(delta), bool(two_sided), bool(check),
        )
        vals[lo:hi] = v
        flags[lo:hi] = f
    return vals, flags


# ---------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class WeightedSample:
    value: float
    log_weight: float
    depth: int


@dataclass(frozen=True)
class TailEstimate:
    """Estimate of P(Z <= -x) (left) or P(Z >= x) (right).

    ``log_p_hat`` is kept because importance-sampled estimates routinely sit
    far below the smallest double; ``p_hat`` is then 0.0.
    """

    x: float
    side: str
    p_hat: float
    std_err: float
    n_samples: int
    method: str
    params: dict = field(default_factory=dict)
    log_p_hat: float = 0.0
    rel_err: float = 0.0

    @property
    def seed(self):
        return self.params.get("seed")

    def to_row(self) -> dict:
        return {
            "x": self.x,
            "side": self.side,
            "method": self.method,
            "p_hat": self.p_hat,
            "std_err": self.std_err,
            "n": self.n_samples,
            "seed": self.seed,
            "log_p_hat": self.log_p_hat,
            "rel_err": self.rel_err,
            "params": json.dumps(self.params, sort_keys=True),
        }

    def to_dict(self) -> dict:
        return asdict(self)


_CSV_FIELDS = ["x", "side", "method", "p_hat", "std_err", "n", "seed", "log_p_hat", "rel_err", "params"]


def estimates_csv(estimates) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, _CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for e in estimates:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in e.to_row().items()})
    return buf.getvalue()


def estimates_json(estimates) -> str:
    return json.dumps([e.to_dict() for e in estimates], indent=2, sort_keys=True)


def _check_side(side):
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _check_depth(depth, prune):
    if not 0 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must lie in [0, {MAX_DEPTH}], got {depth}")
    if not 0.0 <= prune < 1.0:
        raise ValueError("prune must lie in [0, 1)")


def _hits(values, x, side):
    return int(np.count_nonzero(values <= -x)) if side == "left" else int(np.count_nonzero(values >= x))


# ---------------------------------------------------------------------------
# plain sampling

def sample_values(n: int, depth: int, seed: int = 0, prune: float = DEFAULT_PRUNE, start: int = 0) -> np.ndarray:
    """Samples ``start .. start + n - 1`` of the depth-truncated Z."""
    _check_depth(depth, prune)
    return _run(seed, n, depth, prune, start=start)[0]


def sample_z(depth: int, seed: int = 0, index: int = 0, prune: float = DEFAULT_PRUNE) -> WeightedSample:
    """One truncated draw; ``(seed, index)`` names its random stream."""
    value = float(sample_values(1, depth, seed, prune, start=index)[0])
    return WeightedSample(value=value, log_weight=0.0, depth=depth)


def _binomial(hits, n):
    f = hits / n
    return f, math.sqrt(f * (1.0 - f) / n)


def plain_estimates(values: np.ndarray, xs, side: str, params: dict) -> list[TailEstimate]:
    """Tail estimates at every x from one batch of plain samples."""
    _check_side(side)
    n = len(values)
    out = []
    for x in xs:
        f, se = _binomial(_hits(values, x, side), n)
        out.append(TailEstimate(
            x=float(x), side=side, p_hat=f, std_err=se, n_samples=n, method="plain", params=dict(params),
            log_p_hat=math.log(f) if f > 0 else -math.inf,
            rel_err=math.sqrt((1.0 - f) / (f * n)) if f > 0 else math.inf,
        ))
    return out


def estimate_tail_plain(x: float, side: str, n: int, depth: int = 30, seed: int = 0,
                        prune: float = DEFAULT_PRUNE) -> TailEstimate:
    """Fraction of n truncated samples beyond the threshold, binomial std_err."""
    _check_side(side)
    if n < 1:
        raise ValueError("n must be >= 1")
    values = sample_values(n, depth, seed, prune)
    return plain_estimates(values, [x], side, {"depth": depth, "prune": prune, "seed": seed})[0]


# ---------------------------------------------------------------------------
# importance samplers

def _weighted_estimate(x, side, values, log_w, method, params):
    n = len(values)
    f, se = _binomial(_hits(values, x, side), n)
    log_p = log_w + math.log(f) if f > 0 else -math.inf
    return TailEstimate(
        x=float(x), side=side, p_hat=math.exp(log_p) if f > 0 else 0.0,
        std_err=math.exp(log_w) * se, n_samples=n, method=method, params=params,
        log_p_hat=log_p, rel_err=math.sqrt((1.0 - f) / (f * n)) if f > 0 else math.inf,
    )


def _balanced_a(eps):
    return -float(g_split(0.5 + eps))


def _optimal_eps(x):
    # largest weight (2^m - 1) ln(2 eps) within the budget; the hit rate is
    # close to 1 for these choices, so the weight dominates the estimate
    eps = np.linspace(1e-3, 0.299, 2981)
    a = -g_split(0.5 + eps)
    ok = a > 0
    m = np.full(eps.shape, MAX_GENERATIONS + 1)
    m[ok] = np.maximum(1, np.ceil(x / a[ok] - 1e-12)).astype(int)
    logw = np.where(m <= MAX_GENERATIONS, (np.exp2(np.minimum(m, 64)) - 1.0) * np.log(2.0 * eps), -np.inf)
    k = int(np.argmax(logw))
    if not np.isfinite(logw[k]):
        raise SamplerBudgetError(f"no eps keeps 2^m <= 2^{MAX_GENERATIONS} at x={x}")
    return float(eps[k])


def balanced_plan(x: float, eps=None, generations: int | None = None) -> tuple[float, int, float]:
    """Resolve (eps, m, log weight) for the left-tail sampler.

    eps defaults to x^(-1/2); ``eps="optimize"`` picks the eps with the largest
    weight under the node budget.  m defaults to ceil(x / a) with a = -g(1/2 + eps).
    """
    if x <= 0:
        raise ValueError("left-tail sampler needs x > 0")
    if eps is None:
        eps = x ** -0.5
    elif eps == "optimize":
        eps = _optimal_eps(x)
    eps = float(eps)
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    if generations is None:
        a = _balanced_a(eps)
        if a <= 0:
            raise ValueError(f"a = -g(1/2 + eps) = {a:.4g} <= 0; eps={eps:.4g} is too large")
        generations = max(1, math.ceil(x / a - 1e-12))
    m = int(generations)
    if m < 1:
        raise ValueError("generation count must be >= 1")
    if m > MAX_GENERATIONS:
        raise SamplerBudgetError(
            f"m={m} generations needs 2^{m} nodes per sample (budget 2^{MAX_GENERATIONS}); "
            "use a smaller x or override eps/generations"
        )
    return eps, m, (2.0**m - 1.0) * math.log(2.0 * eps)


def spine_plan(x: float, delta=None, spine: int | None = None, b: float | None = None,
               two_sided: bool = False) -> tuple[float, int, float]:
    """Resolve (delta, m, log weight) for the right-tail sampler.

    delta defaults to 1/(x ln x) and m to ceil(x / b) with b = 1 - 2/ln x.
    The weight is m ln delta, or m ln(2 delta) when a split counts as extreme
    on either side (the spine then follows the larger fragment).
    """
    if delta is None:
        if x <= math.e:
            raise ValueError("default delta = 1/(x ln x) needs x > e")
        delta = 1.0 / (x * math.log(x))
    delta = float(delta)
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    if spine is None:
        if b is None:
            if x <= math.e**2:
                raise ValueError("default b = 1 - 2/ln x needs x > e^2; pass b or spine explicitly")
            b = 1.0 - 2.0 / math.log(x)
        if b <= 0:
            raise ValueError("b must be positive")
        spine = max(1, math.ceil(x / b - 1e-12))
    m = int(spine)
    if m < 1:
        raise ValueError("spine length must be >= 1")
    return delta, m, m * math.log((2.0 if two_sided else 1.0) * delta)


def conditioned_values(kind: str, n: int, seed: int, *, eps=0.0, delta=0.0, m: int,
                       depth: int = DEFAULT_IS_DEPTH, prune: float = DEFAULT_PRUNE,
                       check: bool = False, two_sided: bool = False):
    """Raw (values, event flags) of the balanced or spine tree.

    With ``check=False`` the tracked splits follow the conditioned law and all
    flags are True; with ``check=True`` they are drawn unconditioned and the
    flag records whether the conditioning event occurred.
    """
    _check_depth(depth, prune)
    if kind == "balanced":
        return _run(seed, n, depth, prune, m_bal=m, eps=eps, check=check)
    if kind == "spine":
        return _run(seed, n, depth, prune, m_spine=m, delta=delta, two_sided=two_sided, check=check)
    raise ValueError(f"kind must be 'balanced' or 'spine', got {kind!r}")


def estimate_left_tail_is(x: float, n: int, seed: int = 0, eps=None, generations: int | None = None,
                          depth: int = DEFAULT_IS_DEPTH, prune: float = DEFAULT_PRUNE) -> TailEstimate:
    """P(Z <= -x) restricted to trees whose first m generations split within eps of 1/2.

    ``depth`` counts the free levels below the conditioned generations.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    eps, m, log_w = balanced_plan(x, eps, generations)
    values, _ = conditioned_values("balanced", n, seed, eps=eps, m=m, depth=depth, prune=prune)
    params = {"eps": eps, "generations": m, "depth": depth, "prune": prune, "seed": seed, "log_weight": log_w}
    return _weighted_estimate(x, "left", values, log_w, "balanced_is", params)


def estimate_right_tail_is(x: float, n: int, seed: int = 0, delta=None, spine: int | None = None,
                           b: float | None = None, two_sided: bool = False,
                           depth: int = DEFAULT_IS_DEPTH, prune: float = DEFAULT_PRUNE) -> TailEstimate:
    """P(Z >= x) restricted to trees with an m-node spine of splits below delta.

    Off-spine subtrees are free with ``depth`` levels, as is the spine's end.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    delta, m, log_w = spine_plan(x, delta, spine, b, two_sided)
    values, _ = conditioned_values("spine", n, seed, delta=delta, m=m, depth=depth, prune=prune)
    params = {"delta": delta, "spine": m, "two_sided": two_sided, "depth": depth, "prune": prune,
              "seed": seed, "log_weight": log_w}
    return _weighted_estimate(x, "right", values, log_w, "spine_is", params)


def tune_spine(x: float, n_pilot: int, seed: int, deltas=(0.02, 0.03, 0.04, 0.06, 0.08, 0.1, 0.12),
               spines=None, two_sided: bool = False, min_hits: int = 10, depth: int = DEFAULT_IS_DEPTH,
               pilot_prune: float = 1e-2) -> tuple[float, int]:
    """(delta, m) with the largest pilot estimate among well-resolved candidates.

    Every candidate estimates a valid lower-bound event, so larger is tighter.
    Hits are rare (fractions of 1e-3 and below at x = 10), so a candidate
    only counts once its pilot run has ``min_hits`` hits; otherwise the pick
    rewards luck.  The pilot uses a coarser prune to keep the scan cheap.
    Rerun the chosen pair with a fresh seed to avoid selection bias.
    """
    if spines is None:
        spines = range(max(1, int(0.6 * x)), int(1.6 * x) + 1)
    best = (-math.inf, None, None)
    for d in deltas:
        for m in spines:
            _, _, log_w = spine_plan(x, d, m, two_sided=two_sided)
            values, _ = conditioned_values("spine", n_pilot, seed, delta=d, m=m, depth=depth, prune=pilot_prune)
            hits = _hits(values, x, "right")
            if hits < min_hits:
                continue
            score = log_w + math.log(hits / n_pilot)
            if score > best[0]:
                best = (score, d, m)
    if best[1] is None:
        raise ValueError(f"no pilot configuration reached {min_hits} hits at x={x}; increase n_pilot")
    return best[1], best[2]


# ---------------------------------------------------------------------------
# diagnostics

def slope_diagnostic(estimates, side: str) -> tuple[float, float, float]:
    """OLS of ln(-ln p) on x (left) or -ln p on x ln x (right): (slope, intercept, r^2)."""
    _check_side(side)
    xs, ys = [], []
    dropped = 0
    for e in estimates:
        lp = math.log(e.p_hat) if e.p_hat > 0 else e.log_p_hat
        if not (np.isfinite(lp) and lp < 0.0):
            dropped += 1
            continue
        if side == "left":
            xs.append(e.x)
            ys.append(math.log(-lp))
        else:
            xs.append(e.x * math.log(e.x))
            ys.append(-lp)
    if dropped:
        warnings.warn(f"dropped {dropped} estimates with p_hat in {{0, 1}}", RuntimeWarning, stacklevel=2)
    if len(xs) < 3:
        raise ValueError("slope diagnostic needs at least 3 estimates with 0 < p_hat < 1")
    fit = stats.linregress(xs, ys)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


def truncated_variance(depth: int) -> float:
    """Var of the depth-d truncation: var_z (1 - (2/3)^d)."""
    return CONSTANTS.var_z * (1.0 - (2.0 / 3.0) ** depth)
