"""Moment generating function psi(t) = E exp(tZ) from its integral equation.

psi satisfies

    psi(t) = int_0^1 psi(u t) psi((1 - u) t) exp(t g(u)) du,

and by the u <-> 1-u symmetry the integral is twice the one over [0, 1/2].
Tables store log psi on a uniform symmetric grid.  Off-grid values use a
piecewise quintic whose six-node stencil always reaches back toward t = 0, so
the equation at a node only involves nodes of smaller or equal |t|.  The
solver exploits that ordering: Picard steps on the nine central nodes, then
one outward march that solves a scalar equation per node.  Plain
Picard iteration is nearly neutral for large positive t (the integrand piles
up at u ~ 1/psi'(t)), which is why it is only used as the a-posteriori check.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from .dist_core import CONSTANTS, g_split

__all__ = [
    "SolverConfig",
    "MgfTable",
    "LemmaConstant",
    "ConvergenceError",
    "quadrature_rule",
    "interpolate_log_psi",
    "initial_table",
    "fixed_point_step",
    "solve_mgf",
    "mgf_residual",
    "find_lemma_constant",
]

_PANELS = 16
_PANEL_RATIO = 0.25
_ROW_CHUNK = 128
_STENCIL = 6  # quintic; the cubic loses ~1e-7 relative accuracy at t = 10


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    t_max: float = 10.0
    grid_points: int = 2001
    quad_nodes: int = 256
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.grid_points < 11 or self.grid_points % 2 == 0:
            raise ValueError("grid_points must be odd and at least 11 so that 0 is a node")
        if self.quad_nodes < _PANELS:
            raise ValueError(f"quad_nodes must be >= {_PANELS}")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")

    @property
    def step(self) -> float:
        return self.t_max / (self.grid_points // 2)

    def grid(self) -> np.ndarray:
        c = self.grid_points // 2
        return self.step * (np.arange(self.grid_points) - c)


@dataclass(frozen=True, eq=False)
class MgfTable:
    t_grid: np.ndarray
    log_psi: np.ndarray
    iteration_count: int
    residual: float
    config: SolverConfig

    def log_psi_at(self, t):
        """log psi at arbitrary points inside [-t_max, t_max]."""
        return interpolate_log_psi(self.config, self.log_psi, t)

    def psi_derivatives(self, h: float = 1e-3) -> tuple[float, float]:
        """Central differences of psi at 0: (psi'(0), psi''(0)) = (E Z, E Z^2).

        The step must be small: the O(h^2) term of the first difference is
        E Z^3 h^2 / 6 ~ 0.04 h^2.
        """
        lo, mid, hi = np.exp(self.log_psi_at(np.array([-h, 0.0, h])))
        return (hi - lo) / (2 * h), (hi - 2 * mid + lo) / h**2

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "log_psi"])
        for t, v in zip(self.t_grid, self.log_psi):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "iteration_count": self.iteration_count,
            "residual": self.residual,
            "t": [float(t) for t in self.t_grid],
            "log_psi": [float(v) for v in self.log_psi],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MgfTable":
        config = SolverConfig(**data["config"])
        return cls(
            np.asarray(data["t"], float),
            np.asarray(data["log_psi"], float),
            int(data["iteration_count"]),
            float(data["residual"]),
            config,
        )


@dataclass(frozen=True)
class LemmaConstant:
    side: str
    a: float
    t_range: tuple[float, float]
    slack_min: float
    t_argmax: float


def quadrature_rule(quad_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [0, 1/2].

    Panels shrink geometrically toward u = 0, where g has its u ln u
    singularity and where the integrand concentrates for large positive t.
    """
    per = max(1, quad_nodes // _PANELS)
    x, w = np.polynomial.legendre.leggauss(per)
    edges = [0.0] + [0.5 * _PANEL_RATIO**k for k in range(_PANELS - 1, -1, -1)]
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(a + (b - a) * (x + 1) / 2)
        weights.append((b - a) / 2 * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _stencil(config: SolverConfig, s):
    """Indices and Lagrange weights of the six nodes used at points ``s``."""
    s = np.asarray(s, dtype=float)
    h = config.step
    c = config.grid_points // 2
    k = np.maximum(1, np.ceil(np.abs(s) / h - 1e-9)).astype(np.int64)
    if np.any(k > c):
        raise ValueError("interpolation point outside the table grid")
    last = _STENCIL - 1
    reach = _STENCIL // 2 - 1
    # positive side: interval (t_{k-1}, t_k] uses nodes k-5..k, never left of -2
    lo_pos = np.maximum(c + k - last, c - reach)
    # negative side mirrored
    lo_neg = np.minimum(c - k + last, c + reach) - last
    lo = np.where(s >= 0, lo_pos, lo_neg)
    x = s / h - (lo - c)
    weights = []
    for i in range(_STENCIL):
        w = np.ones_like(x)
        for m in range(_STENCIL):
            if m != i:
                w = w * (x - m) / (i - m)
        weights.append(w)
    return lo[..., None] + np.arange(_STENCIL), np.stack(weights, axis=-1)


def interpolate_log_psi(config: SolverConfig, log_psi: np.ndarray, s):
    idx, w = _stencil(config, s)
    out = (log_psi[idx] * w).sum(-1)
    return float(out) if out.ndim == 0 else out


class _Operator:
    """The discretised right-hand side, evaluated row by row."""

    def __init__(self, config: SolverConfig):
        self.config = config
        self.t = config.grid()
        self.u, w = quadrature_rule(config.quad_nodes)
        self.log_w = np.log(2.0 * w)
        self.g = g_split(self.u)

    def rows(self, log_psi: np.ndarray, rows: np.ndarray) -> np.ndarray:
        t = self.t[rows]
        a = interpolate_log_psi(self.config, log_psi, np.outer(t, self.u))
        b = interpolate_log_psi(self.config, log_psi, np.outer(t, 1.0 - self.u))
        out = logsumexp(a + b + np.outer(t, self.g) + self.log_w, axis=1)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite value in the functional-equation integral")
        return out

    def __call__(self, log_psi: np.ndarray) -> np.ndarray:
        n = len(log_psi)
        out = np.empty(n)
        for start in range(0, n, _ROW_CHUNK):
            rows = np.arange(start, min(n, start + _ROW_CHUNK))
            out[rows] = self.rows(log_psi, rows)
        return out


def initial_table(config: SolverConfig) -> MgfTable:
    """Gaussian start exp(var_z t^2 / 2): right mean and variance, nothing more."""
    t = config.grid()
    return MgfTable(t, CONSTANTS.var_z * t**2 / 2, 0, math.inf, config)


def fixed_point_step(table: MgfTable, config: SolverConfig | None = None) -> MgfTable:
    """One Picard step of the integral equation applied to every grid node."""
    config = config or table.config
    if table.config != config:
        raise ValueError("table grid does not match the solver config")
    if not np.all(np.isfinite(table.log_psi)):
        raise FloatingPointError("table contains non-finite values")
    new = _Operator(config)(table.log_psi)
    change = float(np.max(np.abs(new - table.log_psi)))
    return MgfTable(table.t_grid, new, table.iteration_count + 1, change, config)


def mgf_residual(table: MgfTable, config: SolverConfig | None = None) -> float:
    """sup over the grid of |log psi - log(integral on the right-hand side)|."""
    return fixed_point_step(table, config).residual


def _pin_slope(config: SolverConfig, v: np.ndarray, idx: np.ndarray) -> None:
    # the equation is invariant under log psi -> log psi + c t (a shift of Z);
    # E Z = 0 picks the member with zero slope at the origin
    c = config.grid_points // 2
    slope = (8 * (v[c + 1] - v[c - 1]) - (v[c + 2] - v[c - 2])) / (12 * config.step)
    v[idx] -= slope * config.grid()[idx]


def _solve_node(op: _Operator, v: np.ndarray, j: int, guess: float) -> float:
    config = op.config
    t = op.t[j]
    q = np.concatenate([op.u * t, (1.0 - op.u) * t])
    idx, w = _stencil(config, q)
    own = idx == j
    fixed = (np.where(own, 0.0, v[idx]) * w).sum(-1)
    coef = (w * own).sum(-1)
    nq = len(op.u)
    base = fixed[:nq] + fixed[nq:] + t * op.g + op.log_w
    slope = coef[:nq] + coef[nq:]
    x = guess
    for _ in range(200):
        z = base + x * slope
        lse = logsumexp(z)
        phi = lse - x
        dphi = float(np.exp(z - lse) @ slope) - 1.0
        step = -phi / dphi if dphi < -1e-12 else phi
        x += step
        if not math.isfinite(x):
            raise FloatingPointError(f"divergence while solving the node at t={t}")
        if abs(step) <= 4e-16 * max(1.0, abs(x)):
            break
    return x


def _sweep(op: _Operator, v: np.ndarray, tol: float) -> np.ndarray:
    config = op.config
    c = config.grid_points // 2
    v = v.copy()
    r = _STENCIL - 2  # nodes |j| <= r only see each other
    inner = np.arange(c - r, c + r + 1)
    for _ in range(5000):
        new = op.rows(v, inner)
        change = np.max(np.abs(new - v[inner]))
        v[inner] = new
        _pin_slope(config, v, inner)
        v[c] = 0.0
        if change < 0.1 * tol:
            break
    for k in range(r + 1, c + 1):
        v[c + k] = _solve_node(op, v, c + k, v[c + k - 1])
        v[c - k] = _solve_node(op, v, c - k, v[c - k + 1])
    return v


def solve_mgf(config: SolverConfig | None = None) -> MgfTable:
    """Solve the integral equation for log psi on the configured grid.

    Each sweep is a Gauss-Seidel pass ordered by |t|; convergence is judged by
    the sup-norm change of a full Picard step, i.e. by ``mgf_residual``.
    """
    config = config or SolverConfig()
    op = _Operator(config)
    table = initial_table(config)
    v = table.log_psi
    residual = math.inf
    for it in range(1, config.max_iter + 1):
        v = _sweep(op, v, config.tol)
        residual = float(np.max(np.abs(op(v) - v)))
        if residual < config.tol:
            return MgfTable(table.t_grid, v, it, residual, config)
    raise ConvergenceError(
        f"no convergence after {config.max_iter} sweeps (residual {residual:.3e})", residual
    )


def find_lemma_constant(side: str, table: MgfTable) -> LemmaConstant:
    """Smallest a >= 0 making the lemma inequality hold at every positive grid t.

    left:  log psi(-t) <= kappa t ln t + a t + 1
    right: log psi(t)  <= e^t + a t
    """
    t = table.t_grid[table.t_grid > 0]
    if len(t) == 0:
        raise ValueError("table has no positive grid points")
    c = table.config.grid_points // 2
    if side == "left":
        lp = table.log_psi[c - 1 :: -1][: len(t)]
        excess = (lp - CONSTANTS.kappa * t * np.log(t) - 1.0) / t
    elif side == "right":
        lp = table.log_psi[c + 1 :]
        excess = (lp - np.exp(t)) / t
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    k = int(np.argmax(excess))
    a = max(0.0, float(excess[k]))
    slack = float(np.min(t * (a - excess)))
    return LemmaConstant(side, a, (float(t[0]), float(t[-1])), slack, float(t[k]))

