"""Time grids, multi-index maps, coboundaries and weighted Hölder norms.

Two-index maps are functions ``a(t, s)`` of ordered time pairs ``s <= t``;
three-index maps take ``(t, u, s)`` with ``s <= u <= t``.  A map either
carries a rule valid at arbitrary times inside ``[0, T]`` (``continuous``)
or is only known at grid nodes (table-backed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EstimationError, GridError

NODE_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing nodes ``0 = t_0 < ... < t_M = T``."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1)
        if nodes.size < 2:
            raise GridError("a time grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise GridError(f"time grid must start at 0, got {nodes[0]!r}")
        if not np.all(np.diff(nodes) > 0):
            raise GridError("time grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def M(self) -> int:
        """Number of intervals."""
        return self.nodes.size - 1

    def __len__(self):
        return self.nodes.size

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.nodes)
        return bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))

    @property
    def spacing(self) -> float:
        return float(np.max(np.diff(self.nodes)))

    def index_of(self, t) -> np.ndarray:
        """Node indices of ``t`` (scalar or array); raise if any is off-grid."""
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.nodes, t), 1, self.M)
        left = self.nodes[idx - 1]
        right = self.nodes[idx]
        idx = np.where(np.abs(t - left) <= np.abs(right - t), idx - 1, idx)
        tol = NODE_ATOL * max(1.0, self.T)
        if np.any(np.abs(self.nodes[idx] - t) > tol):
            bad = t[np.abs(self.nodes[idx] - t) > tol] if t.ndim else t
            raise GridError(f"time(s) not on grid: {np.atleast_1d(bad)[:5]}")
        return idx

    def contains(self, other: "TimeGrid") -> bool:
        """True if every node of ``other`` is a node of this grid."""
        try:
            self.index_of(other.nodes)
        except GridError:
            return False
        return True


def make_uniform_grid(T: float, M: int) -> TimeGrid:
    """``M + 1`` equispaced nodes on ``[0, T]``."""
    if not T > 0:
        raise GridError(f"horizon must be positive, got {T!r}")
    if int(M) != M or M < 1:
        raise GridError(f"interval count must be a positive integer, got {M!r}")
    nodes = np.linspace(0.0, T, int(M) + 1)
    nodes[-1] = T
    return TimeGrid(nodes)


def _norm_rows(values: np.ndarray) -> np.ndarray:
    """Absolute value / Frobenius norm over all trailing axes."""
    values = np.asarray(values)
    if values.ndim <= 1:
        return np.abs(values)
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=tuple(range(1, values.ndim))))


@dataclass(frozen=True, eq=False)
class Path:
    """Values of a path at the nodes of ``grid``.

    ``func`` optionally evaluates the path at arbitrary times; without it
    only node times can be queried.
    """

    grid: TimeGrid
    values: np.ndarray
    func: Callable | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape[0] != len(self.grid):
            raise GridError(
                f"path has {values.shape[0]} values for {len(self.grid)} nodes"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TimeGrid, func: Callable) -> "Path":
        return cls(grid, np.asarray(func(grid.nodes)), func)

    @property
    def shape(self) -> tuple:
        return self.values.shape[1:]

    @property
    def continuous(self) -> bool:
        return self.func is not None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(t))
        return self.values[self.grid.index_of(t)]


class TwoIndexMap:
    """A map ``(t, s) -> E`` on ordered pairs.

    ``rule(t, s)`` receives 1-d float arrays of equal length and returns an
    array of shape ``(len(t),) + shape``.  Table-backed maps are created with
    :meth:`from_table` and only accept node times.
    """

    def __init__(self, grid: TimeGrid, rule: Callable, shape: tuple = (),
                 increment: bool = False, continuous: bool = True,
                 table: np.ndarray | None = None):
        self.grid = grid
        self.rule = rule
        self.shape = tuple(shape)
        self.increment = increment
        self.continuous = continuous
        self._table = table

    @classmethod
    def from_table(cls, grid: TimeGrid, table: np.ndarray,
                   increment: bool = False) -> "TwoIndexMap":
        """Wrap a dense ``(M+1, M+1, *E)`` table indexed ``[t_idx, s_idx]``."""
        table = np.asarray(table)
        n = len(grid)
        if table.shape[:2] != (n, n):
            raise GridError(f"table shape {table.shape[:2]} does not match grid ({n}, {n})")

        def rule(t, s):
            return table[grid.index_of(t), grid.index_of(s)]

        return cls(grid, rule, table.shape[2:], increment, False, table)

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        scalar = t.ndim == 0 and s.ndim == 0
        t, s = np.broadcast_arrays(np.atleast_1d(t), np.atleast_1d(s))
        out = np.asarray(self.rule(t.ravel(), s.ravel()))
        out = out.reshape(t.shape + self.shape)
        return out[0] if scalar else out

    def at(self, i, j) -> np.ndarray:
        """Evaluate at node indices ``(t_idx, s_idx)``."""
        i = np.asarray(i)
        j = np.asarray(j)
        if self._table is not None:
            return self._table[i, j]
        nodes = self.grid.nodes
        return self(nodes[i], nodes[j])

    def table(self) -> np.ndarray:
        """Dense table over node pairs; entries with ``t < s`` are zero."""
        if self._table is not None:
            return self._table
        n = len(self.grid)
        out = np.zeros((n, n) + self.shape)
        i, j = np.tril_indices(n)
        out[i, j] = self.at(i, j)
        return out

    def _combine(self, other, op) -> "TwoIndexMap":
        if isinstance(other, TwoIndexMap):
            def rule(t, s):
                return op(self.rule(t, s), other.rule(t, s))
            cont = self.continuous and other.continuous
        else:
            def rule(t, s):
                return op(self.rule(t, s), other)
            cont = self.continuous
        return TwoIndexMap(self.grid, rule, self.shape, False, cont)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        return self._combine(c, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


class ThreeIndexMap:
    """A map ``(t, u, s) -> E`` on ordered triples."""

    def __init__(self, grid: TimeGrid, rule: Callable, shape: tuple = ()):
        self.grid = grid
        self.rule = rule
        self.shape = tuple(shape)

    def __call__(self, t, u, s):
        t, u, s = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (t, u, s))
        t, u, s = np.broadcast_arrays(t, u, s)
        out = np.asarray(self.rule(t.ravel(), u.ravel(), s.ravel()))
        return out.reshape(t.shape + self.shape)

    def at(self, i, k, j) -> np.ndarray:
        nodes = self.grid.nodes
        return self(nodes[np.asarray(i)], nodes[np.asarray(k)], nodes[np.asarray(j)])


def delta1(f: Path) -> TwoIndexMap:
    """Increments ``(δf)_{ts} = f_t - f_s``."""
    if f.continuous:
        def rule(t, s):
            return f(t) - f(s)
        return TwoIndexMap(f.grid, rule, f.shape, increment=True)
    vals = f.values
    table = vals[:, None] - vals[None, :]
    return TwoIndexMap.from_table(f.grid, table, increment=True)


def delta2(a: TwoIndexMap) -> ThreeIndexMap:
    """Coboundary ``δa_{tus} = a_{ts} - a_{tu} - a_{us}``."""
    def rule(t, u, s):
        return a.rule(t, s) - a.rule(t, u) - a.rule(u, s)
    return ThreeIndexMap(a.grid, rule, a.shape)


@dataclass(frozen=True)
class WeightedNormParams:
    """Tunable ``lam`` and exponent ``gamma`` for the ``e^{-t/lam}`` weighted norms."""

    lam: float
    gamma: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if not 0 < self.gamma <= 3:
            raise ValueError(f"gamma must lie in (0, 3], got {self.gamma!r}")


def weighted_path_norm(f: Path, p: WeightedNormParams) -> float:
    """``sup_t e^{-t/λ} |f_t|`` over grid nodes."""
    t = f.grid.nodes
    return float(np.max(np.exp(-t / p.lam) * _norm_rows(f.values)))


def _pair_lags(grid: TimeGrid, max_len: float):
    """Yield ``(i, j)`` index arrays grouped by lag, restricted to ``t - s <= max_len``."""
    nodes = grid.nodes
    tol = NODE_ATOL * max(1.0, grid.T)
    for lag in range(1, len(grid)):
        i = np.arange(lag, len(grid))
        j = i - lag
        keep = nodes[i] - nodes[j] <= max_len + tol
        if not np.any(keep):
            if grid.is_uniform:
                break
            continue
        yield i[keep], j[keep]


def weighted_holder_norm2(a: TwoIndexMap, p: WeightedNormParams) -> float:
    """``sup e^{-t/λ} |a_{ts}| / |t-s|^γ`` over grid pairs with ``t - s <= λ``."""
    nodes = a.grid.nodes
    best = 0.0
    for i, j in _pair_lags(a.grid, p.lam):
        t, s = nodes[i], nodes[j]
        vals = _norm_rows(a.at(i, j))
        best = max(best, float(np.max(np.exp(-t / p.lam) * vals / (t - s) ** p.gamma)))
    return best


def _triples(grid: TimeGrid, max_len: float):
    """Yield ``(i, k, j)`` index arrays with ``j < k < i`` and ``t - s <= max_len``."""
    for i, j in _pair_lags(grid, max_len):
        lag = i[0] - j[0]
        if lag < 2:
            continue
        mid = np.arange(1, lag)
        yield np.repeat(i, mid.size), np.repeat(j, mid.size) + np.tile(mid, i.size), np.repeat(j, mid.size)


def weighted_holder_norm3(b: ThreeIndexMap, p: WeightedNormParams) -> float:
    """``sup e^{-t/λ} |b_{tus}| / |t-s|^γ`` over grid triples with ``t - s <= λ``."""
    nodes = b.grid.nodes
    best = 0.0
    for i, k, j in _triples(b.grid, p.lam):
        t, s = nodes[i], nodes[j]
        vals = _norm_rows(b.at(i, k, j))
        best = max(best, float(np.max(np.exp(-t / p.lam) * vals / (t - s) ** p.gamma)))
    return best


@dataclass
class HolderReport:
    """Least-squares fit of ``log S(h)`` against ``log h`` over dyadic scales."""

    slope: float
    intercept: float
    scales_used: list
    per_scale_sup: list
    scales: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "slope": float(self.slope),
            "intercept": float(self.intercept),
            "scales": [int(m) for m in self.scales],
            "scales_used": [int(m) for m in self.scales_used],
            "per_scale_sup": [float(v) for v in self.per_scale_sup],
        }


def dyadic_scale_sups(a: TwoIndexMap, m_min: int, m_max: int) -> np.ndarray:
    """``S(h_m) = max{|a_{ts}| : t - s in [h_m, 2 h_m)}`` with ``h_m = T 2^{-m}``."""
    grid = a.grid
    if not grid.is_uniform:
        raise GridError("exponent estimation needs a uniform grid")
    dt = grid.T / grid.M
    sups = np.zeros(m_max - m_min + 1)
    for idx, m in enumerate(range(m_min, m_max + 1)):
        h = grid.T * 2.0 ** (-m)
        lo = int(np.ceil(h / dt - 1e-9))
        hi = int(np.ceil(2 * h / dt - 1e-9))  # lag < 2h
        best = 0.0
        for lag in range(max(lo, 1), min(hi, grid.M + 1)):
            i = np.arange(lag, grid.M + 1)
            vals = _norm_rows(a.at(i, i - lag))
            best = max(best, float(np.max(vals)))
        sups[idx] = best
    return sups


def fit_holder_exponent(scales, sups, T: float, floor: float = 1e-13) -> HolderReport:
    """Fit the log-log slope over the entries of ``sups`` above ``floor``."""
    scales = np.asarray(scales, dtype=int)
    sups = np.asarray(sups, dtype=float)
    keep = sups > floor
    if np.count_nonzero(keep) < 2:
        raise EstimationError(
            f"only {int(np.count_nonzero(keep))} scale(s) above floor {floor:g}"
        )
    h = T * 2.0 ** (-scales[keep].astype(float))
    slope, intercept = np.polyfit(np.log(h), np.log(sups[keep]), 1)
    return HolderReport(
        float(slope), float(intercept), scales[keep].tolist(), sups.tolist(), scales.tolist()
    )


def estimate_holder_exponent(a: TwoIndexMap, m_min: int, m_max: int,
                             floor: float = 1e-13) -> HolderReport:
    """Empirical Hölder exponent of a two-index map from dyadic scale maxima."""
    if not m_min < m_max:
        raise ValueError(f"need m_min < m_max, got {m_min}, {m_max}")
    sups = dyadic_scale_sups(a, m_min, m_max)
    return fit_holder_exponent(range(m_min, m_max + 1), sups, a.grid.T, floor)
