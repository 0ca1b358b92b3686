"""Level-2 rough paths over piecewise-linear base paths.

Index convention for the second level::

    XX[j, k]_{ts} = ∫_s^t (x^k_r - x^k_s) dx^j_r

so that Chen's relation reads ``δXX_{tus} = X_{tu} ⊗ X_{us}`` with
``(a ⊗ b)[j, k] = a^j b^k``.  For ``x_t = (t, t^2)`` on ``[0, 1]`` this gives
``XX[0, 1] = 1/3`` and ``XX[1, 0] = ∫ x^1 dx^2 = 2/3``.

Brownian samples use numpy's PCG64 bit generator; Gaussians come from the
Box-Muller transform of its uniform doubles, so a seed fixes every bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import GridError
from .grids import Path, TimeGrid, TwoIndexMap, make_uniform_grid

DENSE_MAX_M = 512
EXHAUSTIVE_MAX_M = 64
RANDOM_TRIPLES = 10_000
CHECK_SEED = 20240607


@dataclass(frozen=True, eq=False)
class BasePath:
    """An ℝ^ℓ-valued path, linearly interpolated between grid nodes."""

    dimension: int
    samples: Path
    seed: int | None = None

    def __post_init__(self):
        vals = np.asarray(self.samples.values, dtype=float)
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        if vals.ndim != 2 or vals.shape[1] != self.dimension:
            raise ValueError(f"samples shape {vals.shape} does not match dimension {self.dimension}")

    @classmethod
    def from_arrays(cls, nodes, values) -> "BasePath":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        return cls(values.shape[1], Path(TimeGrid(nodes), values))

    @classmethod
    def from_function(cls, grid: TimeGrid, func) -> "BasePath":
        """Sample ``func(t) -> (len(t), ℓ)`` at the grid nodes."""
        vals = np.asarray(func(grid.nodes), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        return cls(vals.shape[1], Path(grid, vals))

    @property
    def grid(self) -> TimeGrid:
        return self.samples.grid

    @property
    def values(self) -> np.ndarray:
        return self.samples.values

    def __call__(self, t) -> np.ndarray:
        """Piecewise-linear interpolation at arbitrary times."""
        t = np.asarray(t, dtype=float)
        nodes = self.grid.nodes
        out = np.stack([np.interp(t, nodes, self.values[:, i]) for i in range(self.dimension)], axis=-1)
        return out

    def subsample(self, step: int) -> "BasePath":
        """Keep every ``step``-th node (the grid size must be divisible)."""
        if self.grid.M % step:
            raise GridError(f"{self.grid.M} intervals not divisible by {step}")
        return BasePath(
            self.dimension,
            Path(TimeGrid(self.grid.nodes[::step]), self.values[::step]),
            self.seed,
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(self.dimension)])
            for t, row in zip(self.grid.nodes, self.values):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "BasePath":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if not header or header[0] != "t":
            raise ValueError("base path CSV must start with a 't' column")
        data = np.array([[float(v) for v in r] for r in body if r])
        return cls.from_arrays(data[:, 0], data[:, 1:])


class Level2RoughPath:
    """Increments ``X`` and iterated integrals ``XX`` on a time grid."""

    def __init__(self, grid: TimeGrid, X: TwoIndexMap, XX: TwoIndexMap,
                 gamma_nominal: float = 0.4, geometric: bool = True,
                 base: BasePath | None = None):
        if not 1 / 3 < gamma_nominal <= 1:
            raise ValueError(f"gamma_nominal must lie in (1/3, 1], got {gamma_nominal!r}")
        self.grid = grid
        self.X = X
        self.XX = XX
        self.gamma_nominal = gamma_nominal
        self.geometric = geometric
        self.base = base

    @property
    def dimension(self) -> int:
        return self.X.shape[0]

    def with_XX(self, XX: TwoIndexMap, geometric: bool = False) -> "Level2RoughPath":
        """Same first level, replaced second level."""
        return Level2RoughPath(self.grid, self.X, XX, self.gamma_nominal, geometric, self.base)


def _segment_data(base: BasePath):
    """Per-segment slopes and the prefix ``P(t_k) = ∫_0^{t_k} dy ⊗ y`` with ``y = x - x_0``."""
    nodes = base.grid.nodes
    y = base.values - base.values[0]
    h = np.diff(nodes)
    dy = np.diff(y, axis=0)
    slope = dy / h[:, None]
    # ∫ over segment k of y^k dy^j = dy^j y_k^k + dy^j dy^k / 2
    seg = dy[:, :, None] * y[:-1, None, :] + 0.5 * dy[:, :, None] * dy[:, None, :]
    prefix = np.concatenate([np.zeros((1,) + seg.shape[1:]), np.cumsum(seg, axis=0)])
    return nodes, y, slope, prefix


def lift_piecewise_linear(p: BasePath, gamma_nominal: float = 0.4) -> Level2RoughPath:
    """Exact level-2 lift of a piecewise-linear path."""
    nodes, y, slope, prefix = _segment_data(p)
    M = p.grid.M
    ell = p.dimension

    def locate(t):
        k = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, M - 1)
        return k, t - nodes[k]

    def y_at(t):
        k, r = locate(t)
        return y[k] + r[:, None] * slope[k]

    def P_at(t):
        k, r = locate(t)
        d = slope[k]
        yk = y[k]
        return (prefix[k] + r[:, None, None] * d[:, :, None] * yk[:, None, :]
                + 0.5 * (r ** 2)[:, None, None] * d[:, :, None] * d[:, None, :])

    def x_rule(t, s):
        return y_at(t) - y_at(s)

    def xx_rule(t, s):
        ys = y_at(s)
        inc = y_at(t) - ys
        return P_at(t) - P_at(s) - inc[:, :, None] * ys[:, None, :]

    x_table = xx_table = None
    if M <= DENSE_MAX_M:
        x_table = y[:, None, :] - y[None, :, :]
        xx_table = (prefix[:, None] - prefix[None, :]
                    - x_table[:, :, :, None] * y[None, :, None, :])
        i, j = np.triu_indices(M + 1, 1)
        x_table[i, j] = 0.0
        xx_table[i, j] = 0.0
    X = TwoIndexMap(p.grid, x_rule, (ell,), True, True, x_table)
    XX = TwoIndexMap(p.grid, xx_rule, (ell, ell), True, True, xx_table)
    return Level2RoughPath(p.grid, X, XX, gamma_nominal, True, p)


def _check_triples(M: int):
    """Index triples ``(i, k, j)`` with ``j <= k <= i``: all for small grids, else a fixed random sample."""
    if M <= EXHAUSTIVE_MAX_M:
        n = M + 1
        i, k, j = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        keep = (j <= k) & (k <= i)
        return i[keep], k[keep], j[keep]
    rng = np.random.default_rng(CHECK_SEED)
    tri = np.sort(rng.integers(0, M + 1, size=(RANDOM_TRIPLES, 3)), axis=1)
    return tri[:, 2], tri[:, 1], tri[:, 0]


def _check_pairs(M: int):
    if M <= DENSE_MAX_M:
        return np.tril_indices(M + 1)
    rng = np.random.default_rng(CHECK_SEED)
    pr = np.sort(rng.integers(0, M + 1, size=(RANDOM_TRIPLES, 2)), axis=1)
    return pr[:, 1], pr[:, 0]


def _fro(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(a ** 2, axis=tuple(range(1, a.ndim))))


def chen_defect(rp: Level2RoughPath) -> float:
    """``max ‖δXX_{tus} - X_{tu} ⊗ X_{us}‖`` over grid triples."""
    i, k, j = _check_triples(rp.grid.M)
    XX, X = rp.XX, rp.X
    out = 0.0
    for sl in np.array_split(np.arange(i.size), max(1, i.size // 20000)):
        a, b, c = i[sl], k[sl], j[sl]
        d = XX.at(a, c) - XX.at(a, b) - XX.at(b, c)
        d -= X.at(a, b)[:, :, None] * X.at(b, c)[:, None, :]
        out = max(out, float(np.max(_fro(d))))
    return out


def geometricity_defect(rp: Level2RoughPath) -> float:
    """``max ‖Sym XX_{ts} - ½ X_{ts} ⊗ X_{ts}‖`` over grid pairs."""
    i, j = _check_pairs(rp.grid.M)
    xx = rp.XX.at(i, j)
    x = rp.X.at(i, j)
    sym = 0.5 * (xx + np.swapaxes(xx, 1, 2))
    d = sym - 0.5 * x[:, :, None] * x[:, None, :]
    return float(np.max(_fro(d)))


def standard_normals(seed: int, size) -> np.ndarray:
    """Box-Muller normals from PCG64 uniforms."""
    gen = np.random.Generator(np.random.PCG64(seed))
    n = int(np.prod(size))
    half = (n + 1) // 2
    u1 = gen.random(half)
    u2 = gen.random(half)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:n].reshape(size)


def sample_brownian_pl(seed: int, T: float, M: int, ell: int) -> BasePath:
    """Seeded ``ℓ``-dimensional Brownian path sampled on ``M`` equal steps, started at 0."""
    grid = make_uniform_grid(T, M)
    inc = standard_normals(seed, (M, ell)) * np.sqrt(T / M)
    vals = np.concatenate([np.zeros((1, ell)), np.cumsum(inc, axis=0)])
    return BasePath(ell, Path(grid, vals), seed)


def reverse(rp: Level2RoughPath, t: float) -> Level2RoughPath:
    """Lift of ``r ↦ x_{t-r}`` on ``[0, t]``, built by re-lifting reversed samples."""
    if rp.base is None:
        raise ValueError("reverse needs a rough path that carries its base path")
    k = int(rp.grid.index_of(t))
    if k == 0:
        raise GridError("cannot reverse over an empty interval")
    nodes = rp.grid.nodes[: k + 1]
    tk = nodes[-1]
    rnodes = (tk - nodes[::-1])
    rnodes[0] = 0.0
    rvals = rp.base.values[: k + 1][::-1]
    base = BasePath(rp.base.dimension, Path(TimeGrid(rnodes), rvals.copy()), rp.base.seed)
    return lift_piecewise_linear(base, rp.gamma_nominal)
