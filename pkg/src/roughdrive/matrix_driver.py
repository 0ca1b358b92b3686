"""Bounded rough drivers in the matrix algebra and integrators for ``df = A(dt) f``.

All integrators act on vectors (``f0`` of shape ``(N,)``) or matrices
(``(N, N)``), with the driver acting from the left.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundViolation, GridError
from .grids import Path, TimeGrid, TwoIndexMap, WeightedNormParams, weighted_path_norm
from .roughpath import Level2RoughPath, _check_triples

POWER_ITERS = 20
NORM_MAX_M = 256


def operator_norm(mats: np.ndarray, iters: int = POWER_ITERS) -> np.ndarray:
    """Operator 2-norms of a stack ``(P, N, N)`` by batched power iteration."""
    mats = np.asarray(mats, dtype=float)
    P, N = mats.shape[0], mats.shape[-1]
    gram = np.swapaxes(mats, 1, 2) @ mats
    v = np.broadcast_to(np.random.default_rng(0).standard_normal(N), (P, N)).copy()
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(iters):
        w = np.einsum("pij,pj->pi", gram, v)
        nrm = np.linalg.norm(w, axis=1, keepdims=True)
        v = np.where(nrm > 0, w / np.where(nrm > 0, nrm, 1.0), v)
    return np.linalg.norm(np.einsum("pij,pj->pi", mats, v), axis=1)


def _norm_pairs(grid: TimeGrid):
    """Pairs with ``t - s <= 1``: all pairs on small grids, else a strided subgrid plus every step."""
    nodes = grid.nodes
    M = grid.M
    stride = max(1, int(np.ceil(M / NORM_MAX_M)))
    sub = np.arange(0, M + 1, stride)
    if sub[-1] != M:
        sub = np.append(sub, M)
    i, j = np.tril_indices(sub.size, -1)
    i, j = sub[i], sub[j]
    if stride > 1:
        k = np.arange(M)
        i, j = np.concatenate([i, k + 1]), np.concatenate([j, k])
    keep = nodes[i] - nodes[j] <= 1.0 + 1e-12
    return i[keep], j[keep]


class BoundedDriver:
    """Matrix-valued pair ``(A1, A2)`` on a time grid."""

    def __init__(self, grid: TimeGrid, A1: TwoIndexMap, A2: TwoIndexMap,
                 gamma: float, normA: float | None = None):
        if A1.shape != A2.shape or len(A1.shape) != 2 or A1.shape[0] != A1.shape[1]:
            raise ValueError(f"driver levels must be square matrices, got {A1.shape}, {A2.shape}")
        self.grid = grid
        self.A1 = A1
        self.A2 = A2
        self.gamma = gamma
        self.N = A1.shape[0]
        self._normA = normA

    @property
    def normA(self) -> float:
        if self._normA is None:
            i, j = _norm_pairs(self.grid)
            h = self.grid.nodes[i] - self.grid.nodes[j]
            out = 0.0
            for sl in np.array_split(np.arange(i.size), max(1, i.size // 20000)):
                n1 = operator_norm(self.A1.at(i[sl], j[sl])) / h[sl] ** self.gamma
                n2 = operator_norm(self.A2.at(i[sl], j[sl])) / h[sl] ** (2 * self.gamma)
                out = max(out, float(np.max(n1)), float(np.max(n2)))
            self._normA = out
        return self._normA

    def step_matrices(self, sub: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
        """``A1`` and ``A2`` over each consecutive interval of ``sub``."""
        n = sub.nodes
        return self.A1(n[1:], n[:-1]), self.A2(n[1:], n[:-1])

    def chen_defect(self) -> float:
        """``max ‖δA2_{tus} - A1_{tu} A1_{us}‖_F`` over grid triples."""
        i, k, j = _check_triples(self.grid.M)
        a1, a2 = self.A1, self.A2
        d = a2.at(i, j) - a2.at(i, k) - a2.at(k, j) - a1.at(i, k) @ a1.at(k, j)
        return float(np.max(np.sqrt(np.sum(d ** 2, axis=(1, 2)))))


def driver_from_roughpath(rp: Level2RoughPath, V, grid: TimeGrid | None = None,
                          gamma: float | None = None) -> BoundedDriver:
    """``A1 = Σ X^i V_i`` and ``A2 = Σ XX^{jk} V_j V_k``.

    ``grid`` may be any set of nodes of the rough path's grid (default: all).
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 3 or V.shape[1] != V.shape[2]:
        raise ValueError(f"V must be a list of square matrices, got shape {V.shape}")
    if V.shape[0] != rp.dimension:
        raise ValueError(f"{V.shape[0]} matrices for a {rp.dimension}-dimensional rough path")
    if grid is None:
        grid = rp.grid
    elif not rp.grid.contains(grid):
        raise GridError("driver grid must consist of rough-path grid nodes")
    VV = np.einsum("jab,kbc->jkac", V, V)
    X, XX = rp.X, rp.XX

    def a1(t, s):
        return np.einsum("pi,iab->pab", X(t, s), V)

    def a2(t, s):
        return np.einsum("pjk,jkab->pab", XX(t, s), VV)

    N = V.shape[1]
    A1 = TwoIndexMap(grid, a1, (N, N), increment=True)
    A2 = TwoIndexMap(grid, a2, (N, N), increment=True)
    return BoundedDriver(grid, A1, A2, rp.gamma_nominal if gamma is None else gamma)


@dataclass
class MatrixPath:
    """Solution path with its remainder on the driver grid."""

    path: Path
    remainder: TwoIndexMap
    extras: dict = field(default_factory=dict)

    def at(self, t):
        return self.path(t)


def _apply(mats: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Batched left action on vectors ``(..., N)`` or matrices ``(..., N, N)``."""
    if f.ndim == mats.ndim - 1:
        return np.einsum("...ab,...b->...a", mats, f)
    return mats @ f


def _resolve_sub(d: BoundedDriver, sub: TimeGrid | None) -> TimeGrid:
    if sub is None:
        return d.grid
    if not sub.contains(d.grid):
        raise GridError("solve grid must refine the driver grid")
    return sub


def _remainder_map(d: BoundedDriver, sub: TimeGrid, values: np.ndarray,
                   extra_increment=None) -> TwoIndexMap:
    """``f♯_{ts} = δf_{ts} - (A1 + A2)_{ts} f_s [- drift integral]`` at driver-grid nodes."""
    def rule(t, s):
        it, is_ = sub.index_of(t), sub.index_of(s)
        ft, fs = values[it], values[is_]
        r = ft - fs - _apply(d.A1(t, s) + d.A2(t, s), fs)
        if extra_increment is not None:
            r = r - (extra_increment[it] - extra_increment[is_])
        return r
    return TwoIndexMap(d.grid, rule, values.shape[1:], continuous=False)


def euler_integrate(d: BoundedDriver, f0, sub: TimeGrid | None = None) -> MatrixPath:
    """One-step scheme ``f_{k+1} = (I + A1 + A2) f_k`` on ``sub``."""
    sub = _resolve_sub(d, sub)
    f0 = np.asarray(f0, dtype=float)
    a1, a2 = d.step_matrices(sub)
    steps = np.eye(d.N) + a1 + a2
    vals = np.empty((len(sub),) + f0.shape)
    vals[0] = f0
    for k in range(sub.M):
        vals[k + 1] = steps[k] @ vals[k]
    return MatrixPath(Path(sub, vals), _remainder_map(d, sub, vals))


def picard_integrate(d: BoundedDriver, f0, iters: int = 30,
                     sub: TimeGrid | None = None) -> MatrixPath:
    """Picard iteration with each iterate sewn over the solve grid.

    ``f^{n+1}_t = f0 + Σ_{t_k < t} (A1_{t_{k+1} t_k} f^n_{t_k} + A2_{t_{k+1} t_k} f^{n-1}_{t_k})``
    starting from ``f^{-1} = 0`` and ``f^0 ≡ f0``.  The differences
    ``g^n = f^n - f^{n-1}`` are returned in ``extras['g']``.
    """
    if not 3 * d.gamma > 1:
        raise ValueError(f"Picard iteration needs 3*gamma > 1, got gamma={d.gamma}")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    sub = _resolve_sub(d, sub)
    f0 = np.asarray(f0, dtype=float)
    a1, a2 = d.step_matrices(sub)
    prev = np.zeros((len(sub),) + f0.shape)
    cur = np.broadcast_to(f0, (len(sub),) + f0.shape).copy()
    diffs = []
    for _ in range(iters):
        incr = _apply(a1, cur[:-1]) + _apply(a2, prev[:-1])
        nxt = np.concatenate([f0[None], f0[None] + np.cumsum(incr, axis=0)])
        diffs.append(Path(sub, nxt - cur))
        prev, cur = cur, nxt
    return MatrixPath(Path(sub, cur), _remainder_map(d, sub, cur), {"g": diffs})


def graded_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated product of graded elements ``(..., n_max+1, N, N)``: ``c_n = Σ_k a_{n-k} b_k``."""
    c = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    n = a.shape[-3]
    for m in range(n):
        for k in range(m + 1):
            c[..., m, :, :] += a[..., m - k, :, :] @ b[..., k, :, :]
    return c


def _local_elements(d: BoundedDriver, s, t, n_max: int) -> np.ndarray:
    """Graded elements ``(I, A1, A2, 0, ...)`` for intervals ``[s, t]``."""
    a1 = d.A1(t, s)
    a2 = d.A2(t, s)
    out = np.zeros(a1.shape[:1] + (n_max + 1, d.N, d.N))
    out[:, 0] = np.eye(d.N)
    out[:, 1] = a1
    if n_max >= 2:
        out[:, 2] = a2
    return out


def interval_flows(d: BoundedDriver, grid: TimeGrid, n_max: int = 8,
                   levels: int = 10) -> np.ndarray:
    """Graded multiplicative elements over each interval of ``grid``.

    Each interval is cut into ``2^levels`` equal pieces; the ordered product
    (later pieces on the left) of the local elements approximates the
    levels ``A^0 .. A^{n_max}`` of the Lyons extension.
    """
    nodes = grid.nodes
    pieces = 2 ** levels
    frac = np.arange(pieces + 1) / pieces
    out = np.empty((grid.M, n_max + 1, d.N, d.N))
    chunk = max(1, 2 ** 16 // pieces)
    for lo in range(0, grid.M, chunk):
        hi = min(grid.M, lo + chunk)
        s, t = nodes[lo:hi], nodes[lo + 1:hi + 1]
        pts = s[:, None] + frac[None, :] * (t - s)[:, None]
        pts[:, -1] = t
        el = _local_elements(d, pts[:, :-1].ravel(), pts[:, 1:].ravel(), n_max)
        el = el.reshape((hi - lo, pieces) + el.shape[1:])
        while el.shape[1] > 1:
            el = graded_product(el[:, 1::2], el[:, 0::2])
        out[lo:hi] = el[:, 0]
    return out


def lyons_series(d: BoundedDriver, n_max: int = 8, levels: int = 10):
    """Levels ``A^1 .. A^{n_max}`` and the truncated ``e^A = Σ_{n<=n_max} A^n`` on grid pairs.

    Returns ``(levels_list, eA)`` as table-backed two-index maps on ``d.grid``.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    grid = d.grid
    M = grid.M
    flows = interval_flows(d, grid, n_max, levels)
    table = np.zeros((M + 1, M + 1, n_max + 1, d.N, d.N))
    table[np.arange(M + 1), np.arange(M + 1), 0] = np.eye(d.N)
    for lag in range(1, M + 1):
        i = np.arange(lag, M + 1)
        table[i, i - lag] = graded_product(flows[i - 1], table[i - 1, i - lag])
    level_maps = [TwoIndexMap.from_table(grid, table[:, :, n], increment=True)
                  for n in range(1, n_max + 1)]
    eA = TwoIndexMap.from_table(grid, table.sum(axis=2))
    return level_maps, eA


def flow_defect(eA: TwoIndexMap) -> float:
    """``max ‖eA_{ts} - eA_{tu} eA_{us}‖_F`` over grid triples."""
    i, k, j = _check_triples(eA.grid.M)
    d = eA.at(i, j) - eA.at(i, k) @ eA.at(k, j)
    return float(np.max(np.sqrt(np.sum(d ** 2, axis=(1, 2)))))


def _drift_at(B: Path, t: np.ndarray) -> np.ndarray:
    """Left-continuous lookup of a piecewise-constant drift."""
    nodes = B.grid.nodes
    k = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, B.grid.M)
    return B.values[k]


def integrate_with_drift(d: BoundedDriver, B: Path, f0, sub: TimeGrid | None = None) -> MatrixPath:
    """Scheme ``f_{k+1} = (I + h B_{t_k} + A1 + A2) f_k``."""
    sub = _resolve_sub(d, sub)
    f0 = np.asarray(f0, dtype=float)
    a1, a2 = d.step_matrices(sub)
    h = np.diff(sub.nodes)
    bk = _drift_at(B, sub.nodes[:-1])
    steps = np.eye(d.N) + h[:, None, None] * bk + a1 + a2
    vals = np.empty((len(sub),) + f0.shape)
    vals[0] = f0
    drift_int = np.zeros_like(vals)
    for k in range(sub.M):
        drift_int[k + 1] = drift_int[k] + h[k] * (bk[k] @ vals[k])
        vals[k + 1] = steps[k] @ vals[k]
    return MatrixPath(Path(sub, vals), _remainder_map(d, sub, vals, drift_int),
                      {"drift_integral": drift_int})


def duhamel_residual(d: BoundedDriver, B: Path, f0, sub: TimeGrid,
                     n_max: int = 8, levels: int = 6) -> float:
    """``‖f_T - e^A_{T,0} f0 - Σ_k e^A_{T,t_k} B_{t_k} f_{t_k} h_k‖`` for the drift scheme on ``sub``."""
    sol = integrate_with_drift(d, B, f0, sub)
    f = sol.path.values
    flows = interval_flows(d, sub, n_max, levels).sum(axis=1)
    K = sub.M
    suffix = np.empty((K + 1, d.N, d.N))
    suffix[K] = np.eye(d.N)
    for k in range(K - 1, -1, -1):
        suffix[k] = suffix[k + 1] @ flows[k]
    h = np.diff(sub.nodes)
    bk = _drift_at(B, sub.nodes[:-1])
    G = h[:, None, None] * (suffix[:-1] @ bk)
    fk = f[:-1] if f.ndim == 3 else f[:-1, :, None]
    duh = suffix[0] @ f[0] + (G @ fk).sum(axis=0).reshape(f[0].shape)
    return float(np.linalg.norm(f[-1] - duh))


def growth_bound_check(d: BoundedDriver, f0, sub: TimeGrid | None = None,
                       j_max: int = 30, j_min: int = 0) -> tuple[float, float]:
    """Scan ``λ = 2^{-j}`` downwards until ``⦅f⦆ / |f0| <= 2``.

    Returns ``(lambda_used, ratio)``; raises :class:`BoundViolation` when no
    ``λ`` in the scan passes.
    """
    sol = euler_integrate(d, f0, sub)
    f0n = float(np.linalg.norm(np.ravel(f0)))
    if f0n == 0:
        return 1.0, 0.0
    best = np.inf
    for j in range(j_min, j_max + 1):
        lam = 2.0 ** (-j)
        ratio = weighted_path_norm(sol.path, WeightedNormParams(lam, d.gamma)) / f0n
        best = min(best, ratio)
        if ratio <= 2.0:
            return lam, ratio
    raise BoundViolation(f"no lambda in 2^-{j_min} .. 2^-{j_max} met the bound", best)


def holder_seminorm(a: TwoIndexMap, gamma: float, max_len: float = 1.0) -> float:
    """Unweighted ``sup |a_{ts}| / |t-s|^gamma`` over grid pairs with ``0 < t - s <= max_len``."""
    n = len(a.grid)
    i, j = np.tril_indices(n, -1)
    h = a.grid.nodes[i] - a.grid.nodes[j]
    keep = h <= max_len + 1e-12
    vals = a.at(i[keep], j[keep])
    nrm = np.sqrt(np.sum(vals.reshape(vals.shape[0], -1) ** 2, axis=1))
    return float(np.max(nrm / h[keep] ** gamma))
