"""The sewing map: additive paths from almost-additive two-index maps."""

from __future__ import annotations

import numpy as np

from .errors import GridError, SewingDivergence
from .grids import NODE_ATOL, Path, TimeGrid, TwoIndexMap

STOP_TOL = 1e-13
DEFAULT_LEVELS = 12


def dyadic_sum(a: TwoIndexMap, s, t, n: int) -> np.ndarray:
    """``Σ_i a(t_{i+1}, t_i)`` over ``2^n`` equal pieces of each ``[s, t]``.

    ``s`` and ``t`` are 1-d arrays of interval endpoints; the result has
    shape ``(len(s),) + a.shape``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pieces = 2 ** n
    frac = np.arange(pieces + 1) / pieces
    pts = s[:, None] + frac[None, :] * (t - s)[:, None]
    pts[:, -1] = t
    vals = a(pts[:, 1:], pts[:, :-1])
    return vals.sum(axis=1)


def _dyadic_limit(a: TwoIndexMap, s, t, levels: int):
    """Run dyadic refinement to ``levels`` with early stop; return (sum, diffs)."""
    prev = dyadic_sum(a, s, t, 0)
    diffs = []
    scale = max(1.0, float(np.max(np.abs(prev))) if prev.size else 1.0)
    for n in range(1, levels + 1):
        cur = dyadic_sum(a, s, t, n)
        d = float(np.max(np.abs(cur - prev))) if cur.size else 0.0
        diffs.append(d)
        prev = cur
        if d < STOP_TOL:
            break
        noise = 1e-12 * scale
        if len(diffs) >= 3 and d > noise and d > diffs[-2] and diffs[-2] > diffs[-3]:
            raise SewingDivergence(
                f"dyadic sums not settling: level differences {diffs[-3:]}"
            )
    return prev, diffs


def sew(a: TwoIndexMap, zeta: float, levels: int = DEFAULT_LEVELS) -> Path:
    """Sew ``a`` into a path ``A`` with ``A_0 = 0`` and ``δA ≈ a``.

    Each grid interval is refined dyadically up to ``levels`` times (stopping
    early once consecutive levels agree to 1e-13).  Node values are cumulative
    sums; off-node values are produced by the same recursion on demand.
    """
    if not zeta > 1:
        raise ValueError(f"sewing needs zeta > 1, got {zeta!r}")
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels!r}")
    if not a.continuous:
        raise GridError("sew needs a map evaluable between grid nodes; use sew_on_grid")
    grid = a.grid
    nodes = grid.nodes
    incr, _ = _dyadic_limit(a, nodes[:-1], nodes[1:], levels)
    values = np.concatenate([np.zeros((1,) + a.shape), np.cumsum(incr, axis=0)])

    def func(t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        k = np.clip(np.searchsorted(nodes, flat, side="right") - 1, 0, grid.M)
        out = values[k].copy()
        inside = flat - nodes[k] > NODE_ATOL * max(1.0, grid.T)
        if np.any(inside):
            part, _ = _dyadic_limit(a, nodes[k[inside]], flat[inside], levels)
            out[inside] += part
        return out.reshape(t.shape + a.shape)

    return Path(grid, values, func)


def sew_on_grid(a: TwoIndexMap, coarse: TimeGrid | None = None) -> Path:
    """Riemann-sum path over the finest partition available: the nodes of ``a.grid``.

    ``A_t = Σ a(t_{k+1}, t_k)`` over fine nodes ``t_k < t``; returned at the
    nodes of ``coarse`` (default: ``a.grid``), which must be a subset.
    """
    grid = a.grid
    k = np.arange(grid.M)
    incr = a.at(k + 1, k)
    values = np.concatenate([np.zeros((1,) + a.shape), np.cumsum(incr, axis=0)])
    if coarse is None:
        return Path(grid, values)
    return Path(coarse, values[grid.index_of(coarse.nodes)])


def riemann_sum_defect(a: TwoIndexMap, A: Path, partition, zeta: float) -> float:
    """``|δA_{ts} - Σ a(t_{i+1}, t_i)|`` for a partition ``s = t_0 < ... < t_m = t``.

    ``partition`` is a :class:`TimeGrid` (the interval ``[0, T]``) or an
    increasing sequence of times.  Its endpoints must be evaluable on ``A``;
    interior points must lie in ``[s, t]``.
    """
    if not zeta > 1:
        raise ValueError(f"zeta must exceed 1, got {zeta!r}")
    pts = partition.nodes if isinstance(partition, TimeGrid) else np.asarray(partition, float)
    if pts.ndim != 1 or pts.size < 2 or not np.all(np.diff(pts) > 0):
        raise GridError("partition must be an increasing sequence of at least two times")
    T = A.grid.T
    tol = NODE_ATOL * max(1.0, T)
    if pts[0] < -tol or pts[-1] > T + tol:
        raise GridError(f"partition [{pts[0]}, {pts[-1]}] not within [0, {T}]")
    s, t = pts[0], pts[-1]
    riemann = a(pts[1:], pts[:-1]).sum(axis=0)
    inc = np.asarray(A(t)) - np.asarray(A(s))
    return float(np.linalg.norm(np.ravel(inc - riemann)))
