"""Rough transport ``df = V_i f dX^i`` on the torus by backward characteristics.

A solution is ``f_t(x) = f_0(y_0)`` where ``y`` solves ``dy = -V(y) dX`` with
``y_t = x``.  The backward solve runs forward in reversed time on the lift
of ``r ↦ x_{T-r}``, one second-order step per sub-interval::

    w <- w - v_i(w) X̃^i + (v_k · ∇v_j)(w) X̃X̃^{jk}

Weak residuals, conservation, maximum principle, renormalization and the
quadratic-form (Gronwall) identity are measured on the resulting snapshots.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage, optimize

from .errors import EstimationError, GridError, PreconditionError, StepSizeError
from .field_space import (
    TWO_PI, AnalyticFunction, GridFunction, TestFunctionBank, TorusGrid,
    VectorFieldSet, V_array, apply_Vstar, apply_VstarVstar, pair_arrays,
    spectral_tail,
)
from .grids import HolderReport, TimeGrid, TwoIndexMap, estimate_holder_exponent, make_uniform_grid
from .parallel import max_threads, parallel_map
from .roughpath import Level2RoughPath, lift_piecewise_linear, reverse, sample_brownian_pl

RESOLUTION_TAIL = 1e-8


# ------------------------------------------------------------ characteristics


def _step_indices(times: TimeGrid, substeps: int) -> np.ndarray:
    h = times.T / substeps
    K = np.rint(times.nodes / h).astype(int)
    if np.any(np.abs(K * h - times.nodes) > 1e-9 * max(1.0, times.T)):
        raise GridError(f"time nodes are not multiples of the step {h!r}")
    return K


def _scheme_step(V: VectorFieldSet, w: np.ndarray, X: np.ndarray, XX: np.ndarray) -> np.ndarray:
    """One step ``Δ = -v_i X^i + Σ_{jk} XX^{jk} ∇v_j v_k`` at points ``w``."""
    vs = [f.v(w) for f in V.fields]
    delta = np.zeros_like(w)
    for i, v in enumerate(vs):
        if X[i] != 0.0:
            delta -= X[i] * v
    for j, fj in enumerate(V.fields):
        coef = XX[j]
        if not np.any(coef):
            continue
        mix = sum(coef[k] * vs[k] for k in range(len(vs)) if coef[k] != 0.0)
        delta += np.einsum("...ab,...b->...a", fj.jac(w), mix)
    if delta.size:
        big = max(float(delta.max()), -float(delta.min()))
        if big > np.pi:
            raise StepSizeError(f"a characteristic step moved by {big:.3g} > π; increase substeps")
    # the closures are periodic, so wrapping into [0, 2π) is deferred to the caller
    return w + delta


def _feet(V: VectorFieldSet, rp: Level2RoughPath, times: TimeGrid, substeps: int,
          points: np.ndarray) -> np.ndarray:
    """Characteristic feet for every time node and point: shape ``(len(times), P, d)``."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if rp.dimension != V.ell:
        raise ValueError(f"rough path dimension {rp.dimension} != number of fields {V.ell}")
    K = _step_indices(times, substeps)
    T = times.T
    rev = reverse(rp, T)
    r = np.linspace(0.0, T, substeps + 1)
    Xt = rev.X(r[1:], r[:-1])
    XXt = rev.XX(r[1:], r[:-1])
    order = np.argsort(-K, kind="stable")
    start = substeps - K[order]

    def sweep(pts):
        w = np.broadcast_to(pts, (K.size,) + pts.shape).copy()
        for k in range(substeps):
            a = int(np.searchsorted(start, k, side="right"))
            if a:
                w[:a] = _scheme_step(V, w[:a], Xt[k], XXt[k])
        return w

    chunks = np.array_split(points, max(1, min(max_threads(), len(points) // 1024)))
    w = np.concatenate(parallel_map(sweep, chunks), axis=1)
    w = np.mod(w, TWO_PI)
    w[w >= TWO_PI] = 0.0  # tiny negatives round up to 2π
    out = np.empty_like(w)
    out[order] = w
    return out


def characteristics_solve(V: VectorFieldSet, rp: Level2RoughPath, t: float, substeps: int,
                          grid: TorusGrid) -> np.ndarray:
    """Feet ``y(0)`` of the backward characteristics from time ``t`` at every grid point.

    ``substeps`` is the number of scheme steps over ``[0, t]``.  Returns an
    array of shape ``grid.shape + (d,)`` with entries in ``[0, 2π)``.
    """
    if V.d != grid.d:
        raise GridError(f"field dimension {V.d} does not match grid dimension {grid.d}")
    rp.grid.index_of(t)
    times = TimeGrid([0.0, float(t)])
    pts = grid.points().reshape(-1, grid.d)
    feet = _feet(V, rp, times, substeps, pts)[1]
    return feet.reshape(grid.shape + (grid.d,))


# ------------------------------------------------------------------ solution


@dataclass(eq=False)
class TransportSolution:
    """Snapshots ``f_t`` at each node of ``times`` plus the characteristic feet."""

    times: TimeGrid
    grid: TorusGrid
    snapshots: np.ndarray
    feet: np.ndarray
    rp: Level2RoughPath
    V: VectorFieldSet
    substeps: int
    datum: AnalyticFunction | None
    datum_mode: str = "analytic"
    label: str = ""

    def __post_init__(self):
        want = (len(self.times),) + self.grid.shape
        if self.snapshots.shape != want:
            raise GridError(f"snapshots shape {self.snapshots.shape} != {want}")

    @property
    def seed(self):
        return None if self.rp.base is None else self.rp.base.seed

    def snapshot(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.snapshots[i])

    def evaluate(self, datum: AnalyticFunction) -> np.ndarray:
        """Compose another datum with the stored feet (same characteristics)."""
        return datum.value(self.feet)

    def with_snapshots(self, values: np.ndarray, label: str) -> "TransportSolution":
        return TransportSolution(self.times, self.grid, np.asarray(values, float), self.feet,
                                 self.rp, self.V, self.substeps, None, self.datum_mode, label)

    def to_csv(self, path) -> None:
        """Long format: ``t, x1[, x2], value`` with round-trip decimals."""
        pts = self.grid.points().reshape(-1, self.grid.d)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(self.grid.d)] + ["value"])
            for t, snap in zip(self.times.nodes, self.snapshots):
                for p, v in zip(pts, snap.reshape(-1)):
                    w.writerow([repr(float(t))] + [repr(float(c)) for c in p] + [repr(float(v))])


def _interpolate_periodic(samples: np.ndarray, feet: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Periodic cubic-spline interpolation of grid samples at arbitrary points."""
    coeffs = ndimage.spline_filter(samples, order=3, mode="grid-wrap")
    coords = np.moveaxis(feet, -1, 0) / (TWO_PI / grid.n)
    flat = coords.reshape(grid.d, -1)
    vals = ndimage.map_coordinates(coeffs, flat, order=3, mode="grid-wrap", prefilter=False)
    return vals.reshape(feet.shape[:-1])


def transport_solve(V: VectorFieldSet, rp: Level2RoughPath, f0: AnalyticFunction,
                    times: TimeGrid, substeps: int, grid: TorusGrid,
                    datum_mode: str = "analytic") -> TransportSolution:
    """Solve on ``grid`` at every node of ``times``.

    ``substeps`` is the total number of scheme steps over ``[0, times.T]``;
    every time node must be a step boundary.  With ``datum_mode="analytic"``
    the datum is evaluated exactly at the feet; ``"interpolated"`` samples it
    on the grid and interpolates (a deliberately weaker variant).
    """
    if V.d != grid.d or f0.d != grid.d:
        raise GridError("field, datum and grid dimensions must agree")
    if datum_mode not in ("analytic", "interpolated"):
        raise ValueError(f"unknown datum mode {datum_mode!r}")
    if times.T > rp.grid.T + 1e-12:
        raise GridError("time grid extends beyond the rough path")
    pts = grid.points().reshape(-1, grid.d)
    feet = _feet(V, rp, times, substeps, pts).reshape((len(times),) + grid.shape + (grid.d,))
    if datum_mode == "analytic":
        snaps = f0.value(feet)
    else:
        samples = f0.value(grid.points())
        snaps = np.stack([_interpolate_periodic(samples, ft, grid) for ft in feet])
        snaps[0] = samples
    return TransportSolution(times, grid, snaps, feet, rp, V, substeps, f0, datum_mode,
                             f0.name)


# ------------------------------------------------------------ weak residuals


@dataclass
class PhiResiduals:
    """Increment, first- and second-order remainders of ``⟨f, φ⟩``."""

    phi_id: str
    increment: TwoIndexMap
    flat: TwoIndexMap
    sharp: TwoIndexMap
    reports: dict
    targets: dict


@dataclass
class WeakResiduals:
    gamma: float
    per_phi: dict = field(default_factory=dict)

    def records(self) -> list:
        """JSON-ready records ``{phi_id, kind, gamma_target, slope, scales, per_scale_sup}``."""
        out = []
        for name, pr in self.per_phi.items():
            for kind in ("increment", "flat", "sharp"):
                rep = pr.reports[kind]
                out.append({
                    "phi_id": name,
                    "kind": kind,
                    "gamma_target": pr.targets[kind],
                    "slope": None if rep is None else rep.slope,
                    "scales": [] if rep is None else rep.scales,
                    "scales_used": [] if rep is None else rep.scales_used,
                    "per_scale_sup": [] if rep is None else rep.per_scale_sup,
                })
        return out

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.records(), fh, indent=2, sort_keys=True)


def _pair_tables(rp: Level2RoughPath, times: TimeGrid):
    """``X`` and ``XX`` over all node pairs ``(t_i, t_j)``, zero where ``i < j``."""
    n = len(times)
    i, j = np.tril_indices(n)
    X = np.zeros((n, n, rp.dimension))
    XX = np.zeros((n, n, rp.dimension, rp.dimension))
    X[i, j] = rp.X(times.nodes[i], times.nodes[j])
    XX[i, j] = rp.XX(times.nodes[i], times.nodes[j])
    return X, XX


def _lower(table: np.ndarray) -> np.ndarray:
    n = table.shape[0]
    i, j = np.triu_indices(n, 1)
    table = table.copy()
    table[i, j] = 0.0
    return table


FIT_SCALES = 6


def default_scales(times: TimeGrid) -> tuple:
    """The six finest dyadic scales, ending at the grid step.

    Coarse lags are left out: pairings are bounded periodic functions of the
    path, so their sups saturate once the path winds around the torus.
    """
    m_max = int(np.floor(np.log2(times.M)))
    return max(1, m_max - FIT_SCALES + 1), m_max


def _report(table: np.ndarray, times: TimeGrid, scales) -> HolderReport | None:
    try:
        return estimate_holder_exponent(TwoIndexMap.from_table(times, table), *scales)
    except EstimationError:
        return None


def weak_residuals(sol: TransportSolution, rp: Level2RoughPath, V: VectorFieldSet,
                   bank: TestFunctionBank, scales=None) -> WeakResiduals:
    """``f♭_{ts}(φ) = δ⟨f, φ⟩_{ts} - X^i_{ts}⟨f_s, V_i*φ⟩`` and
    ``f♯_{ts}(φ) = f♭_{ts}(φ) - XX^{jk}_{ts}⟨f_s, V_k*V_j*φ⟩`` on all pairs of time nodes.
    """
    times, grid = sol.times, sol.grid
    scales = default_scales(times) if scales is None else scales
    X, XX = _pair_tables(rp, times)
    gamma = rp.gamma_nominal
    out = WeakResiduals(gamma)
    f = sol.snapshots
    for phi in bank:
        ph = phi.sample(grid).values
        P = pair_arrays(f, ph, grid)
        Q = np.stack([pair_arrays(f, apply_Vstar(Vi, phi, grid).values, grid)
                      for Vi in V.fields], axis=-1)
        R = np.empty((len(times), V.ell, V.ell))
        for j in range(V.ell):
            for k in range(V.ell):
                R[:, j, k] = pair_arrays(f, apply_VstarVstar(V[k], V[j], phi, grid).values, grid)
        inc = _lower(P[:, None] - P[None, :])
        flat = inc - np.einsum("tsi,si->ts", X, Q)
        sharp = flat - np.einsum("tsjk,sjk->ts", XX, R)
        maps = {k: TwoIndexMap.from_table(times, v, increment=True)
                for k, v in (("increment", inc), ("flat", flat), ("sharp", sharp))}
        reports = {k: _report(v, times, scales) for k, v in
                   (("increment", inc), ("flat", flat), ("sharp", sharp))}
        targets = {"increment": gamma, "flat": 2 * gamma, "sharp": 3 * gamma}
        out.per_phi[phi.name] = PhiResiduals(phi.name, maps["increment"], maps["flat"],
                                             maps["sharp"], reports, targets)
    return out


# ----------------------------------------------------------------- invariants


@dataclass
class ConservationReport:
    drift: np.ndarray
    zero_norm: bool

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))


def l2_norms(sol: TransportSolution) -> np.ndarray:
    return np.sqrt(pair_arrays(sol.snapshots, sol.snapshots, sol.grid))


def conservation_report(sol: TransportSolution) -> ConservationReport:
    """Relative L² drift ``|‖f_t‖ - ‖f_0‖| / ‖f_0‖`` per time node."""
    if not sol.V.divergence_free:
        raise PreconditionError(f"field {sol.V.name!r} is not divergence-free; no conservation claimed")
    norms = l2_norms(sol)
    if norms[0] == 0.0:
        return ConservationReport(np.zeros(len(sol.times)), True)
    return ConservationReport(np.abs(norms - norms[0]) / norms[0], False)


@lru_cache(maxsize=64)
def _analytic_sup_cached(fn: AnalyticFunction) -> float:
    d = fn.d
    probe = TorusGrid(d, 256).points().reshape(-1, d)
    vals = np.abs(fn.value(probe))
    best = float(np.max(vals))
    for idx in np.argsort(vals)[-8:]:
        def neg(x):
            return -abs(float(fn.value(np.asarray(x)[None])[0]))
        res = optimize.minimize(neg, probe[idx], method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 2000})
        best = max(best, -float(res.fun))
    return best


def analytic_sup(fn: AnalyticFunction) -> float:
    """``sup |f|`` over the torus: probe grid maxima refined by local optimization."""
    return _analytic_sup_cached(fn)


@dataclass
class MaxPrincipleReport:
    drift: np.ndarray
    sup_f0: float

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))


def maximum_principle_report(sol: TransportSolution, datum: AnalyticFunction | None = None
                             ) -> MaxPrincipleReport:
    """``max_x |f_t(x)| - sup |f_0|`` per time node."""
    datum = sol.datum if datum is None else datum
    if datum is None:
        raise ValueError("maximum principle needs the analytic initial datum")
    sup0 = analytic_sup(datum)
    axes = tuple(range(1, sol.snapshots.ndim))
    return MaxPrincipleReport(np.max(np.abs(sol.snapshots), axis=axes) - sup0, sup0)


def renormalization_check(sol: TransportSolution, H, rp: Level2RoughPath, V: VectorFieldSet,
                          bank: TestFunctionBank, scales=None) -> WeakResiduals:
    """Weak residuals of ``H ∘ f``."""
    return weak_residuals(sol.with_snapshots(H(sol.snapshots), f"H[{getattr(H, 'name', '?')}]"),
                          rp, V, bank, scales)


@dataclass
class GronwallResult:
    residual: TwoIndexMap
    report: HolderReport | None
    method: str
    spectral_tail: float
    resolved: bool


def _quadratic_terms_spectral(f: np.ndarray, phi: np.ndarray, V: VectorFieldSet,
                              grid: TorusGrid):
    """Per time: ``C_{jk} = 2⟨φg, V_jV_k g⟩`` and ``D_{ii'} = ⟨φ, (V_i g)(V_{i'} g)⟩``.

    These assemble ``(g, B² g) = XX^{jk} C_{jk} + X^i X^{i'} D_{ii'}``, the
    second-order part of the equation for ``g ⊗ g`` restricted to the diagonal.
    """
    ell = V.ell
    nt = f.shape[0]
    C = np.empty((nt, ell, ell))
    D = np.empty((nt, ell, ell))
    Vg = [V_array(Vi, f, grid) for Vi in V.fields]
    pg = phi * f
    for j in range(ell):
        for k in range(ell):
            C[:, j, k] = 2.0 * pair_arrays(pg, V_array(V[j], Vg[k], grid), grid)
    for i in range(ell):
        for ip in range(ell):
            D[:, i, ip] = pair_arrays(phi * Vg[i], Vg[ip], grid)
    return C, D


def gronwall_identity_residual(sol: TransportSolution, rp: Level2RoughPath, V: VectorFieldSet,
                               phi: AnalyticFunction, method: str = "spectral",
                               scales=None) -> GronwallResult:
    """``r_{ts} = δ⟨f², φ⟩ - X^i⟨f_s², V_i*φ⟩ - Q²_{ts}``.

    ``method="spectral"`` assembles ``Q²`` from the quadratic forms of the
    driver acting on ``f_s`` (spectral derivatives of ``f_s``);
    ``method="closed"`` uses ``XX^{jk}⟨f_s², V_k*V_j*φ⟩`` with analytic
    derivatives of ``φ`` only.
    """
    if method not in ("spectral", "closed"):
        raise ValueError(f"unknown method {method!r}")
    times, grid = sol.times, sol.grid
    scales = default_scales(times) if scales is None else scales
    X, XX = _pair_tables(rp, times)
    f = sol.snapshots
    f2 = f ** 2
    ph = phi.sample(grid).values
    P = pair_arrays(f2, ph, grid)
    Q1 = np.stack([pair_arrays(f2, apply_Vstar(Vi, phi, grid).values, grid) for Vi in V.fields],
                  axis=-1)
    if method == "spectral":
        C, D = _quadratic_terms_spectral(f, ph, V, grid)
        Q2 = np.einsum("tsjk,sjk->ts", XX, C) + np.einsum("tsi,tsk,sik->ts", X, X, D)
    else:
        R = np.empty((len(times), V.ell, V.ell))
        for j in range(V.ell):
            for k in range(V.ell):
                R[:, j, k] = pair_arrays(f2, apply_VstarVstar(V[k], V[j], phi, grid).values, grid)
        Q2 = np.einsum("tsjk,sjk->ts", XX, R)
    r = _lower(P[:, None] - P[None, :] - np.einsum("tsi,si->ts", X, Q1) - Q2)
    tail = spectral_tail(f, grid)
    return GronwallResult(TwoIndexMap.from_table(times, r, increment=True),
                          _report(r, times, scales), method, tail, tail < RESOLUTION_TAIL)


# ------------------------------------------------------------------ stability


def solution_distance(a: TransportSolution, b: TransportSolution) -> float:
    """``max_t ‖f^a_t - f^b_t‖_{L²}``; refuses solutions driven by different seeds."""
    if a.seed != b.seed:
        raise PreconditionError(
            f"solutions come from different seeds ({a.seed} vs {b.seed}); no smallness is expected"
        )
    if a.grid != b.grid or not np.allclose(a.times.nodes, b.times.nodes, rtol=0, atol=1e-12):
        raise GridError("solutions must share spatial and time grids")
    diff = a.snapshots - b.snapshots
    return float(np.max(np.sqrt(pair_arrays(diff, diff, a.grid))))


@dataclass
class StabilityReport:
    levels: list
    table: np.ndarray
    consecutive: list
    passes: bool
    max_principle_drift: list = field(default_factory=list)


def stability_sweep(V: VectorFieldSet, base_seed: int, dyadic_levels, f0: AnalyticFunction,
                    T: float, grid: TorusGrid, substeps: int, times_M: int = 16,
                    gamma: float = 0.4) -> StabilityReport:
    """Cauchy check over piecewise-linear approximations of one Brownian sample.

    The sample is drawn on ``2^max(levels)`` steps; level ``m`` keeps every
    ``2^{max - m}``-th node.
    """
    levels = list(dyadic_levels)
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("dyadic levels must be strictly increasing with at least two entries")
    finest = sample_brownian_pl(base_seed, T, 2 ** levels[-1], V.ell)
    times = make_uniform_grid(T, times_M)

    def solve(m):
        rp = lift_piecewise_linear(finest.subsample(2 ** (levels[-1] - m)), gamma)
        return transport_solve(V, rp, f0, times, substeps, grid)

    sols = [solve(m) for m in levels]
    mp = [maximum_principle_report(sol).max_drift for sol in sols]
    L = len(levels)
    table = np.zeros((L, L))
    for a in range(L):
        for b in range(a + 1, L):
            table[a, b] = table[b, a] = solution_distance(sols[a], sols[b])
    consecutive = [float(table[a, a + 1]) for a in range(L - 1)]
    passes = all(y < x for x, y in zip(consecutive, consecutive[1:]))
    return StabilityReport(levels, table, consecutive, passes, mp)
