"""Periodic grid functions, spectral Sobolev norms, smoothing and vector-field operators.

Points on the torus ``[0, 2π)^d`` are arrays with a trailing axis of length
``d``.  Analytic objects (vector fields, test functions, initial data) carry
closures for their derivatives generated symbolically, so no finite
differences of analytic data are ever taken.  Grid functions produced by an
evolution are differentiated spectrally.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from .errors import GridError

TWO_PI = 2.0 * np.pi


# ----------------------------------------------------------------- grids


@dataclass(frozen=True)
class TorusGrid:
    """``n`` points per axis on ``[0, 2π)^d``."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise GridError(f"torus dimension must be 1 or 2, got {self.d}")
        if self.n < 8 or self.n > 256 or self.n & (self.n - 1):
            raise GridError(f"points per axis must be a power of two in [8, 256], got {self.n}")

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def cell(self) -> float:
        return (TWO_PI / self.n) ** self.d

    def axis(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n) / self.n

    def points(self) -> np.ndarray:
        """Grid points, shape ``shape + (d,)``."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    def wavenumbers(self) -> list:
        """Integer wavenumbers per axis, broadcast to ``shape``."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        return np.meshgrid(*([k] * self.d), indexing="ij")

    def ksq(self) -> np.ndarray:
        return sum(k ** 2 for k in self.wavenumbers())


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples of a function on a torus grid."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise GridError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(other, self.grid))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _vals(other, self.grid))

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * _vals(other, self.grid))

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        """Row-major CSV: a ``d,n`` header, their values, then the samples."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d", "n"])
            w.writerow([self.grid.d, self.grid.n])
            rows = self.values.reshape(-1, self.grid.n)
            for row in rows:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if rows[0] != ["d", "n"]:
            raise ValueError("grid function CSV must start with a 'd,n' header")
        grid = TorusGrid(int(rows[1][0]), int(rows[1][1]))
        vals = np.array([[float(v) for v in r] for r in rows[2:]])
        return cls(grid, vals.reshape(grid.shape))


def _vals(other, grid: TorusGrid):
    if isinstance(other, GridFunction):
        if other.grid != grid:
            raise GridError("grid functions live on different grids")
        return other.values
    return other


# ----------------------------------------------------------- spectral tools


def _spatial_axes(grid: TorusGrid) -> tuple:
    return tuple(range(-grid.d, 0))


def pairing(f: GridFunction, phi: GridFunction) -> float:
    """Uniform-grid quadrature of ``∫ f φ dx``."""
    if f.grid != phi.grid:
        raise GridError("pairing needs both functions on the same grid")
    return float(np.sum(f.values * phi.values) * f.grid.cell)


def pair_arrays(f: np.ndarray, phi: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Batched pairing over the trailing spatial axes."""
    return np.sum(f * phi, axis=_spatial_axes(grid)) * grid.cell


def sobolev_norm(f: GridFunction, k: int) -> float:
    """Spectral ``W^{k,2}`` norm ``(Σ (1+|κ|²)^k |f̂(κ)|²)^{1/2}``, normalized so ``k = 0`` is the L² norm."""
    if not -3 <= k <= 3:
        raise ValueError(f"Sobolev index must lie in [-3, 3], got {k}")
    g = f.grid
    F = np.fft.fftn(f.values)
    w = (1.0 + g.ksq()) ** k
    energy = np.sum(w * np.abs(F) ** 2) * (TWO_PI ** g.d) / g.n ** (2 * g.d)
    return float(np.sqrt(energy))


def smoothing(f: GridFunction, eps: float, j0: int = 3) -> GridFunction:
    """``J^ε f`` with Fourier multiplier ``(1 + ε|κ|²)^{-j0}``."""
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps!r}")
    if j0 < 1:
        raise ValueError(f"j0 must be >= 1, got {j0!r}")
    g = f.grid
    F = np.fft.fftn(f.values) * (1.0 + eps * g.ksq()) ** (-j0)
    return GridFunction(g, np.real(np.fft.ifftn(F)))


def spectral_derivative_array(values: np.ndarray, grid: TorusGrid, axis: int) -> np.ndarray:
    """``∂_axis`` of arrays with trailing spatial axes (leading batch axes allowed)."""
    if not 0 <= axis < grid.d:
        raise ValueError(f"axis {axis} out of range for d={grid.d}")
    axes = _spatial_axes(grid)
    k = np.fft.fftfreq(grid.n, 1.0 / grid.n)
    k[grid.n // 2] = 0.0  # odd derivative of the Nyquist mode is not real
    shape = [1] * grid.d
    shape[axis] = grid.n
    mult = 1j * k.reshape(shape)
    F = np.fft.fftn(values, axes=axes)
    return np.real(np.fft.ifftn(F * mult, axes=axes))


def spectral_derivative(f: GridFunction, axis: int) -> GridFunction:
    return GridFunction(f.grid, spectral_derivative_array(f.values, f.grid, axis))


def spectral_tail(values: np.ndarray, grid: TorusGrid) -> float:
    """Fraction of spectral energy in modes with some ``|κ_i| > n/4``."""
    axes = _spatial_axes(grid)
    F = np.abs(np.fft.fftn(values, axes=axes)) ** 2
    ks = grid.wavenumbers()
    high = np.zeros(grid.shape, dtype=bool)
    for k in ks:
        high |= np.abs(k) > grid.n // 4
    total = np.sum(F, axis=axes)
    tail = np.sum(F * high, axis=axes)
    frac = np.where(total > 0, tail / np.where(total > 0, total, 1.0), 0.0)
    return float(np.max(frac))


# ------------------------------------------------------- analytic objects


def _lambdify(exprs, syms) -> Callable:
    """Closure ``x (..., d) -> (...) + shape(exprs)`` from a sympy array."""
    arr = sp.Array(exprs) if not isinstance(exprs, sp.Expr) else exprs
    shape = () if isinstance(arr, sp.Expr) else arr.shape
    flat = [arr] if isinstance(arr, sp.Expr) else list(sp.flatten(arr))
    fns = [sp.lambdify(syms, e, modules="numpy") for e in flat]

    def f(x):
        x = np.asarray(x, dtype=float)
        coords = [x[..., i] for i in range(len(syms))]
        base = x.shape[:-1]
        out = np.empty((len(fns),) + base)
        for i, fn in enumerate(fns):
            out[i] = np.broadcast_to(fn(*coords), base)
        out = np.moveaxis(out, 0, -1)
        return out.reshape(base + shape)
    return f


def torus_symbols(d: int) -> tuple:
    return sp.symbols(" ".join(f"x{i + 1}" for i in range(d)), real=True, seq=True)


@dataclass(eq=False)
class AnalyticFunction:
    """A periodic scalar function with closures for derivatives up to order three."""

    name: str
    d: int
    value: Callable
    grad: Callable | None = None
    hess: Callable | None = None
    third: Callable | None = None
    expr: object = None
    w3inf: float = float("nan")

    @classmethod
    def from_sympy(cls, name: str, expr, d: int) -> "AnalyticFunction":
        syms = torus_symbols(d)
        expr = sp.sympify(expr, locals={s.name: s for s in syms})
        g = [sp.diff(expr, s) for s in syms]
        h = [[sp.diff(gi, s) for s in syms] for gi in g]
        t = [[[sp.diff(hij, s) for s in syms] for hij in hi] for hi in h]
        obj = cls(name, d, _lambdify(expr, syms), _lambdify(g, syms),
                  _lambdify(h, syms), _lambdify(t, syms), expr)
        obj.w3inf = obj._w3inf()
        return obj

    def _w3inf(self) -> float:
        """Sum of sup norms of derivatives of order 0..3 on a probe grid."""
        pts = TorusGrid(self.d, 64 if self.d == 2 else 256).points()
        total = 0.0
        for fn in (self.value, self.grad, self.hess, self.third):
            total += float(np.max(np.abs(fn(pts))))
        return total

    def __call__(self, x) -> np.ndarray:
        return self.value(x)

    def sample(self, grid: TorusGrid) -> GridFunction:
        return GridFunction(grid, self.value(grid.points()))

    def need(self, order: int) -> None:
        closures = (self.grad, self.hess, self.third)
        for o in range(order):
            if closures[o] is None:
                raise ValueError(f"{self.name} lacks the order-{o + 1} derivative closure")


@dataclass(eq=False)
class VectorField:
    """``v: T^d -> ℝ^d`` with coded Jacobian, second derivatives, divergence and its gradient.

    ``jac(x)[..., a, b] = ∂_b v^a``; ``hess(x)[..., a, b, c] = ∂_b ∂_c v^a``.
    """

    name: str
    d: int
    v: Callable
    jac: Callable
    hess: Callable
    div: Callable
    grad_div: Callable
    exprs: object = None

    @classmethod
    def from_sympy(cls, name: str, exprs, d: int) -> "VectorField":
        syms = torus_symbols(d)
        comps = [sp.sympify(e, locals={s.name: s for s in syms}) for e in exprs]
        if len(comps) != d:
            raise ValueError(f"{name}: {len(comps)} components for d={d}")
        J = [[sp.diff(c, s) for s in syms] for c in comps]
        H = [[[sp.diff(Jab, s) for s in syms] for Jab in Ja] for Ja in J]
        div = sp.simplify(sum(J[a][a] for a in range(d)))
        gdiv = [sp.diff(div, s) for s in syms]
        return cls(name, d, _lambdify(comps, syms), _lambdify(J, syms),
                   _lambdify(H, syms), _lambdify(div, syms), _lambdify(gdiv, syms), comps)


@dataclass(eq=False)
class VectorFieldSet:
    """Fields ``V_1 .. V_ℓ`` on the ``d``-torus."""

    name: str
    fields: list
    regularity: str = "C3b"
    divergence_free: bool = False
    description: str = ""

    def __post_init__(self):
        if not self.fields:
            raise ValueError("a vector field set needs at least one field")
        ds = {f.d for f in self.fields}
        if len(ds) != 1:
            raise ValueError("all fields must share a dimension")
        if self.regularity not in ("C1b", "C2b", "C3b"):
            raise ValueError(f"unknown regularity tag {self.regularity!r}")
        if self.divergence_free:
            pts = TorusGrid(self.d, 64).points()
            worst = max(float(np.max(np.abs(f.div(pts)))) for f in self.fields)
            if worst > 1e-12:
                raise ValueError(f"{self.name}: flagged divergence-free but max|div| = {worst:g}")

    @property
    def d(self) -> int:
        return self.fields[0].d

    @property
    def ell(self) -> int:
        return len(self.fields)

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i) -> VectorField:
        return self.fields[i]


@dataclass(eq=False)
class TestFunctionBank:
    """Named analytic test functions on a common torus."""

    functions: list = field(default_factory=list)

    __test__ = False  # keep pytest from collecting this class

    def __iter__(self):
        return iter(self.functions)

    def __len__(self):
        return len(self.functions)

    def ids(self) -> list:
        return [f.name for f in self.functions]

    def get(self, name: str) -> AnalyticFunction:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def w3inf_norms(self) -> dict:
        return {f.name: f.w3inf for f in self.functions}


# --------------------------------------------- operators on analytic data


def _check_dims(V: VectorField, phi: AnalyticFunction, grid: TorusGrid):
    if V.d != grid.d or phi.d != grid.d:
        raise GridError(f"dimension mismatch: field {V.d}, function {phi.d}, grid {grid.d}")


def apply_V(V: VectorField, phi: AnalyticFunction, grid: TorusGrid) -> GridFunction:
    """``V φ = v · ∇φ`` sampled on the grid."""
    _check_dims(V, phi, grid)
    phi.need(1)
    x = grid.points()
    return GridFunction(grid, np.einsum("...a,...a->...", V.v(x), phi.grad(x)))


def apply_Vstar(V: VectorField, phi: AnalyticFunction, grid: TorusGrid) -> GridFunction:
    """``V* φ = -v · ∇φ - (div v) φ``."""
    _check_dims(V, phi, grid)
    phi.need(1)
    x = grid.points()
    vals = -np.einsum("...a,...a->...", V.v(x), phi.grad(x)) - V.div(x) * phi.value(x)
    return GridFunction(grid, vals)


def apply_VstarVstar(Vj: VectorField, Vk: VectorField, phi: AnalyticFunction,
                     grid: TorusGrid) -> GridFunction:
    """``V_j*(V_k* φ) = V_jV_kφ + (V_j d_k)φ + d_k V_jφ + d_j V_kφ + d_j d_k φ`` with ``d = div v``."""
    _check_dims(Vj, phi, grid)
    _check_dims(Vk, phi, grid)
    phi.need(2)
    x = grid.points()
    vj, vk = Vj.v(x), Vk.v(x)
    dj, dk = Vj.div(x), Vk.div(x)
    g, H = phi.grad(x), phi.hess(x)
    f = phi.value(x)
    # V_j V_k φ = v_j^a ∂_a v_k^b ∂_b φ + v_j^a v_k^b ∂_a ∂_b φ
    VjVk = (np.einsum("...a,...ba,...b->...", vj, Vk.jac(x), g)
            + np.einsum("...a,...b,...ab->...", vj, vk, H))
    Vj_dk = np.einsum("...a,...a->...", vj, Vk.grad_div(x))
    Vjphi = np.einsum("...a,...a->...", vj, g)
    Vkphi = np.einsum("...a,...a->...", vk, g)
    vals = VjVk + Vj_dk * f + dk * Vjphi + dj * Vkphi + dj * dk * f
    return GridFunction(grid, vals)


# --------------------------------------------- operators on grid functions


def gradient_array(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Spectral gradient, trailing axis of length ``d``."""
    return np.stack([spectral_derivative_array(values, grid, a) for a in range(grid.d)], axis=-1)


def V_array(V: VectorField, values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """``v · ∇g`` with the gradient of ``g`` taken spectrally."""
    return np.einsum("...a,...a->...", V.v(grid.points()), gradient_array(values, grid))


def Vstar_array(V: VectorField, values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """``V* g = -v · ∇g - (div v) g`` with spectral derivatives of ``g``."""
    return -V_array(V, values, grid) - V.div(grid.points()) * values
