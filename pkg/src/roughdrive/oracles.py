"""Independent reference solutions used by the acceptance suites and tests.

Nothing here shares code paths with the integrators it checks: polynomial
paths are lifted in closed form, linear ODEs are solved with classical RK4
or with matrix exponentials.
"""

from __future__ import annotations

from math import factorial

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import expm

from .grids import TimeGrid, TwoIndexMap, make_uniform_grid
from .roughpath import Level2RoughPath


class PolynomialPath:
    """``x^i(t) = Σ_n c[i][n] t^n`` with its exact level-2 iterated integrals."""

    def __init__(self, coeffs):
        self.polys = [Polynomial(np.asarray(c, dtype=float)) for c in coeffs]
        self.ell = len(self.polys)
        # Q[j][k] is an antiderivative of x^k (x^j)'
        self.Q = [[(pk * pj.deriv()).integ() for pk in self.polys] for pj in self.polys]

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([p(t) for p in self.polys], axis=-1)

    def velocity(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([p.deriv()(t) for p in self.polys], axis=-1)

    def X(self, t, s) -> np.ndarray:
        return self(t) - self(s)

    def XX(self, t, s) -> np.ndarray:
        """``XX[j, k] = ∫_s^t (x^k_r - x^k_s) dx^j_r``."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        xs = self(s)
        inc = self(t) - xs
        q = np.empty(t.shape + (self.ell, self.ell))
        for j in range(self.ell):
            for k in range(self.ell):
                q[..., j, k] = self.Q[j][k](t) - self.Q[j][k](s)
        return q - inc[..., :, None] * xs[..., None, :]

    def lift(self, grid: TimeGrid, gamma_nominal: float = 1.0) -> Level2RoughPath:
        X = TwoIndexMap(grid, self.X, (self.ell,), increment=True)
        XX = TwoIndexMap(grid, self.XX, (self.ell, self.ell), increment=True)
        return Level2RoughPath(grid, X, XX, gamma_nominal, True, None)


def rk4_linear(generators: np.ndarray, f0, T: float) -> np.ndarray:
    """Classical RK4 for ``f' = G(t) f`` on ``[0, T]``; returns ``f_T``.

    ``generators`` holds ``G`` at the ``2K + 1`` half-step nodes of a
    ``K``-step uniform grid.
    """
    f = np.asarray(f0, dtype=float).copy()
    steps = (len(generators) - 1) // 2
    h = T / steps
    for k in range(steps):
        g0, gm, g1 = generators[2 * k], generators[2 * k + 1], generators[2 * k + 2]
        k1 = g0 @ f
        k2 = gm @ (f + h / 2 * k1)
        k3 = gm @ (f + h / 2 * k2)
        k4 = g1 @ (f + h * k3)
        f = f + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return f


def rough_linear_reference(path: PolynomialPath, V, f0, T: float, steps: int,
                           B=None) -> np.ndarray:
    """``f_T`` for ``f' = (ẋ^i(t) V_i + B) f`` by RK4 with ``steps`` steps."""
    V = np.asarray(V, dtype=float)
    t = np.linspace(0.0, T, 2 * steps + 1)
    gens = np.einsum("pi,iab->pab", path.velocity(t), V)
    if B is not None:
        gens = gens + np.asarray(B, dtype=float)
    return rk4_linear(gens, f0, T)


def piecewise_linear_flow(base_values: np.ndarray, V) -> np.ndarray:
    """Exact flow of ``f' = ẋ^i V_i f`` along a piecewise-linear path: ``Π_k expm(Δx_k^i V_i)``."""
    V = np.asarray(V, dtype=float)
    out = np.eye(V.shape[1])
    for dx in np.diff(np.asarray(base_values, dtype=float), axis=0):
        out = expm(np.einsum("i,iab->ab", dx, V)) @ out
    return out


def linear_drift_solution(v: np.ndarray, B: np.ndarray, f0, T: float) -> np.ndarray:
    """``f_T = expm(T (v + B)) f0``: the drifted equation driven by ``x_t = t``."""
    return expm(T * (np.asarray(v, float) + np.asarray(B, float))) @ np.asarray(f0, float)


def scalar_series_levels(v: float, x_inc: float, n_max: int) -> np.ndarray:
    """``(v X)^n / n!`` for ``n = 1..n_max``."""
    return np.array([(v * x_inc) ** k / factorial(k) for k in range(1, n_max + 1)])


def uniform_polynomial_lift(coeffs, T: float, M: int, gamma_nominal: float = 1.0):
    """Convenience: path object and its lift on a uniform grid."""
    p = PolynomialPath(coeffs)
    return p, p.lift(make_uniform_grid(T, M), gamma_nominal)


def transport_closed_form(field_id: str, f0, x_inc: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Exact ``f_t`` for fields with an explicit flow, given ``X_{t0}`` per time.

    ``const1d``/``const2d``: ``f_t(x) = f_0(x + v X_t)``;
    ``shear``: ``f_t(x) = f_0(x_1 + X_t sin x_2, x_2)``;
    ``compressible1d``: ``f_t(x) = f_0(ψ)`` with ``tan(ψ/2) = e^{X_t} tan(x/2)``, the
    time-``X_t`` flow of ``ψ' = sin ψ``.
    ``x_inc`` has shape ``(nt,)`` (one driving component); the result has
    shape ``(nt,) + points.shape[:-1]``.
    """
    x_inc = np.asarray(x_inc, dtype=float).reshape(-1)
    out = []
    for x in x_inc:
        if field_id == "const1d":
            y = points + x
        elif field_id == "const2d":
            y = points + x * np.array([1.0, 0.5])
        elif field_id == "compressible1d":
            y = 2.0 * np.arctan2(np.sin(points / 2) * np.exp(x), np.cos(points / 2))
        elif field_id == "shear":
            y = np.stack([points[..., 0] + x * np.sin(points[..., 1]), points[..., 1]], axis=-1)
        else:
            raise KeyError(f"no closed form for field {field_id!r}")
        out.append(f0.value(y))
    return np.stack(out)


CLOSED_FORM_FIELDS = ("const1d", "const2d", "shear", "compressible1d")
