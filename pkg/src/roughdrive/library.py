"""Built-in vector fields, test functions, initial data and renormalizing maps."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sp

from .field_space import AnalyticFunction, TestFunctionBank, VectorField, VectorFieldSet, torus_symbols
from .grids import make_uniform_grid
from .matrix_driver import BoundedDriver, driver_from_roughpath
from .oracles import PolynomialPath
from .roughpath import lift_piecewise_linear, sample_brownian_pl

# field id -> (d, list of component expression lists, divergence_free, description)
_FIELDS = {
    "const1d": (1, [["1"]], True, "constant unit field on the circle"),
    "const2d": (2, [["1", "1/2"]], True, "constant field (1, 1/2) on the 2-torus"),
    "shear": (2, [["sin(x2)", "0"]], True, "shear v = (sin x2, 0), divergence-free"),
    "compressible1d": (1, [["sin(x1)"]], False, "compressible v = sin x on the circle"),
    "compressible2d": (2, [["sin(x1)", "0"]], False, "compressible v = (sin x1, 0)"),
    "pair2d": (2, [["sin(x2)", "0"], ["0", "sin(x1)"]], True,
               "two divergence-free fields (sin x2, 0) and (0, sin x1)"),
}

# test functions per dimension
_TESTFNS = {
    1: {
        "trig1": "cos(x1)",
        "trig2": "sin(2*x1) + cos(3*x1)/2",
        "bump": "exp(2*cos(x1 - 1))",
        "one": "1",
    },
    2: {
        "trig1": "cos(x1 + x2 - 1/2)",
        "trig2": "sin(x1 + 2*x2) + cos(2*x1 - x2)/2",
        "bump": "exp(cos(x1 - 1) + cos(x2 - 2))",
        "one": "1",
    },
}
DEFAULT_BANK = ("trig1", "trig2", "bump")

_DATA = {
    1: {
        "sin": "sin(x1)",
        "mix": "sin(x1) + cos(2*x1)/2",
        "bump": "exp(cos(x1 - 1/2)) / E",
        "square": "tanh(20*sin(x1))",
        "zero": "0",
        "const": "3/2",
    },
    2: {
        "sin": "sin(x1)",
        "mix": "sin(x1) + cos(2*x2 + 1)/2 + 3*sin(x1 + x2 + 1/2)/10",
        "bump": "exp(cos(x1 - 1/2) + cos(x2)) / E**2",
        "square": "tanh(20*sin(x1))",
        "zero": "0",
        "const": "3/2",
    },
}


def list_fields() -> dict:
    return {k: v[3] for k, v in _FIELDS.items()}


def list_testfns() -> dict:
    return {f"{name} (d={d})": expr for d, fns in _TESTFNS.items() for name, expr in fns.items()}


@lru_cache(maxsize=None)
def get_field(field_id: str) -> VectorFieldSet:
    if field_id not in _FIELDS:
        raise KeyError(f"unknown field {field_id!r}; known: {sorted(_FIELDS)}")
    d, comps, div_free, desc = _FIELDS[field_id]
    fields = [VectorField.from_sympy(f"{field_id}[{i}]", c, d) for i, c in enumerate(comps)]
    return VectorFieldSet(field_id, fields, "C3b", div_free, desc)


@lru_cache(maxsize=None)
def get_testfn(name: str, d: int) -> AnalyticFunction:
    try:
        expr = _TESTFNS[d][name]
    except KeyError:
        raise KeyError(f"unknown test function {name!r} for d={d}") from None
    return AnalyticFunction.from_sympy(name, expr, d)


def get_bank(d: int, names=DEFAULT_BANK) -> TestFunctionBank:
    return TestFunctionBank([get_testfn(n, d) for n in names])


@lru_cache(maxsize=None)
def get_datum(name: str, d: int) -> AnalyticFunction:
    try:
        expr = _DATA[d][name]
    except KeyError:
        raise KeyError(f"unknown initial datum {name!r} for d={d}") from None
    return AnalyticFunction.from_sympy(name, expr, d)


def datum_from_expr(name: str, expr: str, d: int) -> AnalyticFunction:
    return AnalyticFunction.from_sympy(name, expr, d)


@dataclass(eq=False)
class ScalarMap:
    """A scalar ``H: ℝ -> ℝ`` with its first three derivatives."""

    name: str
    h: Callable
    derivs: tuple

    def __call__(self, x):
        return self.h(x)


_HMAPS = {
    "identity": "y",
    "square": "y**2",
    "cube": "y**3",
    "sech2": "1 - tanh(y)**2",
    "const": "2",
}


@lru_cache(maxsize=None)
def get_hmap(name: str) -> ScalarMap:
    if name not in _HMAPS:
        raise KeyError(f"unknown renormalizing map {name!r}; known: {sorted(_HMAPS)}")
    y = sp.Symbol("y", real=True)
    expr = sp.sympify(_HMAPS[name], locals={"y": y})
    fns = [sp.lambdify(y, sp.diff(expr, y, k), modules="numpy") for k in range(4)]

    def wrap(fn):
        def g(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(fn(x), x.shape).astype(float)
        return g

    wrapped = [wrap(f) for f in fns]
    return ScalarMap(name, wrapped[0], tuple(wrapped[1:]))


# ---------------------------------------------------------- matrix drivers

PAIR_MATRICES = np.array([
    [[0.1, 0.3], [-0.2, 0.05]],
    [[-0.15, 0.1], [0.25, -0.1]],
])
ROTATION = np.array([[[0.0, 1.0], [-1.0, 0.0]]])
NILPOTENT = np.array([[[0.0, 1.0], [0.0, 0.0]]])

_MATRIX_DRIVERS = {
    "smooth-pair": ("lift of x = (t, t^2) on [0, 1], M = 64, two generic 2x2 generators",
                    [[0.0, 1.0], [0.0, 0.0, 1.0]], None, PAIR_MATRICES, 64),
    "linear": ("x = t on [0, 1], M = 64, one generic 2x2 generator",
               [[0.0, 1.0]], None, PAIR_MATRICES[:1], 64),
    "rotation": ("x = t on [0, 1], M = 64, skew generator (exact rotation)",
                 [[0.0, 1.0]], None, ROTATION, 64),
    "brownian-pair": ("Brownian PL lift (seed 7, M = 256, gamma = 0.4), two generic 2x2 generators",
                      None, 7, PAIR_MATRICES, 256),
    "nilpotent": ("Brownian PL lift (seed 11, M = 256), nilpotent generator",
                  None, 11, NILPOTENT, 256),
    "zero": ("Brownian PL lift (seed 3, M = 64), zero generator",
             None, 3, np.zeros((1, 2, 2)), 64),
}


@dataclass(frozen=True, eq=False)
class MatrixDriverSpec:
    """A shipped driver: generators plus either a polynomial path or a Brownian seed."""

    name: str
    description: str
    generators: np.ndarray
    path: PolynomialPath | None
    seed: int | None
    M: int

    @property
    def smooth(self) -> bool:
        return self.path is not None

    def build(self, M: int | None = None) -> BoundedDriver:
        M = M or self.M
        if self.path is not None:
            rp = self.path.lift(make_uniform_grid(1.0, M), 0.5)
        else:
            base = sample_brownian_pl(self.seed, 1.0, M, self.generators.shape[0])
            rp = lift_piecewise_linear(base, 0.4)
        return driver_from_roughpath(rp, self.generators)


def list_matrix_drivers() -> dict:
    return {k: v[0] for k, v in _MATRIX_DRIVERS.items()}


def matrix_driver_spec(name: str) -> MatrixDriverSpec:
    if name not in _MATRIX_DRIVERS:
        raise KeyError(f"unknown matrix driver {name!r}; known: {sorted(_MATRIX_DRIVERS)}")
    desc, coeffs, seed, V, M = _MATRIX_DRIVERS[name]
    path = None if coeffs is None else PolynomialPath(coeffs)
    return MatrixDriverSpec(name, desc, np.asarray(V, dtype=float), path, seed, M)


def get_matrix_driver(name: str, M: int | None = None) -> BoundedDriver:
    """A shipped 2x2 driver; ``M`` overrides the default grid size."""
    return matrix_driver_spec(name).build(M)


__all__ = [
    "DEFAULT_BANK", "MatrixDriverSpec", "NILPOTENT", "PAIR_MATRICES", "ROTATION", "ScalarMap", "datum_from_expr", "get_bank", "get_datum", "get_field",
    "get_hmap", "get_matrix_driver", "get_testfn", "list_matrix_drivers", "list_fields", "list_testfns", "matrix_driver_spec", "torus_symbols",
]
