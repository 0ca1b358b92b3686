import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.linalg import expm

from roughdrive.library import get_datum
from roughdrive.oracles import (
    PolynomialPath, linear_drift_solution, piecewise_linear_flow, rk4_linear,
    rough_linear_reference, scalar_series_levels, transport_closed_form,
)

coeffs = st.lists(st.lists(st.floats(-2, 2), min_size=1, max_size=4), min_size=1, max_size=3)


@given(coeffs, st.floats(0, 1), st.floats(0, 1))
def test_polynomial_xx_against_quadrature(c, a, b):
    s, t = min(a, b), max(a, b)
    p = PolynomialPath(c)
    XX = p.XX(t, s)
    for j in range(p.ell):
        for k in range(p.ell):
            val = quad(lambda r: (p.polys[k](r) - p.polys[k](s)) * p.polys[j].deriv()(r), s, t)[0]
            assert XX[j, k] == pytest.approx(val, abs=1e-10)


def test_polynomial_xx_symbolic():
    r, s, t = sp.symbols("r s t")
    x = [r, r ** 2]
    val = sp.integrate((x[0] - x[0].subs(r, s)) * sp.diff(x[1], r), (r, s, t))
    p = PolynomialPath([[0, 1], [0, 0, 1]])
    assert p.XX(0.9, 0.2)[1, 0] == pytest.approx(float(val.subs({s: 0.2, t: 0.9})), abs=1e-14)


def test_polynomial_lift_is_exact():
    from roughdrive.roughpath import chen_defect, geometricity_defect
    from roughdrive.grids import make_uniform_grid
    rp = PolynomialPath([[0, 1, -1], [0, 0, 0, 2]]).lift(make_uniform_grid(1.0, 32))
    assert chen_defect(rp) < 1e-13 and geometricity_defect(rp) < 1e-13


def test_rk4_constant_generator():
    G = np.array([[0.0, 1.0], [-2.0, -0.1]])
    gens = np.broadcast_to(G, (2 * 200 + 1, 2, 2))
    f = rk4_linear(gens, [1.0, 0.0], 2.0)
    np.testing.assert_allclose(f, expm(2.0 * G) @ [1.0, 0.0], atol=1e-7)


def test_rough_reference_linear_path_is_expm():
    V = np.array([[[0.1, 0.3], [-0.2, 0.05]]])
    B = np.array([[0.2, 0.1], [-0.3, 0.0]])
    p = PolynomialPath([[0, 1]])
    got = rough_linear_reference(p, V, [1.0, -0.5], 1.0, 200, B)
    np.testing.assert_allclose(got, linear_drift_solution(V[0], B, [1.0, -0.5], 1.0), atol=1e-12)


def test_piecewise_linear_flow_commuting_case():
    V = np.array([[[0.0, 1.0], [-1.0, 0.0]]])
    vals = np.array([[0.0], [0.4], [-0.1], [0.7]])
    np.testing.assert_allclose(piecewise_linear_flow(vals, V), expm(0.7 * V[0]), atol=1e-14)


def test_scalar_series():
    lv = scalar_series_levels(0.5, 1.2, 10)
    assert lv[0] == pytest.approx(0.6) and lv[2] == pytest.approx(0.6 ** 3 / 6)
    assert 1 + lv.sum() == pytest.approx(np.exp(0.6), abs=1e-9)


def test_transport_closed_forms():
    pts = np.array([[0.1, 0.2], [3.0, 5.0]])
    f0 = get_datum("mix", 2)
    out = transport_closed_form("shear", f0, [0.0, 0.5], pts)
    np.testing.assert_allclose(out[0], f0.value(pts))
    y = np.stack([pts[:, 0] + 0.5 * np.sin(pts[:, 1]), pts[:, 1]], axis=-1)
    np.testing.assert_allclose(out[1], f0.value(y))
    out = transport_closed_form("const2d", f0, [1.0], pts)
    np.testing.assert_allclose(out[0], f0.value(pts + [1.0, 0.5]))
    with pytest.raises(KeyError):
        transport_closed_form("pair2d", f0, [1.0], pts)
