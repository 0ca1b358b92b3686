import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughdrive.errors import GridError, SewingDivergence
from roughdrive.grids import Path, TwoIndexMap, delta1, make_uniform_grid
from roughdrive.sewing import dyadic_sum, riemann_sum_defect, sew, sew_on_grid


def parabola_germ(grid):
    return TwoIndexMap(grid, lambda t, s: s * (t - s))


def test_sewn_parabola_matches_closed_form():
    g = make_uniform_grid(1.0, 16)
    A = sew(parabola_germ(g), 2.0, 12)
    # each interval's dyadic sum misses (t-s)^2 / 2^(L+1)
    np.testing.assert_allclose(A.values, g.nodes ** 2 / 2, atol=2.0 ** -12)
    assert A(0.3) == pytest.approx(0.045, abs=2.0 ** -12)


def test_dyadic_sum_exact_value():
    # Σ over 2^n pieces of s_i (t_i+1 - s_i) on [0, 1] = (1 - 2^-n) / 2
    g = make_uniform_grid(1.0, 1)
    for n in range(6):
        assert dyadic_sum(parabola_germ(g), [0.0], [1.0], n)[0] == pytest.approx((1 - 2.0 ** -n) / 2)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=10))
def test_additive_germ_is_a_fixed_point(vals):
    g = make_uniform_grid(1.0, len(vals) - 1)
    f = Path(g, np.asarray(vals))
    A = sew(TwoIndexMap(g, lambda t, s: np.interp(t, g.nodes, vals) - np.interp(s, g.nodes, vals)),
            2.0, 4)
    np.testing.assert_allclose(A.values, f.values - f.values[0], atol=1e-12)


def test_young_integral_of_smooth_paths():
    # Young integral ∫ sin(r) d(r^3) against quadrature
    g = make_uniform_grid(1.0, 8)
    germ = TwoIndexMap(g, lambda t, s: np.sin(s) * (t ** 3 - s ** 3))
    A = sew(germ, 2.0, 14)
    from scipy.integrate import quad
    exact = quad(lambda r: np.sin(r) * 3 * r ** 2, 0, 1)[0]
    assert A.values[-1] == pytest.approx(exact, abs=1e-4)


def test_riemann_defect_first_order():
    g = make_uniform_grid(1.0, 16)
    a = parabola_germ(g)
    A = sew(a, 2.0, 14)
    defects = [riemann_sum_defect(a, A, make_uniform_grid(1.0, m), 2.0) for m in (4, 8, 16, 32)]
    ratios = np.array(defects[:-1]) / np.array(defects[1:])
    np.testing.assert_allclose(ratios, 2.0, rtol=0.02)
    # explicit partition: δA = 1/4, Riemann sum = 3/16
    assert riemann_sum_defect(a, A, [0.25, 0.5, 0.75], 2.0) == pytest.approx(0.0625, abs=1e-5)


def test_sew_on_grid_is_riemann_sum():
    g = make_uniform_grid(1.0, 8)
    A = sew_on_grid(parabola_germ(g), make_uniform_grid(1.0, 2))
    h = 1 / 8
    expect = [0.0, sum(k * h * h for k in range(4)), sum(k * h * h for k in range(8))]
    np.testing.assert_allclose(A.values, expect)
    with pytest.raises(GridError):
        sew_on_grid(parabola_germ(g), make_uniform_grid(1.0, 3))


def test_errors():
    g = make_uniform_grid(1.0, 4)
    with pytest.raises(ValueError):
        sew(parabola_germ(g), 1.0)
    with pytest.raises(ValueError):
        sew(parabola_germ(g), 2.0, 0)
    with pytest.raises(GridError):
        sew(delta1(Path(g, np.arange(5.0))), 2.0)  # table-backed, not evaluable off-grid
    A = sew(parabola_germ(g), 2.0)
    with pytest.raises(GridError):
        riemann_sum_defect(parabola_germ(g), A, [0.5, 0.2], 2.0)
    with pytest.raises(ValueError):
        riemann_sum_defect(parabola_germ(g), A, [0.0, 1.0], 0.5)


def test_divergent_germ_reported():
    # δa of order |t-s|^{1/2}: dyadic sums grow without bound
    g = make_uniform_grid(1.0, 1)
    with pytest.raises(SewingDivergence):
        sew(TwoIndexMap(g, lambda t, s: np.sqrt(t - s)), 2.0, 12)
