import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughdrive.errors import EstimationError, GridError
from roughdrive.grids import (
    Path, TimeGrid, TwoIndexMap, WeightedNormParams, delta1, delta2, dyadic_scale_sups,
    estimate_holder_exponent, fit_holder_exponent, make_uniform_grid, weighted_holder_norm2,
    weighted_holder_norm3, weighted_path_norm,
)


def test_uniform_grid_nodes():
    g = make_uniform_grid(2.0, 8)
    assert g.M == 8 and len(g) == 9 and g.T == 2.0
    assert g.is_uniform and g.spacing == pytest.approx(0.25)
    assert g.nodes[-1] == 2.0


@pytest.mark.parametrize("nodes", [[0.0], [0.1, 1.0], [0.0, 0.5, 0.5, 1.0], [0.0, 1.0, 0.5]])
def test_bad_grids_rejected(nodes):
    with pytest.raises(GridError):
        TimeGrid(nodes)


@pytest.mark.parametrize("T, M", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5)])
def test_bad_uniform_parameters(T, M):
    with pytest.raises(GridError):
        make_uniform_grid(T, M)


def test_index_of_and_contains():
    g = make_uniform_grid(1.0, 8)
    assert list(g.index_of([0.0, 0.5, 1.0])) == [0, 4, 8]
    with pytest.raises(GridError):
        g.index_of(0.3)
    assert g.contains(make_uniform_grid(1.0, 4))
    assert not make_uniform_grid(1.0, 4).contains(g)


def test_nodes_are_read_only():
    g = make_uniform_grid(1.0, 4)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0


def test_path_lookup():
    g = make_uniform_grid(1.0, 4)
    p = Path(g, g.nodes ** 2)
    assert p(0.5) == pytest.approx(0.25)
    with pytest.raises(GridError):
        p(0.3)
    q = Path.from_function(g, lambda t: t ** 2)
    assert q.continuous and q(0.3) == pytest.approx(0.09)
    with pytest.raises(GridError):
        Path(g, np.zeros(3))


def test_two_index_map_table_and_rule_agree():
    g = make_uniform_grid(1.0, 6)
    a = TwoIndexMap(g, lambda t, s: np.sin(t) * s)
    tab = a.table()
    b = TwoIndexMap.from_table(g, tab)
    i, j = np.tril_indices(7)
    np.testing.assert_allclose(a.at(i, j), b.at(i, j))
    assert np.all(tab[np.triu_indices(7, 1)] == 0)
    with pytest.raises(GridError):
        TwoIndexMap.from_table(g, np.zeros((3, 3)))


def test_map_arithmetic():
    g = make_uniform_grid(1.0, 4)
    a = TwoIndexMap(g, lambda t, s: t - s)
    b = TwoIndexMap(g, lambda t, s: t * s)
    assert (a + b)(0.75, 0.25) == pytest.approx(0.5 + 0.1875)
    assert (a - b)(0.75, 0.25) == pytest.approx(0.5 - 0.1875)
    assert (2 * a)(1.0, 0.0) == pytest.approx(2.0)
    assert (-a)(1.0, 0.0) == pytest.approx(-1.0)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=12))
def test_delta2_of_increments_vanishes(vals):
    g = make_uniform_grid(1.0, len(vals) - 1)
    d = delta2(delta1(Path(g, np.asarray(vals))))
    n = len(vals)
    i, k, j = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    keep = (j <= k) & (k <= i)
    assert np.max(np.abs(d.at(i[keep], k[keep], j[keep]))) < 1e-12


def test_delta2_of_product_map():
    # a_ts = s (t - s): δa_tus = -(u - s)(t - u)
    g = make_uniform_grid(1.0, 4)
    d = delta2(TwoIndexMap(g, lambda t, s: s * (t - s)))
    assert d(1.0, 0.5, 0.25) == pytest.approx(-(0.25 * 0.5))


def test_weighted_norms():
    g = make_uniform_grid(1.0, 8)
    p = Path(g, np.ones(9))
    assert weighted_path_norm(p, WeightedNormParams(1e9, 0.5)) == pytest.approx(1.0)
    assert weighted_path_norm(p, WeightedNormParams(0.5, 0.5)) == pytest.approx(1.0)
    a = TwoIndexMap(g, lambda t, s: (t - s) ** 0.5)
    assert weighted_holder_norm2(a, WeightedNormParams(1e9, 0.5)) == pytest.approx(1.0)
    b = delta2(TwoIndexMap(g, lambda t, s: s * (t - s)))
    # |δa_tus| = (u-s)(t-u) <= (t-s)^2 / 4, attained at midpoints
    assert weighted_holder_norm3(b, WeightedNormParams(1e9, 2.0)) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        WeightedNormParams(0.0, 0.5)
    with pytest.raises(ValueError):
        WeightedNormParams(1.0, 3.5)


def _power_map_slope(alpha, K, m_min, m_max):
    """Exact fitted slope for ``(t-s)^alpha`` on ``2^K`` steps: bin ``m`` peaks at lag ``2^{K-m+1} - 1``."""
    m = np.arange(m_min, m_max + 1)
    h = 2.0 ** -m
    sup = ((2.0 ** (K - m + 1) - 1) * 2.0 ** -K) ** alpha
    return np.polyfit(np.log(h), np.log(sup), 1)[0]


@given(st.floats(0.2, 2.5), st.floats(0.1, 10.0), st.sampled_from([(2, 6), (3, 8), (1, 4)]))
def test_exponent_of_power_map(alpha, c, window):
    g = make_uniform_grid(1.0, 256)
    a = TwoIndexMap(g, lambda t, s: c * (t - s) ** alpha)
    rep = estimate_holder_exponent(a, *window)
    assert rep.slope == pytest.approx(_power_map_slope(alpha, 8, *window), rel=1e-9)
    if window[1] <= 6:
        # bins holding many lags: close to the true exponent
        assert rep.slope == pytest.approx(alpha, rel=0.05)


def test_finest_bin_inflates_slope():
    # the finest bin holds lag 1 only, so a window ending there overstates the exponent
    g = make_uniform_grid(1 / 16, 1024)
    a = TwoIndexMap(g, lambda t, s: (t - s) ** 1.2)
    slope = estimate_holder_exponent(a, 5, 10).slope
    assert slope == pytest.approx(_power_map_slope(1.2, 10, 5, 10), rel=1e-9)
    assert slope / 1.2 == pytest.approx(1.174, abs=1e-3)


def test_scale_sups_use_lag_bands():
    g = make_uniform_grid(1.0, 16)
    a = TwoIndexMap(g, lambda t, s: t - s)
    sups = dyadic_scale_sups(a, 1, 4)
    # band [h, 2h) with h = 2^-m: largest lag below 2h is 2h - 1/16
    np.testing.assert_allclose(sups, [1.0 - 1 / 16 if m == 1 else 2 * 2.0 ** -m - 1 / 16
                                      for m in range(1, 5)])


def test_fit_needs_two_scales():
    with pytest.raises(EstimationError):
        fit_holder_exponent([1, 2, 3], [0.0, 0.0, 1.0], 1.0)
    rep = fit_holder_exponent([1, 2, 3], [0.0, 0.5, 0.25], 1.0)
    assert rep.scales_used == [2, 3] and rep.slope == pytest.approx(1.0)
    assert set(rep.to_dict()) == {"slope", "intercept", "scales", "scales_used", "per_scale_sup"}
