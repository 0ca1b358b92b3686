import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from roughdrive.library import (
    DEFAULT_BANK, datum_from_expr, get_bank, get_datum, get_field, get_hmap, get_matrix_driver,
    get_testfn, list_fields, list_matrix_drivers, list_testfns, matrix_driver_spec,
)


def test_listings_cover_lookups():
    for fid in list_fields():
        V = get_field(fid)
        assert V.ell >= 1 and V.d in (1, 2)
    for key in list_testfns():
        name, d = key.split(" (d=")
        assert get_testfn(name, int(d.rstrip(")"))).name == name
    for name in list_matrix_drivers():
        assert get_matrix_driver(name).N == 2


@pytest.mark.parametrize("call", [lambda: get_field("nope"), lambda: get_testfn("nope", 1),
                                  lambda: get_datum("mix", 3), lambda: get_hmap("nope"),
                                  lambda: matrix_driver_spec("nope")])
def test_unknown_ids(call):
    with pytest.raises(KeyError):
        call()


def test_divergence_flags():
    x = np.random.default_rng(0).uniform(0, 2 * np.pi, (50, 2))
    for fid in list_fields():
        V = get_field(fid)
        pts = x[:, :V.d]
        worst = max(np.max(np.abs(f.div(pts))) for f in V.fields)
        assert (worst < 1e-12) == V.divergence_free


def test_bank_and_data():
    bank = get_bank(2)
    assert bank.ids() == list(DEFAULT_BANK)
    assert bank.get("bump").d == 2
    assert set(bank.w3inf_norms()) == set(DEFAULT_BANK)
    assert get_datum("const", 1).value(np.zeros((1, 1)))[0] == pytest.approx(1.5)
    f = datum_from_expr("g", "cos(x1)**2", 1)
    assert f.value(np.array([[0.0]]))[0] == pytest.approx(1.0)


@given(st.sampled_from(["identity", "square", "cube", "sech2", "const"]), st.floats(-3, 3))
def test_hmap_derivatives_match_sympy(name, y0):
    H = get_hmap(name)
    y = sp.Symbol("y")
    expr = {"identity": y, "square": y ** 2, "cube": y ** 3, "sech2": 1 - sp.tanh(y) ** 2,
            "const": sp.Integer(2)}[name]
    assert H(np.array([y0]))[0] == pytest.approx(float(expr.subs(y, y0)))
    for k, dk in enumerate(H.derivs, start=1):
        assert dk(np.array([y0]))[0] == pytest.approx(float(sp.diff(expr, y, k).subs(y, y0)), abs=1e-12)


def test_matrix_driver_specs():
    s = matrix_driver_spec("smooth-pair")
    assert s.smooth and s.build().grid.M == 64 and s.build(16).grid.M == 16
    b = matrix_driver_spec("brownian-pair")
    assert not b.smooth and b.seed == 7
    d1, d2 = b.build(), b.build()
    assert np.array_equal(d1.A1.table(), d2.A1.table())
