import numpy as np
import pytest

from roughdrive.errors import GridError, PreconditionError, StepSizeError
from roughdrive.field_space import TorusGrid
from roughdrive.grids import Path, make_uniform_grid
from roughdrive.library import get_bank, get_datum, get_field, get_hmap, get_testfn
from roughdrive.oracles import transport_closed_form
from roughdrive.parallel import ENV_VAR
from roughdrive.roughpath import BasePath, lift_piecewise_linear, sample_brownian_pl
from roughdrive.transport import (
    characteristics_solve, conservation_report, default_scales, gronwall_identity_residual,
    l2_norms, maximum_principle_report, renormalization_check, solution_distance,
    stability_sweep, transport_solve, weak_residuals,
)


def solve(field_id, datum="mix", seed=1, M=256, T=1.0, times_M=16, n=32, substeps=256,
          mode="analytic"):
    V = get_field(field_id)
    rp = lift_piecewise_linear(sample_brownian_pl(seed, T, M, V.ell), 0.4)
    sol = transport_solve(V, rp, get_datum(datum, V.d), make_uniform_grid(T, times_M), substeps,
                          TorusGrid(V.d, n), mode)
    return rp, sol


def closed_form_error(rp, sol, field_id):
    x = rp.X(sol.times.nodes, np.zeros(len(sol.times)))[:, 0]
    return np.max(np.abs(transport_closed_form(field_id, sol.datum, x, sol.grid.points())
                         - sol.snapshots))


@pytest.mark.parametrize("field_id", ["const1d", "const2d", "shear"])
def test_exact_for_explicit_flows(field_id):
    # the scheme is exact when ∇v · v vanishes along straight characteristics
    rp, sol = solve(field_id)
    assert closed_form_error(rp, sol, field_id) < 1e-12


def test_compressible_converges_to_exact_flow():
    errs = []
    for S in (256, 1024, 4096):
        rp, sol = solve("compressible1d", M=4096, n=64, substeps=S)
        errs.append(closed_form_error(rp, sol, "compressible1d"))
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3
    assert errs[-1] < 5e-4


def test_initial_snapshot_is_datum():
    _, sol = solve("pair2d")
    np.testing.assert_allclose(sol.snapshots[0], sol.datum.sample(sol.grid).values, atol=0)


@pytest.mark.parametrize("field_id", ["const1d", "compressible1d", "compressible2d", "shear", "pair2d"])
@pytest.mark.parametrize("datum", ["mix", "square", "bump"])
def test_maximum_principle(field_id, datum):
    _, sol = solve(field_id, datum, n=16 if field_id in ("shear", "pair2d", "compressible2d") else 64)
    assert maximum_principle_report(sol).max_drift <= 1e-12


def test_interpolated_datum_overshoots():
    # negative control: spline interpolation of a steep datum breaks the bound
    _, sol = solve("const1d", "square", M=1024, n=64, substeps=1024, mode="interpolated")
    assert maximum_principle_report(sol, get_datum("square", 1)).max_drift > 1e-2


def test_conservation_divergence_free():
    _, sol = solve("pair2d", n=32)
    rep = conservation_report(sol)
    assert rep.max_drift < 1e-3 and not rep.zero_norm
    _, zero = solve("shear", "zero", n=16)
    assert conservation_report(zero).zero_norm
    _, comp = solve("compressible1d")
    with pytest.raises(PreconditionError):
        conservation_report(comp)


def test_characteristics_solve_matches_feet():
    V = get_field("shear")
    rp = lift_piecewise_linear(sample_brownian_pl(2, 1.0, 64, 1))
    g = TorusGrid(2, 16)
    feet = characteristics_solve(V, rp, 0.5, 32, g)
    sol = transport_solve(V, rp, get_datum("mix", 2), make_uniform_grid(0.5, 1), 32, g)
    np.testing.assert_allclose(feet, sol.feet[1], atol=1e-14)
    assert np.all((feet >= 0) & (feet < 2 * np.pi))
    with pytest.raises(GridError):
        characteristics_solve(V, rp, 0.5, 32, TorusGrid(1, 16))


def test_step_size_guard():
    base = sample_brownian_pl(1, 1.0, 16, 1)
    wild = BasePath(1, Path(base.grid, 40 * base.values), 1)
    with pytest.raises(StepSizeError):
        transport_solve(get_field("const1d"), lift_piecewise_linear(wild), get_datum("mix", 1),
                        make_uniform_grid(1.0, 2), 2, TorusGrid(1, 16))


def test_time_grid_must_align_with_steps():
    with pytest.raises(GridError):
        solve("const1d", times_M=16, substeps=24)


def test_threads_do_not_change_results(monkeypatch):
    monkeypatch.setenv(ENV_VAR, "1")
    _, a = solve("pair2d", n=64, substeps=64)
    monkeypatch.setenv(ENV_VAR, "4")
    _, b = solve("pair2d", n=64, substeps=64)
    assert np.array_equal(a.snapshots, b.snapshots)


def test_weak_residual_ladder_small_case():
    rp, sol = solve("const1d", M=1024, T=1 / 16, times_M=1024, n=64, substeps=1024)
    wr = weak_residuals(sol, rp, sol.V, get_bank(1), default_scales(sol.times))
    for r in wr.records():
        assert r["slope"] >= r["gamma_target"] - 0.1
        assert len(r["scales_used"]) >= 4


def test_remainder_ladder_over_single_steps():
    # constant field: ⟨f_t, cos⟩ is a trig polynomial in X_t, so over one step the
    # increment, flat and sharp remainders scale like |X|, |X|^2 and |X|^3
    rp, sol = solve("const1d", M=64, times_M=64, n=32, substeps=64)
    pr = weak_residuals(sol, rp, sol.V, get_bank(1, ("trig1",)), (1, 5)).per_phi["trig1"]
    k = np.arange(64)
    inc, flat, sharp = (np.max(np.abs(m.at(k + 1, k))) for m in (pr.increment, pr.flat, pr.sharp))
    x = np.max(np.abs(rp.X.at(k + 1, k)))
    assert inc <= np.pi * x and flat <= np.pi * x ** 2 and sharp <= np.pi * x ** 3
    assert sharp < flat < inc


def test_renormalization_identity_and_constant():
    rp, sol = solve("shear", M=256, times_M=256, n=16, substeps=256, T=1 / 16)
    bank = get_bank(2)
    plain = weak_residuals(sol, rp, sol.V, bank, (3, 8))
    ident = renormalization_check(sol, get_hmap("identity"), rp, sol.V, bank, (3, 8))
    for name in bank.ids():
        np.testing.assert_allclose(ident.per_phi[name].sharp.table(),
                                   plain.per_phi[name].sharp.table(), atol=1e-15)
    const = renormalization_check(sol, get_hmap("const"), rp, sol.V, bank, (3, 8))
    # constants solve the equation for divergence-free fields exactly
    assert max(np.max(np.abs(const.per_phi[n].sharp.table())) for n in bank.ids()) < 1e-12


@pytest.mark.parametrize("field_id", ["pair2d", "compressible2d"])
def test_gronwall_routes_agree_on_geometric_lift(field_id):
    rp, sol = solve(field_id, M=64, times_M=64, n=32, substeps=64)
    phi = get_testfn("bump", 2)
    a = gronwall_identity_residual(sol, rp, sol.V, phi, "spectral", (1, 5))
    b = gronwall_identity_residual(sol, rp, sol.V, phi, "closed", (1, 5))
    scale = l2_norms(sol)[0] ** 2 * np.max(phi.sample(sol.grid).values)
    assert np.max(np.abs(a.residual.table() - b.residual.table())) / scale < 1e-8
    assert a.resolved == (a.spectral_tail < 1e-8)


def test_gronwall_routes_split_without_geometricity():
    # a symmetric perturbation of XX breaks Sym XX = X⊗X/2; the two routes must then disagree
    rp, sol = solve("pair2d", M=64, times_M=64, n=32, substeps=64)
    bumped = rp.with_XX(rp.XX + rp.XX.__class__(rp.grid, lambda t, s: np.broadcast_to(
        np.eye(2) * (t - s)[:, None, None], (t.size, 2, 2)), (2, 2)))
    phi = get_testfn("trig1", 2)
    a = gronwall_identity_residual(sol, bumped, sol.V, phi, "spectral", (1, 5))
    b = gronwall_identity_residual(sol, bumped, sol.V, phi, "closed", (1, 5))
    assert np.max(np.abs(a.residual.table() - b.residual.table())) > 1e-4
    with pytest.raises(ValueError):
        gronwall_identity_residual(sol, rp, sol.V, phi, "other")


def test_gronwall_constant_test_function_is_norm_increment():
    rp, sol = solve("shear", M=64, times_M=64, n=16, substeps=64)
    r = gronwall_identity_residual(sol, rp, sol.V, get_testfn("one", 2), "spectral", (1, 5))
    n2 = l2_norms(sol) ** 2
    np.testing.assert_allclose(r.residual.table(), np.tril(n2[:, None] - n2[None, :]),
                               atol=1e-10 * n2[0])


def test_solution_distance_refuses_mixed_seeds():
    _, a = solve("const1d", seed=1)
    _, b = solve("const1d", seed=2)
    assert solution_distance(a, a) == 0.0
    with pytest.raises(PreconditionError):
        solution_distance(a, b)


def test_stability_sweep_shape():
    V = get_field("const1d")
    rep = stability_sweep(V, 4, [4, 5, 6], get_datum("mix", 1), 1.0, TorusGrid(1, 32), 64, 4)
    assert rep.table.shape == (3, 3) and np.allclose(rep.table, rep.table.T)
    assert len(rep.consecutive) == 2 and len(rep.max_principle_drift) == 3
    with pytest.raises(ValueError):
        stability_sweep(V, 4, [5, 4], get_datum("mix", 1), 1.0, TorusGrid(1, 32), 64)


def test_solution_csv(tmp_path):
    _, sol = solve("const1d", times_M=2, n=8, substeps=8, M=8)
    sol.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "t,x1,value" and len(rows) == 1 + 3 * 8
    t, x, v = map(float, rows[-1].split(","))
    assert v == sol.snapshots[-1, -1] and t == 1.0
