import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csumsim.analysis import (FIG5_PARAMS, METRICS, NODES, Axis, SweepGrid, basis_paths,
                              cavity_metrics, cavity_response, efficiency_convention_report,
                              path_fidelities, protocol1_basis_fidelities,
                              protocol1_min_fidelity, reflection_coeffs, sweep)
from csumsim.cavity import CavityParams, HeraldAmplitudes
from csumsim.circuits import build_protocol1, build_protocol2, build_protocol3, run
from csumsim.elements import ImperfectionParams
from csumsim.errors import ConfigurationError, DomainError, SingularParameterError

FIG6 = SweepGrid((Axis("g", 0.5, 3.0, 21), Axis("kappa_s", 0.0, 0.1, 21)))


def test_basis_paths_cover_each_arm():
    paths = [basis_paths(c, t) for c in range(4) for t in range(4)]
    assert {m for m, _ in paths} == {"F_m1", "F_m2"}
    assert {n for _, n in paths} == {"F_n11", "F_n12", "F_n2"}
    assert basis_paths(0, 0) == ("F_m1", "F_n12")
    assert basis_paths(1, 0) == ("F_m1", "F_n2")
    assert basis_paths(1, 1) == ("F_m1", "F_n11")
    assert basis_paths(2, 0) == ("F_m2", "F_n12")


def test_path_fidelities_ideal_and_reference():
    ideal = path_fidelities(0, 0, 0, 0)
    assert all(v == 1 for v in ideal.values())
    f = protocol1_basis_fidelities(FIG5_PARAMS.p, FIG5_PARAMS.phi, FIG5_PARAMS.delta, FIG5_PARAMS.xi)
    assert f.shape == (16,)
    assert np.all((0 < f) & (f < 1))
    assert f.min() >= 0.9936
    assert f.min() == pytest.approx(0.9957372, abs=1e-7)


def test_basis_fidelities_vectorize():
    p = np.linspace(0, 1e-3, 5)
    out = protocol1_basis_fidelities(p, 1e-3, 0.05, 0.01)
    assert out.shape == (5, 16)
    for i, pi in enumerate(p):
        assert np.allclose(out[i], protocol1_basis_fidelities(pi, 1e-3, 0.05, 0.01))
    assert np.all(np.diff(protocol1_min_fidelity(p, 0, 0, 0)) < 0)


def test_closed_form_tracks_simulated_protocol1_order_of_magnitude():
    """The simulated imperfect circuit loses fidelity of the same order as the
    multiplicative path model for small imperfections."""
    imp = ImperfectionParams(p=1e-4, phi=1e-3, delta=0.05, xi=0.01)
    sim = run(build_protocol1(imp)).min_fidelity
    model = protocol1_min_fidelity(imp.p, imp.phi, imp.delta, imp.xi)
    assert 1 - sim < 10 * (1 - model)
    assert 1 - model < 10 * (1 - sim)


# --- cavity response --------------------------------------------------------------

def test_reflection_coeffs_vectorized_matches_scalar():
    g = np.array([0.5, 1.2, 2.4])
    r1, r0 = reflection_coeffs(g, 0.05, 0.1)
    for i, gi in enumerate(g):
        assert (r1[i], r0[i]) == pytest.approx(CavityParams(g=gi, kappa_s=0.05).coefficients, abs=1e-15)
    with pytest.raises(SingularParameterError):
        reflection_coeffs(0.0, 0.0, 0.0)


def test_interpolation_nodes_are_unisolvent():
    assert len(NODES) == 10
    assert len(set(NODES)) == 10


@settings(max_examples=8)
@given(g=st.floats(0.3, 4), ks=st.floats(0, 0.3), omega=st.floats(-0.3, 0.3))
def test_response_matches_direct_simulation(g, ks, omega):
    params = CavityParams(g=g, kappa_s=ks, omega=omega)
    m = cavity_metrics(params)
    r2, r3 = run(build_protocol2(params)), run(build_protocol3(params))
    assert m["F2"] == pytest.approx(r2.input_fidelity, abs=1e-12)
    assert m["eta2"] == pytest.approx(r2.efficiency, abs=1e-12)
    assert m["F3"] == pytest.approx(r3.input_fidelity, abs=1e-12)
    assert m["eta3"] == pytest.approx(r3.efficiency, abs=1e-12)
    assert m["eta3_amp"] == pytest.approx(r3.efficiency_amp, abs=1e-12)


def test_response_per_basis_matches_direct():
    params = CavityParams(g=1.1, kappa_s=0.07)
    rep = run(build_protocol2(params))
    resp = cavity_response(2)
    for k in (0, 5, 15):
        out = resp.evaluate(*params.coefficients, input_index=k)
        assert out["fidelity"] == pytest.approx(rep.per_basis_fidelity[k], abs=1e-12)


def test_heralded_efficiency_is_a_cubed():
    vals = sweep(["eta3_amp", "F3"], FIG6)
    r1, r0 = reflection_coeffs(*np.meshgrid(np.linspace(0.5, 3, 21), np.linspace(0, 0.1, 21),
                                            indexing="ij"), 0.1)
    a = np.abs(HeraldAmplitudes.from_coefficients(r1, r0).A)
    assert np.max(np.abs(vals.values["eta3_amp"] - a ** 3)) < 1e-12
    assert np.max(np.abs(vals.values["F3"] - 1)) < 1e-10


def test_reference_values():
    m = cavity_metrics(CavityParams(g=2.4))
    assert m["F2"] == pytest.approx(0.9999766, abs=1e-7)
    assert m["eta2"] == pytest.approx(0.98926, abs=1e-5)
    assert m["eta3"] == pytest.approx(0.97435, abs=1e-5)
    assert m["eta2_amp"] == pytest.approx(np.sqrt(m["eta2"]))
    leaky = cavity_metrics(CavityParams(g=2.4, kappa_s=0.05))
    assert leaky["F2"] == pytest.approx(0.997412, abs=1e-6)


def test_efficiency_convention_report_structure():
    rep = efficiency_convention_report()
    assert len(rep["points"]) == 2
    for row in rep["points"]:
        assert row["probability"]["eta2"] == pytest.approx(row["amplitude"]["eta2"] ** 2)
        assert set(row["probability"]["matches"]) == {"eta2", "eta3"}
    assert rep["matching_convention"] in (None, "probability", "amplitude")


# --- sweep engine -----------------------------------------------------------------

def test_sweep_is_deterministic_across_thread_counts():
    grid = SweepGrid((Axis("g", 0.5, 3.0, 41), Axis("kappa_s", 0.0, 0.1, 41)))
    a = sweep(["F2", "eta3"], grid, threads=1)
    b = sweep(["F2", "eta3"], grid, threads=4)
    for k in a.values:
        assert np.array_equal(a.values[k], b.values[k])
    assert list(a.rows()) == list(b.rows())


def test_sweep_rows_are_row_major():
    grid = SweepGrid((Axis("p", 0, 1e-3, 3), Axis("phi", 0, 1e-2, 2)), fixed={"xi": 0.01})
    table = sweep("F_m1", grid)
    rows = list(table.rows())
    assert table.header == ("p", "phi", "F_m1")
    assert [r[:2] for r in rows] == [(0, 0), (0, 1e-2), (5e-4, 0), (5e-4, 1e-2), (1e-3, 0), (1e-3, 1e-2)]
    assert rows[0][2] == pytest.approx(path_fidelities(0, 0, 0, 0.01)["F_m1"])


def test_single_point_axis():
    table = sweep("F2", SweepGrid((Axis("g", 2.4, 2.4, 1),)))
    assert len(list(table.rows())) == 1


def test_sweep_validation():
    with pytest.raises(DomainError):
        sweep("F9", FIG6)
    with pytest.raises(ConfigurationError):
        Axis("g", 0, 1, 1)
    with pytest.raises(ConfigurationError):
        Axis("zeta", 0, 1, 3)
    with pytest.raises(ConfigurationError):
        SweepGrid((Axis("g", 0, 1, 3), Axis("g", 0, 1, 3)))
    with pytest.raises(ConfigurationError):
        SweepGrid((Axis("g", 0, 1, 3),), fixed={"g": 1.0})
    with pytest.raises(ConfigurationError):
        sweep("F2", SweepGrid((Axis("g", 0, 1, 3),), fixed={"kappa_s": -1.0}))


def test_metric_ranges_on_grid():
    table = sweep(METRICS[:6], FIG6)
    for name, v in table.values.items():
        assert np.all((v >= 0) & (v <= 1 + 1e-12)), name


def test_threads_env(monkeypatch):
    monkeypatch.setenv("CSUMSIM_THREADS", "0")
    with pytest.raises(ConfigurationError):
        sweep("F2", FIG6)


# --- monotonicity -----------------------------------------------------------------

def _monotone(values):
    """Non-decreasing along g (axis 0), non-increasing along kappa_s (axis 1)."""
    return (bool(np.all(np.diff(values, axis=0) >= -1e-12)),
            bool(np.all(np.diff(values, axis=1) <= 1e-12)))


@pytest.mark.parametrize("metric", ["eta2", "eta3", "eta2_amp", "eta3_amp"])
def test_efficiency_monotonicity(metric):
    assert _monotone(sweep(metric, FIG6).values[metric]) == (True, True)


def test_fidelity2_monotonicity():
    assert _monotone(sweep("F2", FIG6).values["F2"]) == (True, True)
