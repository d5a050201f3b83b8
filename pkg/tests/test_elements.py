import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csumsim import elements as el
from csumsim.analysis import f_bs_half, f_cpbs1, f_cpbs2, f_mzi
from csumsim.errors import ConfigurationError
from csumsim.fock import L, R, FockState, Mode, Registry, apply, fidelity, norm_sq

REG = Registry(["a", "b", "c"])


def photon_pair(first, second):
    return FockState.from_amplitudes(REG, 0, {((first, second), ()): 1.0})


def test_cpbs_routes_r_to_transmit_and_l_to_reflect():
    split = el.cpbs("a", "b", "c")
    out_r = apply(photon_pair(Mode("a", R), Mode("a", L)), split).amplitudes()
    assert list(out_r) == [((Mode("c", L), Mode("b", R)), ())] or \
        list(out_r) == [((Mode("b", R), Mode("c", L)), ())]


def test_cpbs_with_port_as_one_output_and_involution():
    m = el.cpbs("a", "a", "c")
    s = photon_pair(Mode("a", L), Mode("b", R))
    out = apply(s, m)
    assert set(out.amplitudes()) == {((Mode("b", R), Mode("c", L)), ())}
    back = apply(out, m)
    assert np.array_equal(back.coeffs, s.coeffs)
    with pytest.raises(ConfigurationError):
        el.cpbs("a", "b", "b")


def test_balanced_splitter_convention():
    u = el.beam_splitter_matrix(0.5)
    assert np.allclose(u, np.array([[1, 1], [1, -1]]) / math.sqrt(2))
    third = el.beam_splitter_matrix(1 / 3, sign=-1)
    assert np.allclose(third, [[math.sqrt(1 / 3), math.sqrt(2 / 3)], [-math.sqrt(2 / 3), math.sqrt(1 / 3)]])
    for bad in (0, 1, 1.5):
        with pytest.raises(ConfigurationError):
            el.beam_splitter_matrix(bad)


def test_involutions():
    x = el.waveplate_x("a").full(REG, 0)
    h = el.hadamard_h("a").full(REG, 0)
    sw = el.swap("a", "b").full(REG, 0)
    pi = el.phase_pi("a").full(REG, 0)
    eye = np.eye(len(REG))
    for m in (x, h, sw, pi):
        assert np.allclose(m @ m, eye, atol=1e-15)


def test_hadamard_action_on_l():
    h = el.hadamard_h("a").blocks[0].matrix  # (L, R) ordering
    assert np.allclose(h @ [1, 0], np.array([-1, 1]) / math.sqrt(2))
    assert np.allclose(h @ [0, 1], np.array([1, 1]) / math.sqrt(2))


def test_swap_decomposition_equals_swap_up_to_global_phase():
    direct = el.swap("a", "b").full(REG, 0)
    composed = np.eye(len(REG), dtype=complex)
    for m in el.swap_decomposed("a", "b"):
        composed = m.full(REG, 0) @ composed
    phase = composed[np.nonzero(direct)][0]
    assert abs(abs(phase) - 1) < 1e-15
    assert np.allclose(composed, phase * direct, atol=1e-15)


def test_wfc_scales_amplitude_and_rejects_gain():
    s = photon_pair(Mode("a", L), Mode("b", L))
    out = apply(s, el.wfc("a", 0.6j))
    assert norm_sq(out) == pytest.approx(0.36)
    with pytest.raises(ConfigurationError):
        el.wfc("a", 1.01)


def test_imperfect_cpbs_matrix_entries():
    p, phi = 0.04, 0.3
    sp, c, s = 0.2, math.cos(phi), math.sin(phi)
    expected = np.array([[c - sp * s, s + sp * c], [-sp * c - s, -sp * s + c]]) / math.sqrt(1 + p)
    assert np.allclose(el.cpbs_imperfect_matrix(p, phi), expected, atol=1e-15)
    assert np.allclose(el.cpbs_imperfect_matrix(0, 0), np.eye(2))


def test_imperfect_cpbs_pair_is_not_an_inverse():
    """The inverse-type element does not undo the first one for p > 0."""
    for p in (0.0, 1e-3, 0.25):
        prod = el.cpbs_inverse_imperfect_matrix(p) @ el.cpbs_imperfect_matrix(p, 0)
        sp = math.sqrt(p)
        expected = np.array([[1 - p, 2 * sp], [-2 * sp, 1 - p]]) / (1 + p)
        assert np.allclose(prod, expected, atol=1e-15)
        assert np.allclose(prod @ prod.conj().T, np.eye(2), atol=1e-14)


def test_mzi_matrix_entries():
    """Closed form of splitter - arm phase - splitter, with E = exp(i(pi - delta))."""
    xi, delta = 0.07, 0.2
    cc = 1 + xi
    e = np.exp(1j * (math.pi - delta))
    n2 = cc ** 2 + 1
    expected = np.array([[cc ** 2 * e - 1, 1j * cc * (e + 1)],
                         [1j * cc * (e + 1), cc ** 2 - e]]) / n2
    assert np.allclose(el.mzi_matrix(xi, delta), expected, atol=1e-15)
    assert np.allclose(el.mzi_matrix(0, 0), np.diag([-1, 1]), atol=1e-15)


@given(xi=st.floats(0, 0.5), delta=st.floats(-1, 1))
def test_imperfect_elements_are_unitary(xi, delta):
    for m in (el.beam_splitter_imperfect_matrix(xi), el.beam_splitter_real_imperfect_matrix(xi),
              el.mzi_matrix(xi, delta), el.cpbs_imperfect_matrix(xi / 10, delta)):
        assert np.allclose(m @ m.conj().T, np.eye(2), atol=1e-13)


def test_closed_forms_match_matrix_overlaps_on_grid():
    ideal_bs = el.beam_splitter_imperfect_matrix(0)
    ideal_mzi = el.mzi_matrix(0, 0)
    for p in np.linspace(0, 0.01, 20):
        for phi in np.linspace(-0.05, 0.05, 20):
            assert f_cpbs1(p, phi) == pytest.approx(
                el.gate_overlap(el.cpbs_imperfect_matrix(p, phi), np.eye(2)), abs=1e-12)
        assert f_cpbs2(p) == pytest.approx(
            el.gate_overlap(el.cpbs_inverse_imperfect_matrix(p), np.eye(2)), abs=1e-12)
    for xi in np.linspace(0, 0.2, 20):
        assert f_bs_half(xi) == pytest.approx(
            el.gate_overlap(el.beam_splitter_imperfect_matrix(xi), ideal_bs), abs=1e-12)
        for delta in np.linspace(-0.2, 0.2, 20):
            assert f_mzi(delta, xi) == pytest.approx(
                el.gate_overlap(el.mzi_matrix(xi, delta), ideal_mzi), abs=1e-12)


def test_mzi_fidelity_depends_only_on_phase():
    deltas = np.linspace(-1, 1, 11)
    for xi in (0, 0.05, 0.3):
        assert np.allclose(f_mzi(deltas, xi), (1 + np.cos(deltas)) / 2, atol=1e-15)


def test_closed_form_reference_values():
    assert f_cpbs1(0, 0) == 1 and f_cpbs2(0) == 1 and f_bs_half(0) == 1 and f_mzi(0, 0) == 1
    assert f_cpbs2(1e-3) == pytest.approx(1 / 1.001)
    assert f_bs_half(0.02) == pytest.approx(2.02 ** 2 / (2 * (0.0004 + 0.04 + 2)))
    with pytest.raises(ConfigurationError):
        f_cpbs2(-0.1)
    with pytest.raises(ConfigurationError):
        f_bs_half(-0.1)


def test_imperfect_splitters_agree_with_ideal_probabilities_at_zero():
    complex_form = el.beam_splitter_imperfect_matrix(0)
    real_form = el.beam_splitter_real_imperfect_matrix(0)
    assert np.allclose(np.abs(complex_form) ** 2, 0.5)
    assert np.allclose(real_form, el.beam_splitter_matrix(0.5))


def test_imperfection_params_validation():
    assert el.ImperfectionParams().is_ideal
    assert not el.ImperfectionParams(xi=0.1).is_ideal
    with pytest.raises(ConfigurationError):
        el.ImperfectionParams(p=-1)
    with pytest.raises(ConfigurationError):
        el.ImperfectionParams(delta=float("nan"))


def test_elements_preserve_two_photon_fidelity_to_self():
    s = photon_pair(Mode("a", L), Mode("b", R))
    out = apply(s, el.phase("a", 0.7))
    assert fidelity(out, s) == pytest.approx(1)
