"""Mode maps for the passive optical elements of the three circuits.

Polarization blocks are ordered (R, L) for the imperfect polarizing-splitter
matrices and (L, R) everywhere else; every constructor documents which.

Two splitter conventions are used.  The circuit simulations use the real
convention ``m1 -> (m1 + m2)/sqrt2, m2 -> (m1 - m2)/sqrt2`` (``sign=+1``) and
its rotation form ``[[a, b], [-b, a]]`` (``sign=-1``) for the 1/3 splitters;
the imperfection analysis uses the complex ``[[1+xi, i], [i, 1+xi]]`` form.
They agree on single-photon output probabilities.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fock import L, R, Block, Mode, ModeMap, single_block

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class ImperfectionParams:
    """Linear-optics imperfections: extinction ratio ``p``, mirror-mount
    misalignment ``phi`` (rad), MZI arm-phase deviation ``delta`` (rad) and
    splitter transmission-ratio error ``xi``."""

    p: float = 0.0
    phi: float = 0.0
    delta: float = 0.0
    xi: float = 0.0

    def __post_init__(self):
        vals = (self.p, self.phi, self.delta, self.xi)
        if not all(np.isfinite(v) for v in vals):
            raise ConfigurationError("imperfection parameters must be finite")
        if self.p < 0 or self.xi < 0:
            raise ConfigurationError("p and xi must be non-negative")

    @property
    def is_ideal(self) -> bool:
        return self.p == self.phi == self.delta == self.xi == 0


def _both_pols(port_a: str, port_b: str, matrix, name: str, sub_unitary=False) -> ModeMap:
    blocks = tuple(Block((Mode(port_a, p), Mode(port_b, p)), matrix) for p in (L, R))
    return ModeMap(blocks, sub_unitary=sub_unitary, name=name)


def _on_port(port: str, matrix, name: str, sub_unitary=False) -> ModeMap:
    """2x2 polarization matrix on one spatial mode, ordered (L, R)."""
    return single_block((Mode(port, L), Mode(port, R)), matrix, sub_unitary=sub_unitary, name=name)


# --- polarizing beam splitters ---------------------------------------------

def cpbs(port: str, transmit: str, reflect: str) -> ModeMap:
    """Circular polarizing beam splitter: the R component of ``port`` is
    exchanged with ``transmit`` and the L component with ``reflect``.

    ``transmit == port`` (or ``reflect == port``) leaves that polarization in
    place.  The map is an involution, so the same element both splits a mode
    into its R/L paths and merges them back.
    """
    if transmit == reflect:
        raise ConfigurationError("CPBS needs distinct transmitted and reflected ports")
    perm: dict[Mode, Mode] = {}
    for pol, dest in ((R, transmit), (L, reflect)):
        src, dst = Mode(port, pol), Mode(dest, pol)
        perm[src], perm[dst] = dst, src
    modes = tuple(perm)
    mat = np.zeros((len(modes), len(modes)))
    for j, m in enumerate(modes):
        mat[modes.index(perm[m]), j] = 1
    return single_block(modes, mat, name="cpbs")


def cpbs_imperfect_matrix(p: float, phi: float) -> np.ndarray:
    """U_p U_phi in the (R, L) basis."""
    sp = np.sqrt(complex(p))
    u_p = np.array([[1, sp], [-np.conj(sp), 1]]) / np.sqrt(1 + p)
    u_phi = np.array([[np.cos(phi), np.sin(phi)], [-np.sin(phi), np.cos(phi)]])
    return u_p @ u_phi


def cpbs_inverse_imperfect_matrix(p: float) -> np.ndarray:
    """Second-CPBS matrix in the (R, L) basis.  Note that for p > 0 this is
    not the inverse of ``cpbs_imperfect_matrix(p, 0)``: the product is
    ``[[1 - p, 2 sqrt p], [-2 sqrt p, 1 - p]] / (1 + p)``."""
    if p < 0:
        raise ConfigurationError("p must be non-negative")
    sp = np.sqrt(complex(p))
    return np.array([[1, np.conj(sp)], [-sp, 1]]) / np.sqrt(1 + p)


def _rl_to_lr(m: np.ndarray) -> np.ndarray:
    return m[::-1, ::-1]


def cpbs_imperfect(port: str, p: float, phi: float) -> ModeMap:
    """Polarization error of a first-type CPBS acting on ``port``."""
    ImperfectionParams(p=p, phi=phi)
    return _on_port(port, _rl_to_lr(cpbs_imperfect_matrix(p, phi)), "cpbs_imperfect")


def cpbs_inverse_imperfect(port: str, p: float) -> ModeMap:
    return _on_port(port, _rl_to_lr(cpbs_inverse_imperfect_matrix(p)), "cpbs_inverse_imperfect")


# --- beam splitters ---------------------------------------------------------

def beam_splitter_matrix(reflectivity: float, sign: int = 1) -> np.ndarray:
    """Real 2x2 splitter with |diagonal|^2 = reflectivity.

    ``sign=+1``: ``[[a, b], [b, -a]]`` (Hadamard-like at 1/2);
    ``sign=-1``: ``[[a, b], [-b, a]]``.
    """
    if not 0 < reflectivity < 1:
        raise ConfigurationError(f"reflectivity {reflectivity} outside (0, 1)")
    if sign not in (1, -1):
        raise ConfigurationError("sign must be +1 or -1")
    a, b = np.sqrt(reflectivity), np.sqrt(1 - reflectivity)
    return np.array([[a, b], [sign * b, -sign * a]])


def beam_splitter(reflectivity: float, port_a: str, port_b: str, sign: int = 1) -> ModeMap:
    return _both_pols(port_a, port_b, beam_splitter_matrix(reflectivity, sign), "bs")


def beam_splitter_imperfect_matrix(xi: float) -> np.ndarray:
    if xi < 0:
        raise ConfigurationError("xi must be non-negative")
    return np.array([[1 + xi, 1j], [1j, 1 + xi]]) / np.sqrt(xi ** 2 + 2 * xi + 2)


def beam_splitter_imperfect(xi: float, port_a: str, port_b: str) -> ModeMap:
    return _both_pols(port_a, port_b, beam_splitter_imperfect_matrix(xi), "bs_imperfect")


def beam_splitter_real_imperfect_matrix(xi: float) -> np.ndarray:
    """Transmission-ratio error in the real (sign=+1) convention; reduces to
    ``beam_splitter_matrix(0.5)`` at xi = 0."""
    if xi < 0:
        raise ConfigurationError("xi must be non-negative")
    return np.array([[1 + xi, 1], [1, -(1 + xi)]]) / np.sqrt(xi ** 2 + 2 * xi + 2)


def arm_phase_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(1j * theta), 1.0])


def mzi_matrix(xi: float, delta: float) -> np.ndarray:
    """Imperfect splitter, arm phase (pi - delta), imperfect splitter."""
    bs = beam_splitter_imperfect_matrix(xi)
    return bs @ arm_phase_matrix(np.pi - delta) @ bs


# --- wave plates, phases, swaps ---------------------------------------------

def waveplate_x(port: str) -> ModeMap:
    """Half-wave plate flipping L <-> R."""
    return _on_port(port, [[0, 1], [1, 0]], "x")


def hadamard_h(port: str) -> ModeMap:
    """|L> -> (|R> - |L>)/sqrt2, |R> -> (|R> + |L>)/sqrt2."""
    return _on_port(port, np.array([[-1, 1], [1, 1]]) / np.sqrt(2), "h")


def phase(port: str, theta: float) -> ModeMap:
    return _on_port(port, np.exp(1j * theta) * np.eye(2), "phase")


def phase_pi(port: str) -> ModeMap:
    return _on_port(port, -np.eye(2), "phase_pi")


def wfc(port: str, amplitude: complex) -> ModeMap:
    """Wave-form corrector: multiplies both polarizations of ``port`` by A."""
    amplitude = complex(amplitude)
    if abs(amplitude) > 1 + UNIT_TOL:
        raise ConfigurationError(f"|A| = {abs(amplitude)} exceeds 1")
    return _on_port(port, amplitude * np.eye(2), "wfc", sub_unitary=True)


def swap(port_a: str, port_b: str) -> ModeMap:
    if port_a == port_b:
        raise ConfigurationError("swap needs two distinct ports")
    return _both_pols(port_a, port_b, [[0, 1], [1, 0]], "swap")


def swap_decomposed(port_a: str, port_b: str) -> list[ModeMap]:
    """Swap realized as balanced splitter, sigma_z on ``port_b``, splitter."""
    return [beam_splitter(0.5, port_a, port_b), _on_port(port_b, -np.eye(2), "sigma_z"),
            beam_splitter(0.5, port_a, port_b)]


def gate_overlap(actual, ideal) -> float:
    """|Tr(ideal^dag actual) / d|^2, the squared normalized overlap of two
    element matrices."""
    actual, ideal = np.asarray(actual), np.asarray(ideal)
    return float(abs(np.trace(ideal.conj().T @ actual) / len(ideal)) ** 2)
