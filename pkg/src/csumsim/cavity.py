"""One-sided microcavity with a charged quantum dot.

The reflection coefficient of a photon that couples to the trion transition
(``e = 1``) or sees an empty cavity (``e = 0``) is

    r_e = 1 - kappa f / (e g^2 + [-(omega - omega_c) i + kappa/2 + kappa_s/2] f),
    f   = gamma/2 - (omega - omega_x) i.

An L photon couples when the spin is up and an R photon when the spin is
down; the other combinations reflect with ``r_0``.  With ``r_1 = 1`` and
``r_0 = -1`` an L photon therefore applies a Pauli Z to the spin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import cpbs, hadamard_h, waveplate_x
from .errors import ConfigurationError, SingularParameterError
from .fock import DOWN, UP, Block, L, Mode, ModeMap, R

SINGULAR_TOL = 1e-300


@dataclass(frozen=True)
class CavityParams:
    """Cavity-QED rates in units of the directional coupling ``kappa``.

    ``g`` and ``gamma`` may be zero (an empty cavity, a lossless trion); the
    reflection coefficient then reports a singularity only if its
    denominator actually vanishes.
    """

    g: float = 2.4
    kappa: float = 1.0
    kappa_s: float = 0.0
    gamma: float = 0.1
    omega: float = 0.0
    omega_c: float = 0.0
    omega_x: float = 0.0

    def __post_init__(self):
        vals = (self.g, self.kappa, self.kappa_s, self.gamma,
                self.omega, self.omega_c, self.omega_x)
        if not all(np.isfinite(v) for v in vals):
            raise ConfigurationError("cavity parameters must be finite")
        if self.kappa <= 0:
            raise ConfigurationError("kappa must be positive")
        if self.g < 0 or self.gamma < 0 or self.kappa_s < 0:
            raise ConfigurationError("g, gamma and kappa_s must be non-negative")

    @property
    def f(self) -> complex:
        return self.gamma / 2 - (self.omega - self.omega_x) * 1j

    @property
    def coefficients(self) -> tuple[complex, complex]:
        """(r_1, r_0)."""
        return reflection_coeff(1, self), reflection_coeff(0, self)

    @property
    def herald_amplitudes(self) -> "HeraldAmplitudes":
        return HeraldAmplitudes.from_coefficients(*self.coefficients)


IDEAL_COEFFICIENTS = (1.0 + 0j, -1.0 + 0j)


def reflection_coeff(e: int, params: CavityParams) -> complex:
    if e not in (0, 1):
        raise ConfigurationError(f"e must be 0 or 1, got {e}")
    f = params.f
    denom = (e * params.g ** 2
             + (-(params.omega - params.omega_c) * 1j + params.kappa / 2 + params.kappa_s / 2) * f)
    if abs(denom) < SINGULAR_TOL:
        raise SingularParameterError(f"reflection coefficient r_{e} has a vanishing denominator")
    return complex(1 - params.kappa * f / denom)


@dataclass(frozen=True)
class HeraldAmplitudes:
    A: complex
    B: complex

    @classmethod
    def from_coefficients(cls, r1: complex, r0: complex) -> "HeraldAmplitudes":
        return cls(A=(r1 - r0) / 2, B=(r1 + r0) / 2)


def _coeffs(params: CavityParams | tuple | None) -> tuple[complex, complex]:
    if params is None:
        return IDEAL_COEFFICIENTS
    if isinstance(params, CavityParams):
        return params.coefficients
    r1, r0 = params
    return complex(r1), complex(r0)


def scatter_blocks(qd_index: int, port: str, r1: complex, r0: complex) -> tuple[Block, Block]:
    modes = (Mode(port, L), Mode(port, R))
    return (Block(modes, np.diag([r1, r0]), (qd_index, UP)),
            Block(modes, np.diag([r0, r1]), (qd_index, DOWN)))


def scatter(qd_index: int, port: str, params: CavityParams | tuple | None = None) -> ModeMap:
    """Spin-conditional reflection of ``port`` off dot ``qd_index``.

    ``params`` is a :class:`CavityParams`, an explicit ``(r1, r0)`` pair, or
    ``None`` for the ideal coefficients ``(1, -1)``.
    """
    r1, r0 = _coeffs(params)
    lossy = not (np.isclose(abs(r1), 1, atol=1e-12) and np.isclose(abs(r0), 1, atol=1e-12))
    return ModeMap(scatter_blocks(qd_index, port, r1, r0), sub_unitary=lossy, name="scatter")


@dataclass(frozen=True)
class HeraldBinding:
    port: str
    label: str


def heralded_unit(qd_index: int, port: str, params: CavityParams | tuple | None = None,
                  herald_port: str = "d", label: str = "D"
                  ) -> tuple[list[ModeMap], HeraldBinding, list[ModeMap]]:
    """Error-heralded scattering unit for an L photon in ``port``.

    Returns the maps applied before the herald detector, the detector
    binding, and the maps applied after it.  For an L input the
    un-heralded output is ``A |L> (-Z) |spin>``; the L component with
    amplitude ``B`` leaves through ``herald_port`` and leaves the spin
    untouched.  The extra minus sign is a per-branch global phase once the
    spin is measured.
    """
    before = [hadamard_h(port), scatter(qd_index, port, params), hadamard_h(port),
              cpbs(port, port, herald_port)]
    return before, HeraldBinding(herald_port, label), [waveplate_x(port)]


def feed_forward(qd_index: int, corrections):
    """Spin measurement in the +/- basis: nothing happens on ``+``; the
    listed correction nodes run on ``-``."""
    from .netlist import Measure
    return Measure(qd_index, tuple(corrections))
