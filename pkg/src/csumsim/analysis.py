"""Imperfection fidelities in closed form and the parameter-sweep engine.

Element fidelities are squared normalized overlaps ``|Tr(U_ideal^dag U)/2|^2``
of the imperfect element matrices with their ideal forms.  The per-path
fidelities of the linear-optics protocol multiply the element fidelities
encountered along each path, and a basis state's fidelity multiplies the
factors of the arms its two photons occupy.

Cavity metrics come from full circuit simulation.  Every output amplitude of
protocols 2 and 3 is a polynomial of total degree at most three in the
reflection coefficients ``(r1, r0)``: each photon meets at most one scatter
or wave-form corrector per interaction stage, and there are three such
factors in total.  :class:`CavityResponse` recovers that polynomial exactly
from ten simulations at unisolvent nodes, checks it at extra nodes, and then
evaluates norms and overlaps on any grid through small Gram matrices.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .circuits import (CompiledCircuit, _encoded_indices, _photon_branches, build_protocol2,
                       build_protocol3, csum_permutation, initial_batch, UNIFORM_INPUT)
from .elements import ImperfectionParams
from .errors import ConfigurationError, DomainError, SingularParameterError
from .cavity import SINGULAR_TOL, CavityParams

# --- closed-form element fidelities ------------------------------------------


def f_cpbs1(p, phi):
    """First-CPBS fidelity ``|cos(phi) - sqrt(p) sin(phi)|^2 / (1 + p)``."""
    p, phi = np.asarray(p, dtype=float), np.asarray(phi, dtype=float)
    _check_nonneg(p=p)
    return np.abs(np.cos(phi) - np.sqrt(p) * np.sin(phi)) ** 2 / (1 + p)


def f_cpbs2(p):
    p = np.asarray(p, dtype=float)
    _check_nonneg(p=p)
    return 1 / (1 + p)


def f_bs_half(xi):
    xi = np.asarray(xi, dtype=float)
    _check_nonneg(xi=xi)
    return (xi + 2) ** 2 / (2 * (xi ** 2 + 2 * xi + 2))


def f_mzi(delta, xi):
    delta, xi = np.asarray(delta, dtype=float), np.asarray(xi, dtype=float)
    _check_nonneg(xi=xi)
    n = xi ** 2 + 2 * xi + 2
    return (1 + np.cos(delta)) * ((1 + xi) ** 2 + 1) ** 2 / (2 * n ** 2)


def _check_nonneg(**values):
    for name, v in values.items():
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ConfigurationError(f"{name} must be finite and non-negative")


PATHS = ("F_m1", "F_m2", "F_n11", "F_n12", "F_n2")

FIG5_PARAMS = ImperfectionParams(p=1e-4, phi=1e-3, delta=np.pi / 36, xi=0.02)


def path_fidelities(p, phi, delta, xi) -> dict:
    f1, f2 = f_cpbs1(p, phi), f_cpbs2(p)
    fbs, fmzi = f_bs_half(xi), f_mzi(delta, xi)
    return {
        "F_m1": f1 * fbs ** 2,
        "F_m2": f1 * fmzi,
        "F_n11": f1 ** 2 * f2 * fmzi,
        "F_n12": f1 ** 2 * f2,
        "F_n2": f1,
    }


def basis_paths(c: int, t: int) -> tuple[str, str]:
    """Arms of the linear-optics circuit occupied by the photons of ``|c, t>``.

    After the first polarizing splitters photon M sits in m1 or m2 according
    to ``spatial XOR polarization`` (R exchanges the two modes), and photon N
    likewise in n1 or n2; in n1 the R component runs through n11 and the L
    component through n12.
    """
    pol_m, pol_n = divmod(c, 2)  # 0 = L, 1 = R
    sp_m, sp_n = divmod(t, 2)
    m_arm = "F_m1" if sp_m ^ pol_m == 0 else "F_m2"
    if sp_n ^ pol_n == 1:
        n_arm = "F_n2"
    else:
        n_arm = "F_n11" if pol_n == 1 else "F_n12"
    return m_arm, n_arm


def protocol1_basis_fidelities(p, phi, delta, xi) -> np.ndarray:
    """Sixteen per-basis fidelities, flat index ``4 c + t``; with array
    parameters the basis axis comes last."""
    paths = path_fidelities(p, phi, delta, xi)
    vals = [paths[a] * paths[b] for a, b in (basis_paths(*divmod(k, 4)) for k in range(16))]
    return np.stack(np.broadcast_arrays(*vals), axis=-1)


def protocol1_min_fidelity(p, phi, delta, xi):
    return np.min(protocol1_basis_fidelities(p, phi, delta, xi), axis=-1)


# --- cavity response ---------------------------------------------------------

DEGREE = 3
MONOMIALS = tuple((a, b) for total in range(DEGREE + 1) for a in range(total, -1, -1)
                  for b in [total - a])
# principal lattice on [-1, 1]^2: unisolvent for total degree 3
NODES = tuple((-1 + 2 * i / 3, -1 + 2 * j / 3) for i in range(4) for j in range(4 - i))
CHECK_NODES = ((0.3 + 0.2j, -0.7 + 0.1j), (0.9 - 0.05j, -0.95 + 0.2j))
RESPONSE_TOL = 1e-12


def monomials(r1, r0) -> np.ndarray:
    r1, r0 = np.asarray(r1, dtype=complex), np.asarray(r0, dtype=complex)
    return np.stack([r1 ** a * r0 ** b for a, b in MONOMIALS], axis=-1)


def reflection_coeffs(g, kappa_s, gamma, kappa=1.0, omega=0.0, omega_c=0.0, omega_x=0.0):
    """Vectorized ``(r1, r0)`` over broadcast parameter arrays."""
    g, kappa_s, gamma = (np.asarray(v, dtype=float) for v in (g, kappa_s, gamma))
    if np.any(g < 0) or np.any(gamma < 0) or np.any(kappa_s < 0):
        raise ConfigurationError("g, gamma and kappa_s must be non-negative")
    f = gamma / 2 - (omega - omega_x) * 1j
    base = (-(omega - omega_c) * 1j + kappa / 2 + kappa_s / 2) * f
    out = []
    for e in (1, 0):
        denom = e * g ** 2 + base
        if np.any(np.abs(denom) < SINGULAR_TOL):
            raise SingularParameterError(f"reflection coefficient r_{e} has a vanishing denominator")
        out.append(1 - kappa * f / denom)
    return np.broadcast_arrays(*out)


class CavityResponse:
    """Exact polynomial dependence of a cavity protocol on ``(r1, r0)``.

    Holds, per measurement record and per input (16 basis states plus the
    uniform superposition), the Gram matrix of the output coefficient
    polynomials and their overlaps with the ideal CSUM output.
    """

    def __init__(self, protocol: int, input16=None):
        if protocol not in (2, 3):
            raise ConfigurationError("cavity response exists for protocols 2 and 3")
        self.protocol = protocol
        amps = UNIFORM_INPUT if input16 is None else np.asarray(input16, dtype=complex)
        self.inputs = np.vstack([np.eye(16, dtype=complex), amps[None]])
        build = build_protocol2 if protocol == 2 else build_protocol3
        samples = [self._simulate(build(node)) for node in NODES]
        labels = samples[0][0]
        stack = np.stack([s[1] for s in samples])  # (nodes, labels, batch, n, n)
        vander = monomials(*np.array(NODES).T)
        coeffs = np.linalg.solve(vander, stack.reshape(len(NODES), -1)).reshape(stack.shape)
        for node in CHECK_NODES:
            lab, direct = self._simulate(build(node))
            if lab != labels:
                raise ConfigurationError("measurement records differ between nodes")
            approx = np.tensordot(monomials(*node), coeffs, axes=1)
            if np.max(np.abs(approx - direct)) > RESPONSE_TOL:
                raise ConfigurationError("protocol output is not a degree-3 polynomial in (r1, r0)")
        self.labels = labels
        ii, jj = self._enc
        flat = coeffs.reshape(coeffs.shape[:3] + (-1,))
        # gram[b, i, k, l] = <C_k|C_l> for record b and input i
        self.gram = 2 * np.einsum("kbix,lbix->bikl", flat.conj(), flat)
        ideal = self.inputs @ csum_permutation().T  # (batch, 16)
        enc = 2 * coeffs[:, :, :, ii, jj]  # (k, labels, batch, 16)
        self.overlap = np.einsum("iq,kbiq->bik", ideal.conj(), enc)

    def _simulate(self, circuit):
        compiled = CompiledCircuit(circuit)
        self._enc = _encoded_indices(compiled.registry)
        branches, _, _ = compiled.execute(initial_batch(compiled.registry, circuit.n_spins,
                                                        self.inputs))
        photons = _photon_branches(branches, circuit.n_spins)
        return tuple(photons), np.stack(list(photons.values()))

    def evaluate(self, r1, r0, input_index: int = 16) -> dict:
        """Fidelity, efficiency (probability) and efficiency (amplitude)
        for arrays of coefficients."""
        m = monomials(r1, r0)
        g = self.gram[:, input_index]
        o = self.overlap[:, input_index]
        norms = np.einsum("...k,bkl,...l->...b", m.conj(), g, m).real
        good = np.abs(np.einsum("...k,bk->...b", m, o)) ** 2
        eta = norms.sum(axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            fid = np.minimum(good.sum(axis=-1) / eta, 1.0)
        return {"fidelity": fid, "efficiency": eta, "efficiency_amp": np.sqrt(np.maximum(eta, 0))}


@lru_cache(maxsize=4)
def cavity_response(protocol: int) -> CavityResponse:
    return CavityResponse(protocol)


# --- sweep engine --------------------------------------------------------------

CAVITY_PARAMS = ("g", "kappa_s", "gamma", "kappa", "omega", "omega_c", "omega_x")
ELEMENT_PARAMS = ("p", "phi", "delta", "xi")
CAVITY_METRICS = {
    "F2": (2, "fidelity"), "eta2": (2, "efficiency"), "eta2_amp": (2, "efficiency_amp"),
    "F3": (3, "fidelity"), "eta3": (3, "efficiency"), "eta3_amp": (3, "efficiency_amp"),
}
ELEMENT_METRICS = PATHS + ("protocol1_min_fidelity",)
METRICS = tuple(CAVITY_METRICS) + ELEMENT_METRICS
CHUNK = 1024


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.name not in CAVITY_PARAMS + ELEMENT_PARAMS:
            raise ConfigurationError(f"unknown sweep parameter {self.name!r}")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ConfigurationError("axis bounds must be finite")
        if self.n < 1 or (self.n == 1 and self.lo != self.hi):
            raise ConfigurationError("an axis needs at least 2 samples (or lo == hi for one)")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class SweepGrid:
    """Up to two axes; every other parameter takes its value from ``fixed``
    or its default (resonant cavity, g = 2.4, gamma = 0.1, ideal elements)."""

    axes: tuple[Axis, ...]
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not 1 <= len(self.axes) <= 2:
            raise ConfigurationError("a sweep has one or two axes")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigurationError("repeated sweep axis")
        for key in self.fixed:
            if key not in CAVITY_PARAMS + ELEMENT_PARAMS:
                raise ConfigurationError(f"unknown fixed parameter {key!r}")
            if key in names:
                raise ConfigurationError(f"{key} is both an axis and fixed")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    def points(self) -> dict:
        """Row-major flattened parameter arrays (first axis slowest)."""
        mesh = np.meshgrid(*(a.values for a in self.axes), indexing="ij")
        pts = {a.name: m.reshape(-1) for a, m in zip(self.axes, mesh)}
        size = int(np.prod(self.shape))
        defaults = {**_defaults(), **self.fixed}
        for name, v in defaults.items():
            pts.setdefault(name, np.full(size, float(v)))
        return pts


def _defaults() -> dict:
    cav, imp = CavityParams(), ImperfectionParams()
    d = {name: getattr(cav, name) for name in CAVITY_PARAMS}
    d.update({name: getattr(imp, name) for name in ELEMENT_PARAMS})
    return d


@dataclass
class SweepTable:
    grid: SweepGrid
    values: dict  # metric -> array of grid.shape

    def rows(self):
        pts = self.grid.points()
        names = [a.name for a in self.grid.axes]
        metrics = list(self.values)
        flat = {m: v.reshape(-1) for m, v in self.values.items()}
        for i in range(int(np.prod(self.grid.shape))):
            yield tuple(float(pts[n][i]) for n in names) + tuple(float(flat[m][i]) for m in metrics)

    @property
    def header(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.grid.axes) + tuple(self.values)


def _threads() -> int:
    env = os.environ.get("CSUMSIM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError("CSUMSIM_THREADS must be an integer") from None
        if n < 1:
            raise ConfigurationError("CSUMSIM_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def _evaluate_chunk(metrics, pts, lo, hi) -> dict:
    sl = {k: v[lo:hi] for k, v in pts.items()}
    out = {}
    cavity = [m for m in metrics if m in CAVITY_METRICS]
    if cavity:
        r1, r0 = reflection_coeffs(sl["g"], sl["kappa_s"], sl["gamma"], sl["kappa"],
                                   sl["omega"], sl["omega_c"], sl["omega_x"])
        cache = {}
        for m in cavity:
            protocol, key = CAVITY_METRICS[m]
            if protocol not in cache:
                cache[protocol] = cavity_response(protocol).evaluate(r1, r0)
            out[m] = cache[protocol][key]
    elem = [m for m in metrics if m in ELEMENT_METRICS]
    if elem:
        args = (sl["p"], sl["phi"], sl["delta"], sl["xi"])
        paths = path_fidelities(*args)
        for m in elem:
            out[m] = protocol1_min_fidelity(*args) if m == "protocol1_min_fidelity" else paths[m]
    return out


def sweep(metrics, grid: SweepGrid, threads: int | None = None) -> SweepTable:
    """Evaluate one or more named metrics over ``grid``.

    Points are split into fixed-size chunks so the result does not depend
    on how many worker threads evaluate them.
    """
    metrics = (metrics,) if isinstance(metrics, str) else tuple(metrics)
    for m in metrics:
        if m not in METRICS:
            raise DomainError(f"unknown metric {m!r}; choose from {', '.join(METRICS)}")
    pts = grid.points()
    size = int(np.prod(grid.shape))
    bounds = [(lo, min(lo + CHUNK, size)) for lo in range(0, size, CHUNK)]
    if any(m in CAVITY_METRICS for m in metrics):
        for protocol in {CAVITY_METRICS[m][0] for m in metrics if m in CAVITY_METRICS}:
            cavity_response(protocol)  # build once, outside the workers
    n_threads = min(threads or _threads(), len(bounds))
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            parts = list(pool.map(lambda b: _evaluate_chunk(metrics, pts, *b), bounds))
    else:
        parts = [_evaluate_chunk(metrics, pts, *b) for b in bounds]
    values = {m: np.concatenate([np.broadcast_to(p[m], (hi - lo,)) for p, (lo, hi)
                                 in zip(parts, bounds)]).reshape(grid.shape) for m in metrics}
    return SweepTable(grid, values)


def cavity_metrics(params: CavityParams) -> dict:
    """All six cavity metrics at one parameter point."""
    r1, r0 = params.coefficients
    out = {}
    for m, (protocol, key) in CAVITY_METRICS.items():
        out[m] = float(cavity_response(protocol).evaluate(r1, r0)[key])
    return out


# --- efficiency convention report -------------------------------------------

REFERENCE_EFFICIENCIES = {
    # (g, kappa_s): (eta2, eta3, tolerance)
    (2.4, 0.0): (0.9913, 0.9870, 5e-3),
    (2.4, 0.05): (0.8998, 0.8508, 1e-2),
}


def efficiency_convention_report() -> dict:
    """Compare both efficiency conventions against the quoted values.

    Returns per-point values for the probability and amplitude conventions,
    whether each convention matches both protocols at every point, and the
    single-pass reflectance ``(|r1|^2 + |r0|^2)/2`` for reference.
    """
    points = []
    match = {"probability": True, "amplitude": True}
    for (g, ks), (q2, q3, tol) in REFERENCE_EFFICIENCIES.items():
        cp = CavityParams(g=g, kappa_s=ks)
        m = cavity_metrics(cp)
        r1, r0 = cp.coefficients
        row = {"g": g, "kappa_s": ks, "reference_eta2": q2, "reference_eta3": q3, "tolerance": tol,
               "probability": {"eta2": m["eta2"], "eta3": m["eta3"]},
               "amplitude": {"eta2": m["eta2_amp"], "eta3": m["eta3_amp"]},
               "single_pass_reflectance": (abs(r1) ** 2 + abs(r0) ** 2) / 2}
        for conv in match:
            ok2 = abs(row[conv]["eta2"] - q2) <= tol
            ok3 = abs(row[conv]["eta3"] - q3) <= tol
            row[conv]["matches"] = {"eta2": ok2, "eta3": ok3}
            match[conv] &= ok2 and ok3
        points.append(row)
    matching = [c for c, ok in match.items() if ok]
    return {"points": points, "matching_convention": matching[0] if matching else None}
