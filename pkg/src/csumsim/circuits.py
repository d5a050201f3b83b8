"""The three CSUM protocols as netlists, plus the executor.

Encoding: the control qudit lives in the two polarizations (LL, LR, RL, RR
-> 0..3) and the target qudit in the pair of occupied spatial modes
(m1n1, m1n2, m2n1, m2n2 -> 0..3).  Basis state ``|c, t>`` has flat index
``4 c + t``.

The executor runs all sixteen encoded basis states and an optional user
input in one batch.  Consecutive element nodes are fused into a single
per-spin-configuration matrix; measurement nodes split the batch into
classical branches, each carrying its feed-forward record.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .cavity import IDEAL_COEFFICIENTS, CavityParams, HeraldAmplitudes
from .elements import ImperfectionParams
from .errors import ConfigurationError, DomainError, UndefinedFidelityError
from .fock import (CONTROL_ORDER, TARGET_ORDER, FockState, Mode, Registry, apply_array,
                   embed_spin_array, encoded_pair, ideal_interference_array, norms_array,
                   spin_component_array)
from .netlist import Circuit, Element, Herald, Interfere, Measure, PostSelect, format_node

D = 4
ENCODED_PORTS = ("m1", "m2", "n1", "n2")


# ---------------------------------------------------------------------------
# oracle and encoding


def ideal_csum(c: int, t: int, d: int = D) -> tuple[int, int]:
    if d < 2:
        raise DomainError("dimension must be at least 2")
    for name, v in (("c", c), ("t", t)):
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 0 <= v < d:
            raise DomainError(f"{name}={v!r} outside 0..{d - 1}")
    return int(c), int((c + t) % d)


def truth_table(d: int = D) -> list[tuple[int, int, int, int]]:
    return [(c, t, *ideal_csum(c, t, d)) for c in range(d) for t in range(d)]


def csum_permutation(d: int = D) -> np.ndarray:
    """P[out, in] for the flat index ``d c + t``."""
    p = np.zeros((d * d, d * d))
    for c, t in itertools.product(range(d), repeat=2):
        _, t2 = ideal_csum(c, t, d)
        p[d * c + t2, d * c + t] = 1
    return p


@dataclass(frozen=True)
class QuditEncoding:
    control: tuple = CONTROL_ORDER
    target: tuple = TARGET_ORDER

    def encode(self, c: int, t: int) -> tuple[Mode, Mode]:
        ideal_csum(c, t)
        return encoded_pair(c, t)

    def decode(self, mode_m: Mode, mode_n: Mode) -> tuple[int, int]:
        mode_m, mode_n = Mode(*mode_m), Mode(*mode_n)
        try:
            c = self.control.index((mode_m.pol, mode_n.pol))
            t = self.target.index((mode_m.spatial, mode_n.spatial))
        except ValueError:
            raise DomainError(f"({mode_m}, {mode_n}) is not an encoded state") from None
        return c, t


ENCODING = QuditEncoding()


# ---------------------------------------------------------------------------
# protocol netlists


def _el(kind, *ports, **params) -> Element:
    return Element(kind, ports, params)


def _coeffs(params) -> tuple[complex, complex]:
    """Accepts CavityParams, an explicit (r1, r0) pair or None (ideal)."""
    if params is None:
        return IDEAL_COEFFICIENTS
    if isinstance(params, CavityParams):
        return params.coefficients
    r1, r0 = params
    return complex(r1), complex(r0)


def build_protocol1(elements: ImperfectionParams | None = None) -> Circuit:
    """Linear-optics CSUM, successful with probability 1/9.

    Photon M: CPBS1 exchanges the R components of m1 and m2, then an
    interferometer BS1/2 -> (BS1/3 on each arm) -> BS1/2.  Photon N: CPBS2
    exchanges the R components of n1 and n2, CPBS3 splits n1 into R (n11)
    and L (n12); n11 meets arm m2 at the interacting BS1/3 and the other
    paths are attenuated by balancing BS1/3 splitters into vacuum ports.
    A coincidence of one photon among (m1, m2) and one among (n1, n2)
    heralds success.

    With ``elements`` the polarizing splitters, the real balanced splitters
    and the arm phase take their imperfect forms.
    """
    imp = elements if elements is not None and not elements.is_ideal else None
    nodes = [_el("CPBS", "m1", "m2", "m1"), _el("CPBS", "n1", "n2", "n1")]
    if imp:
        nodes += [_el("CPBS_IMP", port, p=imp.p, phi=imp.phi) for port in ("m1", "m2", "n1", "n2")]
    nodes.append(_el("CPBS", "n1", "n11", "n12"))
    if imp:
        nodes += [_el("CPBS_IMP", port, p=imp.p, phi=imp.phi) for port in ("n11", "n12")]
    half = (lambda a, b: _el("BS_REAL_IMP", a, b, xi=imp.xi)) if imp else \
        (lambda a, b: _el("BS", a, b, reflectivity=0.5, sign=1))
    nodes += [
        half("m1", "m2"),
        _el("BS", "m1", "v1", reflectivity=1 / 3, sign=-1),
        Interfere(("m2", "n11"), 1 / 3, -1),
        _el("BS", "n12", "v3", reflectivity=1 / 3, sign=-1),
        _el("BS", "n2", "v4", reflectivity=1 / 3, sign=-1),
    ]
    if imp and imp.delta:
        nodes.append(_el("PHASE", "m2", theta=-imp.delta))
    nodes.append(half("m1", "m2"))
    if imp:
        nodes += [_el("CPBS_INV", port, p=imp.p) for port in ("n11", "n12")]
    nodes += [_el("CPBS", "n1", "n11", "n12"), PostSelect(("m1", "m2"), ("n1", "n2"))]
    spatial = ("m1", "m2", "n1", "n2", "n11", "n12", "v1", "v3", "v4")
    return Circuit(spatial, 0, tuple(nodes), "protocol1")


def _qd_pass(qd: int, port: str, r1, r0, heralded: bool, label: str) -> list:
    """Scatter an L photon in ``port`` off dot ``qd`` (optionally through the
    error-heralded unit)."""
    if not heralded:
        return [_el("SCATTER", port, qd=qd, r1=r1, r0=r0)]
    return [_el("H", port), _el("SCATTER", port, qd=qd, r1=r1, r0=r0), _el("H", port),
            _el("CPBS", port, port, "d"), Herald("d", label), _el("X", port)]


def _m_interaction(qd, port, r1, r0, heralded, label) -> list:
    """Both polarizations of photon M in ``port`` meet the dot: L directly,
    R through an X-plate sandwich on the auxiliary path x."""
    return ([_el("CPBS", port, "x", port)]
            + _qd_pass(qd, port, r1, r0, heralded, label)
            + [_el("X", "x")] + _qd_pass(qd, "x", r1, r0, heralded, label) + [_el("X", "x")]
            + [_el("CPBS", port, "x", port)])


def _cavity_protocol(params: CavityParams | None, heralded: bool) -> Circuit:
    r1, r0 = _coeffs(params)
    amp = HeraldAmplitudes.from_coefficients(r1, r0).A
    wfc = (lambda *ports: [_el("WFC", p, amp=amp) for p in ports]) if heralded else \
        (lambda *ports: [])
    nodes: list = [_el("CPBS", "m1", "m2", "m1"), _el("CPBS", "n1", "n2", "n1"),
                   _el("SWAP", "m1", "m11"), _el("BS", "m11", "m12", reflectivity=0.5, sign=1),
                   _el("SWAP", "m2", "m21"), _el("BS", "m21", "m22", reflectivity=0.5, sign=1),
                   _el("CPBS", "n1", "n11", "n12")]
    # step 1: m11, m21 and the R component of N (n11) meet QD1
    nodes += _m_interaction(0, "m11", r1, r0, heralded, "D1")
    nodes += _m_interaction(0, "m21", r1, r0, heralded, "D1")
    nodes += [_el("X", "n11")] + _qd_pass(0, "n11", r1, r0, heralded, "D1") + [_el("X", "n11")]
    nodes += wfc("m12", "m22", "n12", "n2")
    nodes += [Measure(0, (_el("SWAP", "m11", "m12"), _el("SWAP", "m21", "m22"))),
              _el("SWAP", "m11", "m21")]
    # step 2: m12, m22 meet QD2
    nodes += [_el("BS", "m11", "m12", reflectivity=0.5, sign=1),
              _el("BS", "m21", "m22", reflectivity=0.5, sign=1)]
    nodes += _m_interaction(1, "m12", r1, r0, heralded, "D2")
    nodes += _m_interaction(1, "m22", r1, r0, heralded, "D2")
    nodes += wfc("m11", "m21")
    nodes += [Measure(1, (_el("SWAP", "m11", "m12"), _el("SWAP", "m21", "m22"),
                          _el("PI", "n11"))),
              _el("SWAP", "m1", "m11"), _el("SWAP", "m2", "m21"),
              _el("CPBS", "n1", "n11", "n12")]
    spatial = ["m1", "m2", "m11", "m12", "m21", "m22", "n1", "n2", "n11", "n12", "x"]
    if heralded:
        spatial.append("d")
    return Circuit(tuple(spatial), 2, tuple(nodes), "protocol3" if heralded else "protocol2")


def build_protocol2(params: CavityParams | tuple | None = None) -> Circuit:
    """Deterministic CSUM with two cavity-QD interactions and feed-forward.

    ``params`` is a :class:`CavityParams`, an explicit ``(r1, r0)`` pair or
    ``None`` for the ideal coefficients."""
    return _cavity_protocol(params, heralded=False)


def build_protocol3(params: CavityParams | tuple | None = None) -> Circuit:
    """Error-heralded CSUM: every dot passage goes through the heralded unit
    and wave-form correctors rebalance the non-interacting paths."""
    return _cavity_protocol(params, heralded=True)


def build_protocol(protocol: int, cavity: CavityParams | tuple | None = None,
                   elements: ImperfectionParams | None = None) -> Circuit:
    if protocol == 1:
        return build_protocol1(elements)
    if protocol == 2:
        return build_protocol2(cavity)
    if protocol == 3:
        return build_protocol3(cavity)
    raise ConfigurationError(f"unknown protocol {protocol}")


# ---------------------------------------------------------------------------
# execution


@dataclass
class _Branch:
    label: str
    coeffs: np.ndarray  # (batch, 2**k, n, n)


_STACKS: dict = {}
_STACKS_MAX = 4096


def _element_stack(node: Element, registry: Registry, n_spins: int) -> np.ndarray:
    key = (format_node(node), registry, n_spins)
    u = _STACKS.get(key)
    if u is None:
        if len(_STACKS) >= _STACKS_MAX:
            _STACKS.clear()
        u = _STACKS[key] = node.mode_map().full(registry, n_spins)
    return u


class CompiledCircuit:
    """Circuit with element runs fused into per-spin-configuration matrices."""

    def __init__(self, circuit: Circuit):
        self.circuit = circuit
        self.registry = circuit.registry
        k = circuit.n_spins
        n = len(self.registry)
        self.steps: list[tuple] = []
        run = None
        for node in circuit.nodes:
            if isinstance(node, Element):
                u = _element_stack(node, self.registry, k)
                run = u if run is None else u @ run
                continue
            if run is not None:
                self.steps.append(("map", run))
                run = None
            if isinstance(node, Interfere):
                self.steps.append(("interfere", node))
            elif isinstance(node, Herald):
                idx = self.registry.indices([Mode(node.port, "L"), Mode(node.port, "R")])
                keep = np.ones(n)
                keep[idx] = 0
                self.steps.append(("herald", np.outer(keep, keep)))
            elif isinstance(node, Measure):
                corr = np.broadcast_to(np.eye(n, dtype=complex), (2 ** k, n, n))
                for c in node.minus:
                    corr = _element_stack(c, self.registry, k) @ corr
                self.steps.append(("measure", node.qd, corr))
            elif isinstance(node, PostSelect):
                self.steps.append(("post", _coincidence_mask(self.registry, node)))
        if run is not None:
            self.steps.append(("map", run))

    def execute(self, coeffs: np.ndarray) -> tuple[list[_Branch], np.ndarray, np.ndarray]:
        """Run a batch of initial coefficient stacks.

        Returns the surviving branches, the heralded-away probability and the
        post-selected-away probability per batch entry.
        """
        k, reg = self.circuit.n_spins, self.registry
        branches = [_Branch("", np.asarray(coeffs, dtype=complex))]
        heralded = np.zeros(coeffs.shape[0])
        rejected = np.zeros(coeffs.shape[0])
        for step in self.steps:
            kind = step[0]
            if kind == "map":
                for b in branches:
                    b.coeffs = apply_array(b.coeffs, step[1])
            elif kind == "interfere":
                node = step[1]
                for b in branches:
                    b.coeffs = ideal_interference_array(b.coeffs, reg, k, *node.ports, node.matrix)
            elif kind in ("herald", "post"):
                for b in branches:
                    before = norms_array(b.coeffs)
                    b.coeffs = b.coeffs * step[1]
                    lost = before - norms_array(b.coeffs)
                    if kind == "herald":
                        heralded += lost
                    else:
                        rejected += lost
            elif kind == "measure":
                _, qd, corr = step
                split = []
                for b in branches:
                    for outcome in "+-":
                        comp = spin_component_array(b.coeffs, k, qd, outcome)
                        c = embed_spin_array(comp, k, qd, "+")  # reset by fiat
                        if outcome == "-":
                            c = apply_array(c, corr)
                        split.append(_Branch(b.label + outcome, c))
                branches = split
        return branches, heralded, rejected


def _coincidence_mask(registry: Registry, node: PostSelect) -> np.ndarray:
    n = len(registry)
    side = np.zeros(n, dtype=int)
    for i, mode in enumerate(registry.modes):
        if mode.spatial in node.m_ports:
            side[i] = 1
        elif mode.spatial in node.n_ports:
            side[i] = 2
    ok = ((side[:, None] == 1) & (side[None, :] == 2)) | ((side[:, None] == 2) & (side[None, :] == 1))
    return ok.astype(float)


def _photon_branches(branches: list[_Branch], n_spins: int) -> dict[str, np.ndarray]:
    """Split off any unmeasured spins in the +/- basis; returns photon-only
    stacks (batch, n, n) keyed by the full outcome record."""
    out = {}
    for b in branches:
        for tail in itertools.product("+-", repeat=n_spins):
            c = b.coeffs
            for j, o in enumerate(tail):
                c = spin_component_array(c, n_spins - j, 0, o)
            out[b.label + "|" + "".join(tail)] = c[:, 0]
    return out


def _encoded_indices(registry: Registry) -> tuple[np.ndarray, np.ndarray]:
    pairs = [registry.indices(encoded_pair(*divmod(k, 4))) for k in range(16)]
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


@dataclass
class GateReport:
    process_matrix: np.ndarray
    branch_matrices: dict
    per_basis_fidelity: np.ndarray
    mean_fidelity: float
    input_fidelity: float
    input_raw_overlap: float
    efficiency: float
    efficiency_amp: float
    herald_probability: float
    postselection_probability: float
    branch_stats: dict
    per_basis_efficiency: np.ndarray = field(repr=False)
    input_output: np.ndarray = field(repr=False)

    @property
    def min_fidelity(self) -> float:
        return float(np.min(self.per_basis_fidelity))

    def to_dict(self) -> dict:
        def cplx(m):
            return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}
        return {
            "process_matrix": cplx(self.process_matrix),
            "branch_matrices": {k: cplx(v) for k, v in self.branch_matrices.items()},
            "per_basis_fidelity": self.per_basis_fidelity.tolist(),
            "per_basis_efficiency": self.per_basis_efficiency.tolist(),
            "mean_fidelity": self.mean_fidelity,
            "input_fidelity": self.input_fidelity,
            "input_raw_overlap": self.input_raw_overlap,
            "efficiency": self.efficiency,
            "efficiency_amp": self.efficiency_amp,
            "herald_probability": self.herald_probability,
            "postselection_probability": self.postselection_probability,
            "branch_stats": dict(self.branch_stats),
        }


UNIFORM_INPUT = np.full(16, 0.25, dtype=complex)


def initial_batch(registry: Registry, n_spins: int, inputs16: np.ndarray) -> np.ndarray:
    """(batch, 2**k, n, n) stacks for rows of encoded amplitudes."""
    inputs16 = np.atleast_2d(np.asarray(inputs16, dtype=complex))
    ii, jj = _encoded_indices(registry)
    n = len(registry)
    c = np.zeros((len(inputs16), n, n), dtype=complex)
    np.add.at(c, (slice(None), ii, jj), inputs16 / 2)
    c = c + np.swapaxes(c, 1, 2)
    c = c * 2.0 ** (-n_spins / 2)
    return np.repeat(c[:, None], 2 ** n_spins, axis=1)


def run(circuit: Circuit | CompiledCircuit, input_state=None) -> GateReport:
    """Execute the circuit on all sixteen encoded basis inputs and on
    ``input_state`` (16 encoded amplitudes or a spin-free/|+>-spin
    :class:`FockState`; default: the uniform superposition)."""
    compiled = circuit if isinstance(circuit, CompiledCircuit) else CompiledCircuit(circuit)
    circ, reg = compiled.circuit, compiled.registry
    amps = _input_amplitudes(input_state, reg)
    batch = np.vstack([np.eye(16, dtype=complex), amps[None]])
    branches, heralded, rejected = compiled.execute(initial_batch(reg, circ.n_spins, batch))
    photons = _photon_branches(branches, circ.n_spins)

    ii, jj = _encoded_indices(reg)
    perm = csum_permutation()
    branch_mats, norms, overlaps = {}, {}, {}
    for label, c in photons.items():
        enc = 2 * c[:, ii, jj]  # (batch, 16) encoded output amplitudes
        norms[label] = norms_array(c[:, None])
        if not np.any(norms[label] > 0):
            continue
        branch_mats[label] = enc[:16].T
        ideal_out = batch @ perm.T
        overlaps[label] = np.abs(np.sum(ideal_out.conj() * enc, axis=1)) ** 2
    total = sum(norms.values())
    good = sum(overlaps.values())
    if total[16] == 0 or np.any(total[:16] == 0):
        raise UndefinedFidelityError("the circuit discards every output for some input")
    fid = np.minimum(good / total, 1.0)
    ideal_norm = np.vdot(amps, amps).real
    stats = {label.split("|")[0] or "none": 0.0 for label in norms}
    for label, nrm in norms.items():
        stats[label.split("|")[0] or "none"] += float(nrm[16])
    return GateReport(
        process_matrix=_combine(branch_mats),
        branch_matrices=branch_mats,
        per_basis_fidelity=fid[:16],
        mean_fidelity=float(np.mean(fid[:16])),
        input_fidelity=float(fid[16]),
        input_raw_overlap=float(good[16] / ideal_norm),
        efficiency=float(total[16]),
        efficiency_amp=float(np.sqrt(total[16])),
        herald_probability=float(heralded[16]),
        postselection_probability=float(total[16]) if any(
            isinstance(n, PostSelect) for n in circ.nodes) else 1.0,
        branch_stats=stats,
        per_basis_efficiency=total[:16],
        input_output=np.array([2 * c[16, ii, jj] for c in photons.values()]),
    )


def _input_amplitudes(input_state, registry: Registry) -> np.ndarray:
    if input_state is None:
        return UNIFORM_INPUT.copy()
    if isinstance(input_state, FockState):
        ref = input_state
        if ref.n_spins:
            ref = FockState(ref.registry, 0, ref.coeffs.sum(axis=0, keepdims=True)
                            * 2.0 ** (-ref.n_spins / 2))
        ii, jj = _encoded_indices(ref.registry)
        amps = 2 * ref.coeffs[0, ii, jj]
    else:
        amps = np.asarray(input_state, dtype=complex).reshape(-1)
        if amps.shape != (16,):
            raise ConfigurationError("input needs 16 encoded amplitudes")
    if abs(np.vdot(amps, amps).real - 1) > 1e-10:
        from .errors import NormalizationError
        raise NormalizationError("input amplitudes are not normalized over the encoded basis")
    return amps


def _combine(mats: dict) -> np.ndarray:
    """Single process matrix from per-branch matrices.

    Branches are phase-aligned to the first one and summed; each column is
    then rescaled to the total probability of that input over all branches,
    and a global phase makes the (0, 0) entry real and non-negative.
    """
    if not mats:
        return np.zeros((16, 16), dtype=complex)
    items = list(mats.values())
    ref = items[0]
    acc = np.zeros((16, 16), dtype=complex)
    for m in items:
        ov = np.vdot(ref, m)
        acc += m * (np.conj(ov) / abs(ov) if abs(ov) > 0 else 1)
    target = np.sqrt(sum(np.sum(np.abs(m) ** 2, axis=0) for m in items))
    cur = np.linalg.norm(acc, axis=0)
    scale = np.divide(target, cur, out=np.zeros_like(target), where=cur > 0)
    acc = acc * scale
    pivot = acc[0, 0] if abs(acc[0, 0]) > 0 else acc.flat[np.argmax(np.abs(acc))]
    if abs(pivot) > 0:
        acc = acc * (abs(pivot) / pivot)
    return acc


def run_basis(circuit: Circuit, c: int, t: int) -> GateReport:
    amps = np.zeros(16, dtype=complex)
    amps[4 * c + t] = 1
    return run(circuit, amps)


def evolve(circuit: Circuit, state: FockState) -> tuple[dict, float, float]:
    """Run ``circuit`` on one state.

    Returns ``({record: FockState}, heralded probability, rejected
    probability)``; measured spins are reset to |+> in every branch.
    """
    if state.registry != circuit.registry or state.n_spins != circuit.n_spins:
        raise ConfigurationError("state does not live on the circuit's registry")
    compiled = CompiledCircuit(circuit)
    branches, heralded, rejected = compiled.execute(state.coeffs[None])
    out = {b.label: FockState(circuit.registry, circuit.n_spins, b.coeffs[0]) for b in branches}
    return out, float(heralded[0]), float(rejected[0])


def prefix(circuit: Circuit, n_nodes: int) -> Circuit:
    """The first ``n_nodes`` nodes of ``circuit`` as a circuit of their own."""
    return Circuit(circuit.spatial_ids, circuit.n_spins, circuit.nodes[:n_nodes],
                   f"{circuit.name}[:{n_nodes}]")


def output_probabilities(circuit: Circuit | CompiledCircuit, inputs16) -> np.ndarray:
    """Total surviving probability for each row of encoded input amplitudes,
    summed over measurement records (one batched execution)."""
    compiled = circuit if isinstance(circuit, CompiledCircuit) else CompiledCircuit(circuit)
    reg, n_spins = compiled.registry, compiled.circuit.n_spins
    branches, _, _ = compiled.execute(initial_batch(reg, n_spins, inputs16))
    return sum(norms_array(b.coeffs) for b in branches)
