"""Two-photon Fock states with optional quantum-dot spins.

A state is stored as one symmetric matrix ``S`` per spin configuration,
holding the coefficients of the creation-operator polynomial

    |psi> = sum_ij S[i, j] a_i^dag a_j^dag |vac>.

A linear mode map ``a_i^dag -> sum_k U[k, i] a_k^dag`` then acts as
``S -> U S U^T``, bosonic symmetrization comes for free, and the norm is
``2 * ||S||_F^2``.  Occupation-basis amplitudes are ``2 S[i, j]`` for
``i < j`` and ``sqrt(2) S[i, i]`` for a doubly occupied mode.

Spin configurations are indexed big-endian over the dots with bit 0 for
spin up and bit 1 for spin down.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, NormalizationError, UndefinedFidelityError

L, R = "L", "R"
POLARIZATIONS = (L, R)
UP, DOWN = 0, 1

PRUNE_THRESHOLD = 1e-15
UNITARY_TOL = 1e-12
NORM_TOL = 1e-10

SQRT2 = np.sqrt(2.0)


class Mode(NamedTuple):
    spatial: str
    pol: str

    @property
    def photon_tag(self) -> str:
        # bookkeeping only: m* paths belong to photon M, n* paths to photon N
        return {"m": "M", "n": "N"}.get(self.spatial[:1], "-")

    def __str__(self) -> str:
        return f"{self.spatial}:{self.pol}"


class Registry:
    """Ordered, fixed set of single-photon modes."""

    def __init__(self, spatial_ids: Iterable[str]):
        spatial = tuple(spatial_ids)
        if len(set(spatial)) != len(spatial):
            raise ConfigurationError(f"duplicate spatial ids in {spatial}")
        self.spatial_ids = spatial
        self.modes = tuple(Mode(s, p) for s in spatial for p in POLARIZATIONS)
        self._index = {m: i for i, m in enumerate(self.modes)}

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self) -> Iterator[Mode]:
        return iter(self.modes)

    def __contains__(self, mode) -> bool:
        return mode in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Registry) and self.modes == other.modes

    def __hash__(self) -> int:
        return hash(self.modes)

    def __repr__(self) -> str:
        return f"Registry({list(self.spatial_ids)})"

    def index(self, mode: Mode) -> int:
        try:
            return self._index[Mode(*mode)]
        except KeyError:
            raise ConfigurationError(f"mode {mode} is not registered") from None

    def indices(self, modes: Iterable[Mode]) -> list[int]:
        return [self.index(m) for m in modes]


def spin_bit(config: int, qd: int, n_spins: int) -> int:
    return (config >> (n_spins - 1 - qd)) & 1


# ---------------------------------------------------------------------------
# Mode maps


@dataclass(frozen=True, eq=False)
class Block:
    """Square matrix over a subset of modes, optionally active only when
    dot ``condition[0]`` holds spin value ``condition[1]``."""

    modes: tuple[Mode, ...]
    matrix: np.ndarray
    condition: tuple[int, int] | None = None

    def __post_init__(self):
        modes = tuple(Mode(*m) for m in self.modes)
        mat = np.array(self.matrix, dtype=complex)
        mat.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "matrix", mat)
        if mat.shape != (len(modes), len(modes)):
            raise ConfigurationError(
                f"matrix shape {mat.shape} does not match {len(modes)} modes")
        if len(set(modes)) != len(modes):
            raise ConfigurationError(f"repeated mode in block {modes}")
        if self.condition is not None and self.condition[1] not in (UP, DOWN):
            raise ConfigurationError(f"bad spin condition {self.condition}")


@dataclass(frozen=True, eq=False)
class ModeMap:
    """Linear transformation on creation operators.

    Blocks either act on disjoint mode sets or, when spin-conditioned, come
    as a complete pair (up, down) on the same set and the same dot.
    """

    blocks: tuple[Block, ...]
    sub_unitary: bool = False
    name: str = ""
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        self._validate()

    def _validate(self):
        groups: dict[frozenset, list[Block]] = {}
        for b in self.blocks:
            groups.setdefault(frozenset(b.modes), []).append(b)
        keys = list(groups)
        for a, b in itertools.combinations(keys, 2):
            if a & b:
                raise ConfigurationError("blocks overlap on modes " + ", ".join(map(str, a & b)))
        for key, blocks in groups.items():
            conds = [b.condition for b in blocks]
            if len(blocks) == 1 and conds[0] is None:
                continue
            if None in conds or len({c[0] for c in conds}) != 1 \
                    or sorted(c[1] for c in conds) != [UP, DOWN]:
                raise ConfigurationError(
                    "spin-conditioned blocks must cover up and down of one dot exactly once")
        for b in self.blocks:
            m = b.matrix
            if self.sub_unitary:
                if np.linalg.norm(m, 2) > 1 + UNITARY_TOL:
                    raise ConfigurationError(f"{self.name or 'map'}: operator norm exceeds 1")
            elif np.max(np.abs(m.conj().T @ m - np.eye(len(m)))) > UNITARY_TOL:
                raise ConfigurationError(f"{self.name or 'map'}: block is not unitary")

    @property
    def modes(self) -> tuple[Mode, ...]:
        seen: dict[Mode, None] = {}
        for b in self.blocks:
            seen.update(dict.fromkeys(b.modes))
        return tuple(seen)

    @property
    def spin_conditioned(self) -> bool:
        return any(b.condition is not None for b in self.blocks)

    def full(self, registry: Registry, n_spins: int) -> np.ndarray:
        """Dense (2**n_spins, n, n) stack of per-spin-configuration matrices."""
        key = (registry, n_spins)
        if key not in self._cache:
            n = len(registry)
            out = np.broadcast_to(np.eye(n, dtype=complex), (2 ** n_spins, n, n)).copy()
            for b in self.blocks:
                idx = registry.indices(b.modes)
                sel = np.ix_(idx, idx)
                if b.condition is None:
                    out[(slice(None),) + sel] = b.matrix
                    continue
                qd, val = b.condition
                if not 0 <= qd < n_spins:
                    raise ConfigurationError(f"dot index {qd} out of range for {n_spins} spins")
                for cfg in range(2 ** n_spins):
                    if spin_bit(cfg, qd, n_spins) == val:
                        out[(cfg,) + sel] = b.matrix
            out.setflags(write=False)
            self._cache[key] = out
        return self._cache[key]

    def then(self, other: "ModeMap") -> "ModeMap":
        """Map equivalent to applying ``self`` first, then ``other``.

        Only spin-free maps compose into a single block; the result is a
        block on the union of both maps' modes.
        """
        if self.spin_conditioned or other.spin_conditioned:
            raise ConfigurationError("cannot fuse spin-conditioned maps")
        modes = tuple(dict.fromkeys(self.modes + other.modes))
        reg = _AdHocRegistry(modes)
        mat = other.full(reg, 0)[0] @ self.full(reg, 0)[0]
        return ModeMap((Block(modes, mat),), sub_unitary=self.sub_unitary or other.sub_unitary,
                       name=f"{self.name}*{other.name}".strip("*"))


class _AdHocRegistry(Registry):
    def __init__(self, modes: Sequence[Mode]):
        self.spatial_ids = tuple(dict.fromkeys(m.spatial for m in modes))
        self.modes = tuple(Mode(*m) for m in modes)
        self._index = {m: i for i, m in enumerate(self.modes)}


def single_block(modes: Sequence[Mode], matrix, *, sub_unitary=False, name="") -> ModeMap:
    return ModeMap((Block(tuple(modes), matrix),), sub_unitary=sub_unitary, name=name)


IDENTITY = ModeMap((), name="identity")


# ---------------------------------------------------------------------------
# States


@dataclass(frozen=True, eq=False)
class FockState:
    registry: Registry
    n_spins: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        n = len(self.registry)
        if c.shape != (2 ** self.n_spins, n, n):
            raise ConfigurationError(
                f"coefficient shape {c.shape} does not match registry/spins")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, registry: Registry, n_spins: int = 0) -> "FockState":
        n = len(registry)
        return cls(registry, n_spins, np.zeros((2 ** n_spins, n, n), dtype=complex))

    @classmethod
    def from_amplitudes(cls, registry: Registry, n_spins: int,
                        amps: Mapping[tuple[tuple[Mode, Mode], tuple[int, ...]], complex]
                        ) -> "FockState":
        """Build from occupation-basis amplitudes keyed by ((mode, mode), spins)."""
        c = np.zeros((2 ** n_spins, len(registry), len(registry)), dtype=complex)
        for (pair, spins), amp in amps.items():
            if len(spins) != n_spins:
                raise ConfigurationError(f"spin config {spins} has wrong length")
            cfg = _spin_index(spins)
            i, j = registry.indices(pair)
            if i == j:
                c[cfg, i, i] += amp / SQRT2
            else:
                c[cfg, i, j] += amp / 2
                c[cfg, j, i] += amp / 2
        return cls(registry, n_spins, c)

    def amplitudes(self, threshold: float = PRUNE_THRESHOLD) -> dict:
        """Occupation-basis amplitudes ``{((mode, mode), spins): amp}``,
        dropping entries with magnitude below ``threshold``."""
        out = {}
        modes = self.registry.modes
        for cfg in range(2 ** self.n_spins):
            spins = tuple(spin_bit(cfg, q, self.n_spins) for q in range(self.n_spins))
            s = self.coeffs[cfg]
            for i, j in zip(*np.triu_indices(len(modes))):
                amp = SQRT2 * s[i, i] if i == j else 2 * s[i, j]
                if abs(amp) >= threshold:
                    out[((modes[i], modes[j]), spins)] = complex(amp)
        return out

    def pruned(self, threshold: float = PRUNE_THRESHOLD) -> "FockState":
        c = np.where(np.abs(self.coeffs) < threshold / 2, 0, self.coeffs)
        return FockState(self.registry, self.n_spins, c)

    def __add__(self, other: "FockState") -> "FockState":
        _check_compatible(self, other)
        return FockState(self.registry, self.n_spins, self.coeffs + other.coeffs)

    def __sub__(self, other: "FockState") -> "FockState":
        _check_compatible(self, other)
        return FockState(self.registry, self.n_spins, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "FockState":
        return FockState(self.registry, self.n_spins, self.coeffs * scalar)

    __rmul__ = __mul__

    def vector(self) -> np.ndarray:
        """Occupation-basis amplitude vector (orthonormal basis ordering of
        :func:`fock_basis`) for every spin configuration, flattened."""
        iu = np.triu_indices(len(self.registry))
        weights = np.where(iu[0] == iu[1], SQRT2, 2.0)
        return (self.coeffs[:, iu[0], iu[1]] * weights).reshape(-1)


def _spin_index(spins: Sequence[int]) -> int:
    idx = 0
    for s in spins:
        idx = (idx << 1) | int(s)
    return idx


def _check_compatible(a: FockState, b: FockState):
    if a.registry != b.registry or a.n_spins != b.n_spins:
        raise ConfigurationError("states live on different registries")


def fock_basis(registry: Registry) -> list[tuple[int, int]]:
    """Two-photon occupation basis as index pairs (i <= j), C(n+1, 2) of them."""
    return list(zip(*map(list, np.triu_indices(len(registry)))))


# ---------------------------------------------------------------------------
# Operations


def norm_sq(state: FockState) -> float:
    return float(2 * np.sum(np.abs(state.coeffs) ** 2))


def inner(a: FockState, b: FockState) -> complex:
    """<a|b>."""
    _check_compatible(a, b)
    return complex(2 * np.vdot(a.coeffs, b.coeffs))


def overlap(state: FockState, reference: FockState) -> complex:
    """Raw amplitude <reference|state>, no normalization."""
    return inner(reference, state)


def fidelity(state: FockState, reference: FockState) -> float:
    """|<reference|state>|^2 / <state|state> for a normalized reference."""
    ref_norm = norm_sq(reference)
    if abs(ref_norm - 1) > NORM_TOL:
        raise ConfigurationError(f"reference is not normalized (norm^2 = {ref_norm})")
    nrm = norm_sq(state)
    if nrm == 0.0:
        raise UndefinedFidelityError("fidelity of a zero-norm state")
    return min(abs(inner(reference, state)) ** 2 / nrm, 1.0)


def apply(state: FockState, mode_map: ModeMap) -> FockState:
    u = mode_map.full(state.registry, state.n_spins)
    return FockState(state.registry, state.n_spins, apply_array(state.coeffs, u))


def apply_array(coeffs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """S -> U S U^T over any leading batch dimensions."""
    return u @ coeffs @ np.swapaxes(u, -1, -2)


def norms_array(coeffs: np.ndarray) -> np.ndarray:
    return 2 * np.sum(np.abs(coeffs) ** 2, axis=(-3, -2, -1))


def postselect(state: FockState, predicate: Callable[[tuple[Mode, Mode]], bool]
               ) -> tuple[FockState, float]:
    """Keep the occupation patterns accepted by ``predicate``.

    Returns the unnormalized projected state and its squared norm.
    """
    mask = pattern_mask(state.registry, predicate)
    kept = FockState(state.registry, state.n_spins, state.coeffs * mask)
    return kept, norm_sq(kept)


def pattern_mask(registry: Registry, predicate) -> np.ndarray:
    cached = getattr(predicate, "mask", None)
    if cached is not None:
        return cached(registry)
    n = len(registry)
    mask = np.zeros((n, n))
    modes = registry.modes
    for i, j in fock_basis(registry):
        mask[i, j] = mask[j, i] = bool(predicate((modes[i], modes[j])))
    return mask


def measure_spin(state: FockState, qd_index: int, basis: str = "+-"
                 ) -> list[tuple[str, FockState, float]]:
    """Project dot ``qd_index`` onto |+> and |->.

    Branch states are unnormalized and keep the projected spin.
    """
    if basis != "+-":
        raise ConfigurationError(f"unsupported measurement basis {basis!r}")
    k = state.n_spins
    if not 0 <= qd_index < k:
        raise ConfigurationError(f"dot index {qd_index} out of range for {k} spins")
    out = []
    for outcome in "+-":
        c = project_spin(state, qd_index, outcome)
        out.append((outcome, c, norm_sq(c)))
    return out


def spin_component_array(coeffs: np.ndarray, n_spins: int, qd_index: int,
                         outcome: str) -> np.ndarray:
    """<outcome|_qd applied to stacked coefficients; the result keeps the
    remaining dots flattened as (..., 2**(n_spins-1), n, n)."""
    n = coeffs.shape[-1]
    lead = coeffs.shape[:-3]
    c = coeffs.reshape(lead + (2,) * n_spins + (n, n))
    axis = len(lead) + qd_index
    up = np.take(c, UP, axis=axis)
    down = np.take(c, DOWN, axis=axis)
    sign = {"+": 1, "-": -1}[outcome]
    return ((up + sign * down) / SQRT2).reshape(lead + (2 ** (n_spins - 1), n, n))


def embed_spin_array(comp: np.ndarray, n_spins: int, qd_index: int, outcome: str) -> np.ndarray:
    """Inverse of :func:`spin_component_array`: tensor |outcome> back in."""
    n = comp.shape[-1]
    lead = comp.shape[:-3]
    c = comp.reshape(lead + (2,) * (n_spins - 1) + (n, n))
    sign = {"+": 1, "-": -1}[outcome]
    stacked = np.stack([c / SQRT2, sign * c / SQRT2], axis=len(lead) + qd_index)
    return stacked.reshape(lead + (2 ** n_spins, n, n))


def project_spin(state: FockState, qd_index: int, outcome: str) -> FockState:
    comp = spin_component_array(state.coeffs, state.n_spins, qd_index, outcome)
    return FockState(state.registry, state.n_spins,
                     embed_spin_array(comp, state.n_spins, qd_index, outcome))


def reset_spin(state: FockState, qd_index: int, outcome: str) -> FockState:
    """Re-prepare a dot found in ``outcome`` as |+> (reset by fiat)."""
    comp = spin_component_array(state.coeffs, state.n_spins, qd_index, outcome)
    return FockState(state.registry, state.n_spins,
                     embed_spin_array(comp, state.n_spins, qd_index, "+"))


def photon_array(coeffs: np.ndarray, spins: str) -> np.ndarray:
    """Contract every dot with <spins[q]|; returns (..., n, n)."""
    c = coeffs
    k = len(spins)
    for q, outcome in enumerate(spins):
        c = spin_component_array(c, k - q, 0, outcome)
    return c[..., 0, :, :]


def photon_state(state: FockState, spins: str) -> FockState:
    """Photon part after contracting every dot with <spins[q]| (``'+'``/``'-'``)."""
    if len(spins) != state.n_spins:
        raise ConfigurationError("need one outcome per dot")
    return FockState(state.registry, 0, photon_array(state.coeffs, spins)[None])


def with_spins(photons: FockState, n_spins: int) -> FockState:
    """Tensor a spin-free state with |+> on ``n_spins`` dots."""
    if photons.n_spins:
        raise ConfigurationError("state already carries spins")
    amp = 2.0 ** (-n_spins / 2)
    c = np.broadcast_to(photons.coeffs[0] * amp, (2 ** n_spins,) + photons.coeffs.shape[1:])
    return FockState(photons.registry, n_spins, c.copy())


def ideal_interference(state: FockState, port_a: str, port_b: str, matrix) -> FockState:
    """Two-port splitter with perfect two-photon interference.

    Acts as the ordinary polarization-independent splitter ``matrix`` on
    (port_a, port_b), except that one photon in each port with different
    polarizations interferes as if the photons were identical: the
    coincidence amplitude becomes ``u_aa u_bb + u_ab u_ba`` with each output
    port keeping its input photon's polarization, and the bunched amplitudes
    take the identical-photon value.  For equal polarizations this is exactly
    the physical splitter.
    """
    c = ideal_interference_array(state.coeffs, state.registry, state.n_spins,
                                 port_a, port_b, matrix)
    return FockState(state.registry, state.n_spins, c)


def ideal_interference_array(coeffs, registry: Registry, n_spins: int,
                             port_a: str, port_b: str, matrix) -> np.ndarray:
    u = np.asarray(matrix, dtype=complex)
    a = {p: registry.index(Mode(port_a, p)) for p in POLARIZATIONS}
    b = {p: registry.index(Mode(port_b, p)) for p in POLARIZATIONS}
    c = np.array(coeffs, dtype=complex)
    # pull out the mixed-polarization coincidence sector
    mixed = {}
    for p, q in ((L, R), (R, L)):
        i, j = a[p], b[q]
        mixed[(p, q)] = 2 * c[..., i, j]  # creation-polynomial coefficient
        c[..., i, j] = 0
        c[..., j, i] = 0
    blocks = tuple(Block((Mode(port_a, p), Mode(port_b, p)), u) for p in POLARIZATIONS)
    c = apply_array(c, ModeMap(blocks, name="bs").full(registry, n_spins))
    coinc = u[0, 0] * u[1, 1] + u[0, 1] * u[1, 0]
    bunch_a = SQRT2 * u[0, 0] * u[0, 1]
    bunch_b = SQRT2 * u[1, 0] * u[1, 1]
    for (p, q), poly in mixed.items():
        for (i, j), amp in (((a[p], b[q]), coinc), ((a[p], a[q]), bunch_a),
                            ((b[p], b[q]), bunch_b)):
            c[..., i, j] += poly * amp / 2
            c[..., j, i] += poly * amp / 2
    return c


# ---------------------------------------------------------------------------
# Input states

CONTROL_ORDER = ((L, L), (L, R), (R, L), (R, R))
TARGET_ORDER = (("m1", "n1"), ("m1", "n2"), ("m2", "n1"), ("m2", "n2"))

INPUT_REGISTRY = Registry(["m1", "m2", "n1", "n2"])


def encoded_pair(c: int, t: int) -> tuple[Mode, Mode]:
    """Modes occupied by photons M and N for encoded basis state |c, t>."""
    (pm, pn), (sm, sn) = CONTROL_ORDER[c], TARGET_ORDER[t]
    return Mode(sm, pm), Mode(sn, pn)


def encoded_state(amps16, registry: Registry = INPUT_REGISTRY, n_spins: int = 0) -> FockState:
    """Spin-|+> state from 16 amplitudes over the encoded basis, index 4*c + t."""
    amps16 = np.asarray(amps16, dtype=complex).reshape(16)
    for s in ("m1", "m2", "n1", "n2"):
        if s not in registry.spatial_ids:
            raise ConfigurationError(f"registry lacks input spatial mode {s}")
    c = np.zeros((len(registry), len(registry)), dtype=complex)
    for k, amp in enumerate(amps16):
        i, j = registry.indices(encoded_pair(*divmod(k, 4)))
        c[i, j] += amp / 2
        c[j, i] += amp / 2
    return with_spins(FockState(registry, 0, c[None]), n_spins)


def build_input(control_amps, target_amps, spin_count: int = 0,
                registry: Registry = INPUT_REGISTRY) -> FockState:
    """Product input: polarization amplitudes over (LL, LR, RL, RR) times spatial
    amplitudes over (m1n1, m1n2, m2n1, m2n2), times |+> per dot."""
    ca = np.asarray(control_amps, dtype=complex)
    ta = np.asarray(target_amps, dtype=complex)
    for name, v in (("control", ca), ("target", ta)):
        if v.shape != (4,):
            raise ConfigurationError(f"{name} amplitudes need 4 entries")
        if abs(np.vdot(v, v).real - 1) > NORM_TOL:
            raise NormalizationError(f"{name} amplitudes are not normalized")
    if spin_count not in (0, 1, 2):
        raise ConfigurationError("spin_count must be 0, 1 or 2")
    return encoded_state(np.kron(ca, ta), registry, spin_count)
