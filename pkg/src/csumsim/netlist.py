"""Declarative circuits and their text form.

A circuit is a registry of spatial modes, a number of quantum-dot spins and
an ordered list of nodes:

* :class:`Element`: a passive element or cavity scattering, compiled to a
  :class:`~csumsim.fock.ModeMap`;
* :class:`Interfere`: two-port splitter with ideal two-photon interference;
* :class:`Herald`: detector on one spatial mode whose clicks are discarded;
* :class:`Measure`: +/- measurement of one spin with corrections on ``-``;
* :class:`PostSelect`: keep one photon among the M ports and one among the N
  ports.

Text format, one node per line, ``#`` starts a comment::

    CIRCUIT <name>
    REGISTRY m1 m2 n1 n2
    SPINS 0
    <KIND> <port> ... key=value ...

Values are Python literals: ints, floats and complex numbers written with
``repr`` so they parse back bit-exactly.  ``MEASURE`` takes
``qd=<int> minus="<node>; <node>"`` with the corrections as nested nodes.
``POSTSELECT`` takes ``m=a,b n=c,d``.
"""
from __future__ import annotations

import ast
import shlex
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import elements as el
from .cavity import scatter
from .errors import ConfigurationError
from .fock import ModeMap, Registry


def _beam_splitter(ports, p):
    return el.beam_splitter(p["reflectivity"], *ports, sign=p.get("sign", 1))


def _bs_imperfect(ports, p):
    return el.beam_splitter_imperfect(p["xi"], *ports)


def _bs_real_imperfect(ports, p):
    return el._both_pols(*ports, el.beam_splitter_real_imperfect_matrix(p["xi"]), "bs_real_imperfect")


def _scatter(ports, p):
    return scatter(p["qd"], ports[0], (p["r1"], p["r0"]))


# kind -> (number of ports, {param: type}, builder)
ELEMENT_KINDS: dict[str, tuple[int, dict[str, type], Callable]] = {
    "CPBS": (3, {}, lambda ports, p: el.cpbs(*ports)),
    "CPBS_IMP": (1, {"p": float, "phi": float},
                 lambda ports, p: el.cpbs_imperfect(ports[0], p["p"], p["phi"])),
    "CPBS_INV": (1, {"p": float}, lambda ports, p: el.cpbs_inverse_imperfect(ports[0], p["p"])),
    "BS": (2, {"reflectivity": float, "sign": int}, _beam_splitter),
    "BS_IMP": (2, {"xi": float}, _bs_imperfect),
    "BS_REAL_IMP": (2, {"xi": float}, _bs_real_imperfect),
    "X": (1, {}, lambda ports, p: el.waveplate_x(ports[0])),
    "H": (1, {}, lambda ports, p: el.hadamard_h(ports[0])),
    "PHASE": (1, {"theta": float}, lambda ports, p: el.phase(ports[0], p["theta"])),
    "PI": (1, {}, lambda ports, p: el.phase_pi(ports[0])),
    "WFC": (1, {"amp": complex}, lambda ports, p: el.wfc(ports[0], p["amp"])),
    "SWAP": (2, {}, lambda ports, p: el.swap(*ports)),
    "SCATTER": (1, {"qd": int, "r1": complex, "r0": complex}, _scatter),
}


_OPTIONAL = {"BS": {"sign"}}


def _coerce(kind: str, key: str, typ: type, value):
    try:
        if typ is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if typ is float:
            if isinstance(value, complex):
                raise ValueError
            return float(value)
        return complex(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{kind}: parameter {key}={value!r} is not {typ.__name__}") from None


@dataclass(frozen=True)
class Element:
    kind: str
    ports: tuple[str, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ConfigurationError(f"unknown element kind {self.kind!r}")
        n_ports, types, _ = ELEMENT_KINDS[self.kind]
        ports = tuple(self.ports)
        if len(ports) != n_ports:
            raise ConfigurationError(f"{self.kind} needs {n_ports} ports, got {len(ports)}")
        unknown = set(self.params) - set(types)
        if unknown:
            raise ConfigurationError(f"{self.kind}: unknown parameters {sorted(unknown)}")
        params = {k: _coerce(self.kind, k, types[k], v) for k, v in self.params.items()}
        object.__setattr__(self, "ports", ports)
        object.__setattr__(self, "params", params)
        missing = set(types) - set(params) - _OPTIONAL.get(self.kind, set())
        if missing:
            raise ConfigurationError(f"{self.kind}: missing parameters {sorted(missing)}")
        self.mode_map()  # validates parameter ranges

    def mode_map(self) -> ModeMap:
        return ELEMENT_KINDS[self.kind][2](self.ports, self.params)

    @property
    def spins(self) -> tuple[int, ...]:
        return (self.params["qd"],) if "qd" in self.params else ()


@dataclass(frozen=True)
class Interfere:
    """Splitter on (a, b) with ideal two-photon interference; see
    :func:`csumsim.fock.ideal_interference`."""

    ports: tuple[str, str]
    reflectivity: float
    sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(self.ports))
        if len(self.ports) != 2:
            raise ConfigurationError("INTERFERE needs 2 ports")
        object.__setattr__(self, "reflectivity", float(self.reflectivity))
        object.__setattr__(self, "sign", int(self.sign))
        el.beam_splitter_matrix(self.reflectivity, self.sign)

    @property
    def matrix(self) -> np.ndarray:
        return el.beam_splitter_matrix(self.reflectivity, self.sign)


@dataclass(frozen=True)
class Herald:
    port: str
    label: str = "D"

    @property
    def ports(self) -> tuple[str, ...]:
        return (self.port,)


@dataclass(frozen=True)
class Measure:
    qd: int
    minus: tuple[Element, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "minus", tuple(self.minus))
        for node in self.minus:
            if not isinstance(node, Element):
                raise ConfigurationError("feed-forward corrections must be elements")
            if node.spins:
                raise ConfigurationError("feed-forward corrections cannot address spins")

    @property
    def ports(self) -> tuple[str, ...]:
        return tuple(p for node in self.minus for p in node.ports)


@dataclass(frozen=True)
class PostSelect:
    m_ports: tuple[str, ...]
    n_ports: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "m_ports", tuple(self.m_ports))
        object.__setattr__(self, "n_ports", tuple(self.n_ports))
        if set(self.m_ports) & set(self.n_ports):
            raise ConfigurationError("M and N acceptance ports overlap")

    @property
    def ports(self) -> tuple[str, ...]:
        return self.m_ports + self.n_ports


Node = Union[Element, Interfere, Herald, Measure, PostSelect]


@dataclass(frozen=True)
class Circuit:
    spatial_ids: tuple[str, ...]
    n_spins: int
    nodes: tuple[Node, ...]
    name: str = "circuit"

    def __post_init__(self):
        object.__setattr__(self, "spatial_ids", tuple(self.spatial_ids))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if self.n_spins not in (0, 1, 2):
            raise ConfigurationError("a circuit holds 0, 1 or 2 spins")
        known = set(self.spatial_ids)
        measured: set[int] = set()
        for node in self.nodes:
            missing = set(node.ports) - known
            if missing:
                raise ConfigurationError(f"{_kind(node)} references unregistered modes {sorted(missing)}")
            spins = node.spins if isinstance(node, Element) else ()
            if isinstance(node, Measure):
                spins = (node.qd,)
            for q in spins:
                if not 0 <= q < self.n_spins:
                    raise ConfigurationError(f"spin {q} is not declared (SPINS {self.n_spins})")
                if q in measured:
                    raise ConfigurationError(f"spin {q} is used after its measurement")
            if isinstance(node, Measure):
                measured.add(node.qd)
        posts = [n for n in self.nodes if isinstance(n, PostSelect)]
        if posts and self.nodes[-1] is not posts[-1] or len(posts) > 1:
            raise ConfigurationError("post-selection must be the single last node")

    @property
    def registry(self) -> Registry:
        return Registry(self.spatial_ids)

    def dumps(self) -> str:
        return dumps(self)


# ---------------------------------------------------------------------------
# text form


def _kind(node: Node) -> str:
    if isinstance(node, Element):
        return node.kind
    return {Interfere: "INTERFERE", Herald: "HERALD", Measure: "MEASURE",
            PostSelect: "POSTSELECT"}[type(node)]


def format_node(node: Node) -> str:
    if isinstance(node, Element):
        words = [node.kind, *node.ports]
        words += [f"{k}={v!r}" for k, v in node.params.items()]
    elif isinstance(node, Interfere):
        words = ["INTERFERE", *node.ports, f"reflectivity={node.reflectivity!r}", f"sign={node.sign}"]
    elif isinstance(node, Herald):
        words = ["HERALD", node.port, f"label={node.label}"]
    elif isinstance(node, Measure):
        words = ["MEASURE", f"qd={node.qd}",
                 "minus=" + shlex.quote("; ".join(format_node(c) for c in node.minus))]
        return " ".join(words)
    elif isinstance(node, PostSelect):
        words = ["POSTSELECT", "m=" + ",".join(node.m_ports), "n=" + ",".join(node.n_ports)]
    else:
        raise ConfigurationError(f"cannot format {node!r}")
    return " ".join(shlex.quote(w) if any(c in w for c in " ;\"'") else w for w in words)


def dumps(circuit: Circuit) -> str:
    lines = [f"CIRCUIT {circuit.name}", "REGISTRY " + " ".join(circuit.spatial_ids),
             f"SPINS {circuit.n_spins}"]
    lines += [format_node(n) for n in circuit.nodes]
    return "\n".join(lines) + "\n"


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_node(line: str) -> Node:
    words = shlex.split(line)
    if not words:
        raise ConfigurationError("empty node")
    kind, rest = words[0].upper(), words[1:]
    ports = [w for w in rest if "=" not in w]
    kv = dict(w.split("=", 1) for w in rest if "=" in w)
    if kind == "MEASURE":
        if ports or "qd" not in kv:
            raise ConfigurationError("MEASURE takes qd=<int> and optional minus=...")
        minus = [parse_node(part) for part in kv.get("minus", "").split(";") if part.strip()]
        return Measure(int(kv["qd"]), tuple(minus))
    if kind == "POSTSELECT":
        try:
            return PostSelect(tuple(kv["m"].split(",")), tuple(kv["n"].split(",")))
        except KeyError:
            raise ConfigurationError("POSTSELECT needs m=... and n=...") from None
    if kind == "HERALD":
        if len(ports) != 1:
            raise ConfigurationError("HERALD takes one port")
        return Herald(ports[0], kv.get("label", "D"))
    if kind == "INTERFERE":
        return Interfere(tuple(ports), float(_literal(kv["reflectivity"])),
                         int(_literal(kv.get("sign", "1"))))
    return Element(kind, tuple(ports), {k: _literal(v) for k, v in kv.items()})


def loads(text: str) -> Circuit:
    name, spatial, n_spins, nodes = "circuit", None, 0, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, tail = line.partition(" ")
        try:
            if head == "CIRCUIT":
                name = tail.strip() or name
            elif head == "REGISTRY":
                spatial = tail.split()
            elif head == "SPINS":
                n_spins = int(tail)
            else:
                nodes.append(parse_node(line))
        except (ConfigurationError, ValueError, KeyError) as exc:
            raise ConfigurationError(f"line {lineno}: {exc}") from None
    if spatial is None:
        raise ConfigurationError("netlist has no REGISTRY line")
    return Circuit(tuple(spatial), n_spins, tuple(nodes), name)
