"""Butterfly topology, unit-capacity typed links, coding nodes and transcript audit.

Qubits never travel as amplitudes here. A :class:`QubitRef` names a photon in
the protocol register, so the network layer has nothing it could duplicate.
A round is one complete protocol execution.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Union


class NetworkError(Exception):
    """Base class for network-layer violations."""


class CapacityExceeded(NetworkError):
    pass


class KindMismatch(NetworkError):
    pass


class NoCloning(NetworkError):
    """Raised when a qubit reference is handed to a copy node."""


class EdgeKind(str, Enum):
    QUANTUM = "quantum"
    CLASSICAL = "classical"


# (qubits, bits) an edge may carry in one round
CAPACITY = {EdgeKind.QUANTUM: (1, 0), EdgeKind.CLASSICAL: (0, 2)}


@dataclass(frozen=True)
class EdgeSpec:
    src: str
    dst: str
    kind: EdgeKind

    @property
    def name(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class QubitRef:
    """Reference to a photon of the protocol register.

    ``stream`` is the logical stream (1 or 2) the photon carries, if any.
    """

    photon: int
    stream: int | None = None


Bits = tuple[int, ...]
Payload = Union[QubitRef, Bits]


def _check_bits(bits) -> Bits:
    bits = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"bits must be 0/1, got {bits}")
    if len(bits) > 2:
        raise ValueError(f"classical payload is limited to 2 bits, got {len(bits)}")
    return bits


@dataclass(frozen=True)
class Topology:
    nodes: frozenset[str]
    edges: tuple[EdgeSpec, ...]

    def __post_init__(self):
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise ValueError(f"edge {e.name} has an endpoint outside the node set")

    def edge(self, src: str, dst: str) -> EdgeSpec:
        for e in self.edges:
            if e.src == src and e.dst == dst:
                return e
        raise KeyError(f"no edge {src}->{dst}")

    def in_degree(self, node: str) -> int:
        return sum(e.dst == node for e in self.edges)

    def out_degree(self, node: str) -> int:
        return sum(e.src == node for e in self.edges)

    @property
    def quantum_edges(self) -> tuple[EdgeSpec, ...]:
        return tuple(e for e in self.edges if e.kind is EdgeKind.QUANTUM)


def build_butterfly(direct_kind: EdgeKind = EdgeKind.QUANTUM) -> Topology:
    """Six-node butterfly: direct links S1->R2, S2->R1 plus the classical C1/C2 spine.

    ``direct_kind`` switches the two direct links to classical use for the
    bit-level butterfly and the measure-and-resend baseline.
    """
    edges = (
        EdgeSpec("S1", "R2", direct_kind),
        EdgeSpec("S2", "R1", direct_kind),
        EdgeSpec("S1", "C1", EdgeKind.CLASSICAL),
        EdgeSpec("S2", "C1", EdgeKind.CLASSICAL),
        EdgeSpec("C1", "C2", EdgeKind.CLASSICAL),
        EdgeSpec("C2", "R1", EdgeKind.CLASSICAL),
        EdgeSpec("C2", "R2", EdgeKind.CLASSICAL),
    )
    return Topology(frozenset({"S1", "S2", "C1", "C2", "R1", "R2"}), edges)


@dataclass(frozen=True)
class Message:
    payload: Payload
    edge: EdgeSpec
    round: int = 0

    def __post_init__(self):
        if not isinstance(self.payload, QubitRef):
            object.__setattr__(self, "payload", _check_bits(self.payload))


@dataclass(frozen=True)
class Event:
    """One transcript entry: a link transmission or a node operation.

    ``action`` is ``"send"`` (uses ``edge``), ``"xor"`` or ``"copy"`` (use
    ``node``). For node operations ``payload`` is the input.
    """

    action: str
    round: int
    payload: Payload | tuple[Payload, ...]
    edge: EdgeSpec | None = None
    node: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"round": self.round, "action": self.action}
        if self.edge is not None:
            out["edge"] = self.edge.name
            out["edge_kind"] = self.edge.kind.value
        if self.node is not None:
            out["node"] = self.node
        payloads = self.payload if self.action == "xor" else (self.payload,)
        encoded = [_encode_payload(p) for p in payloads]
        if self.action == "xor":
            out["inputs"] = encoded
        else:
            out.update(encoded[0])
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        edge = None
        if "edge" in d:
            src, dst = d["edge"].split("->")
            edge = EdgeSpec(src, dst, EdgeKind(d["edge_kind"]))
        if d["action"] == "xor":
            payload = tuple(_decode_payload(p) for p in d["inputs"])
        else:
            payload = _decode_payload(d)
        return cls(d["action"], int(d["round"]), payload, edge, d.get("node"))


def _encode_payload(p: Payload) -> dict:
    if isinstance(p, QubitRef):
        return {"payload_kind": "qubit", "photon": p.photon, "stream": p.stream}
    return {"payload_kind": "bits", "bits": list(p)}


def _decode_payload(d: dict) -> Payload:
    if d["payload_kind"] == "qubit":
        return QubitRef(int(d["photon"]), d.get("stream"))
    return tuple(int(b) for b in d["bits"])


def write_transcript(events: Iterable[Event], fh: IO[str]) -> None:
    """Write one JSON object per line."""
    for ev in events:
        fh.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")


def read_transcript(fh: IO[str]) -> list[Event]:
    return [Event.from_dict(json.loads(line)) for line in fh if line.strip()]


def xor_node(in1: Bits, in2: Bits) -> Bits:
    in1, in2 = _check_bits(in1), _check_bits(in2)
    if len(in1) != len(in2):
        raise ValueError(f"xor inputs differ in length: {in1} vs {in2}")
    return tuple(a ^ b for a, b in zip(in1, in2))


def copy_node(payload: Payload) -> tuple[Bits, Bits]:
    if isinstance(payload, QubitRef):
        raise NoCloning(f"copy node received qubit reference to photon {payload.photon}")
    bits = _check_bits(payload)
    return bits, bits


@dataclass
class UsageLedger:
    """Per-edge, per-round tally of carried qubits and bits.

    Every accepted operation is appended to ``events``; rejected ones raise
    and leave the ledger unchanged.
    """

    topology: Topology | None = None
    tally: dict = field(default_factory=lambda: defaultdict(lambda: [0, 0]))
    events: list[Event] = field(default_factory=list)

    def send(self, msg: Message) -> "UsageLedger":
        _check_send(self.topology, self.tally, msg.edge, msg.payload, msg.round)
        self.events.append(Event("send", msg.round, msg.payload, edge=msg.edge))
        return self

    def xor(self, node: str, in1: Bits, in2: Bits, round: int = 0) -> Bits:
        out = xor_node(in1, in2)
        self.events.append(Event("xor", round, (tuple(in1), tuple(in2)), node=node))
        return out

    def copy(self, node: str, payload: Payload, round: int = 0) -> tuple[Bits, Bits]:
        out = copy_node(payload)
        self.events.append(Event("copy", round, payload, node=node))
        return out

    def usage(self, edge: EdgeSpec, round: int = 0) -> tuple[int, int]:
        qubits, bits = self.tally.get((edge, round), (0, 0))
        return qubits, bits


def _check_send(topology, tally, edge: EdgeSpec, payload, round: int) -> None:
    if topology is not None and edge not in topology.edges:
        raise KindMismatch(f"edge {edge.name} ({edge.kind.value}) is not part of the topology")
    is_qubit = isinstance(payload, QubitRef)
    if is_qubit and edge.kind is not EdgeKind.QUANTUM:
        raise KindMismatch(f"qubit payload on classical edge {edge.name}")
    if not is_qubit and edge.kind is not EdgeKind.CLASSICAL:
        raise KindMismatch(f"classical payload on quantum edge {edge.name}")
    cap_q, cap_b = CAPACITY[edge.kind]
    used = tally[(edge, round)]
    add_q, add_b = (1, 0) if is_qubit else (0, len(payload))
    if used[0] + add_q > cap_q or used[1] + add_b > cap_b:
        raise CapacityExceeded(
            f"edge {edge.name} round {round}: {used[0] + add_q} qubits / {used[1] + add_b} bits "
            f"exceeds capacity {cap_q} qubits / {cap_b} bits"
        )
    used[0] += add_q
    used[1] += add_b


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int
    detail: str


def audit(transcript: Iterable[Event], topology: Topology | None = None) -> list[Violation]:
    """Replay a transcript and collect every capacity, kind and cloning violation."""
    tally: dict = defaultdict(lambda: [0, 0])
    violations = []
    for i, ev in enumerate(transcript):
        try:
            if ev.action == "send":
                _check_send(topology, tally, ev.edge, ev.payload, ev.round)
            elif ev.action == "copy":
                copy_node(ev.payload)
            elif ev.action == "xor":
                if any(isinstance(p, QubitRef) for p in ev.payload):
                    raise KindMismatch(f"xor at {ev.node} applied to a qubit reference")
                xor_node(*ev.payload)
            else:
                violations.append(Violation("UnknownAction", i, ev.action))
        except NetworkError as exc:
            violations.append(Violation(type(exc).__name__, i, str(exc)))
        except ValueError as exc:
            violations.append(Violation("MalformedPayload", i, str(exc)))
    return violations


def classical_butterfly(b1: int, b2: int, round: int = 0) -> tuple[int, int, UsageLedger]:
    """Bit-level butterfly network coding for the two-pairs problem.

    ``b1`` travels S1 -> R1 and ``b2`` travels S2 -> R2. Each receiver XORs
    the bit on its direct link with the coded bit from C2.

    Returns:
        ``(bit decoded at R1, bit decoded at R2, ledger)``.
    """
    topo = build_butterfly(direct_kind=EdgeKind.CLASSICAL)
    ledger = UsageLedger(topo)
    e = topo.edge
    ledger.send(Message((b1,), e("S1", "R2"), round))
    ledger.send(Message((b1,), e("S1", "C1"), round))
    ledger.send(Message((b2,), e("S2", "R1"), round))
    ledger.send(Message((b2,), e("S2", "C1"), round))
    coded = ledger.xor("C1", (b1,), (b2,), round)
    ledger.send(Message(coded, e("C1", "C2"), round))
    to_r1, to_r2 = ledger.copy("C2", coded, round)
    ledger.send(Message(to_r1, e("C2", "R1"), round))
    ledger.send(Message(to_r2, e("C2", "R2"), round))
    at_r1 = ledger.xor("R1", (b2,), to_r1, round)[0]
    at_r2 = ledger.xor("R2", (b1,), to_r2, round)[0]
    return at_r1, at_r2, ledger
