"""Packet, identifier and acknowledgment vocabulary shared by every scheme.

XOR payloads are symbolic: a coded packet carries the set of native packet
ids it combines, and decoding is a set difference against what a node knows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import PreconditionError

NodeId = int

MAX_PARTNERS = 4


@dataclass(frozen=True, order=True)
class FlowId:
    source: NodeId
    destination: NodeId
    number: int = 0

    def __post_init__(self):
        if self.source == self.destination:
            raise PreconditionError(f"flow {self.number} has source == destination")

    def __str__(self):
        return f"F{self.number}({self.source}->{self.destination})"


@dataclass(frozen=True, order=True)
class PacketId:
    flow: FlowId
    seq: int

    def __str__(self):
        return f"{self.flow.number}:{self.seq}"


@dataclass
class NativePacket:
    """A single flow's payload as held by one node.

    ``prev_hop`` is the node this copy was received from; for a decoded-native
    packet it is the transmitter of the coded frame it was recovered from.
    ``behalf_of`` is set on overheard copies a helper holds for the intended
    forwarder.
    """

    id: PacketId
    prev_hop: NodeId
    next_hop: NodeId
    size: int
    birth: float
    decoded_native: bool = False
    origin_prev_hop: Optional[NodeId] = None
    suspect: bool = False
    behalf_of: Optional[NodeId] = None
    attempts: int = 0
    enqueued: float = 0.0

    def __post_init__(self):
        if self.decoded_native and self.origin_prev_hop is None:
            raise PreconditionError("decoded-native packet needs its coded previous hop")
        if self.suspect and not self.decoded_native:
            raise PreconditionError("only decoded-native packets can be suspect")

    @property
    def flow(self) -> FlowId:
        return self.id.flow

    @property
    def destination(self) -> NodeId:
        return self.id.flow.destination

    @property
    def coding_prev_hop(self) -> NodeId:
        """Previous hop as seen by the coding conditions."""
        if self.decoded_native:
            return self.origin_prev_hop
        return self.prev_hop


@dataclass(frozen=True)
class CodedHeader:
    partners: tuple  # ((PacketId, next hop), ...)
    eligible: frozenset = frozenset()

    def __post_init__(self):
        if len(self.partners) < 2:
            raise PreconditionError("a coded header needs at least two partners")
        hops = [nh for _, nh in self.partners]
        if len(set(hops)) != len(hops):
            raise PreconditionError("partner next hops must be pairwise distinct")
        if self.eligible & set(hops):
            raise PreconditionError("bitmap names a partner next hop")

    @property
    def n(self) -> int:
        return len(self.partners)

    @property
    def next_hops(self) -> tuple:
        return tuple(nh for _, nh in self.partners)

    def position(self, node: NodeId) -> Optional[int]:
        """1-based position of ``node`` in the next-hop list."""
        for i, (_, nh) in enumerate(self.partners, start=1):
            if nh == node:
                return i
        return None

    def bitmap(self, node_count: int) -> int:
        mask = 0
        for node in self.eligible:
            if node >= node_count:
                raise PreconditionError(f"node {node} outside a {node_count}-node bitmap")
            mask |= 1 << node
        return mask


@dataclass
class CodedPacket:
    header: CodedHeader
    sender: NodeId
    natives: tuple  # NativePacket copies, in header order
    size: int = 0
    suspects: frozenset = frozenset()  # PacketIds tagged suspect at encoding

    def __post_init__(self):
        if tuple(p.id for p in self.natives) != tuple(pid for pid, _ in self.header.partners):
            raise PreconditionError("carried payloads disagree with the header")
        if not self.size:
            self.size = max(p.size for p in self.natives)

    @property
    def payload_ids(self) -> frozenset:
        return frozenset(p.id for p in self.natives)

    def native(self, pid: PacketId) -> NativePacket:
        for p in self.natives:
            if p.id == pid:
                return p
        raise KeyError(pid)


class AckKind(enum.Enum):
    ACK = "ACK"
    NACK = "NACK"


@dataclass(frozen=True)
class Acknowledgment:
    kind: AckKind
    sender: NodeId
    packet: PacketId
    tx_id: int = -1


def xor_decode(coded: CodedPacket | Iterable[PacketId], known) -> Optional[PacketId]:
    """Return the single partner id missing from ``known``, else None."""
    ids = coded.payload_ids if isinstance(coded, CodedPacket) else frozenset(coded)
    missing = [pid for pid in ids if pid not in known]
    if len(missing) == 1:
        return missing[0]
    return None


def rank_of(receiver: NodeId, header: CodedHeader, decoded: PacketId) -> int:
    """Backup priority of ``receiver`` for the partner ``decoded``.

    Rank 1 is the partner's intended forwarder; bitmap nodes follow in
    ascending index order.
    """
    intended = None
    for pid, nh in header.partners:
        if pid == decoded:
            intended = nh
    if intended is None:
        raise PreconditionError(f"{decoded} is not a partner of this frame")
    if receiver == intended:
        return 1
    if receiver not in header.eligible:
        raise PreconditionError(f"node {receiver} is not in the eligible bitmap")
    return 2 + sorted(header.eligible).index(receiver)
