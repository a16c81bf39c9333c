"""Coding buffer, transmission queues and the packet-mixing rules.

Three rules decide whether two native packets may share one XOR frame:

* the common two-hop conditions used by COPE and BEND,
* the stricter recoding rule for packets that were themselves decoded
  from a coded frame,
* the per-flow switch that turns the recoding rule on after repeated NACKs
  and off again when traffic changes.
"""

from __future__ import annotations

from collections import OrderedDict, deque
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .errors import PreconditionError
from .packets import MAX_PARTNERS, FlowId, NativePacket, PacketId
from .topology import Topology


class CodingBuffer:
    """Recently received or overheard native packets, keyed by id."""

    def __init__(self, retention: float = 2.0, capacity: int = 200):
        self.retention = retention
        self.capacity = capacity
        self._entries: "OrderedDict[PacketId, Tuple[NativePacket, float]]" = OrderedDict()

    def __contains__(self, pid):
        return pid in self._entries

    def __len__(self):
        return len(self._entries)

    def add(self, packet: NativePacket, now: float):
        self._entries.pop(packet.id, None)
        self._entries[packet.id] = (packet, now)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def get(self, pid: PacketId) -> Optional[NativePacket]:
        entry = self._entries.get(pid)
        return entry[0] if entry else None

    def expire(self, now: float):
        cutoff = now - self.retention
        while self._entries:
            pid, (_, t) = next(iter(self._entries.items()))
            if t >= cutoff:
                break
            self._entries.popitem(last=False)

    def ids(self):
        return self._entries.keys()


@dataclass
class TxQueues:
    """Q1 holds packets this node must forward, Q2 overheard packets it may
    help with, and ``retx`` frames waiting to be resent unchanged."""

    q1: deque = field(default_factory=deque)
    q2: deque = field(default_factory=deque)
    retx: deque = field(default_factory=deque)

    def __len__(self):
        return len(self.q1) + len(self.q2) + len(self.retx)

    def holds(self, pid: PacketId) -> bool:
        return any(p.id == pid for p in self.q1) or any(p.id == pid for p in self.q2)

    def remove(self, packet: NativePacket):
        for q in (self.q1, self.q2):
            for i, p in enumerate(q):
                if p is packet:
                    del q[i]
                    return


@dataclass
class SwitchState:
    """Per-node, per-flow toggle between common conditions and the recoding rule."""

    threshold: int = 5
    alpha: float = 3.0
    ewma_weight: float = 0.25
    nack_count: Dict[FlowId, int] = field(default_factory=dict)
    recoding_active: Dict[FlowId, bool] = field(default_factory=dict)
    miat: Dict[FlowId, float] = field(default_factory=dict)
    last_arrival: Dict[FlowId, float] = field(default_factory=dict)
    timer_deadline: Dict[FlowId, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha <= 1:
            raise PreconditionError("alpha must exceed 1")
        if not 0 < self.ewma_weight <= 1:
            raise PreconditionError("EWMA weight must lie in (0, 1]")

    def active(self, flow: FlowId) -> bool:
        return self.recoding_active.get(flow, False)


def _check_pair(p1: NativePacket, p2: NativePacket):
    if p1.next_hop == p2.next_hop:
        raise PreconditionError(f"{p1.id} and {p2.id} share next hop {p1.next_hop}")


def _near(topology: Topology, node, anchor) -> bool:
    return node == anchor or node in topology.neighbors(anchor)


def common_conditions_ok(p1: NativePacket, p2: NativePacket, topology: Topology) -> bool:
    """Each packet's next hop is the other's previous hop or one of its neighbors."""
    _check_pair(p1, p2)
    return (_near(topology, p1.next_hop, p2.coding_prev_hop)
            and _near(topology, p2.next_hop, p1.coding_prev_hop))


def recoding_rule_ok(p1: NativePacket, p2: NativePacket, topology: Topology) -> bool:
    """Conditions for re-encoding the decoded-native ``p1``.

    The neighbors of p1's previous hop only ever saw p1 inside a coded frame,
    so p2's next hop must be that previous hop itself.
    """
    if not p1.decoded_native:
        raise PreconditionError(f"{p1.id} is not a decoded-native packet")
    _check_pair(p1, p2)
    return _near(topology, p1.next_hop, p2.coding_prev_hop) and p2.next_hop == p1.origin_prev_hop


def can_encode(p1: NativePacket, p2: NativePacket, switch: Optional[SwitchState],
               topology: Topology) -> Tuple[bool, set]:
    """Return (compatible, ids to tag suspect).

    ``switch=None`` means the switch is disabled and only the common
    conditions apply, though suspects are still reported.
    """
    _check_pair(p1, p2)
    for a, b in ((p1, p2), (p2, p1)):
        if a.decoded_native and switch is not None and switch.active(a.flow):
            if not recoding_rule_ok(a, b, topology):
                return False, set()
    if not common_conditions_ok(p1, p2, topology):
        return False, set()
    suspects = set()
    for a, b in ((p1, p2), (p2, p1)):
        if a.decoded_native and b.next_hop != a.origin_prev_hop:
            suspects.add(a.id)
    return True, suspects


def select_coding_set(queues: TxQueues, head: NativePacket, switch: Optional[SwitchState],
                      topology: Topology, max_partners: int = MAX_PARTNERS,
                      rule=None) -> List[NativePacket]:
    """Greedy first-fit partner search over Q1 then Q2.

    Returned packets are copies; members found suspect carry ``suspect=True``.
    ``rule(p1, p2) -> bool`` replaces :func:`can_encode` when given.
    """
    max_partners = min(max_partners, MAX_PARTNERS)
    chosen = [head]
    suspects = set()
    hops = {head.next_hop}
    for cand in (*queues.q1, *queues.q2):
        if len(chosen) >= max_partners:
            break
        if cand is head or cand.next_hop in hops or any(c.id == cand.id for c in chosen):
            continue
        found = set()
        ok = True
        for member in chosen:
            if rule is not None:
                ok = rule(member, cand)
            else:
                ok, tagged = can_encode(member, cand, switch, topology)
                found |= tagged
            if not ok:
                break
        if ok:
            chosen.append(cand)
            hops.add(cand.next_hop)
            suspects |= found
    if len(chosen) == 1:
        return chosen
    return [replace(p, suspect=True) if p.id in suspects else p for p in chosen]


def on_nack(switch: SwitchState, flow: FlowId) -> bool:
    """Count a NACK against ``flow``; return True when this NACK switched the rule on."""
    switch.nack_count[flow] = switch.nack_count.get(flow, 0) + 1
    if switch.nack_count[flow] > switch.threshold and not switch.active(flow):
        switch.recoding_active[flow] = True
        return True
    return False


def reset_switch(switch: SwitchState):
    switch.recoding_active.clear()
    switch.nack_count.clear()


def on_packet_arrival(switch: SwitchState, flow: FlowId, now: float) -> Tuple[bool, Optional[float]]:
    """Update the flow's mean inter-arrival time and re-arm its timer.

    Returns ``(new_flow, deadline)``; a new flow resets every flow to the
    common conditions. ``deadline`` is None until two arrivals have been seen.
    """
    new_flow = flow not in switch.last_arrival
    if new_flow:
        reset_switch(switch)
    else:
        gap = now - switch.last_arrival[flow]
        if flow in switch.miat:
            w = switch.ewma_weight
            switch.miat[flow] = (1 - w) * switch.miat[flow] + w * gap
        else:
            switch.miat[flow] = gap
    switch.last_arrival[flow] = now
    deadline = None
    if flow in switch.miat:
        deadline = now + switch.alpha * switch.miat[flow]
        switch.timer_deadline[flow] = deadline
    return new_flow, deadline


def on_flow_timer(switch: SwitchState, flow: FlowId, deadline: float) -> bool:
    """Handle a timer firing; stale timers (re-armed since) are ignored.

    Returns True when the timer was live and all flows reverted.
    """
    if switch.timer_deadline.get(flow) != deadline:
        return False
    del switch.timer_deadline[flow]
    reset_switch(switch)
    return True
