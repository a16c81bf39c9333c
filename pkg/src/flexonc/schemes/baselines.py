"""Comparison schemes: plain unicast, COPE-like, BEND-like and a simplified CORE."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, List

from ..coding import CodingBuffer, TxQueues, common_conditions_ok
from ..packets import CodedHeader, CodedPacket, NativePacket, PacketId
from .base import Frame, MacNode


class NonCodingNode(MacNode):
    """Unicast with ACK and retransmission; overheard frames are ignored."""

    def _rx_native(self, sender, frame, now):
        if frame.native.next_hop == self.id:
            super()._rx_native(sender, frame, now)


class CopeNode(MacNode):
    """Codes only packets it must forward itself; overheard natives feed the buffer."""

    codes = True


class BendNode(MacNode):
    """Coding plus diffusion through Q2 helpers; coded frames are never forwarded
    by a node outside their next-hop list."""

    codes = True
    helpers = True

    def _native_extra(self) -> int:
        return self.params.bend_header_bytes


@dataclass
class _Candidate:
    packet: NativePacket
    sender: int
    cancelled: bool = False


class CoreNode:
    """Opportunistic forwarding without ACKs.

    Every receiver strictly closer to the destination than the transmitter
    arms a timer that is shorter the more coding partners it holds; the first
    to fire forwards and the others cancel when they overhear it.
    """

    def __init__(self, node_id: int, sim):
        self.id = node_id
        self.sim = sim
        self.topology = sim.topology
        self.channel = sim.channel
        self.params = sim.params
        self.queues = TxQueues()
        self.buffer = CodingBuffer(self.params.buffer_retention, self.params.buffer_capacity)
        self.handled: set = set()
        self.candidates: Dict[PacketId, _Candidate] = {}
        self.ready_at: Dict[PacketId, float] = {}
        self.sending = None
        self._wake = None

    def held_ids(self) -> set:
        ids = {p.id for p in self.queues.q1} | set(self.candidates)
        if self.sending is not None:
            ids |= {p.id for p in self.sending.natives}
        return ids

    # -- helpers --------------------------------------------------------------------

    def _closer(self, node: int, than: int, destination: int) -> bool:
        hops = self.sim.hops[destination]
        return hops.get(node, 1 << 30) < hops.get(than, 1 << 30)

    def _compatible(self, a: NativePacket, b: NativePacket) -> bool:
        return a.next_hop != b.next_hop and common_conditions_ok(a, b, self.topology)

    def _score(self, p: NativePacket) -> int:
        window = list(self.queues.q1)[: self.params.core_scan_depth]
        return sum(1 for q in window if q.id != p.id and self._compatible(p, q))

    def _enqueue(self, packet: NativePacket, now: float):
        self.handled.add(packet.id)
        if len(self.queues.q1) >= self.params.queue_limit:
            self.sim.metrics.flows[packet.flow.number].drop_events += 1
            return
        self.queues.q1.append(packet)
        self.ready_at[packet.id] = now + self.params.core_native_delay
        self.sim.request_channel(self.id)

    # -- traffic ----------------------------------------------------------------------

    def originate(self, packet: NativePacket, now: float):
        self.buffer.add(packet, now)
        self._enqueue(packet, now)

    def on_grant(self, now: float):
        if self.sending is not None or not self.queues.q1:
            return None
        self.buffer.expire(now)
        window = list(self.queues.q1)[: self.params.core_scan_depth]
        chosen: List[NativePacket] = []
        for p in window:
            if len(chosen) >= self.params.max_partners:
                break
            if all(self._compatible(c, p) for c in chosen):
                chosen.append(p)
        if len(chosen) < 2:
            head = self.queues.q1[0]
            ready = self.ready_at.get(head.id, now)
            if ready > now:
                if self._wake is None or self._wake > ready:
                    self._wake = ready
                    self.sim.schedule_timer(ready, self.id, "wake")
                return None
            chosen = [head]
        for p in chosen:
            self.queues.q1.remove(p)
            self.ready_at.pop(p.id, None)
        tx_id = self.sim.new_tx_id()
        if len(chosen) == 1:
            frame = Frame(tx_id, self.id, native=chosen[0])
            size = chosen[0].size
        else:
            header = CodedHeader(tuple((p.id, p.next_hop) for p in chosen))
            frame = Frame(tx_id, self.id, coded=CodedPacket(header, self.id, tuple(chosen)))
            size = frame.coded.size + header.n * self.channel.partner_overhead
            self.sim.metrics.opportunity(self.id, now, len(chosen))
            self.sim.metrics.coded_sent += 1
            self.sim.metrics.fate["unheard"] += 1
        self.sending = frame
        return frame, size, self.channel.guard

    def on_window_end(self, frame, now: float):
        self.sending = None
        if self.queues.q1:
            self.sim.request_channel(self.id)

    # -- receiving ------------------------------------------------------------------------

    def on_frame(self, sender: int, frame: Frame, t_end: float):
        natives = frame.natives
        for p in natives:
            cand = self.candidates.get(p.id)
            if cand is not None:
                cand.cancelled = True
                del self.candidates[p.id]
            if any(q.id == p.id for q in self.queues.q1):
                self.queues.q1 = type(self.queues.q1)(q for q in self.queues.q1 if q.id != p.id)
                self.ready_at.pop(p.id, None)
        if frame.coded is not None:
            missing = [p.id for p in natives if p.id not in self.buffer]
            if len(missing) > 1:
                if any(nh == self.id for nh in frame.coded.header.next_hops):
                    self.sim.metrics.coded_received[self.id] += 1
                    self.sim.metrics.decoding_failure(self.id, t_end)
                return
            if self.id in frame.coded.header.next_hops:
                self.sim.metrics.coded_received[self.id] += 1
        for p in natives:
            self.buffer.add(replace(p, attempts=0), t_end)
        forwarders = None
        for p in natives:
            dest = p.destination
            if dest == self.id:
                self.sim.deliver(p)
                self.handled.add(p.id)
                continue
            if p.id in self.handled or not self._closer(self.id, sender, dest):
                continue
            # the sink never re-broadcasts, so nobody could cancel on its behalf
            if self.topology.adjacent(sender, dest):
                continue
            if forwarders is None:
                forwarders = {}
            key = dest
            if key not in forwarders:
                forwarders[key] = sorted(n for n in self.topology.neighbors(sender)
                                         if self._closer(n, sender, dest))
            tie = forwarders[key].index(self.id)
            copy = NativePacket(p.id, prev_hop=sender, next_hop=self.sim.next_hop(self.id, dest),
                                size=p.size, birth=p.birth, enqueued=t_end)
            delay = self.params.core_timer_unit / (1 + self._score(copy)) + tie * self.params.core_tie_step
            self.candidates[p.id] = _Candidate(copy, sender)
            self.sim.schedule_timer(t_end + delay, self.id, ("fwd", p.id))

    def on_timer(self, token, now: float):
        if token == "wake":
            self._wake = None
            if self.queues.q1:
                self.sim.request_channel(self.id)
            return
        _, pid = token
        cand = self.candidates.pop(pid, None)
        if cand is None or cand.cancelled or pid in self.handled:
            return
        self._enqueue(replace(cand.packet, enqueued=now), now)

    # -- unused acknowledged-MAC hooks ------------------------------------------------------

    def confirm_ack(self, ack, now):
        return False

    def on_ack(self, ack, now):
        pass

    def on_backup_fire(self, duty, now):
        pass

    def on_flow_timer(self, flow, deadline, now):
        pass
