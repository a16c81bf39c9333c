"""Acknowledged-MAC node shared by NonCoding, COPE, BEND and FlexONC.

Each scheme is this node with a different set of feature flags plus a few
overridden hooks. The node talks to the simulator through the small API in
:mod:`flexonc.sim` (``on_grant``, ``on_frame``, ``on_window_end`` ...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

from ..coding import CodingBuffer, SwitchState, TxQueues, select_coding_set
from ..packets import (AckKind, Acknowledgment, CodedHeader, CodedPacket, NativePacket,
                       PacketId)


@dataclass
class Frame:
    """One transmission: either a native packet or a coded packet."""

    tx_id: int
    sender: int
    native: Optional[NativePacket] = None
    coded: Optional[CodedPacket] = None
    retries: int = 0

    @property
    def natives(self) -> tuple:
        return self.coded.natives if self.coded is not None else (self.native,)


@dataclass
class PendingTransmission:
    frame: Frame
    deadline: float
    acked: Dict[PacketId, int] = field(default_factory=dict)   # pid -> ACK sender
    nacked: set = field(default_factory=set)

    @property
    def any_feedback(self) -> bool:
        return bool(self.acked or self.nacked)


def sender_window(channel, n: int, eligible: int = 0) -> float:
    """Time the sender waits for acknowledgments after a frame ends."""
    if n < 1:
        raise ValueError("a frame carries at least one packet")
    return (n + eligible) * channel.ack_slot + channel.guard


class MacNode:
    codes = False          # mixes packets at transmit time
    helpers = False        # keeps overheard natives bound for a neighbor in Q2
    backups = False        # bitmap nodes may forward partners on behalf of a next hop
    dup_control = False    # ACK cache and duplicate purge
    uses_switch = False    # SwitchRule toggling

    def __init__(self, node_id: int, sim):
        self.id = node_id
        self.sim = sim
        self.topology = sim.topology
        self.channel = sim.channel
        self.params = sim.params
        self.queues = TxQueues()
        self.buffer = CodingBuffer(self.params.buffer_retention, self.params.buffer_capacity)
        self.pending: Optional[PendingTransmission] = None
        self.handled: set = set()       # ids this node has taken ownership of
        self.switch = (SwitchState(self.params.nack_threshold, self.params.alpha,
                                   self.params.ewma_weight) if self.uses_switch else None)

    # -- helpers -----------------------------------------------------------------

    def knows(self, pid: PacketId) -> bool:
        return pid in self.buffer or self.queues.holds(pid)

    def _copy_for_buffer(self, packet: NativePacket) -> NativePacket:
        return replace(packet, suspect=False, behalf_of=None, attempts=0)

    def _forward_copy(self, packet: NativePacket, prev_hop: int, now: float,
                      decoded: bool = False) -> NativePacket:
        return NativePacket(packet.id, prev_hop=prev_hop,
                            next_hop=self.sim.next_hop(self.id, packet.destination),
                            size=packet.size, birth=packet.birth, decoded_native=decoded,
                            origin_prev_hop=prev_hop if decoded else None, enqueued=now)

    def _ack(self, kind: AckKind, pid: PacketId, tx_id: int, time: float):
        self.sim.schedule_ack(time, self.id, Acknowledgment(kind, self.id, pid, tx_id))

    def held_ids(self) -> set:
        ids = {p.id for p in self.queues.q1} | {p.id for p in self.queues.q2}
        for frame in self.queues.retx:
            ids |= {p.id for p in frame.natives}
        if self.pending is not None:
            ids |= {p.id for p in self.pending.frame.natives}
        return ids

    # -- traffic entry -----------------------------------------------------------

    def _admit(self, packet: NativePacket, front: bool = False) -> bool:
        """Add a new arrival to Q1 unless the queue is full (drop-tail)."""
        if len(self.queues.q1) >= self.params.queue_limit:
            self._drop(packet)
            return False
        if front:
            self.queues.q1.appendleft(packet)
        else:
            self.queues.q1.append(packet)
        self.sim.request_channel(self.id)
        return True

    def originate(self, packet: NativePacket, now: float):
        self.handled.add(packet.id)
        self.buffer.add(self._copy_for_buffer(packet), now)
        self._admit(packet)

    # -- sending -------------------------------------------------------------------

    def _expire(self, now: float):
        self.buffer.expire(now)
        if self.queues.q2:
            cutoff = now - self.params.buffer_retention
            self.queues.q2 = type(self.queues.q2)(p for p in self.queues.q2 if p.enqueued >= cutoff)

    def _coding_set(self, head: NativePacket) -> List[NativePacket]:
        return select_coding_set(self.queues, head, self.switch, self.topology,
                                 self.params.max_partners)

    def _eligible(self, members) -> frozenset:
        return frozenset()

    def _native_extra(self) -> int:
        return 0

    def _coded_extra(self, n: int, eligible: frozenset) -> int:
        return n * self.channel.partner_overhead

    def _window(self, frame: Frame) -> float:
        if frame.coded is None:
            return sender_window(self.channel, 1)
        return sender_window(self.channel, frame.coded.header.n, len(frame.coded.header.eligible))

    def _choose(self) -> Optional[List[NativePacket]]:
        q = self.queues
        if q.q1:
            head = q.q1[0]
            return self._coding_set(head) if self.codes else [head]
        if self.codes and q.q2:
            for head in list(q.q2):
                members = self._coding_set(head)
                if len(members) > 1:
                    return members
        return None

    def build_coded_frame(self, members: List[NativePacket]) -> CodedPacket:
        eligible = self._eligible(members) - {p.next_hop for p in members}
        header = CodedHeader(tuple((p.id, p.next_hop) for p in members), frozenset(eligible))
        return CodedPacket(header, self.id, tuple(members),
                           suspects=frozenset(p.id for p in members if p.suspect))

    def on_grant(self, now: float):
        if self.pending is not None:
            return None
        self._expire(now)
        q = self.queues
        if q.retx:
            old = q.retx.popleft()
            frame = replace(old, tx_id=self.sim.new_tx_id(), retries=old.retries + 1)
        else:
            members = self._choose()
            if not members:
                return None
            for p in members:
                self._dequeue(p)
            tx_id = self.sim.new_tx_id()
            if len(members) == 1:
                frame = Frame(tx_id, self.id, native=members[0])
            else:
                frame = Frame(tx_id, self.id, coded=self.build_coded_frame(members))
                self.sim.metrics.opportunity(self.id, now, len(members))
        for p in frame.natives:
            self.handled.add(p.id)
            self.buffer.add(self._copy_for_buffer(p), now)   # own transmissions stay decodable
            if p.attempts > 0:
                self.sim.metrics.flows[p.flow.number].retransmissions += 1
        if frame.coded is not None:
            self.sim.metrics.coded_sent += 1
            size = frame.coded.size + self._coded_extra(frame.coded.header.n, frame.coded.header.eligible)
        else:
            size = frame.native.size + self._native_extra()
        window = self._window(frame)
        self.pending = PendingTransmission(frame, deadline=math.inf)
        return frame, size, window

    def _dequeue(self, packet: NativePacket):
        for q in (self.queues.q1, self.queues.q2):
            for i, p in enumerate(q):
                if p.id == packet.id:
                    del q[i]
                    return

    # -- sender feedback -------------------------------------------------------

    def confirm_ack(self, ack: Acknowledgment, now: float) -> bool:
        return True

    def on_ack(self, ack: Acknowledgment, now: float):
        pend = self.pending
        if pend is not None and ack.tx_id == pend.frame.tx_id:
            if ack.kind is AckKind.ACK:
                pend.acked.setdefault(ack.packet, ack.sender)
            else:
                pend.nacked.add(ack.packet)
                self.sim.metrics.flows[ack.packet.flow.number].nacks += 1
                self._on_nack(pend.frame, ack, now)
        if ack.kind is AckKind.ACK:
            self._overheard_ack(ack, now)

    def _on_nack(self, frame: Frame, ack: Acknowledgment, now: float):
        pass

    def _overheard_ack(self, ack: Acknowledgment, now: float):
        """An ACK from a packet's own next hop means someone else already delivered it."""
        if not self.helpers:
            return
        q = self.queues
        pid, who = ack.packet, ack.sender
        for name in ("q1", "q2"):
            queue = getattr(q, name)
            if any(p.id == pid for p in queue):
                setattr(q, name, type(queue)(p for p in queue if not (p.id == pid and p.next_hop == who)))
        self._purge_retx(pid, lambda p: p.next_hop == who)

    def _purge_retx(self, pid: PacketId, covered):
        """Remove ``pid`` from queued retransmissions where ``covered(packet)``.

        A coded frame loses just that partner and is rebuilt from the rest.
        """
        q = self.queues
        if not q.retx:
            return
        kept = type(q.retx)()
        for f in q.retx:
            hit = [p for p in f.natives if p.id == pid and covered(p)]
            if not hit:
                kept.append(f)
                continue
            rest = [p for p in f.natives if p.id != pid]
            if len(rest) == 1:
                kept.append(replace(f, native=rest[0], coded=None))
            elif rest:
                kept.append(replace(f, coded=self.build_coded_frame(rest)))
        q.retx = kept

    def on_window_end(self, frame: Frame, now: float):
        pend, self.pending = self.pending, None
        for p in frame.natives:
            p.attempts += 1
        if frame.coded is None:
            self._native_timeout(frame, pend)
        else:
            self._coded_timeout(frame, pend, now)
        if self.queues:
            self.sim.request_channel(self.id)

    def _drop(self, packet: NativePacket):
        self.sim.metrics.flows[packet.flow.number].drop_events += 1

    def _native_timeout(self, frame: Frame, pend: PendingTransmission):
        p = frame.native
        if p.id in pend.acked:
            return
        if p.attempts > self.params.max_retries:
            self._drop(p)
        else:
            self.queues.retx.appendleft(frame)

    def _coded_timeout(self, frame: Frame, pend: PendingTransmission, now: float):
        header = frame.coded.header
        next_hop = dict(header.partners)
        intended = any(next_hop[pid] == s for pid, s in pend.acked.items()) or bool(pend.nacked)
        backup = any(next_hop[pid] != s for pid, s in pend.acked.items())
        if backup and not intended:
            self.sim.metrics.fate["backup_only"] += 1
        elif pend.any_feedback:
            self.sim.metrics.fate["intended"] += 1
        else:
            self.sim.metrics.fate["unheard"] += 1
        natives = frame.coded.natives
        if not pend.any_feedback:
            if max(p.attempts for p in natives) > self.params.max_retries:
                for p in natives:
                    self._drop(p)
            else:
                self.queues.retx.appendleft(frame)
            return
        requeue = []
        for p in natives:
            if p.id in pend.acked:
                continue
            if p.attempts > self.params.max_retries:
                self._drop(p)
            else:
                requeue.append(replace(p, suspect=False))
        for p in reversed(requeue):
            (self.queues.q2 if p.behalf_of is not None else self.queues.q1).appendleft(p)

    # -- receiving -------------------------------------------------------------

    def on_frame(self, sender: int, frame: Frame, t_end: float):
        if self.switch is not None:
            for p in frame.natives:
                self._heard(p, t_end)
        if self.helpers and self.queues.q2:
            # the intended forwarder sent it itself; the helper copy is moot
            ids = {p.id for p in frame.natives}
            self.queues.q2 = type(self.queues.q2)(
                p for p in self.queues.q2 if not (p.id in ids and p.behalf_of == sender))
        if frame.coded is None:
            self._rx_native(sender, frame, t_end)
        else:
            self._rx_coded(sender, frame, t_end)

    def _heard(self, packet: NativePacket, now: float):
        pass

    def _rx_native(self, sender: int, frame: Frame, now: float):
        p = frame.native
        if p.next_hop == self.id:
            self._accept(p, sender, frame.tx_id, now, slot=1, decoded=False)
            return
        self.buffer.add(self._copy_for_buffer(p), now)
        if self.helpers:
            self._maybe_help(p, sender, now)

    def _maybe_help(self, p: NativePacket, sender: int, now: float):
        intended = p.next_hop
        if intended == p.destination or p.id in self.handled or self.queues.holds(p.id):
            return
        if self.id not in self.sim.eligible(sender, intended, p.destination):
            return
        snh = self.sim.next_hop(intended, p.destination)
        self.queues.q2.append(NativePacket(p.id, prev_hop=sender, next_hop=snh, size=p.size,
                                           birth=p.birth, behalf_of=intended, enqueued=now))
        self.sim.request_channel(self.id)

    def _already_forwarded_downstream(self, pid: PacketId, destination: int) -> bool:
        return False

    def _accept(self, p: NativePacket, sender: int, tx_id: int, now: float, slot: int,
                decoded: bool):
        """Intended-forwarder path: ACK in ``slot`` and take ownership."""
        ack_time = now + (slot - 1) * self.channel.ack_slot
        self.buffer.add(self._copy_for_buffer(p), now)
        self._ack(AckKind.ACK, p.id, tx_id, ack_time)
        if p.destination == self.id:
            self.sim.deliver(p)
            self.handled.add(p.id)
            return
        if p.id in self.handled or any(x.id == p.id for x in self.queues.q1):
            return
        self.handled.add(p.id)
        if self._already_forwarded_downstream(p.id, p.destination):
            return
        self._dequeue_q2(p.id)
        self._admit(self._forward_copy(p, sender, now, decoded))

    def _dequeue_q2(self, pid: PacketId):
        if self.queues.q2:
            self.queues.q2 = type(self.queues.q2)(x for x in self.queues.q2 if x.id != pid)

    def _rx_coded(self, sender: int, frame: Frame, now: float):
        coded = frame.coded
        header = coded.header
        missing = [pid for pid in coded.payload_ids if not self.knows(pid)]
        pos = header.position(self.id)
        if pos is None:
            self._rx_coded_other(sender, frame, missing, now)
            return
        self.sim.metrics.coded_received[self.id] += 1
        pid = header.partners[pos - 1][0]
        if pid in missing and len(missing) > 1:
            self.sim.metrics.decoding_failure(self.id, now)
            self._ack(AckKind.NACK, pid, frame.tx_id, now + (pos - 1) * self.channel.ack_slot)
            return
        if len(missing) <= 1:
            for p in coded.natives:
                self.buffer.add(self._copy_for_buffer(p), now)
        self._accept(coded.native(pid), sender, frame.tx_id, now, slot=pos, decoded=True)

    def _rx_coded_other(self, sender: int, frame: Frame, missing, now: float):
        """Coded frame at a node outside its next-hop list: discarded."""

    # -- timers (unused by acknowledged schemes without backups) --------------------

    def on_backup_fire(self, duty, now: float):
        pass

    def on_flow_timer(self, flow, deadline, now: float):
        pass

    def on_timer(self, token, now: float):
        pass
