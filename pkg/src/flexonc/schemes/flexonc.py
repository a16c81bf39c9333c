"""FlexONC: coding plus ranked backup forwarding by non-intended neighbors."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from ..coding import on_flow_timer, on_nack, on_packet_arrival
from ..packets import AckKind, Acknowledgment, FlowId, NativePacket, PacketId, rank_of
from .base import Frame, MacNode


class AckCache:
    """Bounded FIFO of overheard (packet id, ACK sender) pairs."""

    def __init__(self, capacity: int = 256):
        self.capacity = capacity
        self._order: deque = deque()
        self._index: Dict[PacketId, Dict[int, int]] = {}

    def __len__(self):
        return len(self._order)

    def add(self, pid: PacketId, sender: int):
        if self.capacity <= 0:
            return
        self._order.append((pid, sender))
        senders = self._index.setdefault(pid, {})
        senders[sender] = senders.get(sender, 0) + 1
        while len(self._order) > self.capacity:
            old, who = self._order.popleft()
            s = self._index[old]
            s[who] -= 1
            if not s[who]:
                del s[who]
            if not s:
                del self._index[old]

    def senders(self, pid: PacketId) -> frozenset:
        return frozenset(self._index.get(pid, ()))

    def __contains__(self, item: Tuple[PacketId, int]):
        pid, sender = item
        return sender in self._index.get(pid, ())


@dataclass
class BackupDuty:
    tx_id: int
    sender: int            # transmitter of the coded frame
    packet: NativePacket   # the decoded partner
    intended: int
    second_next_hop: int
    rank: int
    fire_time: float
    cancelled: bool = False


class FlexoncNode(MacNode):
    codes = True
    helpers = True
    backups = True
    dup_control = True

    def __init__(self, node_id, sim):
        super().__init__(node_id, sim)
        self.ack_cache = AckCache(self.params.ack_cache_size)
        self.duties: Dict[PacketId, BackupDuty] = {}

    def held_ids(self) -> set:
        return super().held_ids() | set(self.duties)

    # -- sender side ---------------------------------------------------------------

    def _eligible(self, members) -> frozenset:
        out = set()
        for p in members:
            out |= self.sim.eligible(self.id, p.next_hop, p.destination)
        return frozenset(out)

    def _coded_extra(self, n, eligible) -> int:
        bitmap = math.ceil(len(self.topology.nodes) / 8)
        return n * self.channel.partner_overhead + bitmap

    # -- duplicate control -------------------------------------------------------

    def _covers(self, p: NativePacket, sender: int) -> bool:
        """True if an ACK from ``sender`` means ``p`` already went past this node."""
        if sender == p.next_hop:
            return True
        if p.next_hop == p.destination:
            return False
        return sender in self.sim.eligible(self.id, p.next_hop, p.destination)

    def _already_forwarded_downstream(self, pid: PacketId, destination: int) -> bool:
        senders = self.ack_cache.senders(pid)
        if not senders:
            return False
        nh = self.sim.next_hop(self.id, destination)
        if nh in senders:
            return True
        return bool(senders & self.sim.eligible(self.id, nh, destination)) if nh != destination else False

    def _overheard_ack(self, ack: Acknowledgment, now: float):
        self.ack_cache.add(ack.packet, ack.sender)
        duty = self.duties.get(ack.packet)
        if duty is not None and ack.sender != self.id:
            duty.cancelled = True
            del self.duties[ack.packet]
        q = self.queues
        pid, who = ack.packet, ack.sender
        for name in ("q1", "q2"):
            queue = getattr(q, name)
            if any(p.id == pid for p in queue):
                setattr(q, name, type(queue)(p for p in queue if not (p.id == pid and self._covers(p, who))))
        self._purge_retx(pid, lambda p: self._covers(p, who))

    # -- receiver side -------------------------------------------------------------

    def _maybe_help(self, p, sender, now):
        senders = self.ack_cache.senders(p.id)
        if p.next_hop in senders:
            return
        super()._maybe_help(p, sender, now)

    def _rx_coded_other(self, sender: int, frame: Frame, missing, now: float):
        coded = frame.coded
        header = coded.header
        if len(missing) > 1:
            return
        for p in coded.natives:
            self.buffer.add(self._copy_for_buffer(p), now)
        if self.id not in header.eligible:
            return
        for pid, intended in header.partners:
            p = coded.native(pid)
            if intended == p.destination or not self.topology.adjacent(self.id, intended):
                continue
            snh = self.sim.next_hop(intended, p.destination)
            if snh == self.id or not self.topology.adjacent(self.id, snh):
                continue
            if pid in self.handled or pid in self.duties or self.queues.holds(pid):
                continue
            if self.ack_cache.senders(pid) & {intended, snh}:
                continue
            rank = rank_of(self.id, header, pid)
            slot = header.n + rank - 1
            fire = now + (slot - 1) * self.channel.ack_slot
            duty = BackupDuty(frame.tx_id, sender, p, intended, snh, rank, fire)
            self.duties[pid] = duty
            self.sim.schedule_backup(fire, self.id, duty)
            return

    def on_backup_fire(self, duty: BackupDuty, now: float):
        if duty.cancelled or self.duties.get(duty.packet.id) is not duty:
            return
        del self.duties[duty.packet.id]
        pid = duty.packet.id
        if pid in self.handled or self.queues.holds(pid):
            return
        self.sim.metrics.backup_firings += 1
        self.handled.add(pid)
        self._ack(AckKind.ACK, pid, duty.tx_id, now)
        p = duty.packet
        self._admit(NativePacket(
            pid, prev_hop=duty.sender, next_hop=duty.second_next_hop, size=p.size, birth=p.birth,
            decoded_native=True, origin_prev_hop=duty.sender, enqueued=now), front=True)


class FlexoncSrNode(FlexoncNode):
    """FlexONC with the NACK-driven switch to the recoding rule."""

    uses_switch = True

    def __init__(self, node_id, sim):
        super().__init__(node_id, sim)
        self._timer_armed: Dict[FlowId, bool] = {}

    def _heard(self, packet: NativePacket, now: float):
        flow = packet.flow
        was_active = [f for f, on in self.switch.recoding_active.items() if on]
        if packet.id in self.buffer:
            return
        new_flow, deadline = on_packet_arrival(self.switch, flow, now)
        if new_flow and was_active:
            self._log("off-new-flow", now, flow)
        if deadline is not None and not self._timer_armed.get(flow):
            self._timer_armed[flow] = True
            self.sim.schedule_flow_timer(deadline, self.id, flow, deadline)

    def on_flow_timer(self, flow, deadline, now):
        current = self.switch.timer_deadline.get(flow)
        if current is None:
            self._timer_armed[flow] = False
            return
        if current > now:
            self.sim.schedule_flow_timer(current, self.id, flow, current)
            return
        self._timer_armed[flow] = False
        was_active = any(self.switch.recoding_active.values())
        if on_flow_timer(self.switch, flow, current):
            self.switch.last_arrival.pop(flow, None)
            self.switch.miat.pop(flow, None)
            if was_active:
                self._log("off-timer", now, flow)

    def _on_nack(self, frame: Frame, ack: Acknowledgment, now: float):
        if frame.coded is None:
            return
        for pid in frame.coded.suspects:
            if pid != ack.packet and on_nack(self.switch, pid.flow):
                self._log("on", now, pid.flow)

    def _log(self, what: str, now: float, flow: Optional[FlowId]):
        self.sim.metrics.switch_events.append((now, self.id, flow.number if flow else -1, what))
