"""Deterministic discrete-event engine, channel arbitration and run orchestration.

The radio channel carries one frame at a time. A data frame is followed by
its acknowledgment window, during which the channel stays reserved for the
ACK/NACK slots; contention between nodes is resolved first-come first-served
with ties broken by node index.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from .config import RunConfig, SchemeKind
from .errors import ConfigurationError
from .metrics import FlowStats, MetricsRecord
from .packets import Acknowledgment, NativePacket, PacketId
from .phy import LossStreams, airtime, broadcast
from .topology import compute_routes, eligible_forwarders, routing_view

# Event kinds, ordered only by (time, insertion sequence).
GENERATE, TX_END, WINDOW_END, ACK_SLOT, ACK_END, BACKUP_FIRE, FLOW_TIMER, TIMER, GRANT = range(9)
_KIND_NAMES = ("GeneratePacket", "TxEnd", "WindowEnd", "AckSlot", "AckEnd", "BackupFire",
               "FlowTimer", "Timer", "Grant")


class Simulator:
    def __init__(self, config: RunConfig):
        from .schemes import make_node

        self.config = config
        self.topology = config.validate()
        self.channel = config.channel
        self._lossless = replace(config.channel, ber=0.0)
        self.params = config.params
        pinned = {s.flow: s.route for s in config.flows if s.route}
        self.routes = compute_routes(self.topology, [s.flow for s in config.flows],
                                     pinned=pinned, tie_break=config.tie_break)
        self.views = {u: routing_view(self.routes, self.topology, u) for u in self.topology.nodes}
        self.hops = {d: self.topology.hop_distances(d) for d in {s.flow.destination for s in config.flows}}
        self.loss = LossStreams(config.seed)
        self.metrics = MetricsRecord(scheme=str(config.scheme), seed=config.seed)
        for s in config.flows:
            self.metrics.flows[s.flow.number] = FlowStats(
                s.flow.source, s.flow.destination, s.payload, s.duration)
        self.now = 0.0
        self._queue: list = []
        self._seq = itertools.count()
        self._trace = hashlib.blake2b(digest_size=16)
        self._eligible_cache: Dict[tuple, frozenset] = {}
        self._tx_ids = itertools.count()
        # channel state
        self._busy = False
        self._requests: list = []
        self._requested: set = set()
        self._grant_pending = False
        # end-to-end bookkeeping
        self.delivered: Dict[PacketId, float] = {}
        self.generated: Dict[PacketId, float] = {}
        self.nodes = [make_node(config.scheme, u, self) for u in self.topology.nodes]

    # -- event queue ------------------------------------------------------

    def schedule(self, time: float, kind: int, *payload):
        if time < self.now:
            raise RuntimeError(f"{_KIND_NAMES[kind]} scheduled in the past ({time} < {self.now})")
        heapq.heappush(self._queue, (time, next(self._seq), kind, payload))

    def run(self) -> MetricsRecord:
        cfg = self.config
        for i, s in enumerate(cfg.flows):
            # staggered by flow index to avoid lock-step sources
            t0 = s.start + i * 1e-3
            if s.duration > 0 and t0 < s.end:
                self.schedule(t0, GENERATE, s.flow.source, s, 0, t0)
        handlers = {
            GENERATE: self._on_generate,
            TX_END: self._on_tx_end,
            WINDOW_END: self._on_window_end,
            ACK_SLOT: self._on_ack_slot,
            ACK_END: self._on_ack_end,
            BACKUP_FIRE: self._on_backup_fire,
            FLOW_TIMER: self._on_flow_timer,
            TIMER: self._on_timer,
            GRANT: self._on_grant,
        }
        pack = struct.Struct("<dBi").pack
        count = 0
        while self._queue:
            time, _, kind, payload = self._queue[0]
            if time > cfg.duration:
                break
            heapq.heappop(self._queue)
            self.now = time
            count += 1
            node = payload[0] if payload and isinstance(payload[0], int) else -1
            self._trace.update(pack(time, kind, node))
            handlers[kind](*payload)
        self.metrics.events = count
        self.metrics.trace_hash = self._trace.hexdigest()
        self._finalize()
        return self.metrics

    # -- helpers for node logic ---------------------------------------------

    def eligible(self, sender: int, next_hop: int, destination: int) -> frozenset:
        key = (sender, next_hop, destination)
        found = self._eligible_cache.get(key)
        if found is None:
            found = self._eligible_cache[key] = eligible_forwarders(
                self.views[sender], self.topology, sender, next_hop, destination)
        return found

    def next_hop(self, node: int, destination: int) -> int:
        return self.routes[node].next_hop(destination)

    def new_tx_id(self) -> int:
        return next(self._tx_ids)

    def deliver(self, packet: NativePacket):
        stats = self.metrics.flows[packet.flow.number]
        if packet.id in self.delivered:
            stats.duplicates += 1
            return
        self.delivered[packet.id] = self.now
        stats.delivered += 1
        stats.delay_sum += self.now - packet.birth

    # -- channel -----------------------------------------------------------

    def request_channel(self, node: int):
        if node in self._requested:
            return
        self._requested.add(node)
        heapq.heappush(self._requests, (self.now, node))
        self._kick()

    def _kick(self):
        if not self._busy and not self._grant_pending and self._requests:
            self._grant_pending = True
            self.schedule(self.now, GRANT)

    def _on_grant(self):
        self._grant_pending = False
        while self._requests and not self._busy:
            _, node = heapq.heappop(self._requests)
            self._requested.discard(node)
            tx = self.nodes[node].on_grant(self.now)
            if tx is None:
                continue
            frame, size, window = tx
            self._busy = True
            self.metrics.transmissions += 1
            self.schedule(self.now + airtime(self.channel, size), TX_END, node, frame, size, window)

    def _on_tx_end(self, sender, frame, size, window):
        receptions = broadcast(self.topology, self.channel, sender, size + self.channel.frame_overhead, self.loss)
        self.schedule(self.now + window, WINDOW_END, sender, frame)
        t_end = self.now
        for rx in receptions:
            if rx.delivered:
                self.nodes[rx.receiver].on_frame(sender, frame, t_end)

    def _on_window_end(self, sender, frame):
        self.nodes[sender].on_window_end(frame, self.now)
        self._busy = False
        self._kick()

    def schedule_ack(self, time: float, node: int, ack: Acknowledgment):
        self.schedule(time, ACK_SLOT, node, ack)

    def _on_ack_slot(self, node, ack):
        if not self.nodes[node].confirm_ack(ack, self.now):
            return
        if ack.kind.value == "ACK":
            self.metrics.acks_sent += 1
        else:
            self.metrics.nacks_sent += 1
        self.schedule(self.now + airtime(self.channel, self.channel.ack_size), ACK_END, node, ack)

    def _on_ack_end(self, node, ack):
        for rx in self._ack_receptions(node):
            if rx.delivered:
                self.nodes[rx.receiver].on_ack(ack, self.now)
            else:
                self.metrics.lost_acks += 1

    def _ack_receptions(self, node):
        channel = self.channel if self.channel.ack_loss else self._lossless
        return broadcast(self.topology, channel, node, self.channel.ack_frame_bytes, self.loss)

    def schedule_backup(self, time: float, node: int, duty):
        self.schedule(time, BACKUP_FIRE, node, duty)

    def _on_backup_fire(self, node, duty):
        self.nodes[node].on_backup_fire(duty, self.now)

    def schedule_flow_timer(self, time: float, node: int, flow, deadline: float):
        self.schedule(time, FLOW_TIMER, node, flow, deadline)

    def _on_flow_timer(self, node, flow, deadline):
        self.nodes[node].on_flow_timer(flow, deadline, self.now)

    def schedule_timer(self, time: float, node: int, token):
        self.schedule(time, TIMER, node, token)

    def _on_timer(self, node, token):
        self.nodes[node].on_timer(token, self.now)

    # -- traffic -----------------------------------------------------------

    def _on_generate(self, _node, source, seq, t0):
        flow = source.flow
        pid = PacketId(flow, seq)
        packet = NativePacket(pid, prev_hop=flow.source, next_hop=self.next_hop(flow.source, flow.destination),
                              size=source.payload, birth=self.now, enqueued=self.now)
        self.generated[pid] = self.now
        self.metrics.flows[flow.number].generated += 1
        self.nodes[flow.source].originate(packet, self.now)
        nxt = t0 + (seq + 1) * source.interval
        if nxt < source.end:
            self.schedule(nxt, GENERATE, source.flow.source, source, seq + 1, t0)

    # -- end of run ----------------------------------------------------------

    def live_packet_ids(self) -> set:
        live = set()
        for node in self.nodes:
            live |= node.held_ids()
        return live

    def _finalize(self):
        live = self.live_packet_ids()
        per_flow = {k: [0, 0] for k in self.metrics.flows}
        for pid in self.generated:
            if pid in self.delivered:
                continue
            per_flow[pid.flow.number][0 if pid in live else 1] += 1
        for k, (in_flight, lost) in per_flow.items():
            self.metrics.flows[k].in_flight = in_flight
            self.metrics.flows[k].lost = lost


def run(config: RunConfig) -> MetricsRecord:
    """Execute one run; identical configs (seed included) give identical records."""
    return Simulator(config).run()


def set_path(config: RunConfig, path: str, value) -> RunConfig:
    """Return ``config`` with the dotted field ``path`` replaced.

    ``flows.<field>`` applies to every flow.
    """
    head, _, rest = path.partition(".")
    if head == "flows":
        if not rest:
            raise ConfigurationError("flows override needs a field", path)
        try:
            return replace(config, flows=tuple(replace(f, **{rest: value}) for f in config.flows))
        except TypeError:
            raise ConfigurationError("unknown flow field", path) from None
    if not rest:
        if head not in RunConfig.__dataclass_fields__:
            raise ConfigurationError("unknown field", path)
        return replace(config, **{head: value})
    if head not in ("channel", "params", "topology"):
        raise ConfigurationError("unknown section", path)
    try:
        return replace(config, **{head: replace(getattr(config, head), **{rest: value})})
    except TypeError:
        raise ConfigurationError("unknown field", path) from None


def _run_keyed(item):
    key, config = item
    return key, run(config)


def sweep(base: RunConfig, axes: Mapping[str, Sequence], seeds: Iterable[int],
          jobs: int = 1) -> Dict[Tuple, MetricsRecord]:
    """Run the Cartesian product of every axis and seed.

    Results are keyed ``(axis values..., seed)`` in axis order and returned in
    key order regardless of completion order. ``FLEXONC_JOBS=1`` in the
    environment forces serial execution.
    """
    axes = dict(axes)
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ConfigurationError("sweep needs at least one non-empty axis", "sweep")
    seeds = list(seeds)
    if not seeds:
        raise ConfigurationError("sweep needs at least one seed", "seeds")
    items = []
    for combo in itertools.product(*axes.values()):
        cfg = base
        for path, value in zip(axes, combo):
            cfg = set_path(cfg, path, value)
        for seed in seeds:
            items.append((tuple(combo) + (seed,), replace(cfg, seed=seed)))
    if os.environ.get("FLEXONC_JOBS") == "1":
        jobs = 1
    results = {}
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, rec in pool.map(_run_keyed, items):
                results[key] = rec
    else:
        for item in items:
            try:
                key, rec = _run_keyed(item)
            except ConfigurationError as exc:
                raise ConfigurationError(f"run {item[0]} failed: {exc}", exc.field) from exc
            results[key] = rec
    return {k: results[k] for k, _ in items}
