"""Broadcast channel: neighbor reception, BER-driven frame loss, airtime."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import List

from .errors import ConfigurationError
from .packets import NodeId
from .topology import Topology


@dataclass(frozen=True)
class ChannelParams:
    data_rate: float = 1e6          # bit/s
    ber: float = 0.0
    tx_range: float = 250.0         # m
    ack_size: int = 14              # bytes, before MAC overhead
    frame_overhead: int = 24        # MAC header + FCS bytes on every frame
    partner_overhead: int = 2       # coded header bytes per partner
    guard: float = 50e-6            # s, appended to every acknowledgment window
    propagation: float = 16e-6      # s, turnaround allowance per ack slot
    ack_loss: bool = True           # whether ACK/NACK frames also see BER

    def __post_init__(self):
        if not 0.0 <= self.ber < 1.0:
            raise ConfigurationError(f"BER must lie in [0, 1), got {self.ber}", "channel.ber")
        if self.data_rate <= 0:
            raise ConfigurationError("data rate must be positive", "channel.data_rate")
        for name in ("ack_size", "frame_overhead", "partner_overhead"):
            if getattr(self, name) < 0:
                raise ConfigurationError("must be non-negative", f"channel.{name}")
        if self.guard < 0 or self.propagation < 0:
            raise ConfigurationError("timing allowances must be non-negative", "channel.guard")

    @property
    def ack_frame_bytes(self) -> int:
        return self.ack_size + self.frame_overhead

    @property
    def ack_slot(self) -> float:
        return airtime(self, self.ack_size) + self.propagation


@dataclass(frozen=True)
class Reception:
    receiver: NodeId
    delivered: bool


def frame_success_probability(params: ChannelParams, length: int) -> float:
    """Probability that all ``8*length`` bits survive: (1 - BER)^(8 L)."""
    if length <= 0:
        raise ValueError("frame length must be positive")
    if params.ber == 0.0:
        return 1.0
    return math.exp(8 * length * math.log1p(-params.ber))


def airtime(params: ChannelParams, length: int) -> float:
    """Seconds on air for ``length`` bytes plus the per-frame MAC overhead."""
    if length <= 0:
        raise ValueError("frame length must be positive")
    return 8 * (length + params.frame_overhead) / params.data_rate


class LossStreams:
    """Per-receiver random streams derived from one run seed.

    Each receiver owns a stream so that adding a node elsewhere does not shift
    another node's loss draws.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._streams = {}

    def __getitem__(self, node: NodeId) -> random.Random:
        rng = self._streams.get(node)
        if rng is None:
            rng = self._streams[node] = random.Random(f"{self.seed}/rx/{node}")
        return rng


def broadcast(topology: Topology, params: ChannelParams, sender: NodeId, length: int,
              rng) -> List[Reception]:
    """One reception per neighbor of ``sender``, drawn in ascending NodeId order.

    ``length`` is the full on-air frame size in bytes. ``rng`` is either a
    single ``random.Random`` or a :class:`LossStreams`.
    """
    p = frame_success_probability(params, length)
    out = []
    for v in sorted(topology.neighbors(sender)):
        stream = rng[v] if isinstance(rng, LossStreams) else rng
        out.append(Reception(v, p >= 1.0 or stream.random() < p))
    return out
