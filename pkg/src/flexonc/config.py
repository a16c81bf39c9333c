"""Run configuration: topology description, CBR flows, scheme parameters."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .errors import ConfigurationError
from .packets import FlowId, MAX_PARTNERS
from .phy import ChannelParams
from .topology import Topology, build_grid, from_edges, from_positions


class SchemeKind(str, enum.Enum):
    NONCODING = "noncoding"
    COPE = "cope"
    BEND = "bend"
    CORE = "core"
    FLEXONC = "flexonc"
    FLEXONC_SR = "flexonc-sr"

    @classmethod
    def parse(cls, value) -> "SchemeKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ConfigurationError(f"unknown scheme {value!r} (expected one of {names})", "scheme") from None

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TopologySpec:
    """Declarative topology: a grid, explicit positions, or an edge list."""

    kind: str = "grid"
    rows: int = 0
    cols: int = 0
    spacing: float = 150.0
    positions: Tuple[Tuple[float, float], ...] = ()
    edges: Tuple[Tuple[int, int], ...] = ()
    node_count: int = 0

    def build(self, tx_range: float = 250.0) -> Topology:
        if self.kind == "grid":
            return build_grid(self.rows, self.cols, self.spacing)
        if self.kind == "positions":
            if not self.positions:
                raise ConfigurationError("positions topology needs at least one node", "topology.positions")
            return from_positions(dict(enumerate(self.positions)), tx_range, self.spacing)
        if self.kind == "edges":
            if self.node_count < 1:
                raise ConfigurationError("edge-list topology needs node_count >= 1", "topology.node_count")
            return from_edges(self.node_count, self.edges)
        raise ConfigurationError(f"unknown topology kind {self.kind!r}", "topology.kind")


@dataclass(frozen=True)
class CbrSource:
    flow: FlowId
    interval: float
    payload: int = 1000
    start: float = 0.0
    duration: float = 150.0
    route: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.interval <= 0:
            raise ConfigurationError("inter-arrival must be positive", "flows.interval")
        if self.payload <= 0:
            raise ConfigurationError("payload must be positive", "flows.payload")
        if self.duration < 0 or self.start < 0:
            raise ConfigurationError("start and duration must be non-negative", "flows.duration")

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class SchemeParams:
    max_retries: int = 4
    ack_cache_size: int = 256
    buffer_retention: float = 2.0
    buffer_capacity: int = 200
    nack_threshold: int = 5
    alpha: float = 3.0
    ewma_weight: float = 0.25
    max_partners: int = MAX_PARTNERS
    queue_limit: int = 50           # drop-tail bound on Q1 arrivals
    bend_header_bytes: int = 4      # second-next-hop field on BEND natives
    core_native_delay: float = 5e-3
    core_scan_depth: int = 8
    core_timer_unit: float = 4e-3
    core_tie_step: float = 0.2e-3

    def __post_init__(self):
        if self.max_retries < 0:
            raise ConfigurationError("must be >= 0", "params.max_retries")
        if not 2 <= self.max_partners <= MAX_PARTNERS:
            raise ConfigurationError(f"must lie in 2..{MAX_PARTNERS}", "params.max_partners")
        if self.alpha <= 1:
            raise ConfigurationError("alpha must exceed 1", "params.alpha")
        if not 0 < self.ewma_weight <= 1:
            raise ConfigurationError("must lie in (0, 1]", "params.ewma_weight")
        if self.queue_limit < 1:
            raise ConfigurationError("must be >= 1", "params.queue_limit")
        if self.core_scan_depth < 1:
            raise ConfigurationError("K must be >= 1", "params.core_scan_depth")
        if self.nack_threshold < 0:
            raise ConfigurationError("must be >= 0", "params.nack_threshold")


@dataclass(frozen=True)
class RunConfig:
    topology: TopologySpec
    flows: Tuple[CbrSource, ...]
    scheme: SchemeKind = SchemeKind.FLEXONC
    channel: ChannelParams = field(default_factory=ChannelParams)
    params: SchemeParams = field(default_factory=SchemeParams)
    seed: int = 0
    duration: float = 150.0
    tie_break: str = "lowest"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "scheme", SchemeKind.parse(self.scheme))
        object.__setattr__(self, "flows", tuple(self.flows))
        if self.duration < 0:
            raise ConfigurationError("must be non-negative", "duration")
        numbers = [s.flow.number for s in self.flows]
        if len(set(numbers)) != len(numbers):
            raise ConfigurationError("flow numbers must be unique", "flows.number")
        if self.flows and self.duration < max(s.end for s in self.flows):
            raise ConfigurationError("run ends before the last flow stops", "duration")

    def validate(self) -> Topology:
        topo = self.topology.build(self.channel.tx_range)
        for s in self.flows:
            for end, label in ((s.flow.source, "source"), (s.flow.destination, "destination")):
                if end not in topo.adjacency:
                    raise ConfigurationError(f"node {end} does not exist", f"flows.{label}")
        return topo


def flows_of(sources: List[CbrSource]) -> List[FlowId]:
    return [s.flow for s in sources]
