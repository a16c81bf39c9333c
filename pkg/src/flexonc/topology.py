"""Static topologies, shortest-path forwarding tables and neighbor route views."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence

from .errors import ConfigurationError
from .packets import FlowId, NodeId


@dataclass(frozen=True, eq=False)
class Topology:
    adjacency: Mapping[NodeId, frozenset]
    positions: Optional[Mapping[NodeId, tuple]] = None
    spacing: Optional[float] = None

    def __post_init__(self):
        for u, nbrs in self.adjacency.items():
            if u in nbrs:
                raise ConfigurationError(f"node {u} lists itself as a neighbor", "topology")
            for v in nbrs:
                if u not in self.adjacency.get(v, ()):
                    raise ConfigurationError(f"link {u}-{v} is not symmetric", "topology")

    @property
    def nodes(self) -> list:
        return sorted(self.adjacency)

    def __len__(self):
        return len(self.adjacency)

    def neighbors(self, node: NodeId) -> frozenset:
        return self.adjacency[node]

    def adjacent(self, u: NodeId, v: NodeId) -> bool:
        return v in self.adjacency[u]

    def hop_distances(self, target: NodeId) -> Dict[NodeId, int]:
        dist = {target: 0}
        frontier = deque([target])
        while frontier:
            u = frontier.popleft()
            for v in self.adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    frontier.append(v)
        return dist


def build_grid(rows: int, cols: int, spacing: float = 150.0) -> Topology:
    """Row-major grid; node ``r*cols + c`` hears its 8 surrounding cells."""
    if rows < 1 or cols < 1:
        raise ConfigurationError(f"grid must be at least 1x1, got {rows}x{cols}", "topology")
    if spacing <= 0:
        raise ConfigurationError("spacing must be positive", "topology.spacing")
    adjacency = {}
    positions = {}
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            positions[u] = (c * spacing, r * spacing)
            adjacency[u] = frozenset(
                rr * cols + cc
                for rr in range(max(0, r - 1), min(rows, r + 2))
                for cc in range(max(0, c - 1), min(cols, c + 2))
                if (rr, cc) != (r, c)
            )
    return Topology(adjacency, positions, spacing)


def from_positions(positions: Mapping[NodeId, tuple], tx_range: float = 250.0,
                   spacing: Optional[float] = None) -> Topology:
    """Unit-disk topology: nodes within ``tx_range`` meters hear each other."""
    nodes = sorted(positions)
    if nodes != list(range(len(nodes))):
        raise ConfigurationError("node ids must be 0..n-1", "topology.positions")
    adjacency = {
        u: frozenset(v for v in nodes if v != u and math.dist(positions[u], positions[v]) <= tx_range)
        for u in nodes
    }
    return Topology(adjacency, dict(positions), spacing)


def from_edges(node_count: int, edges: Iterable[Sequence[int]]) -> Topology:
    adjacency = {u: set() for u in range(node_count)}
    for u, v in edges:
        if u not in adjacency or v not in adjacency:
            raise ConfigurationError(f"edge {u}-{v} names an unknown node", "topology.edges")
        if u == v:
            raise ConfigurationError(f"self-loop at {u}", "topology.edges")
        adjacency[u].add(v)
        adjacency[v].add(u)
    return Topology({u: frozenset(n) for u, n in adjacency.items()})


@dataclass
class ForwardingTable:
    owner: NodeId
    entries: Dict[NodeId, NodeId] = field(default_factory=dict)

    def next_hop(self, destination: NodeId) -> NodeId:
        if destination == self.owner:
            raise LookupError(f"node {self.owner} is the destination itself")
        try:
            return self.entries[destination]
        except KeyError:
            raise LookupError(f"node {self.owner} has no route to {destination}") from None


def compute_routes(topology: Topology, flows: Iterable[FlowId] = (), *,
                   destinations: Iterable[NodeId] = (),
                   pinned: Optional[Mapping[FlowId, Sequence[NodeId]]] = None,
                   tie_break: str = "lowest") -> Dict[NodeId, ForwardingTable]:
    """Minimum-hop next hops toward every flow destination.

    Equal-cost next hops are broken by lowest node index (``tie_break="highest"``
    flips it). ``pinned`` maps a flow to an explicit node path that overrides the
    shortest-path entries along it.
    """
    if tie_break not in ("lowest", "highest"):
        raise ConfigurationError(f"unknown tie-break rule {tie_break!r}", "routing.tie_break")
    flows = list(flows)
    dests = sorted({f.destination for f in flows} | set(destinations))
    tables = {u: ForwardingTable(u) for u in topology.nodes}
    for d in dests:
        if d not in topology.adjacency:
            raise ConfigurationError(f"destination {d} is not a node", "flows.destination")
        dist = topology.hop_distances(d)
        for u in topology.nodes:
            if u == d or u not in dist:
                continue
            options = [v for v in topology.neighbors(u) if dist.get(v) == dist[u] - 1]
            tables[u].entries[d] = min(options) if tie_break == "lowest" else max(options)
    for f in flows:
        if f.source not in topology.adjacency:
            raise ConfigurationError(f"source {f.source} is not a node", "flows.source")
        if f.destination not in tables[f.source].entries:
            raise ConfigurationError(f"{f} destination unreachable", "flows.destination")

    pinned_by = {}
    for flow, path in (pinned or {}).items():
        path = list(path)
        if path[0] != flow.source or path[-1] != flow.destination:
            raise ConfigurationError(f"pinned route for {flow} must run source to destination", "flows.route")
        if len(set(path)) != len(path):
            raise ConfigurationError(f"pinned route for {flow} revisits a node", "flows.route")
        for u, v in zip(path, path[1:]):
            if not topology.adjacent(u, v):
                raise ConfigurationError(f"pinned route for {flow} uses non-link {u}-{v}", "flows.route")
            key = (u, flow.destination)
            if pinned_by.get(key, v) != v:
                raise ConfigurationError(f"conflicting pinned routes at node {u} toward {flow.destination}",
                                         "flows.route")
            pinned_by[key] = v
            tables[u].entries[flow.destination] = v
    for d in dests:
        _check_loop_free(tables, topology, d)
    return tables


def _check_loop_free(tables, topology, dest):
    for start in topology.nodes:
        if dest not in tables[start].entries:
            continue
        seen = {start}
        u = start
        while u != dest:
            u = tables[u].entries[dest]
            if u in seen:
                raise ConfigurationError(f"routing loop toward {dest} through {u}", "flows.route")
            seen.add(u)


@dataclass
class RoutingView:
    """A node's own table plus the replicated tables of its neighbors."""

    own: ForwardingTable
    neighbor_tables: Dict[NodeId, ForwardingTable]

    @property
    def owner(self) -> NodeId:
        return self.own.owner


def routing_view(tables: Mapping[NodeId, ForwardingTable], topology: Topology, node: NodeId) -> RoutingView:
    return RoutingView(tables[node], {v: tables[v] for v in sorted(topology.neighbors(node))})


def second_next_hop(view: RoutingView, intended: NodeId, destination: NodeId) -> NodeId:
    try:
        table = view.neighbor_tables[intended]
    except KeyError:
        raise LookupError(f"node {intended} is not a neighbor of {view.owner}") from None
    return table.next_hop(destination)


def eligible_forwarders(view: RoutingView, topology: Topology, sender: NodeId,
                        next_hop: NodeId, destination: NodeId) -> frozenset:
    """Neighbors of ``sender`` that also neighbor the next hop and its next hop.

    Empty when the next hop is the destination: nobody can stand in for the
    sink itself.
    """
    if next_hop == destination:
        return frozenset()
    snh = second_next_hop(view, next_hop, destination)
    common = topology.neighbors(sender) & topology.neighbors(next_hop) & topology.neighbors(snh)
    return frozenset(common - {sender, next_hop})
