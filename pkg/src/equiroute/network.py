"""Directed road network, feasible paths and the road-path incidence structure."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Edge:
    """A directed road.

    ``free_flow_time`` is in minutes and ``capacity`` in vehicles. Values are
    not checked here; `validate_network` reports bad ones.
    """

    id: str
    tail: str
    head: str
    free_flow_time: float
    capacity: float


@dataclass(frozen=True)
class Network:
    """Directed graph with BPR parameters shared by every edge."""

    nodes: frozenset
    edges: tuple[Edge, ...]
    bpr_eta: float = 0.15
    bpr_zeta: float = 4.0
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)
    _by_pair: Mapping[tuple[str, str], list[str]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        index = {}
        by_pair: dict[tuple[str, str], list[str]] = {}
        for i, e in enumerate(self.edges):
            index.setdefault(e.id, i)
            by_pair.setdefault((e.tail, e.head), []).append(e.id)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_by_pair", by_pair)

    @classmethod
    def from_edges(cls, edges: Iterable[Edge], eta: float = 0.15, zeta: float = 4.0,
                   nodes: Iterable[str] | None = None) -> "Network":
        edges = tuple(edges)
        if nodes is None:
            nodes = {e.tail for e in edges} | {e.head for e in edges}
        return cls(frozenset(nodes), edges, eta, zeta)

    @property
    def edge_ids(self) -> list[str]:
        return [e.id for e in self.edges]

    def index_of(self, edge_id: str) -> int:
        try:
            return self._index[edge_id]
        except KeyError:
            raise ValidationError(f"unknown edge id {edge_id!r}") from None

    def edge(self, edge_id: str) -> Edge:
        return self.edges[self.index_of(edge_id)]

    def edge_between(self, tail: str, head: str) -> Edge:
        """Look an edge up by its endpoints; parallel edges are ambiguous."""
        ids = self._by_pair.get((tail, head), [])
        if not ids:
            raise ValidationError(f"no edge {tail}->{head}")
        if len(ids) > 1:
            raise ValidationError(f"parallel edges {tail}->{head}: {ids}")
        return self.edge(ids[0])

    @property
    def free_flow_times(self) -> np.ndarray:
        return np.array([e.free_flow_time for e in self.edges], dtype=float)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([e.capacity for e in self.edges], dtype=float)

    def with_edge(self, edge: Edge) -> "Network":
        i = self.index_of(edge.id)
        edges = list(self.edges)
        edges[i] = edge
        return replace(self, edges=tuple(edges))


@dataclass(frozen=True)
class Path:
    edge_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "edge_ids", tuple(self.edge_ids))

    def __len__(self) -> int:
        return len(self.edge_ids)

    def __iter__(self):
        return iter(self.edge_ids)

    def nodes(self, network: Network) -> list[str]:
        if not self.edge_ids:
            return []
        edges = [network.edge(i) for i in self.edge_ids]
        return [edges[0].tail] + [e.head for e in edges]

    def label(self, network: Network) -> str:
        return "-".join(self.nodes(network))


def validate_network(network: Network) -> list[str]:
    """Return human-readable violations; an empty list means the network is valid."""
    problems = []
    seen: set[str] = set()
    for e in network.edges:
        if e.id in seen:
            problems.append(f"duplicate edge id {e.id!r}")
        seen.add(e.id)
        for end in ("tail", "head"):
            node = getattr(e, end)
            if node not in network.nodes:
                problems.append(f"edge {e.id!r}: {end} {node!r} is not a known node")
        if e.tail == e.head:
            problems.append(f"edge {e.id!r}: self-loop at {e.tail!r}")
        if not (isinstance(e.free_flow_time, (int, float)) and math.isfinite(e.free_flow_time)
                and e.free_flow_time > 0):
            problems.append(f"edge {e.id!r}: free-flow time must be > 0, got {e.free_flow_time}")
        if not (isinstance(e.capacity, (int, float)) and math.isfinite(e.capacity) and e.capacity > 0):
            problems.append(f"edge {e.id!r}: capacity must be > 0, got {e.capacity}")
    if not (math.isfinite(network.bpr_eta) and network.bpr_eta >= 0):
        problems.append(f"bpr eta must be >= 0, got {network.bpr_eta}")
    if not (math.isfinite(network.bpr_zeta) and network.bpr_zeta >= 1):
        problems.append(f"bpr zeta must be >= 1, got {network.bpr_zeta}")
    return problems


def validate_path(network: Network, path: Path, od: tuple[str, str]) -> bool:
    """True iff ``path`` is a simple edge chain from ``od[0]`` to ``od[1]``.

    Raises ValidationError for an edge id the network does not know.
    """
    edges = [network.edge(i) for i in path.edge_ids]
    if not edges:
        return False
    if len(set(path.edge_ids)) != len(edges):
        return False
    if edges[0].tail != od[0] or edges[-1].head != od[1]:
        return False
    return all(a.head == b.tail for a, b in zip(edges, edges[1:]))


@dataclass(frozen=True)
class IncidenceMatrix:
    """Dense 0/1 road-path matrix; rows follow ``network.edges``, columns the path list."""

    edge_ids: tuple[str, ...]
    matrix: np.ndarray

    def entry(self, edge_id: str, column: int) -> int:
        return int(self.matrix[self.edge_ids.index(edge_id), column])

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]


def incidence(network: Network, all_paths: Sequence[Path]) -> IncidenceMatrix:
    a = path_matrix(network, all_paths)
    a.setflags(write=False)
    return IncidenceMatrix(tuple(network.edge_ids), a)


def path_matrix(network: Network, paths: Sequence[Path]) -> np.ndarray:
    a = np.zeros((len(network.edges), len(paths)))
    for j, p in enumerate(paths):
        for eid in p.edge_ids:
            a[network.index_of(eid), j] = 1.0
    return a


@dataclass(frozen=True)
class OverlapReport:
    ok: tuple[bool, ...]
    violations: tuple[tuple[int, str, int], ...]  # (user, edge id, path count on that edge)

    @property
    def all_ok(self) -> bool:
        return all(self.ok)


def overlap_condition(inc: IncidenceMatrix, user_path_columns: Sequence[Sequence[int]]) -> OverlapReport:
    """Check that no edge lies on more than two of a user's own paths.

    Under a linear BPR cost this makes each user's Hessian diagonally dominant.
    """
    ok = []
    violations = []
    for u, cols in enumerate(user_path_columns):
        sums = inc.matrix[:, list(cols)].sum(axis=1)
        bad = np.flatnonzero(sums > 2)
        ok.append(bad.size == 0)
        violations.extend((u, inc.edge_ids[e], int(sums[e])) for e in bad)
    return OverlapReport(tuple(ok), tuple(violations))


def shortest_path(network: Network, origin: str, destination: str,
                  weights: np.ndarray | None = None) -> Path | None:
    """Label-setting (Dijkstra) shortest path; ``weights`` default to free-flow times."""
    if weights is None:
        weights = network.free_flow_times
    out: dict[str, list[tuple[str, int]]] = {}
    for i, e in enumerate(network.edges):
        out.setdefault(e.tail, []).append((e.head, i))
    dist = {origin: 0.0}
    pred: dict[str, int] = {}
    heap = [(0.0, origin)]
    done = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == destination:
            break
        for head, i in out.get(node, []):
            nd = d + float(weights[i])
            if nd < dist.get(head, math.inf):
                dist[head] = nd
                pred[head] = i
                heapq.heappush(heap, (nd, head))
    if destination not in done:
        return None
    ids = []
    node = destination
    while node != origin:
        i = pred[node]
        ids.append(network.edges[i].id)
        node = network.edges[i].tail
    return Path(tuple(reversed(ids)))
