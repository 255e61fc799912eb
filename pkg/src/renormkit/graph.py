"""Simple graphs, full vertex parts, overlap relations and configurations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DuplicateEdgeError,
    ExceptionalConfigurationError,
    InvalidSubgraphError,
    MissingDimensionError,
    SelfLoopError,
    SpecError,
    UnknownVertexError,
)

Edge = tuple[int, int]


class Overlap(str, Enum):
    EQUAL = "equal"
    NESTED = "nested"
    DISJOINT = "disjoint"
    OVERLAPPING = "overlapping"


class Role(str, Enum):
    VARIABLE = "variable"
    INTEGRATED = "integrated"
    CONSTANT = "constant"


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with integer vertex ids and a spacetime dimension.

    Edges are stored as pairs ordered by vertex declaration order.
    """

    vertex_ids: tuple[int, ...]
    edges: tuple[Edge, ...]
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise SpecError(f"dimension must be >= 1, got {self.dimension}")
        if len(set(self.vertex_ids)) != len(self.vertex_ids):
            raise SpecError("duplicate vertex id")
        index = {v: i for i, v in enumerate(self.vertex_ids)}
        seen = set()
        canon = []
        for a, b in self.edges:
            if a == b:
                raise SelfLoopError(f"self-loop at vertex {a}")
            for v in (a, b):
                if v not in index:
                    raise UnknownVertexError(f"edge ({a}, {b}) names unknown vertex {v}")
            key = frozenset((a, b))
            if key in seen:
                raise DuplicateEdgeError(f"duplicate edge ({a}, {b})")
            seen.add(key)
            canon.append((a, b) if index[a] < index[b] else (b, a))
        canon.sort(key=lambda e: (index[e[0]], index[e[1]]))
        object.__setattr__(self, "edges", tuple(canon))

    @classmethod
    def build(cls, vertices: Iterable[int], edges: Iterable[Iterable[int]], dimension: int) -> "Graph":
        return cls(tuple(int(v) for v in vertices), tuple(tuple(int(v) for v in e) for e in edges), int(dimension))

    @cached_property
    def index(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.vertex_ids)}

    @cached_property
    def adjacency(self) -> dict[int, frozenset[int]]:
        adj: dict[int, set[int]] = {v: set() for v in self.vertex_ids}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return {v: frozenset(n) for v, n in adj.items()}

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    def sort_vertices(self, vertices: Iterable[int]) -> tuple[int, ...]:
        return tuple(sorted(set(vertices), key=self.index.__getitem__))

    def induced_edges(self, vertices: Iterable[int]) -> tuple[Edge, ...]:
        vs = set(vertices)
        return tuple(e for e in self.edges if e[0] in vs and e[1] in vs)

    def incident_edges(self, vertices: Iterable[int]) -> tuple[Edge, ...]:
        vs = set(vertices)
        return tuple(e for e in self.edges if e[0] in vs or e[1] in vs)

    def is_connected(self, vertices: Iterable[int]) -> bool:
        vs = set(vertices)
        if not vs:
            return False
        start = next(iter(vs))
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in self.adjacency[v]:
                if w in vs and w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen == vs

    def components(self, vertices: Iterable[int] | None = None) -> list[tuple[int, ...]]:
        remaining = set(self.vertex_ids if vertices is None else vertices)
        comps = []
        while remaining:
            start = min(remaining, key=self.index.__getitem__)
            seen = {start}
            stack = [start]
            while stack:
                v = stack.pop()
                for w in self.adjacency[v]:
                    if w in remaining and w not in seen:
                        seen.add(w)
                        stack.append(w)
            remaining -= seen
            comps.append(self.sort_vertices(seen))
        return comps

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "vertices": list(self.vertex_ids),
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class Subgraph:
    """Connected full vertex part: a vertex set together with all induced edges."""

    parent: Graph = field(compare=False, repr=False)
    vertices: tuple[int, ...]

    def __post_init__(self):
        vs = self.parent.sort_vertices(self.vertices)
        if len(vs) != len(self.vertices):
            raise InvalidSubgraphError("repeated vertex in subgraph")
        object.__setattr__(self, "vertices", vs)
        if len(vs) < 2:
            raise InvalidSubgraphError("a full vertex part needs at least two vertices")
        unknown = [v for v in vs if v not in self.parent.index]
        if unknown:
            raise InvalidSubgraphError(f"unknown vertices {unknown}")
        if not self.parent.is_connected(vs):
            raise InvalidSubgraphError(f"induced subgraph on {list(vs)} is not connected")

    @cached_property
    def vertex_set(self) -> frozenset[int]:
        return frozenset(self.vertices)

    @cached_property
    def edges(self) -> tuple[Edge, ...]:
        return self.parent.induced_edges(self.vertices)

    @property
    def size(self) -> int:
        return len(self.vertices)

    def sort_key(self) -> tuple:
        idx = self.parent.index
        return (len(self.vertices), tuple(idx[v] for v in self.vertices))

    def __lt__(self, other: "Subgraph") -> bool:
        return self.sort_key() < other.sort_key()

    def __repr__(self) -> str:
        return "{" + ",".join(str(v) for v in self.vertices) + "}"


@dataclass(frozen=True)
class Configuration:
    """Positions of every graph vertex in R^d."""

    positions: Mapping[int, tuple]

    def array(self, graph: Graph) -> np.ndarray:
        missing = [v for v in graph.vertex_ids if v not in self.positions]
        if missing:
            raise ValueError(f"configuration lacks positions for vertices {missing}")
        out = np.array([[float(c) for c in self.positions[v]] for v in graph.vertex_ids], dtype=float)
        if out.shape != (graph.n_vertices, graph.dimension):
            raise ValueError(f"expected positions of dimension {graph.dimension}")
        return out

    @classmethod
    def from_array(cls, graph: Graph, x: np.ndarray) -> "Configuration":
        x = np.asarray(x, dtype=float)
        return cls({v: tuple(float(c) for c in x[i]) for i, v in enumerate(graph.vertex_ids)})

    def is_exact(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for p in self.positions.values() for c in p)


def as_array(graph: Graph, x) -> np.ndarray:
    """Coerce a Configuration, mapping or array into a float array of shape (..., n, d)."""
    if isinstance(x, Configuration):
        return x.array(graph)
    if isinstance(x, Mapping):
        return Configuration(x).array(graph)
    arr = np.asarray(x, dtype=float)
    if arr.shape[-2:] != (graph.n_vertices, graph.dimension):
        raise ValueError(f"configuration array must end in shape {(graph.n_vertices, graph.dimension)}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class IntegrationSet:
    members: frozenset[int]

    @classmethod
    def of(cls, graph: Graph, members: Iterable[int]) -> "IntegrationSet":
        ms = frozenset(int(m) for m in members)
        unknown = ms - set(graph.vertex_ids)
        if unknown:
            raise UnknownVertexError(f"integration set names unknown vertices {sorted(unknown)}")
        return cls(ms)

    def __contains__(self, v) -> bool:
        return v in self.members

    def __len__(self) -> int:
        return len(self.members)


def _members(i) -> frozenset[int]:
    if isinstance(i, IntegrationSet):
        return i.members
    return frozenset(i)


def _vertex_set(s) -> frozenset[int]:
    if isinstance(s, Subgraph):
        return s.vertex_set
    return frozenset(s)


def parse_graph(spec) -> Graph:
    """Build a Graph from a graph-spec document (JSON text, bytes or a parsed dict)."""
    if isinstance(spec, (str, bytes)):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise SpecError(f"graph spec is not valid JSON: {exc}") from exc
    if not isinstance(spec, Mapping):
        raise SpecError("graph spec must be a JSON object")
    if "dimension" not in spec:
        raise MissingDimensionError("graph spec lacks 'dimension'")
    dim = spec["dimension"]
    if isinstance(dim, bool) or not isinstance(dim, int):
        raise SpecError("'dimension' must be an integer")
    vertices = spec.get("vertices")
    if not isinstance(vertices, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in vertices):
        raise SpecError("'vertices' must be an array of integer ids")
    edges = spec.get("edges", [])
    if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 2 for e in edges):
        raise SpecError("'edges' must be an array of 2-element id arrays")
    return Graph.build(vertices, edges, dim)


def enumerate_full_vertex_parts(g: Graph) -> list[Subgraph]:
    """All connected induced subgraphs with at least two vertices, in canonical order."""
    idx = g.index
    found: set[frozenset[int]] = set()
    frontier = {frozenset((a, b)) for a, b in g.edges}
    while frontier:
        found |= frontier
        grown = set()
        for vs in frontier:
            for v in vs:
                for w in g.adjacency[v]:
                    if w not in vs:
                        cand = vs | {w}
                        if cand not in found:
                            grown.add(cand)
        frontier = grown
    parts = [Subgraph(g, tuple(vs)) for vs in found]
    parts.sort(key=lambda s: (s.size, tuple(idx[v] for v in s.vertices)))
    return parts


def overlap_relation(a, b) -> Overlap:
    va, vb = _vertex_set(a), _vertex_set(b)
    if va == vb:
        return Overlap.EQUAL
    if va <= vb or vb <= va:
        return Overlap.NESTED
    if not (va & vb):
        return Overlap.DISJOINT
    return Overlap.OVERLAPPING


def classify_count(n_members: int, n_integrated: int) -> Role:
    if n_integrated == n_members:
        return Role.INTEGRATED
    if n_integrated == n_members - 1:
        return Role.VARIABLE
    return Role.CONSTANT


def classify_subgraph(s, i) -> Role:
    vs = _vertex_set(s)
    return classify_count(len(vs), len(vs & _members(i)))


def default_tolerance(x):
    """0 for exact rational inputs, otherwise 1e-12 times the configuration diameter."""
    if isinstance(x, Configuration):
        if x.is_exact():
            return 0.0
        pts = np.array([[float(c) for c in p] for p in x.positions.values()])
    else:
        pts = np.asarray(x, dtype=float)
    return 1e-12 * np.max(np.ptp(pts, axis=-2), axis=-1)


def is_non_exceptional(g: Graph, x, tol: float | None = None) -> bool:
    """True iff every edge has endpoint distance strictly above ``tol``.

    A connected subgraph collapses to a point only if each of its edges does, so the
    edgewise test is equivalent to checking every connected subgraph.
    """
    if tol is None:
        tol = default_tolerance(x)
    arr = as_array(g, x)
    for a, b in g.edges:
        dist = np.linalg.norm(arr[..., g.index[a], :] - arr[..., g.index[b], :], axis=-1)
        if np.any(dist <= tol):
            return False
    return True


def require_non_exceptional(g: Graph, x, tol: float | None = None) -> None:
    if not is_non_exceptional(g, x, tol):
        raise ExceptionalConfigurationError("configuration lies on the large graph diagonal")


def all_vertex_subsets(g: Graph, min_size: int = 1):
    for k in range(min_size, g.n_vertices + 1):
        yield from combinations(g.vertex_ids, k)
