"""Forests of renormalization parts and their saturation classes.

The full vertex set acts as an implicit root of every forest; it is never
stored as an element.  Choices among overlapping variable candidates are made
explicit through an :class:`ActiveFamily`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

from .errors import ForestLimitError, InvalidActiveFamilyError, PartitionViolationError
from .graph import (
    Graph,
    Overlap,
    Role,
    Subgraph,
    _members,
    classify_count,
    classify_subgraph,
    enumerate_full_vertex_parts,
    overlap_relation,
)
from .weights import WeightModel, uv_degree

DEFAULT_FOREST_LIMIT = 20


def _compatible(a: Subgraph, b: Subgraph) -> bool:
    return overlap_relation(a, b) is not Overlap.OVERLAPPING


@dataclass(frozen=True)
class Forest:
    """Pairwise nested-or-disjoint renormalization parts, kept in canonical order."""

    elements: tuple[Subgraph, ...] = ()

    def __post_init__(self):
        elems = tuple(sorted(set(self.elements), key=Subgraph.sort_key))
        object.__setattr__(self, "elements", elems)
        for a, b in combinations(elems, 2):
            if not _compatible(a, b):
                raise ValueError(f"forest elements {a!r} and {b!r} overlap")

    @classmethod
    def of(cls, elements: Iterable[Subgraph]) -> "Forest":
        return cls(tuple(elements))

    def __iter__(self):
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, s) -> bool:
        return s in self.elements

    def __or__(self, other: Iterable[Subgraph]) -> "Forest":
        return Forest(self.elements + tuple(other))

    def __sub__(self, other: Iterable[Subgraph]) -> "Forest":
        drop = set(other)
        return Forest(tuple(e for e in self.elements if e not in drop))

    def __le__(self, other: "Forest") -> bool:
        return set(self.elements) <= set(other.elements)

    def sort_key(self) -> tuple:
        return (len(self.elements), tuple(e.sort_key() for e in self.elements))

    def to_list(self) -> list[list[int]]:
        return [list(e.vertices) for e in self.elements]

    def __repr__(self) -> str:
        return "{" + ", ".join(repr(e) for e in self.elements) + "}"


@dataclass(frozen=True)
class ActiveFamily:
    """Pairwise disjoint variable renormalization parts chosen to be subtracted in place."""

    members: tuple[Subgraph, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(set(self.members), key=Subgraph.sort_key)))

    def __contains__(self, s) -> bool:
        return s in self.members

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def to_list(self) -> list[list[int]]:
        return [list(m.vertices) for m in self.members]


@dataclass(frozen=True)
class SaturationRecord:
    forest: Forest
    saturated: Forest
    base: Forest
    h_set: tuple[Subgraph, ...]
    f_prime: tuple[frozenset[int], ...]

    def to_dict(self, graph: Graph) -> dict:
        return {
            "forest": self.forest.to_list(),
            "saturated": self.saturated.to_list(),
            "base": self.base.to_list(),
            "h_set": [list(h.vertices) for h in self.h_set],
            "f_prime": [list(graph.sort_vertices(f)) for f in self.f_prime],
        }


# enumeration ----------------------------------------------------------------


def renormalization_parts(w: WeightModel) -> list[Subgraph]:
    """Full vertex parts with nonnegative UV degree, canonical order."""
    return [s for s in enumerate_full_vertex_parts(w.graph) if uv_degree(w, s) >= 0]


def enumerate_forests(w: WeightModel, limit: int = DEFAULT_FOREST_LIMIT) -> list[Forest]:
    parts = renormalization_parts(w)
    if len(parts) > limit:
        raise ForestLimitError(f"{len(parts)} renormalization parts exceed the limit of {limit}")
    out: list[Forest] = []

    def grow(start: int, chosen: list[Subgraph]):
        out.append(Forest(tuple(chosen)))
        for k in range(start, len(parts)):
            p = parts[k]
            if all(_compatible(p, c) for c in chosen):
                chosen.append(p)
                grow(k + 1, chosen)
                chosen.pop()

    grow(0, [])
    out.sort(key=Forest.sort_key)
    return out


# poset machinery --------------------------------------------------------------


def _nodes(f: Forest, graph: Graph) -> list[frozenset[int]]:
    return [frozenset(graph.vertex_ids)] + [e.vertex_set for e in f.elements]


def children(node: frozenset[int], f: Forest) -> list[Subgraph]:
    """Maximal forest elements strictly inside ``node``."""
    inside = [e for e in f.elements if e.vertex_set < node]
    return [e for e in inside if not any(e.vertex_set < o.vertex_set for o in inside)]


def parent(s, f: Forest, graph: Graph) -> frozenset[int]:
    """Smallest node of the forest (root included) strictly containing ``s``."""
    vs = s.vertex_set if isinstance(s, Subgraph) else frozenset(s)
    best = frozenset(graph.vertex_ids)
    for e in f.elements:
        if vs < e.vertex_set and len(e.vertex_set) < len(best):
            best = e.vertex_set
    return best


def reduced_role(node: frozenset[int], f: Forest, i) -> Role:
    """Role of a node after its maximal subelements are reduced.

    Variable and integrated children collapse to one vertex (non-integrated and
    integrated respectively); constant children are removed outright.
    """
    members = _members(i)
    kids = children(node, f)
    covered = frozenset().union(*(k.vertex_set for k in kids)) if kids else frozenset()
    bare = node - covered
    n_total = len(bare)
    n_int = len(bare & members)
    for k in kids:
        role = classify_subgraph(k, members)
        if role is Role.CONSTANT:
            continue
        n_total += 1
        n_int += role is Role.INTEGRATED
    return classify_count(n_total, n_int)


def residual(node: frozenset[int], f: Forest) -> frozenset[int]:
    """The node minus the vertices of its maximal subelements."""
    kids = children(node, f)
    return node.difference(*(k.vertex_set for k in kids))


def special_sets(
    f: Forest, i, act: ActiveFamily, graph: Graph
) -> tuple[tuple[frozenset[int], ...], tuple[Subgraph, ...]]:
    """Nodes with constant reduced role (root included), and active elements directly below one."""
    f_prime = tuple(n for n in _nodes(f, graph) if reduced_role(n, f, i) is Role.CONSTANT)
    fp = set(f_prime)
    h_set = tuple(e for e in f.elements if e in act and parent(e, f, graph) in fp)
    return f_prime, h_set


def saturate(f: Forest, i, act: ActiveFamily, graph: Graph) -> Forest:
    """Add every active member that fits into the forest directly below a constant node."""
    added = []
    for g in act:
        if g in f:
            continue
        if not all(_compatible(g, e) for e in f.elements):
            continue
        if reduced_role(parent(g, f, graph), f, i) is Role.CONSTANT:
            added.append(g)
    return f | added


def base(f: Forest, i, act: ActiveFamily, graph: Graph) -> Forest:
    _, h_set = special_sets(f, i, act, graph)
    return f - h_set


def saturation_record(f: Forest, i, act: ActiveFamily, graph: Graph) -> SaturationRecord:
    s = saturate(f, i, act, graph)
    f_prime, h_set = special_sets(s, i, act, graph)
    return SaturationRecord(f, s, s - h_set, h_set, f_prime)


def is_saturated(f: Forest, i, graph: Graph) -> bool:
    """Every node's residual avoids the integration set or is itself variable or integrated."""
    members = _members(i)
    for node in _nodes(f, graph):
        res = residual(node, f)
        if not (res & members):
            continue
        if classify_count(len(res), len(res & members)) is Role.CONSTANT:
            return False
    return True


# active families ------------------------------------------------------------


def variable_candidates(w: WeightModel, i) -> list[Subgraph]:
    """Renormalization parts that are variable and maximal among such parts."""
    var = [s for s in renormalization_parts(w) if classify_subgraph(s, i) is Role.VARIABLE]
    return [s for s in var if not any(s.vertex_set < o.vertex_set for o in var)]


def validate_active_family(w: WeightModel, i, act: ActiveFamily) -> None:
    allowed = set(variable_candidates(w, i))
    for m in act:
        if m not in allowed:
            raise InvalidActiveFamilyError(f"{m!r} is not a maximal variable renormalization part")
    for a, b in combinations(act.members, 2):
        if not _compatible(a, b):
            raise InvalidActiveFamilyError(f"active members {a!r} and {b!r} overlap")


def default_active_family(w: WeightModel, i) -> ActiveFamily:
    """Greedy choice in canonical order among maximal variable candidates."""
    chosen: list[Subgraph] = []
    for s in variable_candidates(w, i):
        if all(_compatible(s, c) for c in chosen):
            chosen.append(s)
    return ActiveFamily(tuple(chosen))


def all_active_families(w: WeightModel, i) -> list[ActiveFamily]:
    cands = variable_candidates(w, i)
    out = []
    for k in range(len(cands) + 1):
        for combo in combinations(cands, k):
            if all(_compatible(a, b) for a, b in combinations(combo, 2)):
                out.append(ActiveFamily(combo))
    return out


def active_family_from_sets(w: WeightModel, sets: Sequence[Iterable[int]]) -> ActiveFamily:
    return ActiveFamily(tuple(Subgraph(w.graph, tuple(s)) for s in sets))


# classes --------------------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceClass:
    saturated: Forest
    base: Forest
    members: tuple[Forest, ...]

    @property
    def h_set(self) -> tuple[Subgraph, ...]:
        return (self.saturated - self.base).elements


def equivalence_classes(
    w: WeightModel, i, act: ActiveFamily, limit: int = DEFAULT_FOREST_LIMIT
) -> list[EquivalenceClass]:
    """Group forests by their saturation and check each group is the interval [base, saturated]."""
    validate_active_family(w, i, act)
    g = w.graph
    groups: dict[Forest, list[Forest]] = {}
    for f in enumerate_forests(w, limit):
        groups.setdefault(saturate(f, i, act, g), []).append(f)
    out = []
    for s, members in groups.items():
        witnesses = []
        if saturate(s, i, act, g) != s:
            witnesses.append(s)
        b = base(s, i, act, g)
        extra = (s - b).elements
        expected = {b | combo for k in range(len(extra) + 1) for combo in combinations(extra, k)}
        got = set(members)
        if got != expected:
            witnesses.extend(sorted(got ^ expected, key=Forest.sort_key))
        if witnesses:
            raise PartitionViolationError(
                f"forests saturating to {s!r} do not form the interval from {b!r}", witnesses
            )
        out.append(EquivalenceClass(s, b, tuple(sorted(members, key=Forest.sort_key))))
    out.sort(key=lambda c: c.saturated.sort_key())
    return out
