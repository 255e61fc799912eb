"""Subtraction points, nested Taylor subtraction and forest sums.

A total-degree Taylor polynomial of order k around a point c equals the
truncation at order k in a formal scalar s of f(c + s (x - c)), evaluated at
s = 1.  Each forest element g therefore gets its own formal variable s_g, and
every factor of the weight is expanded in the variables of the elements that
act on it.  Outer substitutions are applied before inner ones, so an inner
subtraction point and its moments are themselves expanded by the outer
element.  The forest term is the sum of the coefficients of s^k with
k_g <= d(g) for every element g.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import ExpansionPointSingularError, JetOrderCapError
from .forestry import (
    ActiveFamily,
    Forest,
    enumerate_forests,
    equivalence_classes,
    DEFAULT_FOREST_LIMIT,
)
from .graph import Edge, Subgraph, _vertex_set, as_array, require_non_exceptional
from .jet import DEFAULT_ORDER_CAP, Jet, jet_space
from .weights import WeightModel, eval_weight, taylor_order


class SubtractionScheme(str, Enum):
    EDGE_WEIGHTED = "edge-weighted"
    MEAN = "mean"


class Chi(str, Enum):
    MINUS_T = "minus_t"
    ONE_MINUS_T = "one_minus_t"


def subtraction_weights(s: Subgraph, scheme: SubtractionScheme = SubtractionScheme.EDGE_WEIGHTED) -> dict[int, float]:
    """Convex weights of the subtraction point over the vertices of ``s``."""
    scheme = SubtractionScheme(scheme)
    if scheme is SubtractionScheme.MEAN:
        return {v: 1.0 / s.size for v in s.vertices}
    counts = {v: 0 for v in s.vertices}
    for a, b in s.edges:
        counts[a] += 1
        counts[b] += 1
    total = 2 * len(s.edges)
    return {v: c / total for v, c in counts.items()}


def subtraction_point(s: Subgraph, x, scheme: SubtractionScheme = SubtractionScheme.EDGE_WEIGHTED) -> np.ndarray:
    g = s.parent
    arr = as_array(g, x)
    weights = subtraction_weights(s, scheme)
    return sum(wt * arr[..., g.index[v], :] for v, wt in weights.items())


def line_complement(w: WeightModel, parts: Sequence) -> tuple[Edge, ...]:
    """Edges of the graph outside every given part."""
    sets = [_vertex_set(p) for p in parts]
    for a, b in combinations(sets, 2):
        if a & b and not (a <= b or b <= a):
            raise ValueError("parts overlap")
    inside = set()
    for vs in sets:
        inside.update(w.graph.induced_edges(vs))
    return tuple(e for e in w.graph.edges if e not in inside)


# forest terms -----------------------------------------------------------------


def _acting(f: Forest, edge: Edge | None = None, vertex: int | None = None) -> list[int]:
    """Indices of forest elements whose Taylor operator reaches a factor, outer first."""
    idx = []
    for k, gam in enumerate(f.elements):
        vs = gam.vertex_set
        if edge is not None:
            if not (edge[0] in vs and edge[1] in vs) and (edge[0] in vs or edge[1] in vs):
                idx.append(k)
        elif vertex in vs:
            idx.append(k)
    idx.sort(key=lambda k: -f.elements[k].size)
    return idx


def taylor_product(
    w: WeightModel,
    f: Forest,
    x,
    scheme: SubtractionScheme = SubtractionScheme.EDGE_WEIGHTED,
    cap: int = DEFAULT_ORDER_CAP,
) -> np.ndarray:
    """Unsigned product of the nested Taylor operators of ``f`` applied to the weight."""
    g = w.graph
    arr = as_array(g, x)
    batch = arr.shape[:-2]
    if not len(f):
        return eval_weight(w, arr)
    orders = [taylor_order(w, gam) for gam in f.elements]
    if any(o is None for o in orders):
        raise ValueError("forest element is not a renormalization part")
    total_order = sum(orders)
    if total_order > cap:
        raise JetOrderCapError(f"nested order {total_order} exceeds cap {cap}")
    space = jet_space(len(f), total_order, cap)
    weights = [subtraction_weights(gam, scheme) for gam in f.elements]
    bshape = (1,) * (len(batch) + 1)
    svars = [Jet.variable(space, k, np.zeros(bshape)) for k in range(len(f))]

    def positions(ops: list[int], needed) -> dict[int, Jet]:
        pos: dict[int, Jet] = {}

        def at(v):
            if v not in pos:
                pos[v] = Jet.constant(space, arr[..., g.index[v], :])
            return pos[v]

        for k in ops:
            gam = f.elements[k]
            center = None
            for v, wt in weights[k].items():
                term = at(v) * wt
                center = term if center is None else center + term
            for v in gam.vertices:
                pos[v] = center + svars[k] * (at(v) - center)
        return {v: at(v) for v in needed}

    plain = np.ones(batch)
    prod: Jet | None = None
    for e in g.edges:
        ops = _acting(f, edge=e)
        if not ops:
            plain = plain * eval_weight(w, arr, edges=[e], vertices=())
            continue
        p = positions(ops, e)
        diff = p[e[0]] - p[e[1]]
        r2 = diff.dot(diff)
        if np.any(r2.value <= 0):
            raise ExpansionPointSingularError(f"edge {e} contracts at a subtraction point")
        factor = w.kernel[e].jet(r2)
        prod = factor if prod is None else prod * factor
    for v in g.vertex_ids:
        ops = _acting(f, vertex=v)
        if not ops:
            plain = plain * eval_weight(w, arr, edges=(), vertices=[v])
            continue
        factor = w.coupling[v].jet(positions(ops, [v])[v])
        prod = factor if prod is None else prod * factor
    if prod is None:
        return plain
    mask = np.all(space.exponents <= np.array(orders), axis=1)
    kept = prod.coeffs[mask].sum(axis=0)
    return plain * kept.reshape(batch)


def forest_term(
    w: WeightModel,
    f: Forest,
    x,
    scheme: SubtractionScheme = SubtractionScheme.EDGE_WEIGHTED,
    chi_map: Mapping[Subgraph, Chi | str] | None = None,
    cap: int = DEFAULT_ORDER_CAP,
) -> np.ndarray:
    """Product over forest elements of chi(g) P(g) applied to the weight.

    chi defaults to -t; elements mapped to ``one_minus_t`` are expanded as
    (1 - t), i.e. a signed sum over which of them actually subtract.
    """
    chi_map = chi_map or {}
    ones = [gam for gam in f.elements if Chi(chi_map.get(gam, Chi.MINUS_T)) is Chi.ONE_MINUS_T]
    fixed = f - ones
    total = None
    for k in range(len(ones) + 1):
        for subset in combinations(ones, k):
            sub = fixed | subset
            val = (-1) ** len(sub) * taylor_product(w, sub, x, scheme, cap)
            total = val if total is None else total + val
    return total


@dataclass
class RenormalizedEvaluator:
    weight: WeightModel
    forests: list[Forest] | None = None
    scheme: SubtractionScheme = SubtractionScheme.EDGE_WEIGHTED
    cap: int = DEFAULT_ORDER_CAP
    limit: int = DEFAULT_FOREST_LIMIT
    check_exceptional: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.scheme = SubtractionScheme(self.scheme)
        if self.forests is None:
            self.forests = enumerate_forests(self.weight, self.limit)

    def terms(self, x) -> list[np.ndarray]:
        arr = as_array(self.weight.graph, x)
        if self.check_exceptional:
            require_non_exceptional(self.weight.graph, arr)
        return [forest_term(self.weight, f, arr, self.scheme, cap=self.cap) for f in self.forests]

    def __call__(self, x) -> np.ndarray:
        return r_evaluate(self, x)


def r_evaluate(ev: RenormalizedEvaluator, x) -> np.ndarray:
    """Sum of all forest terms, accumulated in canonical forest order."""
    total = None
    for term in ev.terms(x):
        total = term if total is None else total + term
    return total


def reordered_terms(ev: RenormalizedEvaluator, x, i, act: ActiveFamily) -> list[tuple[Forest, np.ndarray]]:
    """One term per saturated forest, with (1 - t) on its active part and -t on its base."""
    w = ev.weight
    arr = as_array(w.graph, x)
    if ev.check_exceptional:
        require_non_exceptional(w.graph, arr)
    out = []
    for cls in equivalence_classes(w, i, act, ev.limit):
        chi = {gam: Chi.ONE_MINUS_T for gam in cls.h_set}
        out.append((cls.saturated, forest_term(w, cls.saturated, arr, ev.scheme, chi, ev.cap)))
    return out


def r_evaluate_reordered(ev: RenormalizedEvaluator, x, i, act: ActiveFamily) -> np.ndarray:
    total = None
    for _, term in reordered_terms(ev, x, i, act):
        total = term if total is None else total + term
    return total


def single_forest(w: WeightModel, f: Forest, **kwargs) -> RenormalizedEvaluator:
    """Evaluator restricted to one forest, exposing R_F."""
    return RenormalizedEvaluator(w, [f], **kwargs)
