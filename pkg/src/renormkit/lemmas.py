"""Fitted-exponent checks of the scaling inequalities behind the convergence proofs.

Each check compares two fitted exponents (or a fitted exponent and a closed-form
bound) at a seeded random configuration and yields one :class:`Verdict`.
Exact-zero left-hand sides pass: a vanishing function obeys every bound.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .forestry import Forest, enumerate_forests, renormalization_parts
from .graph import Graph, Overlap, Subgraph, enumerate_full_vertex_parts, overlap_relation
from .probes import EXPONENT_TOL, ProbeResult, Verdict, block_rng, ir_scaling_probe, uv_scaling_probe
from .taylor import Chi, SubtractionScheme, forest_term, subtraction_point
from .weights import (
    EdgeKernel,
    VertexCoupling,
    WeightModel,
    eval_weight,
    jet_eval,
    restrict,
    taylor_order,
)

TOL = EXPONENT_TOL
# Forest terms are differences of nearly equal products, so their leading
# coefficient can be small and the asymptotic power sets in later than for a
# bare weight; the lemma checks therefore fit deeper into the contraction.
LEMMA_UV_GRID = 2.0 ** -np.arange(6, 21)
LEMMA_IR_GRID = 2.0 ** np.arange(6, 21)


def random_configuration(g: Graph, seed: int, spread: float = 1.0) -> np.ndarray:
    """Seeded generic configuration with all vertices at least 0.3 apart."""
    rng = block_rng(seed, 7)
    while True:
        x = spread * rng.standard_normal((g.n_vertices, g.dimension))
        dists = [np.linalg.norm(x[a] - x[b]) for a, b in combinations(range(g.n_vertices), 2)]
        if not dists or min(dists) > 0.3 * spread:
            return x


def _verdict(claim: str, lhs: ProbeResult, bound: float, upper: bool, seed: int, detail: dict) -> Verdict:
    """Compare a fitted exponent with a bound: exponent <= bound (upper) or >= bound."""
    measured = {"exponent": lhs.to_dict(), "bound": bound} | detail
    if lhs.status == "exact-zero":
        status = "pass"
    elif lhs.exponent is None:
        status = "fail"
    elif upper:
        status = "pass" if lhs.exponent <= bound + TOL else "fail"
    else:
        status = "pass" if lhs.exponent >= bound - TOL else "fail"
    relation = "<=" if upper else ">="
    witness = None if status == "pass" else {"points": lhs.to_dict()["points"]}
    return Verdict(claim, status, {}, measured, {"absolute": TOL, "relation": relation}, seed, witness)


def _sub(v: Subgraph | tuple) -> str:
    verts = v.vertices if isinstance(v, Subgraph) else v
    return "{" + ",".join(map(str, verts)) + "}"


def _uv(evaluator, g, x, vertices, reference=None) -> ProbeResult:
    return uv_scaling_probe(evaluator, g, x, vertices, LEMMA_UV_GRID, reference)


def _ir(evaluator, g, x, vertices) -> ProbeResult:
    return ir_scaling_probe(evaluator, g, x, vertices, LEMMA_IR_GRID)


# UV side ------------------------------------------------------------------------


def _edge_moment_and_derivative(w: WeightModel, name: str, seed: int) -> list[Verdict]:
    """Multiplying a kernel by a coordinate difference lowers its exponent by one; differentiating raises it by one."""
    g = w.graph
    x = random_configuration(g, seed)
    out = []
    for e in g.edges:
        a = float(w.kernel[e].a)
        ia, ib = g.index[e[0]], g.index[e[1]]

        def kernel(y, e=e):
            return eval_weight(w, y, edges=[e], vertices=())

        def moment(y, e=e):
            return (y[..., ia, 0] - y[..., ib, 0]) * kernel(y)

        def derivative(y, e=e):
            flat = y.reshape(-1, g.n_vertices, g.dimension)
            vals = [jet_eval(w, [e], [], c, [e[0]], c[ia], 1).coefficient((1,) + (0,) * (g.dimension - 1)) for c in flat]
            return np.asarray(vals).reshape(y.shape[:-2])

        base = _uv(kernel, g, x, e)
        out.append(_verdict(f"{name}: coordinate moment of edge {e}", _uv(moment, g, x, e), a - 1, True, seed,
                            {"kernel_exponent": base.exponent}))
        out.append(_verdict(f"{name}: first derivative of edge {e}", _uv(derivative, g, x, e), a + 1, True, seed,
                            {"kernel_exponent": base.exponent}))
    return out


def _coupling_remainder(w: WeightModel, name: str, seed: int) -> list[Verdict]:
    """The order-k Taylor remainder of smooth couplings vanishes like the contraction scale to the k+1."""
    g = w.graph
    x = random_configuration(g, seed)
    out = []
    for e in g.edges:
        s = Subgraph(g, e)
        k = taylor_order(w, s)
        if k is None:
            continue
        ia, ib = g.index[e[0]], g.index[e[1]]

        def couplings(y):
            return eval_weight(w, y, edges=(), vertices=e)

        def remainder(y, s=s, k=k):
            flat = y.reshape(-1, g.n_vertices, g.dimension)
            vals = []
            for c in flat:
                center = subtraction_point(s, c)
                jet = jet_eval(w, [], e, c, e, center, k)
                h = np.concatenate([c[ia] - center, c[ib] - center])
                vals.append(couplings(c) - jet.evaluate(h))
            return np.asarray(vals).reshape(y.shape[:-2])

        ref = lambda y: couplings(y)
        probe = _uv(remainder, g, x, e, reference=ref)
        out.append(_verdict(f"{name}: order-{k} coupling remainder on {_sub(s)}", probe, 0 - (k + 1), True, seed, {}))
    return out


def _subtraction_improvement(w: WeightModel, name: str, seed: int, scheme) -> list[Verdict]:
    """(1 - t) on one part improves its contraction exponent by its order plus one, and spares other parts."""
    g = w.graph
    x = random_configuration(g, seed)
    u = lambda y: eval_weight(w, y)
    out = []
    parts = renormalization_parts(w)
    full = enumerate_full_vertex_parts(g)
    for gam in parts:
        d = taylor_order(w, gam)
        f = Forest((gam,))
        sub = lambda y, f=f, gam=gam: forest_term(w, f, y, scheme, {gam: Chi.ONE_MINUS_T})
        base = _uv(u, g, x, gam.vertices)
        probe = _uv(sub, g, x, gam.vertices, reference=u)
        out.append(_verdict(f"{name}: improvement of (1-t) on {_sub(gam)}", probe, base.exponent - d - 1, True, seed,
                            {"unsubtracted_exponent": base.exponent}))
        for lam in full:
            if lam == gam or overlap_relation(lam, gam) is Overlap.OVERLAPPING:
                continue
            base_l = _uv(u, g, x, lam.vertices)
            probe_l = _uv(sub, g, x, lam.vertices, reference=u)
            out.append(_verdict(f"{name}: (1-t) on {_sub(gam)} seen from {_sub(lam)}", probe_l, base_l.exponent, True, seed,
                                {"unsubtracted_exponent": base_l.exponent}))
    return out


def _uv_recursion(w: WeightModel, name: str, seed: int, scheme) -> list[Verdict]:
    """Forest terms whose maximal elements are improved stay no worse than the bare weight on the whole graph."""
    g = w.graph
    x = random_configuration(g, seed)
    u = lambda y: eval_weight(w, y)
    whole = g.vertex_ids
    base = _uv(u, g, x, whole)
    out = []
    for f in enumerate_forests(w):
        if not len(f):
            continue
        term = lambda y, f=f: forest_term(w, f, y, scheme)
        premise_ok = True
        maximal = [e for e in f.elements if not any(e.vertex_set < o.vertex_set for o in f.elements)]
        for gam in maximal:
            inner = Forest(tuple(e for e in f.elements if e.vertex_set <= gam.vertex_set))
            chi = {e: Chi.ONE_MINUS_T for e in inner.elements}
            sub = lambda y, inner=inner, chi=chi: forest_term(w, inner, y, scheme, chi)
            p = _uv(sub, g, x, gam.vertices, reference=u)
            b = _uv(u, g, x, gam.vertices)
            if p.status == "fit" and p.exponent > b.exponent - taylor_order(w, gam) - 1 + TOL:
                premise_ok = False
        if not premise_ok:
            continue
        probe = _uv(term, g, x, whole, reference=u)
        out.append(_verdict(f"{name}: forest term {f!r} on the whole graph", probe, base.exponent, True, seed, {}))
    return out


# IR side ----------------------------------------------------------------------------


def _ir_moment_and_derivative(w: WeightModel, name: str, seed: int) -> list[Verdict]:
    """Large-argument mirror: a moment costs one power of decay, a derivative gains one."""
    g = w.graph
    x = random_configuration(g, seed)
    u = lambda y: eval_weight(w, y)
    out = []
    for v in g.vertex_ids:
        if not g.adjacency[v]:
            continue
        iv = g.index[v]
        base = _ir(u, g, x, [v])
        if base.status != "fit":
            continue

        def moment(y):
            return y[..., iv, 0] * u(y)

        def derivative(y):
            flat = y.reshape(-1, g.n_vertices, g.dimension)
            vals = []
            for c in flat:
                jet = jet_eval(w, g.edges, g.vertex_ids, c, [v], c[iv], 1)
                vals.append(jet.coefficient((1,) + (0,) * (g.dimension - 1)))
            return np.asarray(vals).reshape(y.shape[:-2])

        out.append(_verdict(f"{name}: IR moment at vertex {v}", _ir(moment, g, x, [v]), base.exponent - 1,
                            False, seed, {"weight_exponent": base.exponent}))
        out.append(_verdict(f"{name}: IR derivative at vertex {v}", _ir(derivative, g, x, [v]),
                            base.exponent + 1, False, seed, {"weight_exponent": base.exponent}))
    return out


def _ir_forest_terms(w: WeightModel, name: str, seed: int, scheme) -> list[Verdict]:
    """No single forest term decays slower than the bare weight when one vertex is sent to infinity."""
    g = w.graph
    x = random_configuration(g, seed)
    u = lambda y: eval_weight(w, y)
    out = []
    for v in g.vertex_ids:
        base = _ir(u, g, x, [v])
        for f in enumerate_forests(w):
            if not len(f):
                continue
            term = lambda y, f=f: forest_term(w, f, y, scheme)
            out.append(_verdict(f"{name}: IR of forest term {f!r} dilating {v}", _ir(term, g, x, [v]),
                                base.exponent, False, seed, {"weight_exponent": base.exponent}))
    return out


def _ir_recursion(w: WeightModel, name: str, seed: int, scheme) -> list[Verdict]:
    """If every maximal element keeps its IR decay under its inner subtractions, so does the whole forest term."""
    g = w.graph
    x = random_configuration(g, seed)
    u = lambda y: eval_weight(w, y)
    out = []
    for v in g.vertex_ids:
        base = _ir(u, g, x, [v])
        for f in enumerate_forests(w):
            if not len(f):
                continue
            maximal = [e for e in f.elements if not any(e.vertex_set < o.vertex_set for o in f.elements)]
            premise_ok = True
            for gam in maximal:
                if v not in gam.vertex_set or gam.size == g.n_vertices:
                    continue
                wg = restrict(w, gam.vertices)
                cols = [g.index[t] for t in wg.graph.vertex_ids]
                xg = x[cols]
                inner = Forest(tuple(Subgraph(wg.graph, e.vertices) for e in f.elements if e.vertex_set < gam.vertex_set))
                ug = lambda y, wg=wg: eval_weight(wg, y)
                tg = lambda y, wg=wg, inner=inner: forest_term(wg, inner, y, scheme)
                pb = _ir(ug, wg.graph, xg, [v])
                pt = _ir(tg, wg.graph, xg, [v])
                if pt.exponent is not None and pb.exponent is not None and pt.exponent < pb.exponent - TOL:
                    premise_ok = False
            if not premise_ok:
                continue
            term = lambda y, f=f: forest_term(w, f, y, scheme)
            out.append(_verdict(f"{name}: IR recursion for {f!r} dilating {v}", _ir(term, g, x, [v]),
                                base.exponent, False, seed, {}))
    return out


def _ir_remainder(w: WeightModel, name: str, seed: int, scheme) -> list[Verdict]:
    """A Taylor remainder in the variables of one part keeps the decay in the remaining variables."""
    g = w.graph
    x = random_configuration(g, seed)
    u = lambda y: eval_weight(w, y)
    out = []
    for gam in renormalization_parts(w):
        f = Forest((gam,))
        sub = lambda y, f=f, gam=gam: forest_term(w, f, y, scheme, {gam: Chi.ONE_MINUS_T})
        for v in g.vertex_ids:
            if v in gam.vertex_set:
                continue
            base = _ir(u, g, x, [v])
            out.append(_verdict(f"{name}: IR of (1-t) on {_sub(gam)} dilating {v}", _ir(sub, g, x, [v]),
                                base.exponent, False, seed, {"weight_exponent": base.exponent}))
    return out


CHECKS = {
    "moment-derivative": lambda w, n, s, sc: _edge_moment_and_derivative(w, n, s),
    "coupling-remainder": lambda w, n, s, sc: _coupling_remainder(w, n, s),
    "subtraction-improvement": _subtraction_improvement,
    "uv-recursion": _uv_recursion,
    "ir-moment-derivative": lambda w, n, s, sc: _ir_moment_and_derivative(w, n, s),
    "ir-forest-terms": _ir_forest_terms,
    "ir-recursion": _ir_recursion,
    "ir-remainder": _ir_remainder,
}


def lemma_family() -> dict[str, WeightModel]:
    """Small weights exercising every check."""
    gauss = VertexCoupling.gaussian([0.0] * 4, 1.0, 1.0)
    pair = Graph.build([1, 2], [[1, 2]], 4)
    p3 = Graph.build([1, 2, 3], [[1, 2], [2, 3]], 4)
    p4 = Graph.build([1, 2, 3, 4], [[1, 2], [2, 3], [3, 4]], 4)
    return {
        "edge a=2": WeightModel.uniform(pair, EdgeKernel(1, 2, 0)),
        "pair a=4 gaussian": WeightModel.uniform(pair, EdgeKernel(1, 4, 0), gauss),
        "P3 a=4 constant": WeightModel.uniform(p3, EdgeKernel(1, 4, 0)),
        "P3 a=4 gaussian": WeightModel.uniform(p3, EdgeKernel(1, 4, 0), gauss),
        "P3 a=2 massless": WeightModel.uniform(p3, EdgeKernel(1, 2, 0)),
        "P4 a=4 constant": WeightModel.uniform(p4, EdgeKernel(1, 4, 0)),
    }



def check_scaling_lemmas(
    w: WeightModel | None = None,
    seed: int = 0,
    scheme: SubtractionScheme = SubtractionScheme.EDGE_WEIGHTED,
    which: list[str] | None = None,
) -> list[Verdict]:
    """Run every check on ``w``, or on the built-in test family when ``w`` is None."""
    family = {"weight": w} if w is not None else lemma_family()
    names = which or list(CHECKS)
    out = []
    for label, model in family.items():
        for key in names:
            out.extend(CHECKS[key](model, label, seed, SubtractionScheme(scheme)))
    return out
