from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from renormkit.errors import ExceptionalConfigurationError, JetOrderCapError
from renormkit.forestry import Forest, all_active_families, enumerate_forests
from renormkit.graph import Graph, Subgraph
from renormkit.taylor import (
    Chi,
    RenormalizedEvaluator,
    SubtractionScheme,
    forest_term,
    line_complement,
    r_evaluate_reordered,
    single_forest,
    subtraction_point,
    subtraction_weights,
    taylor_product,
)
from renormkit.weights import EdgeKernel, VertexCoupling, WeightModel, eval_weight

from oracles import sympy_taylor_polynomial

P3 = Graph.build([1, 2, 3], [[1, 2], [2, 3]], 4)
PAIR = Graph.build([1, 2], [[1, 2]], 4)
GAUSS = VertexCoupling.gaussian([0, 0, 0, 0], 1.0, 1.0)


def test_triangle_point_is_centroid():
    tri = Graph.build([1, 2, 3], [[1, 2], [2, 3], [1, 3]], 2)
    x = np.array([[0, 0], [3, 0], [0, 3]], float)
    assert np.allclose(subtraction_point(Subgraph(tri, (1, 2, 3)), x), [1, 1])


def test_path_point_weights_middle_vertex_twice():
    assert subtraction_weights(Subgraph(P3, (1, 2, 3))) == {1: 0.25, 2: 0.5, 3: 0.25}
    x = np.array([[0, 0, 0, 0], [1, 0, 0, 0], [3, 0, 0, 0]], float)
    assert np.allclose(subtraction_point(Subgraph(P3, (1, 2, 3)), x), [1.25, 0, 0, 0])
    mean = subtraction_point(Subgraph(P3, (1, 2, 3)), x, SubtractionScheme.MEAN)
    assert np.allclose(mean, [4 / 3, 0, 0, 0])


def test_single_edge_point_is_midpoint():
    x = np.array([[0, 0, 0, 0], [2, 2, 0, 0]], float)
    assert np.allclose(subtraction_point(Subgraph(PAIR, (1, 2)), x), [1, 1, 0, 0])


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_subtraction_point_is_convex(seed):
    rng = np.random.default_rng(seed)
    k4 = Graph.build([1, 2, 3, 4], [[1, 2], [2, 3], [3, 4], [1, 3]], 3)
    s = Subgraph(k4, (1, 2, 3, 4))
    wts = subtraction_weights(s)
    assert math.isclose(sum(wts.values()), 1.0) and min(wts.values()) >= 0
    x = rng.normal(size=(4, 3))
    p = subtraction_point(s, x)
    assert np.all(p <= x.max(axis=0) + 1e-12) and np.all(p >= x.min(axis=0) - 1e-12)


def test_line_complement():
    w = WeightModel.uniform(P3, EdgeKernel(1, 4, 0))
    assert line_complement(w, []) == ((1, 2), (2, 3))
    assert line_complement(w, [(1, 2)]) == ((2, 3),)
    assert line_complement(w, [(1, 2), (1, 2, 3)]) == ()
    with pytest.raises(ValueError):
        line_complement(w, [(1, 2), (2, 3)])


def test_empty_forest_term_is_weight():
    w = WeightModel.uniform(P3, EdgeKernel(1, 4, 0.2), GAUSS)
    x = np.random.default_rng(0).normal(size=(3, 4))
    assert forest_term(w, Forest(), x) == pytest.approx(eval_weight(w, x))


def test_pair_forest_term_replaces_couplings_at_midpoint():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 4, 0), GAUSS)
    x = np.array([[0, 0, 0, 0], [1, 0, 0, 0]], float)
    gam = Subgraph(PAIR, (1, 2))
    term = forest_term(w, Forest((gam,)), x)
    expected = -1.0 * math.exp(-2 * 0.25)  # |x1 - x2|^-4 = 1, g(xbar)^2 = exp(-2 * 0.5^2)
    assert term == pytest.approx(expected, rel=1e-14)
    total = RenormalizedEvaluator(w)(x)
    assert total == pytest.approx(math.exp(-1) - math.exp(-0.5), rel=1e-13)


def test_one_minus_t_is_weight_minus_t():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 4, 0), GAUSS)
    x = np.array([[0.1, 0, 0.2, 0], [1, 0.3, 0, 0]], float)
    f = Forest((Subgraph(PAIR, (1, 2)),))
    one = forest_term(w, f, x, chi_map={f.elements[0]: Chi.ONE_MINUS_T})
    assert one == pytest.approx(eval_weight(w, x) + forest_term(w, f, x), rel=1e-14)


def test_constant_couplings_cancel_completely_on_p3():
    w = WeightModel.uniform(P3, EdgeKernel(1, 4, 0))
    x = np.array([[0, 0, 0, 0], [0.5, 0.5, 0, 0], [2, 0, 0, 0]], float)
    ev = RenormalizedEvaluator(w)
    assert ev(x) == pytest.approx(0.0, abs=1e-14)
    assert sum(abs(t) for t in ev.terms(x)) > 0.1


def test_batched_evaluation_matches_loop():
    w = WeightModel.uniform(P3, EdgeKernel(1, 5, 0), GAUSS)
    x = np.random.default_rng(5).normal(size=(7, 3, 4))
    ev = RenormalizedEvaluator(w)
    batch = ev(x)
    assert np.allclose(batch, [ev(c) for c in x], rtol=1e-13)


def test_exceptional_configuration_rejected():
    w = WeightModel.uniform(P3, EdgeKernel(1, 4, 0))
    x = np.array([[0, 0, 0, 0], [0, 0, 0, 0], [2, 0, 0, 0]], float)
    with pytest.raises(ExceptionalConfigurationError):
        RenormalizedEvaluator(w)(x)


def test_nested_order_above_cap_raises():
    w = WeightModel.uniform(P3, EdgeKernel(1, 5, 0), GAUSS)
    f = Forest((Subgraph(P3, (1, 2)), Subgraph(P3, (1, 2, 3))))
    x = np.random.default_rng(0).normal(size=(3, 4))
    with pytest.raises(JetOrderCapError):
        taylor_product(w, f, x, cap=2)


# symbolic oracles ------------------------------------------------------------------------


def _gauss(coords):
    return sp.exp(-sum(c**2 for c in coords))


def test_order_one_term_matches_explicit_taylor_polynomial():
    """d = 2, a = 3: the edge part is log-plus-one divergent, so t is a first-order polynomial."""
    g = Graph.build([1, 2, 3], [[1, 2], [2, 3]], 2)
    w = WeightModel.uniform(g, EdgeKernel(1, 3, 0), VertexCoupling.gaussian([0, 0], 1.0, 1.0))
    x = np.array([[0.3, -0.1], [0.9, 0.4], [-0.7, 1.1]])
    xs = sp.symbols("u1 v1 u2 v2")
    x3 = [sp.Float(c) for c in x[2]]
    p1, p2 = xs[:2], xs[2:]
    expr = ((p2[0] - x3[0]) ** 2 + (p2[1] - x3[1]) ** 2) ** sp.Rational(-3, 2) * _gauss(p1) * _gauss(p2) * _gauss(x3)
    bar = (x[0] + x[1]) / 2
    poly = sympy_taylor_polynomial(expr, xs, [*bar, *bar], 1)
    oracle = float(poly.subs(dict(zip(xs, x[:2].ravel()))))
    inner = ((x[0] - x[1]) ** 2).sum() ** -1.5
    f = Forest((Subgraph(g, (1, 2)),))
    assert taylor_product(w, f, x) == pytest.approx(inner * oracle, rel=1e-12)


def test_nested_term_matches_symbolic_substitution():
    """d = 1, a = 2 on the path: inner edge of order 1 nested in the whole graph of order 2.

    Each operator only reaches factors it does not contain, so edge (2, 3) sees
    the inner substitution alone while the couplings see both, outer first.
    """
    g = Graph.build([1, 2, 3], [[1, 2], [2, 3]], 1)
    w = WeightModel.uniform(g, EdgeKernel(1, 2, 0), VertexCoupling.gaussian([0.0], 1.0, 1.0))
    x = np.array([[0.2], [0.7], [-0.5]])
    sa, sc = sp.symbols("s_a s_c")
    y1, y2, y3 = (sp.Float(v) for v in x[:, 0])

    def inner(p1, p2):
        bar = (p1 + p2) / 2
        return bar + sa * (p1 - bar), bar + sa * (p2 - bar)

    bar_c = (y1 + 2 * y2 + y3) / 4
    c1, c2, c3 = (bar_c + sc * (y - bar_c) for y in (y1, y2, y3))
    q1, q2 = inner(c1, c2)
    _, e2 = inner(y1, y2)
    expr = (y1 - y2) ** -2 * (e2 - y3) ** -2 * sp.exp(-(q1**2) - q2**2 - c3**2)
    oracle = 0.0
    for i in range(2):
        for j in range(3):
            d = sp.diff(expr, sa, i, sc, j) if i or j else expr
            oracle += float(d.subs({sa: 0, sc: 0})) / (math.factorial(i) * math.factorial(j))
    f = Forest((Subgraph(g, (1, 2)), Subgraph(g, (1, 2, 3))))
    assert taylor_product(w, f, x) == pytest.approx(oracle, rel=1e-11)
    assert forest_term(w, f, x) == pytest.approx(oracle, rel=1e-11)


# reordering -----------------------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 5, 6]))
def test_reordered_sum_equals_forest_sum(seed, a):
    w = WeightModel.uniform(P3, EdgeKernel(1, a, 0.3), GAUSS)
    ev = RenormalizedEvaluator(w)
    x = np.random.default_rng(seed).normal(size=(5, 3, 4))
    plain = ev(x)
    for members in [(), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]:
        for act in all_active_families(w, members):
            assert np.allclose(r_evaluate_reordered(ev, x, members, act), plain, rtol=1e-10, atol=1e-12)


def test_single_forest_evaluator_exposes_one_term():
    w = WeightModel.uniform(P3, EdgeKernel(1, 4, 0), GAUSS)
    x = np.random.default_rng(2).normal(size=(3, 4))
    forests = enumerate_forests(w)
    total = sum(single_forest(w, f)(x) for f in forests)
    assert total == pytest.approx(RenormalizedEvaluator(w)(x), rel=1e-13)
