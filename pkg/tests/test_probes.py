from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renormkit.errors import DeterminismError, ExceptionalConfigurationError
from renormkit.forestry import enumerate_forests
from renormkit.graph import Graph
from renormkit.probes import (
    IR_GRID,
    check_theorem,
    contraction_targets,
    fit_slope,
    ir_scaling_probe,
    mc_integrate,
    region_radii,
    shell_integrate,
    uv_scaling_probe,
)
from renormkit.taylor import RenormalizedEvaluator, forest_term
from renormkit.weights import EdgeKernel, VertexCoupling, WeightModel, eval_weight

from oracles import connected_graphs

P3 = Graph.build([1, 2, 3], [[1, 2], [2, 3]], 4)
PAIR = Graph.build([1, 2], [[1, 2]], 4)
GAUSS = VertexCoupling.gaussian([0, 0, 0, 0], 1.0, 1.0)
X_P3 = np.array([[0, 0, 0, 0], [0.5, 0.5, 0, 0], [2, 0, 0, 0]], float)
X_PAIR = np.array([[0, 0, 0, 0], [1, 0, 0, 0]], float)


def _u(w):
    return lambda y: eval_weight(w, y)


# regions --------------------------------------------------------------------------


def test_region_radii_p3():
    r = region_radii(P3, np.array([[0, 0, 0, 0], [1, 0, 0, 0], [3, 0, 0, 0]], float))
    assert r.rho == pytest.approx(1.0) and r.rho_star == pytest.approx(1 / 6)


def test_region_radii_ignores_pairs_across_components():
    g = Graph.build([1, 2, 3, 4], [[1, 2], [3, 4]], 4)
    x = np.array([[0, 0, 0, 0], [1, 0, 0, 0], [0, 0.5, 0, 0], [0, 5.5, 0, 0]], float)
    r = region_radii(g, x)
    assert r.rho == pytest.approx(1.0) and r.rho_star == pytest.approx(1 / 8)


def test_region_radii_rejects_contracted_edge():
    with pytest.raises(ExceptionalConfigurationError):
        region_radii(P3, np.array([[0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 0]], float))


@settings(max_examples=50)
@given(st.sampled_from(connected_graphs(4)), st.integers(0, 2**32 - 1))
def test_region_balls_are_disjoint(graph, seed):
    vertices, edges = graph
    g = Graph.build(vertices, edges, 3)
    x = np.random.default_rng(seed).normal(size=(len(vertices), 3))
    r = region_radii(g, x)
    for a, b in combinations(range(len(vertices)), 2):
        assert np.linalg.norm(x[a] - x[b]) > 2 * r.rho_star


# exponent probes ----------------------------------------------------------------------


def test_uv_probe_single_edge():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 2, 0))
    assert uv_scaling_probe(_u(w), PAIR, X_PAIR, [1, 2]).exponent == pytest.approx(2.0, abs=0.05)


def test_uv_probe_gaussian_pair_improves_by_at_least_one():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 4, 0), GAUSS)
    bare = uv_scaling_probe(_u(w), PAIR, X_PAIR, [1, 2])
    ren = uv_scaling_probe(RenormalizedEvaluator(w), PAIR, X_PAIR, [1, 2], reference=_u(w))
    assert bare.exponent == pytest.approx(4.0, abs=0.05)
    assert ren.exponent <= 3.2
    assert bare.exponent - ren.exponent >= 1 - 0.2


def test_uv_probe_reports_exact_zero():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 4, 0))
    res = uv_scaling_probe(RenormalizedEvaluator(w), PAIR, X_PAIR, [1, 2], reference=_u(w))
    assert res.status == "exact-zero" and res.exponent is None


def test_ir_probe_massless_p3():
    w = WeightModel.uniform(P3, EdgeKernel(1, 2, 0))
    assert ir_scaling_probe(_u(w), P3, X_P3, [2]).exponent == pytest.approx(4.0, abs=0.1)
    for f in enumerate_forests(w):
        term = lambda y, f=f: forest_term(w, f, y)
        assert ir_scaling_probe(term, P3, X_P3, [2]).exponent >= 3.9


def test_ir_probe_forest_terms_do_not_degrade_decay():
    w = WeightModel.uniform(P3, EdgeKernel(1, 3, 0))
    bare = ir_scaling_probe(_u(w), P3, X_P3, [2]).exponent
    for f in enumerate_forests(w):
        term = lambda y, f=f: forest_term(w, f, y)
        assert ir_scaling_probe(term, P3, X_P3, [2]).exponent >= bare - 0.2


def test_ir_probe_flags_massive_decay():
    w = WeightModel.uniform(P3, EdgeKernel(1, 2, 1.0))
    res = ir_scaling_probe(_u(w), P3, X_P3, [2])
    assert res.status == "super-polynomial" and res.slope < -50


def test_fit_slope_drops_edge_points():
    scales = IR_GRID
    values = scales**-3.0
    values[0] = values[-1] = 1.0
    assert fit_slope(scales, values) == pytest.approx(-3.0)


# shells ---------------------------------------------------------------------------------


def test_contraction_targets():
    assert contraction_targets(P3, [2]) == [((2,), 1)]
    assert contraction_targets(P3, [1, 2]) == [((1, 2), 3)]
    with pytest.raises(ValueError):
        contraction_targets(P3, [1, 2, 3])


def test_shells_of_log_divergent_weight_carry_equal_mass():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 4, 0), GAUSS)
    rep = shell_integrate(_u(w), PAIR, X_PAIR, [2], samples=10_000, seed=42)
    assert all(r == pytest.approx(1.0, abs=0.05) for r in rep.ratios)
    radii = [s.r_out for s in rep.shells]
    assert all(a > b for a, b in zip(radii, radii[1:]))
    assert all(s.estimate >= 0 for s in rep.shells)


def test_shells_of_convergent_edge_shrink_by_a_quarter():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 2, 0))
    rep = shell_integrate(_u(w), PAIR, X_PAIR, [2], samples=10_000, seed=7)
    assert all(r == pytest.approx(0.25, abs=0.05) for r in rep.ratios)
    assert rep.sd_estimate == pytest.approx(2.0, abs=0.1)


def test_shell_slope_matches_closed_form_degree_on_p3():
    w = WeightModel.uniform(P3, EdgeKernel(1, 3, 0))
    rep = shell_integrate(_u(w), P3, X_P3, [2], samples=10_000, seed=3)
    # only edge (1, 2) is singular at the target, sd = 3
    assert rep.sd_estimate == pytest.approx(3.0, abs=0.1)


def test_shells_are_deterministic_and_need_a_seed():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 2, 0))
    a = shell_integrate(_u(w), PAIR, X_PAIR, [2], samples=5000, seed=11)
    b = shell_integrate(_u(w), PAIR, X_PAIR, [2], samples=5000, seed=11)
    assert a == b
    with pytest.raises(DeterminismError):
        shell_integrate(_u(w), PAIR, X_PAIR, [2], samples=5000)


# ball integrals ---------------------------------------------------------------------------


def test_mc_is_independent_of_worker_count():
    w = WeightModel.uniform(P3, EdgeKernel(1, 3, 0))
    ev = RenormalizedEvaluator(w, check_exceptional=False)
    one = mc_integrate(ev, w, X_P3, [2], 8.0, 20_000, seed=5)
    four = mc_integrate(ev, w, X_P3, [2], 8.0, 20_000, seed=5, workers=4)
    assert one == four
    with pytest.raises(DeterminismError):
        mc_integrate(ev, w, X_P3, [2], 8.0, 100)


def test_mc_massive_radius_doubling_is_stable():
    w = WeightModel.uniform(P3, EdgeKernel(1, 3, 1.0))
    ev = RenormalizedEvaluator(w, check_exceptional=False)
    near = mc_integrate(ev, w, X_P3, [2], 8.0, 50_000, seed=1)
    far = mc_integrate(ev, w, X_P3, [2], 16.0, 50_000, seed=1)
    assert abs(far.estimate - near.estimate) < 0.01 * near.estimate


# verdicts ---------------------------------------------------------------------------------


def test_local_check_passes_for_gaussian_pair():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 4, 0), GAUSS)
    v = check_theorem(w, "local", [2], X_PAIR, seed=42)
    assert v.status == "pass" and v.witness is None


def test_local_check_on_exact_zero():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 4, 0))
    assert check_theorem(w, "local", [2], X_PAIR, seed=42).status == "exact-zero"


def test_global_check_gates_on_ir_degree():
    w = WeightModel.uniform(P3, EdgeKernel(1, 2, 0))
    v = check_theorem(w, "global", [2], X_P3, seed=1, samples=20_000)
    assert v.status == "hypothesis-not-met"
    assert v.measured["log_growth_per_unit_log_radius"] > 1.0


def test_global_check_passes_for_massive_p3():
    w = WeightModel.uniform(P3, EdgeKernel(1, 3, 1.0))
    v = check_theorem(w, "global", [2], X_P3, seed=1, samples=50_000)
    assert v.status == "pass"


@pytest.mark.parametrize("a", [0, 1, 2])
def test_checks_never_pass_without_hypothesis(a):
    w = WeightModel.uniform(P3, EdgeKernel(1, a, 0))
    v = check_theorem(w, "global", [2], X_P3, seed=0, samples=5000)
    assert v.status == "hypothesis-not-met"
    if a == 0:
        assert check_theorem(w, "local", [2], X_P3, seed=0).status == "hypothesis-not-met"


def test_unknown_theorem_name():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 2, 0))
    with pytest.raises(ValueError):
        check_theorem(w, "third", [2], X_PAIR, seed=0)
