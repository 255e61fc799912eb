from __future__ import annotations

import numpy as np
import pytest

from renormkit.graph import Graph
from renormkit.lemmas import CHECKS, LEMMA_UV_GRID, check_scaling_lemmas, lemma_family, random_configuration
from renormkit.probes import uv_scaling_probe
from renormkit.weights import EdgeKernel, VertexCoupling, WeightModel, eval_weight

PAIR = Graph.build([1, 2], [[1, 2]], 4)


def test_coordinate_moment_of_inverse_square():
    """x^alpha |y|^-2 with |alpha| = 1 scales with exponent 1."""
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 2, 0))
    x = random_configuration(PAIR, 0)
    f = lambda y: (y[..., 0, 0] - y[..., 1, 0]) * eval_weight(w, y)
    assert uv_scaling_probe(f, PAIR, x, [1, 2], LEMMA_UV_GRID).exponent == pytest.approx(1.0, abs=0.1)


def test_coupling_remainder_bound_for_order_zero():
    w = WeightModel.uniform(PAIR, EdgeKernel(1, 4, 0), VertexCoupling.gaussian([0] * 4))
    (v,) = check_scaling_lemmas(w, seed=3, which=["coupling-remainder"])
    assert v.passed and v.measured["exponent"]["exponent"] <= -1 + 0.2


def test_ir_subtraction_keeps_decay_on_massless_p3():
    p3 = Graph.build([1, 2, 3], [[1, 2], [2, 3]], 4)
    w = WeightModel.uniform(p3, EdgeKernel(1, 2, 0))
    verdicts = check_scaling_lemmas(w, seed=1, which=["ir-forest-terms", "ir-moment-derivative"])
    assert verdicts and all(v.passed for v in verdicts)


def test_random_configuration_is_seeded_and_spread():
    g = Graph.build([1, 2, 3, 4], [[1, 2], [2, 3], [3, 4]], 4)
    a, b = random_configuration(g, 9), random_configuration(g, 9)
    assert np.array_equal(a, b)
    d = [np.linalg.norm(a[i] - a[j]) for i in range(4) for j in range(i + 1, 4)]
    assert min(d) > 0.3


def test_family_covers_every_check():
    verdicts = check_scaling_lemmas(seed=0)
    for key in CHECKS:
        ran = check_scaling_lemmas(seed=0, which=[key])
        assert ran, key
    assert len(verdicts) > 300
    assert set(lemma_family()) >= {"edge a=2", "P3 a=2 massless"}


@pytest.mark.parametrize("seed", range(5))
def test_suite_has_no_failures(seed):
    failed = [v.claim for v in check_scaling_lemmas(seed=seed) if not v.passed]
    assert not failed


def test_failing_verdict_carries_witness():
    from renormkit.lemmas import _verdict
    from renormkit.probes import ProbeResult

    v = _verdict("toy", ProbeResult(3.0, -3.0, "fit", ((1.0, 1.0),)), 1.0, True, 0, {})
    assert v.status == "fail" and v.witness["points"] == [[1.0, 1.0]]
