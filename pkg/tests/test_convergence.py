import math

import numpy as np
import pytest

from horizon_walk.convergence import (
    HeatReference,
    alpha_trend,
    empirical_semigroup,
    heat_semigroup_reference,
    independent_seed,
    lifted_functional_test,
    semigroup_estimates,
)
from horizon_walk.errors import TooFewReplicas, UnsupportedFunction
from horizon_walk.functions import frame_entry, get_function
from horizon_walk.walker import WalkConfig


def test_heat_reference_at_time_zero():
    f = get_function("torus", "cos(x1)cos(x2)")
    assert heat_semigroup_reference(HeatReference("torus"), f, [0.4, 1.0], 0.0) == f(np.array([0.4, 1.0]))


def test_heat_reference_flat_quadratic():
    # E (p1 + √t Z)² = p1² + t
    ref = HeatReference("euclidean")
    assert heat_semigroup_reference(ref, get_function("euclidean", "x1^2"), [0.7, -0.2], 1.3) \
        == pytest.approx(0.49 + 1.3, abs=1e-12)
    assert heat_semigroup_reference(ref, get_function("euclidean", "sin(x1)"), [0.7, 0.0], 2.0) \
        == pytest.approx(math.exp(-1.0) * math.sin(0.7), abs=1e-12)


def test_heat_reference_torus_and_sphere():
    f = get_function("torus", "cos(x1)cos(x2)")
    p = np.array([0.3, 5.9])
    assert heat_semigroup_reference(HeatReference("torus"), f, p, 0.8) \
        == pytest.approx(math.exp(-0.8) * f(p), abs=1e-12)
    s = get_function("sphere", "cos(theta)")
    assert heat_semigroup_reference(HeatReference("sphere"), s, [math.pi / 3, 0.0], 0.5) \
        == pytest.approx(0.5 * math.exp(-0.5), abs=1e-15)


def test_heat_reference_semigroup_property():
    ref = HeatReference("sphere")
    f = get_function("sphere", "sin^2(theta)cos(2phi)")
    p = [1.0, 0.4]
    once = heat_semigroup_reference(ref, f, p, 0.7)
    twice = math.exp(-0.5 * 6 * 0.3) * heat_semigroup_reference(ref, f, p, 0.4)
    assert once == pytest.approx(twice, rel=1e-14)


def test_heat_reference_unsupported():
    with pytest.raises(UnsupportedFunction):
        HeatReference("hyperbolic")
    with pytest.raises(UnsupportedFunction):
        heat_semigroup_reference(HeatReference("sphere"), frame_entry(0, 0), [1.0, 0.0], 0.1)
    with pytest.raises(ValueError):
        heat_semigroup_reference(HeatReference("euclidean"), get_function("euclidean", "x1^2"), [0, 0], -1)


def test_too_few_replicas():
    cfg = WalkConfig("euclidean", 0.1, 0.5, replica_count=10)
    with pytest.raises(TooFewReplicas):
        empirical_semigroup(cfg, get_function("euclidean", "x1^2"), 0.5)
    with pytest.raises(TooFewReplicas):
        lifted_functional_test(cfg, get_function("euclidean", "x1^2"), 0.5)


def test_semigroup_beyond_horizon_rejected():
    cfg = WalkConfig("euclidean", 0.1, 0.5, replica_count=100)
    with pytest.raises(ValueError):
        empirical_semigroup(cfg, get_function("euclidean", "x1^2"), 1.0)


def test_flat_quadratic_semigroup_is_unbiased():
    cfg = WalkConfig("euclidean", 0.1, 1.0, law="rademacher", replica_count=4000, master_seed=3)
    est = empirical_semigroup(cfg, get_function("euclidean", "x1^2"), 1.0)
    assert abs(est.z(1.0)) < 4 and est.excluded == 0 and est.used == 4000


def test_half_batches_agree():
    f = get_function("sphere", "cos(theta)")
    a = empirical_semigroup(WalkConfig("sphere", 0.1, 0.5, replica_count=2000, master_seed=1), f, 0.5)
    b = empirical_semigroup(WalkConfig("sphere", 0.1, 0.5, replica_count=2000, master_seed=2), f, 0.5)
    assert abs(a.value - b.value) < 4 * math.hypot(a.stderr, b.stderr)


def test_frame_functional_on_flat_space_is_constant():
    # parallel transport in the plane is trivial, so frame entries never change
    cfg = WalkConfig("euclidean", 0.1, 0.5, replica_count=200, frame=[0.6, 0.8, -0.8, 0.6])
    est = semigroup_estimates(cfg, [frame_entry(0, 0), frame_entry(1, 0)], 0.5)
    assert est[0].value == pytest.approx(0.6, abs=1e-12) and est[0].stderr < 1e-12
    assert est[1].value == pytest.approx(0.8, abs=1e-12)


def test_lifted_functional_shared_randomness():
    cfg = WalkConfig("sphere", 0.1, 0.5, replica_count=300, master_seed=9)
    rep = lifted_functional_test(cfg, get_function("sphere", "cos(theta)"), 0.5, shared=True)
    assert rep.passed and rep.difference == 0.0 and rep.max_pathwise_gap == 0.0


def test_lifted_functional_independent_seeds():
    assert independent_seed(9) != 9
    cfg = WalkConfig("hyperbolic", 0.1, 0.5, replica_count=2000, master_seed=9)
    rep = lifted_functional_test(cfg, get_function("hyperbolic", "log(y)"), 0.5, shared=False)
    assert rep.lifted.value != rep.base.value
    assert rep.passed, rep.z


def test_alpha_trend_report():
    cfg = WalkConfig("torus", 0.2, 0.5, replica_count=3000, master_seed=4, start=[0.5, 0.5])
    fns = [get_function("torus", "cos(x1)")]
    rep = alpha_trend(cfg, fns, [0.0, 0.5], [0.2, 0.1, 0.05])
    assert len(rep.rows) == 6
    zero = [r for r in rep.rows if r.t == 0.0]
    assert all(r.bias == 0.0 and r.passed for r in zero)
    assert rep.passed, rep.summary()
    lines = rep.csv_text().splitlines()
    assert lines[0] == "function,t,alpha,empirical,stderr,reference,z,excluded" and len(lines) == 7
    assert {r.alpha for r in rep.final_rows()} == {0.05}
    with pytest.raises(ValueError):
        alpha_trend(cfg, fns, [0.5], [0.1, 0.05])
