import dataclasses
import math

import numpy as np
import pytest

from horizon_walk.errors import DomainExit
from horizon_walk.increments import IncrementLaw, replica_rng
from horizon_walk.manifolds import (
    coordinate_orthonormal_frame,
    frame_gram_deviation,
    geodesic_distance,
    get_manifold,
)
from horizon_walk.walker import (
    BLOCK_SIZE,
    WalkConfig,
    batch_run,
    run_base_walk,
    run_lifted_walk,
    step_discrete,
    write_dataset,
)


def test_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(alpha=0.0)
    with pytest.raises(ValueError):
        WalkConfig(alpha=1.5)
    with pytest.raises(ValueError):
        WalkConfig(horizon_t=-1)
    with pytest.raises(ValueError):
        WalkConfig(replica_count=0)
    with pytest.raises(ValueError):
        WalkConfig(time_mode="poisson")


def test_step_count_tolerates_rounding():
    assert WalkConfig(alpha=0.05, horizon_t=1.0).step_count == 400
    assert WalkConfig(alpha=0.1, horizon_t=0.3).step_count == 30


def test_horizon_zero_path():
    p = run_base_walk(WalkConfig(manifold="sphere", horizon_t=0.0))
    assert np.array_equal(p.times, [0.0])
    assert np.array_equal(p.points, [[math.pi / 2, 0.0]])


def test_path_times_and_start():
    cfg = WalkConfig(manifold="torus", alpha=0.1, horizon_t=0.5, start=(1.0, 2.0))
    p = run_base_walk(cfg)
    assert np.allclose(p.times, 0.01 * np.arange(51))
    assert np.all(np.diff(p.times) > 0) and p.times[0] == 0
    assert np.array_equal(p.points[0], [1.0, 2.0])


def test_recording_grid_is_coarsened():
    cfg = WalkConfig(manifold="euclidean", alpha=0.01, horizon_t=20.0)
    p = run_base_walk(cfg)
    assert len(p.times) == 1001
    assert np.allclose(np.diff(p.times), 0.02)


def test_step_discrete_rademacher_euclidean(rng):
    m = get_manifold("euclidean")
    x = step_discrete(m, IncrementLaw("rademacher"), [1.0, 1.0], 0.1, rng)
    d = x - 1.0
    assert np.count_nonzero(d) == 1
    assert np.abs(d).max() == pytest.approx(0.1 * math.sqrt(2))


def test_step_discrete_sphere_distance(rng):
    m = get_manifold("sphere")
    p = np.array([math.pi / 2, 0.3])
    for _ in range(10):
        x = step_discrete(m, IncrementLaw("sphere_uniform"), p, 0.2, rng)
        assert float(geodesic_distance(m, p, x)) == pytest.approx(0.2 * math.sqrt(2), abs=1e-12)


def test_alpha_limit_returns_point(rng):
    m = get_manifold("hyperbolic")
    x = step_discrete(m, IncrementLaw("gaussian"), [0.0, 1.0], 1e-12, rng)
    assert np.allclose(x, [0.0, 1.0], atol=1e-11)


def test_torus_coordinates_wrapped():
    ds = batch_run(WalkConfig(manifold="torus", alpha=0.5, horizon_t=5.0, replica_count=50, law="gaussian"))
    assert np.all((ds.points >= 0) & (ds.points < 2 * math.pi))


def test_torus_matches_euclidean_mod_2pi():
    base = dict(alpha=0.2, horizon_t=1.0, replica_count=20, law="gaussian", start=(1.0, 1.0), master_seed=4)
    e = batch_run(WalkConfig(manifold="euclidean", **base))
    t = batch_run(WalkConfig(manifold="torus", **base))
    gap = np.abs(np.mod(e.points, 2 * math.pi) - t.points)
    assert np.max(np.minimum(gap, 2 * math.pi - gap)) < 1e-12


@pytest.mark.parametrize("mode", ["closed_form", "integrate"])
def test_coupled_projection_is_exact(chart, mode):
    cfg = WalkConfig(manifold=chart.name, alpha=0.1, horizon_t=0.5, replica_count=30, law="gaussian",
                     lift_method=mode, integrator_h=0.01, master_seed=11)
    ds = batch_run(cfg, lifted=True)
    assert np.array_equal(ds.points, ds.coupled, equal_nan=True)


def test_coupled_base_equals_plain_base_walk():
    # the carried frame equals the coordinate frame along flat walks
    cfg = WalkConfig(manifold="euclidean", alpha=0.1, horizon_t=0.5, replica_count=5, law="gaussian")
    lifted, base = batch_run(cfg, lifted=True), batch_run(cfg)
    assert np.allclose(lifted.coupled, base.points, atol=1e-14)


def test_euclidean_frames_constant():
    cfg = WalkConfig(manifold="euclidean", alpha=0.1, horizon_t=1.0, law="gaussian",
                     frame=(0.6, 0.8, -0.8, 0.6))
    fp, bp = run_lifted_walk(cfg)
    assert np.allclose(fp.frames, np.array([[0.6, -0.8], [0.8, 0.6]]), atol=1e-14)
    assert np.array_equal(fp.points, bp.points)


def test_sphere_frames_stay_orthonormal():
    cfg = WalkConfig(manifold="sphere", alpha=0.05, horizon_t=1.0, replica_count=20, master_seed=3)
    ds = batch_run(cfg, lifted=True)
    m = cfg.chart()
    for r in range(20):
        fp = ds.frame_path(r)
        assert np.max(frame_gram_deviation(m, fp.points, fp.frames)) < 1e-7
    assert ds.max_drift < 1e-7


def test_integrated_lifted_walk_matches_closed_form():
    base = dict(manifold="hyperbolic", alpha=0.1, horizon_t=0.3, replica_count=10, law="sphere_uniform")
    a = batch_run(WalkConfig(**base, lift_method="integrate", integrator_h=2e-3), lifted=True)
    b = batch_run(WalkConfig(**base), lifted=True)
    assert np.max(np.abs(a.points - b.points)) < 1e-9
    assert np.max(np.abs(a.frames - b.frames)) < 1e-9


def test_single_replica_reproduces_batch_row():
    cfg = WalkConfig(manifold="sphere", alpha=0.1, horizon_t=1.0, replica_count=40, master_seed=9)
    ds = batch_run(cfg)
    p = run_base_walk(cfg, replica=17)
    assert np.array_equal(p.points, ds.points[17])
    one = batch_run(dataclasses.replace(cfg, replica_count=1))
    assert np.array_equal(one.points[0], run_base_walk(cfg).points)


def test_threads_do_not_change_results():
    cfg = WalkConfig(manifold="sphere", alpha=0.2, horizon_t=0.4, replica_count=BLOCK_SIZE + 300,
                     master_seed=5)
    a, b = batch_run(cfg, threads=1, final_only=True), batch_run(cfg, threads=3, final_only=True)
    assert np.array_equal(a.points, b.points, equal_nan=True)


def test_same_seed_same_csv_bytes(tmp_path):
    cfg = WalkConfig(manifold="hyperbolic", alpha=0.2, horizon_t=0.4, replica_count=5, master_seed=21)
    p1 = write_dataset(batch_run(cfg, lifted=True), tmp_path / "a")
    p2 = write_dataset(batch_run(cfg, lifted=True), tmp_path / "b")
    for f1, f2 in zip(p1, p2):
        assert open(f1, "rb").read() == open(f2, "rb").read()
    header = open(p1[0]).readline().strip()
    assert header == "replica,time,x1,x2,f11,f12,f21,f22"


def test_domain_exits_counted_not_raised():
    cfg = WalkConfig(manifold="sphere", alpha=0.3, horizon_t=2.0, replica_count=200, sphere_eps=0.4,
                     law="gaussian", master_seed=2)
    ds = batch_run(cfg)
    assert 0 < ds.domain_exit_count < 200
    r = int(np.flatnonzero(ds.exited)[0])
    assert ds.valid[r] < len(ds.times)
    with pytest.raises(DomainExit):
        run_base_walk(cfg, replica=r)


def test_domain_exit_fraction_small_on_sphere():
    cfg = WalkConfig(manifold="sphere", alpha=0.05, horizon_t=1.0, replica_count=10_000, master_seed=1)
    ds = batch_run(cfg, final_only=True)
    assert ds.domain_exit_count / 10_000 < 0.01


def test_exponential_clock_grid_and_final():
    cfg = WalkConfig(manifold="euclidean", alpha=0.1, horizon_t=0.55, time_mode="exponential_clock",
                     replica_count=10)
    ds = batch_run(cfg)
    assert ds.times[0] == 0 and ds.times[-1] == pytest.approx(0.55)
    assert np.all(np.diff(ds.times) > 0)
    # piecewise-constant chain: some consecutive grid records coincide
    assert np.any(np.all(ds.points[:, 1:] == ds.points[:, :-1], axis=-1))


def test_euclidean_gaussian_covariance():
    n = 40_000
    cfg = WalkConfig(manifold="euclidean", alpha=0.1, horizon_t=1.0, law="gaussian", replica_count=n,
                     master_seed=8)
    x = batch_run(cfg, final_only=True).points[:, -1]
    cov = x.T @ x / n
    # Var of x_i x_j products for Gaussian displacement with covariance I: 2 (i=j) and 1 (i≠j)
    se = np.sqrt(np.array([[2.0, 1.0], [1.0, 2.0]]) / n)
    assert np.all(np.abs(cov - np.eye(2)) < 3 * se)


def test_exponential_clock_agrees_with_discrete():
    n = 20_000
    base = dict(manifold="sphere", alpha=0.05, horizon_t=0.5, replica_count=n, start=(1.0, 0.0))
    vals = []
    for mode, seed in (("discrete_rescaled", 1), ("exponential_clock", 2)):
        ds = batch_run(WalkConfig(**base, time_mode=mode, master_seed=seed), final_only=True)
        f = np.cos(ds.points[ds.completed, -1, 0])
        vals.append((f.mean(), f.std() / math.sqrt(len(f))))
    (m1, s1), (m2, s2) = vals
    assert abs(m1 - m2) < 3 * math.hypot(s1, s2)


def test_markov_step_depends_only_on_state_and_draw():
    # restarting from a recorded state with the remaining draws reproduces the tail
    cfg = WalkConfig(manifold="hyperbolic", alpha=0.1, horizon_t=0.2, law="rademacher", master_seed=3)
    p = run_base_walk(cfg)
    m = cfg.chart()
    xi = IncrementLaw("rademacher").sample(replica_rng(3, 0), cfg.step_count, 2)
    x = p.points[10]
    for k in range(10, cfg.step_count):
        v = 0.1 * coordinate_orthonormal_frame(m, x) @ xi[k]
        x = m.wrap(m.closed_form_geodesic(x, v, 1.0)[0])
    assert np.allclose(x, p.points[-1], atol=1e-13)
