import math

import numpy as np
import pytest
import sympy as sp
from scipy import integrate

from horizon_walk.errors import DomainExit, FitDegenerate, InsufficientSamples, OutOfDomain
from horizon_walk.frames import FramePoint, random_frame
from horizon_walk.functions import CATALOG, TestFunction, catalog, constant, frame_entry, get_function
from horizon_walk.generator import (
    apply_rescaled_generator,
    base_rescaled_generator,
    check_identity,
    convergence_slope,
    fit_loglog,
    horizontal_laplacian,
    laplace_beltrami,
    slope_or_converged,
)
from horizon_walk.increments import IncrementLaw
from horizon_walk.manifolds import get_manifold, sample_region

a, b = sp.symbols("a b", positive=True)
SYMBOLIC = {
    "euclidean": (sp.eye(2), {"x1^2": a ** 2, "x1*x2": a * b, "sin(x1)": sp.sin(a)}),
    "torus": (sp.eye(2), {"cos(x1)": sp.cos(a), "cos(x1)cos(x2)": sp.cos(a) * sp.cos(b)}),
    "sphere": (sp.diag(1, sp.sin(a) ** 2),
               {"cos(theta)": sp.cos(a), "sin^2(theta)cos(2phi)": sp.sin(a) ** 2 * sp.cos(2 * b)}),
    "hyperbolic": (sp.diag(1 / b ** 2, 1 / b ** 2), {"log(y)": sp.log(b), "y": b}),
}


def _symbolic_laplacian(g, f):
    ginv, root = g.inv(), sp.sqrt(g.det())
    xs = (a, b)
    return sp.simplify(sum(sp.diff(root * ginv[i, j] * sp.diff(f, xs[j]), xs[i])
                           for i in range(2) for j in range(2)) / root)


@pytest.mark.parametrize("name", list(SYMBOLIC))
def test_laplacian_matches_symbolic_oracle(name, rng):
    m = get_manifold(name)
    g, fns = SYMBOLIC[name]
    assert set(fns) == {f.name for f in catalog(name)}
    for fname, expr in fns.items():
        oracle = sp.lambdify((a, b), _symbolic_laplacian(g, expr), "numpy")
        f = get_function(name, fname)
        for x in sample_region(m, rng, 5):
            exact = float(oracle(*x))
            assert f.exact_laplacian(x) == pytest.approx(exact, abs=1e-12)
            fd = laplace_beltrami(m, f, x)
            assert abs(fd - exact) <= 1e-5 * max(1.0, abs(exact))


def test_laplace_beltrami_examples():
    assert laplace_beltrami(get_manifold("euclidean"), get_function("euclidean", "x1^2"), [0.3, 0.2]) \
        == pytest.approx(2.0, abs=1e-8)
    th = 1.1
    assert laplace_beltrami(get_manifold("sphere"), get_function("sphere", "cos(theta)"), [th, 0.0]) \
        == pytest.approx(-2 * math.cos(th), abs=1e-6)
    assert laplace_beltrami(get_manifold("hyperbolic"), get_function("hyperbolic", "log(y)"), [0.0, 1.3]) \
        == pytest.approx(-1.0, abs=1e-6)


def test_laplace_beltrami_near_boundary():
    m = get_manifold("sphere")
    with pytest.raises(OutOfDomain):
        laplace_beltrami(m, get_function("sphere", "cos(theta)"), [m.lower[0] + 1e-3, 0.0])


def test_constants_are_annihilated(chart, rng):
    u = random_frame(chart, sample_region(chart, rng, 1)[0], rng)
    for kind in ("rademacher", "sphere_uniform", "skewed"):
        assert apply_rescaled_generator(chart, constant(3.0), u, 0.1, IncrementLaw(kind)).value == 0.0
    gv = apply_rescaled_generator(chart, constant(), u, 0.1, IncrementLaw("gaussian"), 1000, rng)
    assert gv.value == 0.0 and gv.stderr == 0.0


def test_flat_quadratic_exact_for_all_alpha(rng):
    m = get_manifold("euclidean")
    u = random_frame(m, [0.4, -0.3], rng)
    f = get_function("euclidean", "x1^2")
    for alpha in (0.5, 0.1, 0.01):
        gv = apply_rescaled_generator(m, f, u, alpha, IncrementLaw("rademacher"))
        assert gv.value == pytest.approx(1.0, abs=1e-10)
        assert gv.stderr == 0.0 and gv.method == "exact"


@pytest.mark.parametrize("kind", ["rademacher", "sphere_uniform"])
def test_sphere_zonal_generator_closed_form(kind, rng):
    # along every unit-speed great circle cos θ(s) = cos θ₀ cos s + (odd in direction)·sin s
    m = get_manifold("sphere")
    th = 1.2
    u = random_frame(m, [th, 0.5], rng)
    f = get_function("sphere", "cos(theta)")
    for alpha in (0.2, 0.05):
        exact = (math.cos(alpha * math.sqrt(2)) - 1) / alpha ** 2 * math.cos(th)
        gv = apply_rescaled_generator(m, f, u, alpha, IncrementLaw(kind))
        assert gv.value == pytest.approx(exact, abs=1e-9)


def test_gaussian_generator_monte_carlo(rng):
    m = get_manifold("sphere")
    th, alpha = 1.0, 0.2
    u = FramePoint.at(m, [th, 0.0])
    ecos, _ = integrate.quad(lambda r: math.cos(alpha * r) * r * math.exp(-r * r / 2), 0, np.inf)
    exact = (ecos - 1) / alpha ** 2 * math.cos(th)
    gv = apply_rescaled_generator(m, get_function("sphere", "cos(theta)"), u, alpha,
                                  IncrementLaw("gaussian"), 20_000, rng)
    assert gv.method == "monte_carlo"
    assert abs(gv.value - exact) < 4 * gv.stderr
    with pytest.raises(InsufficientSamples):
        apply_rescaled_generator(m, constant(), u, alpha, IncrementLaw("gaussian"), 10, rng)


def test_linearity_exact_for_rademacher(rng):
    m = get_manifold("hyperbolic")
    u = random_frame(m, [0.2, 1.4], rng)
    f, g = get_function("hyperbolic", "log(y)"), get_function("hyperbolic", "y")
    combo = TestFunction("combo", "hyperbolic", lambda x, E: 2.0 * f(x) - 3.0 * g(x))
    law = IncrementLaw("rademacher")
    lhs = apply_rescaled_generator(m, combo, u, 0.1, law).value
    rhs = 2.0 * apply_rescaled_generator(m, f, u, 0.1, law).value - 3.0 * apply_rescaled_generator(m, g, u, 0.1, law).value
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_projection_compatibility(rng):
    m = get_manifold("sphere")
    p = np.array([1.0, 0.3])
    f = get_function("sphere", "sin^2(theta)cos(2phi)")
    law = IncrementLaw("sphere_uniform")
    base = base_rescaled_generator(m, f, p, 0.1, law)
    lifted = apply_rescaled_generator(m, f, random_frame(m, p, rng), 0.1, law)
    assert lifted.value == pytest.approx(base.value, abs=max(1e-9, 10 * base.stderr))


def test_horizontal_laplacian_examples(rng):
    e = get_manifold("euclidean")
    u = random_frame(e, [0.5, 0.5], rng)
    assert horizontal_laplacian(e, get_function("euclidean", "x1^2"), u) == pytest.approx(2.0, abs=1e-6)
    assert horizontal_laplacian(e, frame_entry(0, 1), u) == pytest.approx(0.0, abs=1e-9)
    s = get_manifold("sphere")
    f = get_function("sphere", "cos(theta)")
    for x in sample_region(s, rng, 50):
        v = horizontal_laplacian(s, f, random_frame(s, x, rng))
        assert v == pytest.approx(-2 * math.cos(x[0]), abs=1e-4)


def test_horizontal_laplacian_richardson_is_sharper(rng):
    m = get_manifold("torus")
    f = get_function("torus", "cos(x1)cos(x2)")
    u = random_frame(m, [0.3, 1.1], rng)
    exact = float(f.exact_laplacian(u.x))
    plain = horizontal_laplacian(m, f, u, 1e-2)
    rich = horizontal_laplacian(m, f, u, 1e-2, richardson=True)
    assert abs(rich - exact) < abs(plain - exact) / 100


def test_horizontal_laplacian_near_boundary():
    m = get_manifold("sphere", sphere_eps=0.3)
    u = FramePoint.at(m, [0.3005, 0.0])
    with pytest.raises(DomainExit):
        horizontal_laplacian(m, get_function("sphere", "cos(theta)"), u)


def test_check_identity_and_frame_independence(chart, rng):
    xs = sample_region(chart, rng, 4)
    frames = [random_frame(chart, x, rng) for x in xs for _ in range(3)]
    for f in catalog(chart.name):
        rep = check_identity(chart, f, frames)
        assert rep.passed, rep.summary()
        assert len(np.unique(rep.group)) == 4


def test_check_identity_reports_failure(rng):
    m = get_manifold("euclidean")
    frames = [random_frame(m, [0.1, 0.2], rng)]
    rep = check_identity(m, get_function("euclidean", "sin(x1)"), frames, tol=1e-12)
    assert not rep.passed and rep.summary()["worst_point"] == [0.1, 0.2]


def test_slope_quadratic_flat_already_converged(rng):
    m = get_manifold("euclidean")
    u = random_frame(m, [0.2, 0.1], rng)
    with pytest.raises(FitDegenerate) as err:
        convergence_slope(m, get_function("euclidean", "x1*x2"), u, [0.2, 0.1, 0.05, 0.025],
                          IncrementLaw("rademacher"))
    assert err.value.report.status == "already converged"


def test_slope_symmetric_law_is_two(rng):
    m = get_manifold("sphere")
    u = random_frame(m, [1.0, 0.0], rng)
    rep = convergence_slope(m, get_function("sphere", "cos(theta)"), u, [0.2, 0.1, 0.05, 0.025],
                            IncrementLaw("sphere_uniform"))
    assert rep.status == "fitted" and rep.monotone
    assert rep.slope == pytest.approx(2.0, abs=0.05)
    lo, hi = rep.slope_ci
    assert lo <= rep.slope <= hi


def test_slope_skewed_law_is_first_order():
    # the O(α) coefficient depends on the frame; in the coordinate frame it dominates
    m = get_manifold("sphere")
    u = FramePoint.at(m, [1.0, 0.0])
    rep = convergence_slope(m, get_function("sphere", "cos(theta)"), u, [0.2, 0.1, 0.05, 0.025],
                            IncrementLaw("skewed"))
    assert 0.9 <= rep.slope <= 1.5


def test_slope_needs_four_alphas(rng):
    m = get_manifold("sphere")
    with pytest.raises(ValueError):
        convergence_slope(m, get_function("sphere", "cos(theta)"), FramePoint.at(m, [1.0, 0.0]),
                          [0.1, 0.05], IncrementLaw("rademacher"))


def test_slope_or_converged_returns_report(rng):
    m = get_manifold("euclidean")
    rep = slope_or_converged(m, get_function("euclidean", "x1^2"), FramePoint.at(m, [0.0, 0.0]),
                             [0.2, 0.1, 0.05, 0.025], IncrementLaw("rademacher"))
    assert rep.status == "already converged" and rep.slope is None


def test_fit_loglog_recovers_power():
    al = np.array([0.2, 0.1, 0.05, 0.025])
    slope, intercept, ci = fit_loglog(al, 3.0 * al ** 1.5)
    assert slope == pytest.approx(1.5) and intercept == pytest.approx(math.log(3.0))
    assert ci[0] == pytest.approx(1.5) and ci[1] == pytest.approx(1.5)


def test_catalog_lookup():
    assert len(CATALOG["euclidean"]) == 3
    with pytest.raises(Exception):
        get_function("sphere", "x1^2")
    with pytest.raises(ValueError):
        catalog("klein")
