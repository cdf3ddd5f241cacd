"""Rescaled generator L_α, the Laplace–Beltrami operator and Δ_H.

L_α f(u) = α⁻² (E f(lift of exp(α u ξ)) − f(u)) is evaluated exactly for
finite-support laws, by a deterministic circle rule for sphere_uniform in
two dimensions, and by Monte Carlo otherwise.  Δ_H is the sum of second
differences along horizontal geodesics, Δ_M the flux form by central
differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DomainExit, FitDegenerate, InsufficientSamples, OutOfDomain
from .frames import FramePoint, lift_geodesics
from .functions import TestFunction
from .increments import IncrementLaw
from .manifolds import GeodesicConfig, ManifoldChart

FD_STEP = 1e-3
NUMERICAL_FLOOR = 1e-8
MIN_MC_SAMPLES = 1000
EXCLUDED_WARNING_FRACTION = 1e-3
QUADRATURE_NODES = 64


@dataclass
class GeneratorValue:
    value: float
    stderr: float
    method: str
    samples: int
    excluded: int = 0

    @property
    def warning(self) -> bool:
        return self.samples > 0 and self.excluded / self.samples > EXCLUDED_WARNING_FRACTION


def _endpoint_values(m: ManifoldChart, f: TestFunction, u: FramePoint, xi: np.ndarray,
                     scale: float, cfg: GeodesicConfig, method: str):
    """f at the lifted endpoints for increments u ξ·scale; NaN where the lift exits."""
    n = len(xi)
    v = scale * xi @ u.frame.T
    x0 = np.broadcast_to(u.x, (n, m.dim))
    E0 = np.broadcast_to(u.frame, (n, m.dim, m.dim))
    res = lift_geodesics(m, x0, E0, v, 1.0, cfg, method)
    with np.errstate(all="ignore"):
        vals = f(res.x, res.frame)
    return np.where(res.exited, np.nan, vals), res.exited


def apply_rescaled_generator(m: ManifoldChart, f: TestFunction, u: FramePoint, alpha: float,
                             law: IncrementLaw, n: int = 10_000,
                             rng: Optional[np.random.Generator] = None,
                             cfg: GeodesicConfig = GeodesicConfig(),
                             method: str = "integrate",
                             quadrature_nodes: int = QUADRATURE_NODES) -> GeneratorValue:
    """L_α f(u) with an error bar (zero for exact finite sums).

    sphere_uniform on a surface uses the trapezoid rule on the circle with
    ``quadrature_nodes`` nodes; its error bar is the change on halving the
    node count.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    d = m.dim
    f0 = float(f(u.x, u.frame))
    atoms = law.atoms(d)
    if atoms is not None:
        pts, wts = atoms
        vals, out = _endpoint_values(m, f, u, pts, alpha, cfg, method)
        ok = ~out
        mean = float(wts[ok] @ vals[ok] / wts[ok].sum()) if ok.any() else float("nan")
        return GeneratorValue((mean - f0) / alpha ** 2, 0.0, "exact", len(pts), int(out.sum()))
    quad = law.quadrature(d, quadrature_nodes)
    if quad is not None:
        pts, wts = quad
        vals, out = _endpoint_values(m, f, u, pts, alpha, cfg, method)
        ok = ~out
        full = float(np.mean(vals[ok]))
        half = float(np.mean(vals[::2][ok[::2]]))
        return GeneratorValue((full - f0) / alpha ** 2, abs(full - half) / alpha ** 2,
                              "quadrature", len(pts), int(out.sum()))
    if n < MIN_MC_SAMPLES:
        raise InsufficientSamples(f"Monte Carlo generator needs n >= {MIN_MC_SAMPLES}")
    if rng is None:
        raise ValueError("a Monte Carlo law needs an rng")
    xi = law.sample(rng, n, d)
    vals, out = _endpoint_values(m, f, u, xi, alpha, cfg, method)
    diff = (vals[~out] - f0) / alpha ** 2
    se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else float("nan")
    return GeneratorValue(float(diff.mean()), se, "monte_carlo", n, int(out.sum()))


def base_rescaled_generator(m: ManifoldChart, f: TestFunction, p, alpha: float,
                            law: IncrementLaw, **kw) -> GeneratorValue:
    """α⁻²(E f(exp_p(α F ξ)) − f(p)) with F the coordinate orthonormal frame at p."""
    return apply_rescaled_generator(m, f, FramePoint.at(m, p), alpha, law, **kw)


# --------------------------------------------------------------------------
# Limit operators


def laplace_beltrami(m: ManifoldChart, f: TestFunction, p, fd_step: float = FD_STEP) -> float:
    """Δf = |g|^{-1/2} ∂_i(|g|^{1/2} g^{ij} ∂_j f) by nested half-step central differences."""
    p = np.asarray(p, dtype=float)
    d = m.dim
    h = fd_step
    for i in range(d):
        if m.periodic[i]:
            continue
        if p[i] - 2 * h < m.lower[i] or p[i] + 2 * h > m.upper[i]:
            raise OutOfDomain(f"{m.name}: {p} is within {2 * h} of the chart boundary")
    eye = np.eye(d)

    def flux(y, i):
        g = m.metric(y)
        ginv = np.linalg.inv(g)
        grad = np.array([(float(f(y + 0.5 * h * eye[j])) - float(f(y - 0.5 * h * eye[j]))) / h
                         for j in range(d)])
        return math.sqrt(np.linalg.det(g)) * float(ginv[i] @ grad)

    total = sum((flux(p + 0.5 * h * eye[i], i) - flux(p - 0.5 * h * eye[i], i)) / h for i in range(d))
    return total / math.sqrt(np.linalg.det(m.metric(p)))


def _second_differences(m, f, u, delta, cfg, method):
    d = m.dim
    dirs = np.concatenate([u.frame.T, -u.frame.T]) * delta
    x0 = np.broadcast_to(u.x, (2 * d, d))
    E0 = np.broadcast_to(u.frame, (2 * d, d, d))
    res = lift_geodesics(m, x0, E0, dirs, 1.0, cfg, method)
    if np.any(res.exited):
        raise DomainExit(f"{m.name}: horizontal stencil at {u.x} leaves the chart")
    vals = f(res.x, res.frame)
    f0 = float(f(u.x, u.frame))
    return float(np.sum(vals[:d] + vals[d:] - 2 * f0)) / delta ** 2


def horizontal_laplacian(m: ManifoldChart, f: TestFunction, u: FramePoint, fd_step: float = FD_STEP,
                         cfg: GeodesicConfig = GeodesicConfig(), method: str = "integrate",
                         richardson: bool = False) -> float:
    """Δ_H f(u) = Σ_i H_i² f(u) via second differences along h_i(s) = lift of exp(s u e_i).

    With ``richardson`` the O(δ²) term is cancelled using steps δ and δ/2.
    """
    coarse = _second_differences(m, f, u, fd_step, cfg, method)
    if not richardson:
        return coarse
    fine = _second_differences(m, f, u, 0.5 * fd_step, cfg, method)
    return (4.0 * fine - coarse) / 3.0


# --------------------------------------------------------------------------
# Operator identity


@dataclass
class IdentityReport:
    function: str
    manifold: str
    base_points: np.ndarray
    delta_h: np.ndarray
    delta_m: np.ndarray
    group: np.ndarray
    tol: float
    analytic: Optional[np.ndarray] = None

    @property
    def errors(self) -> np.ndarray:
        return np.abs(self.delta_h - self.delta_m)

    @property
    def worst(self) -> int:
        return int(np.argmax(self.errors))

    @property
    def max_error(self) -> float:
        return float(self.errors.max())

    @property
    def frame_spread(self) -> float:
        """Largest spread of Δ_H over frames sharing a base point."""
        spread = 0.0
        for g in np.unique(self.group):
            vals = self.delta_h[self.group == g]
            spread = max(spread, float(vals.max() - vals.min()))
        return spread

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol and self.frame_spread <= self.tol

    def summary(self) -> dict:
        w = self.worst
        return {
            "function": self.function,
            "manifold": self.manifold,
            "frames": int(len(self.delta_h)),
            "max_error": self.max_error,
            "frame_spread": self.frame_spread,
            "worst_point": self.base_points[w].tolist(),
            "worst_delta_h": float(self.delta_h[w]),
            "worst_delta_m": float(self.delta_m[w]),
            "tol": self.tol,
            "passed": self.passed,
        }


def check_identity(m: ManifoldChart, f: TestFunction, frames: Sequence[FramePoint], tol: float = 1e-4,
                   fd_step: float = FD_STEP, cfg: GeodesicConfig = GeodesicConfig(),
                   method: str = "integrate") -> IdentityReport:
    """Compare Δ_H(f̄∘π)(u) with Δ_M f̄(π(u)) frame by frame.

    Frames over the same base point (exactly equal coordinates) form a
    group; the spread of Δ_H within each group tests frame independence.
    """
    xs = np.array([u.x for u in frames])
    dh = np.array([horizontal_laplacian(m, f, u, fd_step, cfg, method) for u in frames])
    keys, group = np.unique(xs, axis=0, return_inverse=True)
    dm_unique = np.array([laplace_beltrami(m, f, x, fd_step) for x in keys])
    dm = dm_unique[group.ravel()]
    analytic = f.exact_laplacian(xs) if f.laplacian is not None else None
    return IdentityReport(f.name, m.name, xs, dh, dm, group.ravel(), tol, analytic)


# --------------------------------------------------------------------------
# Convergence rate


@dataclass
class GeneratorReport:
    function: str
    manifold: str
    law: str
    alphas: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    reference: float
    errors: np.ndarray
    floor: float = NUMERICAL_FLOOR
    slope: Optional[float] = None
    intercept: Optional[float] = None
    slope_ci: Optional[tuple] = None
    fitted: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    status: str = "fitted"

    @property
    def relative_errors(self) -> np.ndarray:
        return self.errors / max(abs(self.reference), 1e-300)

    @property
    def monotone(self) -> bool:
        """e(α) nonincreasing as α decreases, up to the numerical floor."""
        order = np.argsort(-self.alphas)
        e = self.errors[order]
        return bool(np.all(np.diff(e) <= self.floor))

    def table(self):
        return [(float(a), float(e), float(s)) for a, e, s in zip(self.alphas, self.errors, self.stderrs)]

    def summary(self) -> dict:
        return {
            "function": self.function,
            "manifold": self.manifold,
            "law": self.law,
            "alphas": self.alphas.tolist(),
            "generator_values": self.values.tolist(),
            "half_laplacian": self.reference,
            "errors": self.errors.tolist(),
            "stderrs": self.stderrs.tolist(),
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_ci95": list(self.slope_ci) if self.slope_ci is not None else None,
            "monotone": self.monotone,
            "status": self.status,
        }


def fit_loglog(alphas, errors):
    """Least-squares slope of log e against log α with a 95% interval."""
    la, le = np.log(alphas), np.log(errors)
    res = stats.linregress(la, le)
    k = len(la)
    if k > 2:
        q = stats.t.ppf(0.975, k - 2)
        ci = (res.slope - q * res.stderr, res.slope + q * res.stderr)
    else:
        ci = (float("nan"), float("nan"))
    return float(res.slope), float(res.intercept), (float(ci[0]), float(ci[1]))


def convergence_slope(m: ManifoldChart, f: TestFunction, u: FramePoint, alphas: Sequence[float],
                      law: IncrementLaw, n: int = 10_000, rng: Optional[np.random.Generator] = None,
                      cfg: GeodesicConfig = GeodesicConfig(), method: str = "integrate",
                      floor: float = NUMERICAL_FLOOR) -> GeneratorReport:
    """e(α) = |L_α f(u) − ½Δ_H f(u)| over an α sweep and its log-log slope.

    ½Δ_H is computed with Richardson extrapolation so the reference error
    sits far below e(α).  Only errors above ``floor`` enter the fit; if none
    do, FitDegenerate is raised with the report attached (``err.report``).
    """
    alphas = np.asarray(sorted(alphas, reverse=True), dtype=float)
    if len(alphas) < 4:
        raise ValueError("the slope fit needs at least 4 alpha values")
    half_lap = 0.5 * horizontal_laplacian(m, f, u, FD_STEP, cfg, method, richardson=True)
    vals, ses = [], []
    for a in alphas:
        gv = apply_rescaled_generator(m, f, u, float(a), law, n, rng, cfg, method)
        vals.append(gv.value)
        ses.append(gv.stderr)
    vals, ses = np.array(vals), np.array(ses)
    errs = np.abs(vals - half_lap)
    fitted = errs > floor
    rep = GeneratorReport(f.name, m.name, law.kind, alphas, vals, ses, half_lap, errs, floor,
                          fitted=fitted)
    if not fitted.any():
        rep.status = "already converged"
        err = FitDegenerate(f"{f.name} on {m.name}: every error is below {floor:g}; already converged")
        err.report = rep
        raise err
    if fitted.sum() < 2:
        rep.status = "partially converged"
        return rep
    rep.slope, rep.intercept, rep.slope_ci = fit_loglog(alphas[fitted], errs[fitted])
    rep.status = "fitted" if fitted.all() else "partially converged"
    return rep


def slope_or_converged(*args, **kw) -> GeneratorReport:
    """convergence_slope, returning the 'already converged' report instead of raising."""
    try:
        return convergence_slope(*args, **kw)
    except FitDegenerate as err:
        return err.report
