"""Empirical semigroups of the walk against heat-semigroup references.

The limit process has generator ½Δ, so the reference for f at p is
(e^{tΔ/2} f)(p).  It is computed by Gauss–Hermite quadrature in flat
charts and from the eigenvalue for spherical harmonics.
"""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import TooFewReplicas, UnsupportedFunction
from .functions import TestFunction
from .walker import WalkConfig, batch_run

MIN_REPLICAS = 100
Z_THRESHOLD = 3.0
HEAT_METHODS = {"euclidean": "gaussian_exact", "torus": "wrapped_gaussian", "sphere": "harmonic_series"}


@dataclass(frozen=True)
class HeatReference:
    """``order`` is the Gauss–Hermite node count per axis for flat charts."""

    manifold: str
    method: Optional[str] = None
    order: int = 40

    def __post_init__(self):
        if self.method is None:
            if self.manifold not in HEAT_METHODS:
                raise UnsupportedFunction(f"no heat reference on {self.manifold}")
            object.__setattr__(self, "method", HEAT_METHODS[self.manifold])
        if self.method not in HEAT_METHODS.values():
            raise ValueError(f"unknown heat reference method {self.method!r}")


def heat_semigroup_reference(ref: HeatReference, f: TestFunction, p, t: float) -> float:
    """(e^{tΔ/2} f)(p)."""
    p = np.asarray(p, dtype=float)
    if t < 0:
        raise ValueError("t must be >= 0")
    if f.on_frames or (f.manifold is not None and f.manifold != ref.manifold):
        raise UnsupportedFunction(f"{f.name} has no {ref.method} reference on {ref.manifold}")
    if t == 0:
        return float(f(p))
    if ref.method == "harmonic_series":
        if f.eigenvalue is None:
            raise UnsupportedFunction(f"{f.name} is not a catalog eigenfunction on the sphere")
        return math.exp(-0.5 * f.eigenvalue * t) * float(f(p))
    # flat charts: E f(p + √t Z) with Z ~ N(0, I); periodic f needs no explicit wrapping
    z, w = np.polynomial.hermite_e.hermegauss(ref.order)
    w = w / w.sum()
    d = len(p)
    grids = np.meshgrid(*([z] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
    pts = p + math.sqrt(t) * nodes
    if ref.method == "wrapped_gaussian":
        pts = np.mod(pts, 2 * math.pi)
    return float(weights @ f(pts))


@dataclass
class SemigroupEstimate:
    value: float
    stderr: float
    used: int
    excluded: int

    def z(self, reference: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.value == reference else math.copysign(math.inf, self.value - reference)
        return (self.value - reference) / self.stderr


def _mean_se(vals: np.ndarray):
    n = len(vals)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def empirical_semigroup(cfg: WalkConfig, f: TestFunction, t: float, threads: int = 1) -> SemigroupEstimate:
    """Mean of f over replica states at time t, with its MC standard error.

    Replicas that left the chart are excluded and counted.  Frame
    functionals run the lifted walk.
    """
    if cfg.replica_count < MIN_REPLICAS:
        raise TooFewReplicas(f"need at least {MIN_REPLICAS} replicas, got {cfg.replica_count}")
    if t > cfg.horizon_t + 1e-12:
        raise ValueError(f"t={t} exceeds the configured horizon {cfg.horizon_t}")
    return semigroup_estimates(cfg, [f], t, threads)[0]


def semigroup_estimates(cfg: WalkConfig, functions: Sequence[TestFunction], t: float,
                        threads: int = 1) -> list:
    """empirical_semigroup for several functions from one batch of walks."""
    if cfg.replica_count < MIN_REPLICAS:
        raise TooFewReplicas(f"need at least {MIN_REPLICAS} replicas, got {cfg.replica_count}")
    if t == 0:
        u0 = cfg.initial_frame_point()
        return [SemigroupEstimate(float(f(u0.x, u0.frame)), 0.0, int(cfg.replica_count), 0)
                for f in functions]
    lifted = any(f.on_frames for f in functions)
    run = dataclasses.replace(cfg, horizon_t=float(t))
    ds = batch_run(run, threads=threads, lifted=lifted, final_only=True)
    ok = ds.completed
    x = ds.points[ok, -1]
    E = ds.frames[ok, -1] if lifted else None
    out = []
    for f in functions:
        mean, se = _mean_se(f(x, E))
        out.append(SemigroupEstimate(mean, se, int(ok.sum()), int((~ok).sum())))
    return out


def independent_seed(master_seed: int) -> int:
    """A master seed whose replica streams are independent of ``master_seed``'s."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(2 ** 32 + 1,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class LiftedFunctionalReport:
    function: str
    shared: bool
    lifted: SemigroupEstimate
    base: SemigroupEstimate
    max_pathwise_gap: Optional[float] = None

    @property
    def difference(self) -> float:
        return self.lifted.value - self.base.value

    @property
    def z(self) -> float:
        se = math.hypot(self.lifted.stderr, self.base.stderr)
        return self.difference / se if se > 0 else (0.0 if self.difference == 0 else math.inf)

    @property
    def passed(self) -> bool:
        if self.shared:
            return abs(self.difference) <= 1e-12 and (self.max_pathwise_gap or 0.0) <= 1e-12
        return abs(self.z) < Z_THRESHOLD


def lifted_functional_test(cfg: WalkConfig, f: TestFunction, t: float, shared: bool = True,
                           threads: int = 1) -> LiftedFunctionalReport:
    """E f̄(π Z̃_t) from the lifted walk against E f̄(Z_t) from the base walk.

    Shared randomness uses the coupled base path of the same run, so the
    two estimates must agree to rounding.  Otherwise the base walk is run
    from an independent seed and the two are compared by a z-score.
    """
    if cfg.replica_count < MIN_REPLICAS:
        raise TooFewReplicas(f"need at least {MIN_REPLICAS} replicas, got {cfg.replica_count}")
    if f.on_frames:
        raise UnsupportedFunction("the projection test needs a function on the base manifold")
    run = dataclasses.replace(cfg, horizon_t=float(t))
    ds = batch_run(run, threads=threads, lifted=True, final_only=True)
    ok = ds.completed
    lifted = SemigroupEstimate(*_mean_se(f(ds.points[ok, -1])), int(ok.sum()), int((~ok).sum()))
    if shared:
        base = SemigroupEstimate(*_mean_se(f(ds.coupled[ok, -1])), int(ok.sum()), int((~ok).sum()))
        gap = float(np.max(np.abs(ds.points[ok] - ds.coupled[ok]), initial=0.0))
        return LiftedFunctionalReport(f.name, True, lifted, base, gap)
    other = dataclasses.replace(run, master_seed=independent_seed(cfg.master_seed))
    base = empirical_semigroup(other, f, t, threads)
    return LiftedFunctionalReport(f.name, False, lifted, base)


@dataclass
class ConvergenceRow:
    function: str
    t: float
    alpha: float
    empirical: float
    stderr: float
    reference: float
    excluded: int

    @property
    def bias(self) -> float:
        return self.empirical - self.reference

    @property
    def z(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.bias == 0 else math.copysign(math.inf, self.bias)
        return self.bias / self.stderr

    @property
    def passed(self) -> bool:
        return abs(self.z) < Z_THRESHOLD


@dataclass
class ConvergenceReport:
    manifold: str
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.final_rows()) and self.trend_ok

    def final_rows(self):
        """Rows at the smallest α for each (function, t)."""
        best = {}
        for r in self.rows:
            key = (r.function, r.t)
            if key not in best or r.alpha < best[key].alpha:
                best[key] = r
        return [best[k] for k in sorted(best, key=lambda k: (k[0], k[1]))]

    @property
    def trend_ok(self) -> bool:
        """|bias| at the smallest α does not exceed that at the largest, up to 3 joint stderr."""
        groups = {}
        for r in self.rows:
            groups.setdefault((r.function, r.t), []).append(r)
        for rows in groups.values():
            rows = sorted(rows, key=lambda r: r.alpha)
            lo, hi = rows[0], rows[-1]
            if abs(lo.bias) > abs(hi.bias) + Z_THRESHOLD * math.hypot(lo.stderr, hi.stderr):
                return False
        return True

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("function,t,alpha,empirical,stderr,reference,z,excluded\n")
        for r in self.rows:
            buf.write(f"{r.function},{r.t!r},{r.alpha!r},{r.empirical!r},{r.stderr!r},"
                      f"{r.reference!r},{r.z!r},{r.excluded}\n")
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "manifold": self.manifold,
            "rows": len(self.rows),
            "final": [{"function": r.function, "t": r.t, "alpha": r.alpha, "z": r.z, "passed": r.passed}
                      for r in self.final_rows()],
            "trend_ok": self.trend_ok,
            "passed": self.passed,
        }


def alpha_trend(cfg: WalkConfig, functions: Sequence[TestFunction], t_grid: Sequence[float],
                alphas: Sequence[float], ref: Optional[HeatReference] = None,
                threads: int = 1) -> ConvergenceReport:
    """Empirical minus reference semigroup over an α sweep."""
    if len(alphas) < 3:
        raise ValueError("alpha_trend needs at least 3 alpha values")
    ref = ref or HeatReference(cfg.manifold)
    u0 = cfg.initial_frame_point()
    report = ConvergenceReport(cfg.manifold)
    for a in sorted(alphas, reverse=True):
        for t in t_grid:
            run = dataclasses.replace(cfg, alpha=float(a), horizon_t=float(t))
            ests = semigroup_estimates(run, functions, float(t), threads)
            for f, est in zip(functions, ests):
                refval = heat_semigroup_reference(ref, f, u0.x, float(t))
                report.rows.append(ConvergenceRow(f.name, float(t), float(a), est.value, est.stderr,
                                                  refval, est.excluded))
    return report
