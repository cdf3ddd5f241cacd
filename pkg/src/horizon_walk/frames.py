"""The orthonormal frame bundle O(M) over a chart.

A frame point is a base point x together with a d×d matrix whose column i
holds the chart components of the i-th frame vector.  Tangent vectors to
O(M) are stored as a pair (dx, dE) in the same coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import ortho_group

from .errors import DomainExit, OrthonormalityDrift, SingularFrame
from .manifolds import (
    GeodesicConfig,
    ManifoldChart,
    coordinate_orthonormal_frame,
    frame_gram_deviation,
    g_norm,
    g_orthonormalize,
    geodesic_distance,
    integrate_flow,
)

DRIFT_LIMIT = 1e-6


@dataclass(frozen=True, eq=False)
class FramePoint:
    x: np.ndarray
    frame: np.ndarray

    @classmethod
    def at(cls, m: ManifoldChart, x, frame=None, tol: float = 1e-9) -> "FramePoint":
        """Validated frame point; defaults to the coordinate orthonormal frame."""
        x = m.require(x).astype(float)
        if frame is None:
            frame = coordinate_orthonormal_frame(m, x)
        frame = np.asarray(frame, dtype=float)
        if frame.shape != (m.dim, m.dim):
            raise ValueError(f"frame must be {m.dim}x{m.dim}, got {frame.shape}")
        if abs(np.linalg.det(frame)) == 0:
            raise SingularFrame("frame matrix is singular")
        dev = frame_gram_deviation(m, x, frame)
        if dev > tol:
            raise ValueError(f"frame is not g-orthonormal (deviation {dev:.3g})")
        return cls(x, frame)

    def as_row(self) -> np.ndarray:
        """Base coordinates followed by the frame in column-major order."""
        return np.concatenate([self.x, self.frame.ravel(order="F")])

    @classmethod
    def from_row(cls, row, d: int) -> "FramePoint":
        row = np.asarray(row, dtype=float)
        return cls(row[:d].copy(), row[d:].reshape((d, d), order="F"))


@dataclass(frozen=True, eq=False)
class FrameTangent:
    base: FramePoint
    base_components: np.ndarray
    frame_components: np.ndarray

    def __add__(self, other: "FrameTangent") -> "FrameTangent":
        return FrameTangent(self.base, self.base_components + other.base_components,
                            self.frame_components + other.frame_components)

    def __mul__(self, c: float) -> "FrameTangent":
        return FrameTangent(self.base, c * self.base_components, c * self.frame_components)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SasakiMokConfig:
    """O(d)-invariant inner product ⟨A, B⟩ = scale · trace(AᵀB) on 𝔬(d)."""

    scale: float = 0.5

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("fiber inner product scale must be positive")

    def inner(self, A, B) -> float:
        return float(self.scale * np.trace(np.asarray(A).T @ np.asarray(B)))


def random_frame(m: ManifoldChart, x, rng: np.random.Generator) -> FramePoint:
    """Coordinate frame at x composed with a Haar-random element of O(d)."""
    Q = ortho_group.rvs(m.dim, random_state=rng)
    base = coordinate_orthonormal_frame(m, x)
    return FramePoint(np.asarray(x, dtype=float), base @ Q)


def _inverse(frame: np.ndarray) -> np.ndarray:
    if abs(np.linalg.det(frame)) < 1e-300:
        raise SingularFrame("frame matrix is singular")
    return np.linalg.inv(frame)


def horizontal_vector_field(m: ManifoldChart, u: FramePoint, i: int) -> FrameTangent:
    """H_i(u): base part ue_i, frame part −(ue_i)^j (ue_l)^k Γ^m_{jk}."""
    E = u.frame
    G = m.christoffel_fn(u.x[None])[0]
    ei = E[:, i]
    dE = -np.einsum("mjk,j,kl->ml", G, ei, E)
    return FrameTangent(u, ei.copy(), dE)


def vertical_vector_field(u: FramePoint, A) -> FrameTangent:
    """Vertical tangent generated by an antisymmetric A: frame part u·A."""
    A = np.asarray(A, dtype=float)
    if not np.allclose(A, -A.T):
        raise ValueError("vertical generator must be antisymmetric")
    return FrameTangent(u, np.zeros(len(u.x)), u.frame @ A)


def lift_tangent(m: ManifoldChart, u: FramePoint, v) -> FrameTangent:
    """Horizontal lift Σ_i (u⁻¹v)^i H_i(u) of v ∈ T_{π(u)}M."""
    c = _inverse(u.frame) @ np.asarray(v, dtype=float)
    G = m.christoffel_fn(u.x[None])[0]
    base = u.frame @ c
    dE = -np.einsum("mjk,j,kl->ml", G, base, u.frame)
    return FrameTangent(u, base, dE)


def canonical_form(m: ManifoldChart, u: FramePoint, xi: FrameTangent) -> np.ndarray:
    """θ_u(ξ) = u⁻¹ dπ(ξ)."""
    return _inverse(u.frame) @ xi.base_components


def connection_form(m: ManifoldChart, u: FramePoint, xi: FrameTangent) -> np.ndarray:
    """ω_u(ξ)^j_i = (u⁻¹)^j_k (Γ^k_{lm} (ue_i)^l dx^m + d(ue_i)^k); zero iff ξ horizontal."""
    G = m.christoffel_fn(u.x[None])[0]
    inner = np.einsum("klm,li,m->ki", G, u.frame, xi.base_components) + xi.frame_components
    return _inverse(u.frame) @ inner


def sasaki_mok_norm(m: ManifoldChart, u: FramePoint, xi: FrameTangent,
                    cfg: SasakiMokConfig = SasakiMokConfig()) -> float:
    base = float(g_norm(m, u.x, xi.base_components))
    w = connection_form(m, u, xi)
    return math.sqrt(base * base + cfg.inner(w, w))


# --------------------------------------------------------------------------
# Horizontal lifts of geodesics


@dataclass
class LiftResult:
    """Batched endpoint of horizontally lifted geodesics."""

    x: np.ndarray
    v: np.ndarray
    frame: np.ndarray
    drift: np.ndarray
    exited: np.ndarray


def lift_geodesics(m: ManifoldChart, x, frame, v, t: float = 1.0,
                   cfg: GeodesicConfig = GeodesicConfig(), method: str = "integrate",
                   reproject: bool = True) -> LiftResult:
    """Move frame points along the geodesics with initial velocity ``v``.

    ``drift`` is the orthonormality defect before re-projection.  Items that
    leave the chart are flagged in ``exited`` (their values are meaningless).
    """
    x = np.asarray(x, dtype=float)
    frame = np.asarray(frame, dtype=float)
    v = np.asarray(v, dtype=float)
    if t < 0:
        v, t = -v, -t
    if method == "auto":
        method = "closed_form" if m.has_closed_form else "integrate"
    if method == "closed_form":
        xn, vn = m.closed_form_geodesic(x, v, t)
        En = m.closed_form_transport(x, v, t, frame)
        exited = ~m.contains(xn)
    elif method == "integrate":
        res = integrate_flow(m, x, v, t, cfg, frame0=frame)
        xn, vn, En, exited = res.x, res.v, res.frame, res.exited
    else:
        raise ValueError(f"unknown lift method {method!r}")
    xn = m.wrap(xn)
    with np.errstate(all="ignore"):
        safe_x = np.where(exited[..., None], x, xn)
        drift = np.where(exited, np.nan, frame_gram_deviation(m, safe_x, En))
        if reproject and not np.all(exited):
            ok = ~exited
            En = En.copy()
            En[ok] = g_orthonormalize(m, xn[ok], En[ok])
    return LiftResult(xn, vn, En, drift, exited)


def horizontal_lift_path(m: ManifoldChart, u0: FramePoint, v, t: float,
                         cfg: GeodesicConfig = GeodesicConfig(),
                         method: str = "integrate") -> FramePoint:
    """Endpoint of the horizontal lift through u0 of the geodesic t ↦ exp(t v)."""
    res = lift_geodesics(m, u0.x, u0.frame, v, t, cfg, method)
    if res.exited:
        raise DomainExit(f"{m.name}: lifted geodesic left the chart")
    if res.drift > DRIFT_LIMIT:
        raise OrthonormalityDrift(f"frame drift {float(res.drift):.3g} exceeds {DRIFT_LIMIT}")
    return FramePoint(res.x, res.frame)


def parallel_transport(m: ManifoldChart, p, v, t: float, w,
                       cfg: GeodesicConfig = GeodesicConfig(), method: str = "integrate") -> np.ndarray:
    """τ w = γ̃(t) γ̃(0)⁻¹ w along γ(s) = exp_p(s v), starting from the coordinate frame."""
    u0 = FramePoint.at(m, p)
    u1 = horizontal_lift_path(m, u0, v, t, cfg, method)
    return u1.frame @ (_inverse(u0.frame) @ np.asarray(w, dtype=float))


# --------------------------------------------------------------------------
# Holonomy of piecewise-geodesic loops (d = 2)


@dataclass
class HolonomyResult:
    angle: float
    expected: float
    closure_error: float
    max_drift: float
    start: FramePoint
    end: FramePoint

    @property
    def error(self) -> float:
        return abs(self.angle - self.expected)


def rotate_tangent(m: ManifoldChart, x, w, angle: float) -> np.ndarray:
    """Rotate w ∈ T_xM counter-clockwise (chart orientation) by ``angle``."""
    F = coordinate_orthonormal_frame(m, x)
    c = np.linalg.solve(F, np.asarray(w, dtype=float))
    ca, sa = math.cos(angle), math.sin(angle)
    return F @ np.array([ca * c[0] - sa * c[1], sa * c[0] + ca * c[1]])


def frame_rotation_angle(m: ManifoldChart, a: FramePoint, b: FramePoint) -> float:
    """Angle of the rotation taking frame a to frame b (same base point, d = 2)."""
    M = a.frame.T @ m.metric(a.x) @ b.frame
    return math.atan2(M[1, 0], M[0, 0])


def turtle_loop_holonomy(m: ManifoldChart, start, heading, lengths: Sequence[float],
                         turns: Sequence[float], cfg: GeodesicConfig = GeodesicConfig(),
                         method: str = "integrate") -> HolonomyResult:
    """Carry a frame around a geodesic polygon drawn turtle-style.

    Each segment is a unit-speed geodesic of the given length; afterwards
    the velocity (never the frame) is turned left by the matching angle.
    For a simple counter-clockwise loop the expected holonomy is
    2π − Σ turns, i.e. the enclosed total curvature.
    """
    if m.dim != 2:
        raise ValueError("holonomy loops are implemented for surfaces only")
    if len(lengths) != len(turns):
        raise ValueError("need one turn per segment")
    u0 = FramePoint.at(m, start)
    v = np.asarray(heading, dtype=float)
    v = v / float(g_norm(m, u0.x, v))
    x, E = u0.x, u0.frame
    max_drift = 0.0
    for L, turn in zip(lengths, turns):
        res = lift_geodesics(m, x, E, v, L, cfg, method)
        if res.exited:
            raise DomainExit(f"{m.name}: holonomy loop left the chart")
        max_drift = max(max_drift, float(res.drift))
        x, E = res.x, res.frame
        v = rotate_tangent(m, x, res.v, turn)
    end = FramePoint(x, E)
    closure = float(geodesic_distance(m, u0.x, x))
    back = FramePoint(u0.x, E)
    angle = frame_rotation_angle(m, u0, back)
    expected = math.remainder(2 * math.pi - float(np.sum(turns)), 2 * math.pi)
    return HolonomyResult(angle, expected, closure, max_drift, u0, end)


def sphere_octant_loop(m: ManifoldChart):
    """Start point, heading, lengths and turns of a geodesic octant triangle.

    The octant with vertices R e1, R e2, R e3 is rotated so that its centroid
    sits on the equator, keeping the loop well away from the chart's poles.
    """
    n = np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)
    target = np.array([1.0, 0.0, 0.0])
    axis = np.cross(n, target)
    s, c = np.linalg.norm(axis), float(n @ target)
    k = axis / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    R = np.eye(3) + s * K + (1 - c) * K @ K
    A, B = R[:, 0], R[:, 1]
    theta = math.atan2(math.hypot(A[0], A[1]), A[2])
    phi = math.atan2(A[1], A[0]) % (2 * math.pi)
    e_th = np.array([math.cos(theta) * math.cos(phi), math.cos(theta) * math.sin(phi), -math.sin(theta)])
    e_ph = np.array([-math.sin(phi), math.cos(phi), 0.0])
    heading = np.array([B @ e_th, (B @ e_ph) / math.sin(theta)])
    quarter = math.pi / 2
    return np.array([theta, phi]), heading, [quarter] * 3, [quarter] * 3


def standard_loop(m: ManifoldChart):
    """A closed turtle loop with known enclosed curvature for each catalog chart."""
    if m.name == "sphere":
        return sphere_octant_loop(m)
    if m.name in ("euclidean", "torus"):
        start = np.array([0.5, 0.5]) if m.name == "torus" else np.zeros(2)
        return start, np.array([1.0, 0.0]), [1.0] * 4, [math.pi / 2] * 4
    if m.name == "hyperbolic":
        # regular triangle with interior angle π/4: cosh a = (cos β + cos²β) / sin²β
        beta = math.pi / 4
        a = math.acosh((math.cos(beta) + math.cos(beta) ** 2) / math.sin(beta) ** 2)
        return np.array([0.0, 1.0]), np.array([1.0, 0.0]), [a] * 3, [math.pi - beta] * 3
    raise ValueError(f"no standard loop for {m.name}")
