"""Coordinate charts for the catalog manifolds.

Every function here is batched: a point is an array of shape ``(..., d)``,
a tangent vector has the same shape, and a frame (or any collection of
``m`` tangent vectors stored column-wise) has shape ``(..., d, m)``.
Christoffel arrays are indexed ``G[..., k, i, j]`` for Γ^k_{ij}.

The geodesic flow is integrated by classical RK4 on the first-order
system (x, ẋ), optionally carrying a frame along by the parallel
transport equation.  Catalog charts also ship closed-form geodesics and
transport; walks use those, tests compare them against the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DomainExit,
    GeodesicTooLong,
    NumericalDegeneracy,
    OutOfDomain,
    StepTooLarge,
)

TWO_PI = 2.0 * math.pi

__all__ = [
    "ManifoldChart",
    "GeodesicConfig",
    "FlowResult",
    "MANIFOLD_NAMES",
    "get_manifold",
    "christoffel",
    "christoffel_fd",
    "exp_map",
    "geodesic_with_tangent",
    "integrate_flow",
    "coordinate_orthonormal_frame",
    "g_orthonormalize",
    "frame_gram_deviation",
    "geodesic_distance",
    "g_inner",
    "g_norm",
]


@dataclass(frozen=True)
class GeodesicConfig:
    """Discretisation of the geodesic flow.

    ``h`` is the largest arclength covered by one RK4 step; a geodesic of
    length L is integrated with ``ceil(L / h)`` equal steps.
    """

    h: float = 1e-3
    max_arclength: float = 20.0
    max_step: float = 0.1
    method: str = "rk4"

    def __post_init__(self):
        if not self.h > 0:
            raise StepTooLarge(f"integrator step must be positive, got {self.h}")
        if self.h > self.max_step:
            raise StepTooLarge(f"integrator step {self.h} exceeds policy limit {self.max_step}")
        if not self.max_arclength > 0:
            raise ValueError("max_arclength must be positive")
        if self.method != "rk4":
            raise ValueError(f"unknown integrator method {self.method!r}")

    @classmethod
    def for_alpha(cls, alpha: float, **kw) -> "GeodesicConfig":
        return cls(h=min(1e-3, alpha / 50.0), **kw)


@dataclass(frozen=True, eq=False)
class ManifoldChart:
    """A single global chart with metric, Christoffel symbols and domain box.

    Periodic coordinates carry infinite bounds during integration and are
    wrapped into ``[0, 2π)`` by :meth:`wrap`.
    """

    name: str
    dim: int
    metric_fn: Callable[[np.ndarray], np.ndarray]
    christoffel_fn: Optional[Callable[[np.ndarray], np.ndarray]]
    lower: np.ndarray
    upper: np.ndarray
    periodic: tuple
    closed_form_geodesic: Optional[Callable] = None
    closed_form_transport: Optional[Callable] = None
    distance_fn: Optional[Callable] = None
    default_start: Optional[np.ndarray] = None
    experiment_region: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    @property
    def has_closed_form(self) -> bool:
        return self.closed_form_geodesic is not None

    def metric(self, x) -> np.ndarray:
        return self.metric_fn(np.asarray(x, dtype=float))

    def inverse_metric(self, x) -> np.ndarray:
        g = self.metric(x)
        _check_invertible(g)
        return np.linalg.inv(g)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.all((x >= self.lower) & (x <= self.upper), axis=-1)
        return ok & np.all(np.isfinite(x), axis=-1)

    def require(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"{self.name}: expected {self.dim} coordinates, got shape {x.shape}")
        if not np.all(self.contains(x)):
            raise OutOfDomain(f"{self.name}: point outside chart domain: {x}")
        return x

    def wrap(self, x) -> np.ndarray:
        if not any(self.periodic):
            return x
        x = np.array(x, dtype=float, copy=True)
        for i, per in enumerate(self.periodic):
            if per:
                xi = np.mod(x[..., i], TWO_PI)
                x[..., i] = np.where(xi >= TWO_PI, 0.0, xi)
        return x


def _check_invertible(g: np.ndarray) -> None:
    if g.shape[-1] == 2:
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    else:
        det = np.linalg.det(g)
    if not np.all(np.isfinite(g)) or np.any(det <= 0):
        raise NumericalDegeneracy("metric is not positive definite")
    if g.shape[-1] == 2:
        # eigenvalues of a symmetric 2x2 matrix from its trace and determinant
        half_tr = 0.5 * (g[..., 0, 0] + g[..., 1, 1])
        disc = np.sqrt(np.maximum(half_tr ** 2 - det, 0.0))
        lo, hi = det / (half_tr + disc), half_tr + disc
    else:
        w = np.linalg.eigvalsh(g)
        lo, hi = w[..., 0], w[..., -1]
    if np.any(~(lo > 0)) or np.any(hi / lo > 1e12):
        raise NumericalDegeneracy("metric is numerically singular")


def g_inner(m: ManifoldChart, x, a, b) -> np.ndarray:
    g = m.metric(x)
    return np.einsum("...i,...ij,...j->...", a, g, b)


def g_norm(m: ManifoldChart, x, v) -> np.ndarray:
    return np.sqrt(g_inner(m, x, v, v))


# --------------------------------------------------------------------------
# Christoffel symbols


def christoffel(m: ManifoldChart, x) -> np.ndarray:
    """Γ^k_{ij}(x), analytic when the chart provides it, else finite differences."""
    x = m.require(x)
    if m.christoffel_fn is None:
        return christoffel_fd(m, x)
    _check_invertible(m.metric(x))
    return m.christoffel_fn(x)


def christoffel_fd(m: ManifoldChart, x, step: float = 1e-5) -> np.ndarray:
    """Christoffel symbols from central differences of the metric entries."""
    x = np.asarray(x, dtype=float)
    d = m.dim
    ginv = m.inverse_metric(x)
    # dg[..., l, i, j] = ∂_l g_ij
    dg = np.empty(x.shape[:-1] + (d, d, d))
    for l in range(d):
        e = np.zeros(d)
        e[l] = step
        dg[..., l, :, :] = (m.metric(x + e) - m.metric(x - e)) / (2 * step)
    # Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    lowered = 0.5 * (
        np.einsum("...ijl->...lij", dg)
        + np.einsum("...jil->...lij", dg)
        - dg
    )
    return np.einsum("...kl,...lij->...kij", ginv, lowered)


# --------------------------------------------------------------------------
# Frames


def g_orthonormalize(m: ManifoldChart, x, frame) -> np.ndarray:
    """Gram–Schmidt of the columns of ``frame`` in the g(x) inner product."""
    g = m.metric(x)
    E = np.array(frame, dtype=float, copy=True)
    d = E.shape[-1]
    for i in range(d):
        c = E[..., :, i]
        for j in range(i):
            ej = E[..., :, j]
            c = c - np.einsum("...a,...ab,...b->...", c, g, ej)[..., None] * ej
        nrm2 = np.einsum("...a,...ab,...b->...", c, g, c)
        if np.any(~(nrm2 > 1e-24)):
            raise NumericalDegeneracy("frame columns are linearly dependent")
        E[..., :, i] = c / np.sqrt(nrm2)[..., None]
    return E


def coordinate_orthonormal_frame(m: ManifoldChart, p) -> np.ndarray:
    """g-orthonormal frame from Gram–Schmidt of the coordinate basis."""
    p = m.require(p)
    _check_invertible(m.metric(p))
    eye = np.broadcast_to(np.eye(m.dim), p.shape[:-1] + (m.dim, m.dim))
    return g_orthonormalize(m, p, eye)


def frame_gram_deviation(m: ManifoldChart, x, frame) -> np.ndarray:
    """max |Eᵀ g E − I| per frame."""
    g = m.metric(x)
    gram = np.einsum("...ai,...ab,...bj->...ij", frame, g, frame)
    return np.max(np.abs(gram - np.eye(m.dim)), axis=(-2, -1))


# --------------------------------------------------------------------------
# RK4 flow


@dataclass
class FlowResult:
    x: np.ndarray
    v: np.ndarray
    frame: Optional[np.ndarray]
    exited: np.ndarray
    steps: np.ndarray


def _flow_rhs(m: ManifoldChart, x, p, E):
    G = m.christoffel_fn(x) if m.christoffel_fn is not None else christoffel_fd(m, x)
    # A^k_j = Γ^k_{ij} p^i; Γ is symmetric in its lower indices
    A = np.matmul(p[..., None, None, :], G)[..., 0, :]
    dp = -np.matmul(A, p[..., None])[..., 0]
    if E is None:
        return p, dp, None
    return p, dp, -np.matmul(A, E)


def integrate_flow(m: ManifoldChart, x0, v0, t: float, cfg: GeodesicConfig = GeodesicConfig(),
                   frame0=None) -> FlowResult:
    """RK4 integration of γ̈ = −Γ(γ̇, γ̇) from (x0, v0) over time ``t``.

    When ``frame0`` is given its columns are carried along by
    Ė^m_l = −γ̇^j E^k_l Γ^m_{jk}.  No re-projection happens here.  Items are
    independent; each uses ``ceil(|v0|_g t / h)`` steps and is frozen once it
    leaves the domain (flagged in ``exited``).  Periodic coordinates are not
    wrapped.
    """
    if t < 0:
        raise ValueError("integrate_flow needs t >= 0; reverse the velocity instead")
    x = np.array(x0, dtype=float)
    p = np.array(v0, dtype=float) * 1.0
    x, p = np.broadcast_arrays(x, p)
    x, p = x.copy(), p.copy()
    E = None if frame0 is None else np.array(np.broadcast_to(frame0, x.shape + (m.dim,)), dtype=float)
    m.require(x)

    length = g_norm(m, x, p) * t
    if np.any(length > cfg.max_arclength):
        raise GeodesicTooLong(f"arclength {np.max(length):.6g} > {cfg.max_arclength}")
    n = np.maximum(1, np.ceil(length / cfg.h)).astype(np.int64)
    dt = t / n
    exited = np.zeros(x.shape[:-1], dtype=bool)
    if t == 0:
        return FlowResult(x, p, E, exited, np.zeros_like(n))

    half = (0.5 * dt)[..., None]
    full = dt[..., None]
    sixth = (dt / 6.0)[..., None]
    with np.errstate(all="ignore"):
        for it in range(int(n.max())):
            act = (it < n) & ~exited
            if not act.any():
                break
            k1 = _flow_rhs(m, x, p, E)
            k2 = _flow_rhs(m, x + half * k1[0], p + half * k1[1],
                           None if E is None else E + half[..., None] * k1[2])
            k3 = _flow_rhs(m, x + half * k2[0], p + half * k2[1],
                           None if E is None else E + half[..., None] * k2[2])
            k4 = _flow_rhs(m, x + full * k3[0], p + full * k3[1],
                           None if E is None else E + full[..., None] * k3[2])
            xn = x + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            pn = p + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            En = None if E is None else E + sixth[..., None] * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            if act.all():
                x, p, E = xn, pn, En
            else:
                a = act[..., None]
                x, p = np.where(a, xn, x), np.where(a, pn, p)
                if E is not None:
                    E = np.where(a[..., None], En, E)
            exited |= act & ~m.contains(x)
    return FlowResult(x, p, E, exited, n)


def _resolve_method(m: ManifoldChart, method: str) -> str:
    if method == "auto":
        return "closed_form" if m.has_closed_form else "integrate"
    if method == "closed_form" and not m.has_closed_form:
        raise ValueError(f"{m.name} has no closed-form geodesics")
    if method not in ("closed_form", "integrate"):
        raise ValueError(f"unknown geodesic method {method!r}")
    return method


def geodesic_with_tangent(m: ManifoldChart, p, v, t: float = 1.0,
                          cfg: GeodesicConfig = GeodesicConfig(), method: str = "auto"):
    """(γ(t), γ'(t)) for the geodesic with γ(0)=p, γ'(0)=v.

    Raises DomainExit if the geodesic (integrated) or its endpoint
    (closed form) leaves the chart.
    """
    p = m.require(p)
    v = np.asarray(v, dtype=float)
    method = _resolve_method(m, method)
    length = g_norm(m, p, v) * abs(t)
    if np.any(length > cfg.max_arclength):
        raise GeodesicTooLong(f"arclength {np.max(length):.6g} > {cfg.max_arclength}")
    if method == "closed_form":
        x, w = m.closed_form_geodesic(p, v, t)
        x = m.wrap(x)
        if not np.all(m.contains(x)):
            raise DomainExit(f"{m.name}: geodesic endpoint {x} outside chart")
        return x, w
    if t < 0:
        x, w = geodesic_with_tangent(m, p, -v, -t, cfg, method)
        return x, -w
    res = integrate_flow(m, p, v, t, cfg)
    if np.any(res.exited):
        raise DomainExit(f"{m.name}: geodesic left the chart")
    return m.wrap(res.x), res.v


def exp_map(m: ManifoldChart, p, v, cfg: GeodesicConfig = GeodesicConfig(),
            method: str = "auto") -> np.ndarray:
    """exp_p(v): the geodesic from p with initial velocity v, at time 1."""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return m.require(p).copy()
    return geodesic_with_tangent(m, p, v, 1.0, cfg, method)[0]


def geodesic_distance(m: ManifoldChart, p, q) -> np.ndarray:
    if m.distance_fn is None:
        raise NotImplementedError(f"{m.name} has no closed-form distance")
    return m.distance_fn(np.asarray(p, dtype=float), np.asarray(q, dtype=float))


# --------------------------------------------------------------------------
# Catalog: Euclidean plane and flat torus


def _flat_metric(x):
    return np.broadcast_to(np.eye(x.shape[-1]), x.shape + (x.shape[-1],)).copy()


def _flat_christoffel(x):
    d = x.shape[-1]
    return np.zeros(x.shape[:-1] + (d, d, d))


def _flat_geodesic(x, v, t):
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    return x + t * v, v.copy()


def _flat_transport(x, v, t, W):
    return np.array(W, dtype=float, copy=True)


def _euclid_distance(p, q):
    return np.linalg.norm(q - p, axis=-1)


def _torus_distance(p, q):
    dlt = np.mod(q - p + math.pi, TWO_PI) - math.pi
    return np.linalg.norm(dlt, axis=-1)


# --------------------------------------------------------------------------
# Catalog: unit sphere in (θ, φ), metric diag(1, sin²θ)


def _sphere_metric(x):
    g = np.zeros(x.shape[:-1] + (2, 2))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = np.sin(x[..., 0]) ** 2
    return g


def _sphere_christoffel(x):
    G = np.zeros(x.shape[:-1] + (2, 2, 2))
    s, c = np.sin(x[..., 0]), np.cos(x[..., 0])
    G[..., 0, 1, 1] = -s * c
    G[..., 1, 0, 1] = c / s
    G[..., 1, 1, 0] = c / s
    return G


def _sphere_frame(x):
    th, ph = x[..., 0], x[..., 1]
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    P = np.stack([st * cp, st * sp, ct], axis=-1)
    e_th = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e_ph = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
    return P, e_th, e_ph


def _sphere_push(x, v):
    """Chart tangent (..., 2[, m]) at x -> embedded vectors (..., 3[, m])."""
    _, e_th, e_ph = _sphere_frame(x)
    if v.ndim == x.ndim:
        return v[..., :1] * e_th + v[..., 1:2] * e_ph
    return e_th[..., :, None] * v[..., None, 0, :] + e_ph[..., :, None] * v[..., None, 1, :]


def _sphere_pull(x, W):
    _, e_th, e_ph = _sphere_frame(x)
    s2 = np.sin(x[..., 0]) ** 2
    if W.ndim == x.ndim:
        return np.stack([np.sum(W * e_th, -1), np.sum(W * e_ph, -1) / s2], axis=-1)
    a = np.einsum("...k,...km->...m", e_th, W)
    b = np.einsum("...k,...km->...m", e_ph, W) / s2[..., None]
    return np.stack([a, b], axis=-2)


def _sphere_point(Q):
    th = np.arctan2(np.hypot(Q[..., 0], Q[..., 1]), Q[..., 2])
    ph = np.arctan2(Q[..., 1], Q[..., 0])
    return np.stack([th, ph], axis=-1)


def _sphere_arc(x, v, t):
    P = _sphere_frame(x)[0]
    V = _sphere_push(x, v)
    s = np.linalg.norm(V, axis=-1)
    moving = s > 0
    safe = np.where(moving, s, 1.0)[..., None]
    T = V / safe
    a = (s * t)[..., None]
    Q = np.cos(a) * P + np.sin(a) * T
    Tt = -np.sin(a) * P + np.cos(a) * T
    return P, T, Q, Tt, s, moving


def _sphere_geodesic(x, v, t):
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    P, T, Q, Tt, s, moving = _sphere_arc(x, v, t)
    xq = _sphere_point(Q)
    vq = _sphere_pull(xq, s[..., None] * Tt)
    mv = moving[..., None]
    return np.where(mv, xq, x), np.where(mv, vq, v)


def _sphere_transport(x, v, t, W):
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    P, T, Q, Tt, s, moving = _sphere_arc(x, v, t)
    Wv = _sphere_push(x, np.asarray(W, float))
    a = np.einsum("...k,...km->...m", T, Wv)
    Wt = Wv + (Tt - T)[..., :, None] * a[..., None, :]
    xq = _sphere_point(Q)
    out = _sphere_pull(xq, Wt)
    return np.where(moving[..., None, None], out, W)


def _sphere_distance(p, q):
    P, Q = _sphere_frame(p)[0], _sphere_frame(q)[0]
    return np.arctan2(np.linalg.norm(np.cross(P, Q), axis=-1), np.sum(P * Q, -1))


# --------------------------------------------------------------------------
# Catalog: hyperbolic upper half-plane, metric δ/y².  Closed forms go through
# the hyperboloid model; the "minus" component X0 − X2 = 1/y is tracked
# separately to avoid cancellation.


def _hyp_metric(x):
    g = np.zeros(x.shape[:-1] + (2, 2))
    w = 1.0 / x[..., 1] ** 2
    g[..., 0, 0] = w
    g[..., 1, 1] = w
    return g


def _hyp_christoffel(x):
    G = np.zeros(x.shape[:-1] + (2, 2, 2))
    r = 1.0 / x[..., 1]
    G[..., 0, 0, 1] = -r
    G[..., 0, 1, 0] = -r
    G[..., 1, 0, 0] = r
    G[..., 1, 1, 1] = -r
    return G


def _hyp_embed(x):
    X, Y = x[..., 0], x[..., 1]
    r2 = X * X + Y * Y
    P = np.stack([(r2 + 1) / (2 * Y), X / Y, (r2 - 1) / (2 * Y)], axis=-1)
    return P, 1.0 / Y


def _hyp_push(x, v):
    """Returns (V, V0 − V2) for chart tangents v (..., 2[, m])."""
    X, Y = x[..., 0], x[..., 1]
    if v.ndim > x.ndim:
        X, Y = X[..., None], Y[..., None]
        vx, vy = v[..., 0, :], v[..., 1, :]
        axis = -2
    else:
        vx, vy = v[..., 0], v[..., 1]
        axis = -1
    Y2 = Y * Y
    V0 = X * vx / Y + vy * (Y2 - X * X - 1) / (2 * Y2)
    V1 = vx / Y - X * vy / Y2
    V2 = X * vx / Y + vy * (Y2 - X * X + 1) / (2 * Y2)
    return np.stack([V0, V1, V2], axis=axis), -vy / Y2


def _hyp_pull(q_y, Q1, W1, Wm):
    wy = -q_y * q_y * Wm
    wx = q_y * W1 + Q1 * wy
    return wx, wy


def _lorentz(a, b, axis=-1):
    a0, a1, a2 = np.moveaxis(a, axis, 0)
    b0, b1, b2 = np.moveaxis(b, axis, 0)
    return -a0 * b0 + a1 * b1 + a2 * b2


def _hyp_arc(x, v, t):
    P, Pm = _hyp_embed(x)
    V, Vm = _hyp_push(x, v)
    s = np.hypot(v[..., 0], v[..., 1]) / x[..., 1]
    moving = s > 0
    safe = np.where(moving, s, 1.0)
    T, Tm = V / safe[..., None], Vm / safe
    a = s * t
    ch, sh = np.cosh(a), np.sinh(a)
    Q = ch[..., None] * P + sh[..., None] * T
    Qm = ch * Pm + sh * Tm
    Tt = sh[..., None] * P + ch[..., None] * T
    Ttm = sh * Pm + ch * Tm
    return (T, Tm), (Q, Qm), (Tt, Ttm), s, moving


def _hyp_geodesic(x, v, t):
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    _, (Q, Qm), (Tt, Ttm), s, moving = _hyp_arc(x, v, t)
    qy = 1.0 / Qm
    qx = Q[..., 1] * qy
    wx, wy = _hyp_pull(qy, Q[..., 1], s * Tt[..., 1], s * Ttm)
    xq = np.stack([qx, qy], axis=-1)
    vq = np.stack([wx, wy], axis=-1)
    mv = moving[..., None]
    return np.where(mv, xq, x), np.where(mv, vq, v)


def _hyp_transport(x, v, t, W):
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    W = np.asarray(W, float)
    (T, Tm), (Q, Qm), (Tt, Ttm), s, moving = _hyp_arc(x, v, t)
    Wv, Wm = _hyp_push(x, W)
    a = _lorentz(Wv, T[..., :, None], axis=-2)
    W1 = Wv[..., 1, :] + a * (Tt[..., 1] - T[..., 1])[..., None]
    Wmt = Wm + a * (Ttm - Tm)[..., None]
    qy = (1.0 / Qm)[..., None]
    wx, wy = _hyp_pull(qy, Q[..., 1][..., None], W1, Wmt)
    out = np.stack([wx, wy], axis=-2)
    return np.where(moving[..., None, None], out, W)


def _hyp_distance(p, q):
    dx = q[..., 0] - p[..., 0]
    dy = q[..., 1] - p[..., 1]
    return 2.0 * np.arcsinh(np.hypot(dx, dy) / (2.0 * np.sqrt(p[..., 1] * q[..., 1])))


# --------------------------------------------------------------------------


MANIFOLD_NAMES = ("euclidean", "torus", "sphere", "hyperbolic")


def get_manifold(name: str, *, sphere_eps: float = 1e-3, hyperbolic_y_min: float = 1e-6,
                 hyperbolic_y_max: float = 1e6) -> ManifoldChart:
    """Catalog chart by name."""
    inf = np.inf
    if name == "euclidean":
        return ManifoldChart(
            "euclidean", 2, _flat_metric, _flat_christoffel,
            np.array([-inf, -inf]), np.array([inf, inf]), (False, False),
            _flat_geodesic, _flat_transport, _euclid_distance,
            default_start=np.zeros(2),
            experiment_region=((-2.0, -2.0), (2.0, 2.0)),
        )
    if name == "torus":
        return ManifoldChart(
            "torus", 2, _flat_metric, _flat_christoffel,
            np.array([-inf, -inf]), np.array([inf, inf]), (True, True),
            _flat_geodesic, _flat_transport, _torus_distance,
            default_start=np.array([1.0, 1.0]),
            experiment_region=((0.0, 0.0), (TWO_PI, TWO_PI)),
        )
    if name == "sphere":
        if not 0 < sphere_eps < 0.5:
            raise ValueError("sphere_eps must lie in (0, 0.5)")
        return ManifoldChart(
            "sphere", 2, _sphere_metric, _sphere_christoffel,
            np.array([sphere_eps, -inf]), np.array([math.pi - sphere_eps, inf]), (False, True),
            _sphere_geodesic, _sphere_transport, _sphere_distance,
            default_start=np.array([math.pi / 2, 0.0]),
            experiment_region=((0.3, 0.0), (math.pi - 0.3, TWO_PI)),
            params={"sphere_eps": sphere_eps},
        )
    if name == "hyperbolic":
        if not 0 < hyperbolic_y_min < hyperbolic_y_max:
            raise ValueError("need 0 < hyperbolic_y_min < hyperbolic_y_max")
        return ManifoldChart(
            "hyperbolic", 2, _hyp_metric, _hyp_christoffel,
            np.array([-inf, hyperbolic_y_min]), np.array([inf, hyperbolic_y_max]), (False, False),
            _hyp_geodesic, _hyp_transport, _hyp_distance,
            default_start=np.array([0.0, 1.0]),
            experiment_region=((-1.0, 0.5), (1.0, 2.0)),
            params={"hyperbolic_y_min": hyperbolic_y_min, "hyperbolic_y_max": hyperbolic_y_max},
        )
    raise ValueError(f"unknown manifold {name!r}; choose from {', '.join(MANIFOLD_NAMES)}")


def sample_region(m: ManifoldChart, rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform coordinates in the chart's experiment region."""
    lo, hi = (np.asarray(b, dtype=float) for b in m.experiment_region)
    return lo + (hi - lo) * rng.random((n, m.dim))
