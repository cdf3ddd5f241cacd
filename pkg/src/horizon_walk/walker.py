"""Geodesic random walks on a chart and their horizontal lifts.

Replicas are simulated in fixed-size blocks.  Each replica owns an rng
stream derived from ``(master_seed, replica)`` and draws all of its
increments before stepping, so a replica's trajectory depends only on its
index and the config, never on how blocks are scheduled across threads.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainExit, OrthonormalityDrift
from .frames import DRIFT_LIMIT, FramePoint, lift_geodesics
from .increments import LAW_KINDS, IncrementLaw, replica_rng, sample_increment
from .manifolds import (
    MANIFOLD_NAMES,
    GeodesicConfig,
    ManifoldChart,
    coordinate_orthonormal_frame,
    exp_map,
    frame_gram_deviation,
    get_manifold,
    integrate_flow,
)

TIME_MODES = ("discrete_rescaled", "exponential_clock")
LIFT_METHODS = ("auto", "closed_form", "integrate")
BLOCK_SIZE = 2048
MAX_RECORDS = 1000
FORMAT_VERSION = "horizon-walk/1"


@dataclass(frozen=True)
class WalkConfig:
    """Everything that determines a batch of walks.

    ``frame`` is given column-major (as in the CSV) and defaults to the
    coordinate orthonormal frame at ``start``.  ``integrator_h`` is only
    used when ``lift_method`` resolves to ``integrate``.
    """

    manifold: str = "sphere"
    alpha: float = 0.05
    horizon_t: float = 1.0
    time_mode: str = "discrete_rescaled"
    law: str = "sphere_uniform"
    start: Optional[tuple] = None
    frame: Optional[tuple] = None
    master_seed: int = 0
    replica_count: int = 1
    lift_method: str = "auto"
    integrator_h: Optional[float] = None
    max_arclength: float = 20.0
    sphere_eps: float = 1e-3
    hyperbolic_y_min: float = 1e-6
    hyperbolic_y_max: float = 1e6

    def __post_init__(self):
        if self.manifold not in MANIFOLD_NAMES:
            raise ValueError(f"unknown manifold {self.manifold!r}")
        if not (0 < self.alpha <= 1):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.horizon_t >= 0:
            raise ValueError(f"horizon_t must be >= 0, got {self.horizon_t}")
        if self.time_mode not in TIME_MODES:
            raise ValueError(f"unknown time_mode {self.time_mode!r}")
        if self.law not in LAW_KINDS:
            raise ValueError(f"unknown law {self.law!r}")
        if int(self.replica_count) < 1:
            raise ValueError("replica_count must be >= 1")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.lift_method not in LIFT_METHODS:
            raise ValueError(f"unknown lift_method {self.lift_method!r}")
        for name in ("start", "frame"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, tuple(float(c) for c in val))

    def chart(self) -> ManifoldChart:
        return get_manifold(self.manifold, sphere_eps=self.sphere_eps,
                            hyperbolic_y_min=self.hyperbolic_y_min,
                            hyperbolic_y_max=self.hyperbolic_y_max)

    def geodesic_config(self) -> GeodesicConfig:
        h = self.integrator_h if self.integrator_h is not None else min(1e-3, self.alpha / 50.0)
        return GeodesicConfig(h=h, max_arclength=self.max_arclength)

    def initial_frame_point(self, m: Optional[ManifoldChart] = None) -> FramePoint:
        m = m or self.chart()
        x = m.default_start if self.start is None else np.array(self.start)
        frame = None
        if self.frame is not None:
            frame = np.array(self.frame).reshape((m.dim, m.dim), order="F")
        return FramePoint.at(m, x, frame)

    @property
    def step_count(self) -> int:
        """⌊t/α²⌋, tolerant of binary rounding in t/α²."""
        return int(math.floor(self.horizon_t / self.alpha ** 2 + 1e-9))

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Path:
    times: np.ndarray
    points: np.ndarray
    replica: int = 0
    config_hash: str = ""
    exited: bool = False


@dataclass
class FramePath:
    times: np.ndarray
    points: np.ndarray
    frames: np.ndarray
    replica: int = 0
    config_hash: str = ""
    exited: bool = False
    max_drift: float = 0.0

    def frame_point(self, k: int) -> FramePoint:
        return FramePoint(self.points[k], self.frames[k])

    def projection(self) -> Path:
        return Path(self.times, self.points, self.replica, self.config_hash, self.exited)


@dataclass
class WalkDataset:
    """Recorded states of a batch, padded with NaN after a replica exits.

    ``coupled`` holds the base walk driven by the lifted walk's draws and
    carried frame; it is only present for lifted runs.  ``exited`` marks
    replicas that left the chart, ``drifted`` those aborted because the
    integrated frame lost orthonormality beyond ``DRIFT_LIMIT``.
    """

    config: WalkConfig
    times: np.ndarray
    points: np.ndarray
    frames: Optional[np.ndarray] = None
    coupled: Optional[np.ndarray] = None
    valid: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    exited: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    drifted: Optional[np.ndarray] = None
    max_drift: float = 0.0
    final_only: bool = False

    @property
    def replica_count(self) -> int:
        return len(self.points)

    @property
    def domain_exit_count(self) -> int:
        return int(self.exited.sum())

    @property
    def drift_abort_count(self) -> int:
        return 0 if self.drifted is None else int(self.drifted.sum())

    @property
    def completed(self) -> np.ndarray:
        """Mask of replicas that reached the horizon."""
        done = ~self.exited
        if self.drifted is not None:
            done &= ~self.drifted
        return done

    def path(self, r: int) -> Path:
        n = int(self.valid[r])
        return Path(self.times[:n].copy(), self.points[r, :n].copy(), r,
                    self.config.config_hash(), bool(self.exited[r]))

    def frame_path(self, r: int) -> FramePath:
        if self.frames is None:
            raise ValueError("dataset holds no frames; run a lifted walk")
        n = int(self.valid[r])
        drift = frame_gram_deviation(self.config.chart(), self.points[r, :n], self.frames[r, :n])
        return FramePath(self.times[:n].copy(), self.points[r, :n].copy(), self.frames[r, :n].copy(),
                         r, self.config.config_hash(), bool(self.exited[r]),
                         float(np.max(drift, initial=0.0)))

    def coupled_path(self, r: int) -> Path:
        if self.coupled is None:
            raise ValueError("dataset holds no coupled base walk")
        n = int(self.valid[r])
        return Path(self.times[:n].copy(), self.coupled[r, :n].copy(), r,
                    self.config.config_hash(), bool(self.exited[r]))

    def final_points(self):
        """(points, mask) of replicas that reached the horizon."""
        return self.points[:, -1], self.completed

    # ---------------------------------------------------------------- output

    def csv_text(self) -> str:
        d = self.points.shape[-1]
        cols = ["replica", "time"] + [f"x{i + 1}" for i in range(d)]
        if self.frames is not None:
            cols += [f"f{i + 1}{j + 1}" for i in range(d) for j in range(d)]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for r in range(self.replica_count):
            for k in range(int(self.valid[r])):
                vals = [repr(float(self.times[k]))] + [repr(float(c)) for c in self.points[r, k]]
                if self.frames is not None:
                    # f_ij = (u e_i)^j, i.e. the frame matrix in column-major order
                    vals += [repr(float(c)) for c in self.frames[r, k].ravel(order="F")]
                buf.write(f"{r}," + ",".join(vals) + "\n")
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "replica_count": self.replica_count,
            "domain_exit_count": self.domain_exit_count,
            "drift_abort_count": self.drift_abort_count if self.frames is not None else None,
            "max_frame_drift": float(self.max_drift) if self.frames is not None else None,
            "recorded_times": len(self.times),
            "columns": self.csv_text().split("\n", 1)[0].split(","),
        }


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_dataset(ds: WalkDataset, out_dir: str, stem: str = "walk") -> tuple:
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    json_path = os.path.join(out_dir, f"{stem}.json")
    write_atomic(csv_path, ds.csv_text())
    write_atomic(json_path, dump_json(ds.sidecar()))
    return csv_path, json_path


# --------------------------------------------------------------------------
# Single steps


def step_discrete(m: ManifoldChart, law: IncrementLaw, p, alpha: float,
                  rng: np.random.Generator, cfg: GeodesicConfig = GeodesicConfig(),
                  method: str = "auto") -> np.ndarray:
    """One step exp_p(α v) with v = F(p) ξ and F the coordinate orthonormal frame."""
    p = m.require(p)
    v = sample_increment(law, coordinate_orthonormal_frame(m, p), rng)
    return exp_map(m, p, alpha * v, cfg, method)


# --------------------------------------------------------------------------
# Block engine


def _record_grid(cfg: WalkConfig) -> np.ndarray:
    """Recording times: multiples of max(α², t/1000), plus the horizon."""
    T = cfg.horizon_t
    if cfg.time_mode == "discrete_rescaled":
        n = cfg.step_count
        every = max(1, int(round(max(cfg.alpha ** 2, T / MAX_RECORDS) / cfg.alpha ** 2)))
        steps = np.arange(0, n + 1, every)
        if steps[-1] != n:
            steps = np.append(steps, n)
        return steps * cfg.alpha ** 2
    if T == 0:
        return np.zeros(1)
    dt = max(cfg.alpha ** 2, T / MAX_RECORDS)
    grid = np.arange(int(math.floor(T / dt + 1e-9)) + 1) * dt
    if T - grid[-1] > 1e-12 * max(1.0, T):
        grid = np.append(grid, T)
    else:
        grid[-1] = T
    return grid


def _draw_block(cfg: WalkConfig, law: IncrementLaw, d: int, replicas: range, grid: np.ndarray,
                final_only: bool):
    """Increments, step counts and record indices for a block of replicas."""
    B = len(replicas)
    xis, counts, rec = [], np.empty(B, dtype=np.int64), []
    for b, r in enumerate(replicas):
        rng = replica_rng(cfg.master_seed, r)
        if cfg.time_mode == "discrete_rescaled":
            n = cfg.step_count
            idx = np.rint(grid / cfg.alpha ** 2).astype(np.int64)
        else:
            rate = 1.0 / cfg.alpha ** 2
            expect = rate * cfg.horizon_t
            jumps = np.cumsum(rng.exponential(1.0 / rate, size=int(expect + 10 * math.sqrt(expect) + 10)))
            while jumps.size and jumps[-1] <= cfg.horizon_t:
                more = jumps[-1] + np.cumsum(rng.exponential(1.0 / rate, size=int(expect) + 10))
                jumps = np.concatenate([jumps, more])
            n = int(np.searchsorted(jumps, cfg.horizon_t, side="right"))
            idx = np.searchsorted(jumps, grid, side="right")
        counts[b] = n
        xis.append(law.sample(rng, n, d))
        rec.append(idx[-1:] if final_only else idx)
    N = int(counts.max(initial=0))
    xi = np.zeros((B, N, d))
    for b, a in enumerate(xis):
        xi[b, :len(a)] = a
    return xi, counts, np.array(rec)


def _simulate_block(cfg: WalkConfig, replicas: range, lifted: bool, final_only: bool):
    m = cfg.chart()
    law = IncrementLaw(cfg.law)
    gcfg = cfg.geodesic_config()
    method = cfg.lift_method
    if method == "auto":
        method = "closed_form" if m.has_closed_form else "integrate"
    d = m.dim
    grid = _record_grid(cfg)
    xi, counts, rec_idx = _draw_block(cfg, law, d, replicas, grid, final_only)
    B, R = len(replicas), rec_idx.shape[1]
    u0 = cfg.initial_frame_point(m)

    x = np.tile(u0.x, (B, 1))
    E = np.tile(u0.frame, (B, 1, 1))
    bx = x.copy()
    out_x = np.full((B, R, d), np.nan)
    out_E = np.full((B, R, d, d), np.nan) if lifted else None
    out_b = np.full((B, R, d), np.nan) if lifted else None
    ptr = np.zeros(B, dtype=np.int64)
    exited = np.zeros(B, dtype=bool)
    drifted = np.zeros(B, dtype=bool)
    rows = np.arange(B)
    max_drift = 0.0

    def record(k):
        while True:
            cur = rec_idx[rows, np.minimum(ptr, R - 1)]
            hit = (ptr < R) & (cur == k) & ~exited
            if not hit.any():
                return
            out_x[hit, ptr[hit]] = x[hit]
            if lifted:
                out_E[hit, ptr[hit]] = E[hit]
                out_b[hit, ptr[hit]] = bx[hit]
            ptr[hit] += 1

    record(0)
    alpha = cfg.alpha
    with np.errstate(all="ignore"):
        for k in range(xi.shape[1]):
            act = (k < counts) & ~exited
            if not act.any():
                break
            idx = np.nonzero(act)[0]
            if lifted:
                v = alpha * np.einsum("nij,nj->ni", E[idx], xi[idx, k])
                res = lift_geodesics(m, x[idx], E[idx], v, 1.0, gcfg, method)
                # coupled base walk: same draw, carried frame, same geodesic routine
                if method == "closed_form":
                    bn = m.wrap(m.closed_form_geodesic(bx[idx], v, 1.0)[0])
                    bex = ~m.contains(bn)
                else:
                    flow = integrate_flow(m, bx[idx], v, 1.0, gcfg)
                    bn, bex = m.wrap(flow.x), flow.exited
                out = res.exited | bex
                bad = ~out & ~(res.drift <= DRIFT_LIMIT)
                ok = ~out & ~bad
                if ok.any():
                    max_drift = max(max_drift, float(np.max(res.drift[ok])))
                keep = idx[ok]
                x[keep] = res.x[ok]
                E[keep] = res.frame[ok]
                bx[keep] = bn[ok]
                exited[idx[out]] = True
                drifted[idx[bad]] = True
                exited[idx[bad]] = True
            else:
                F = coordinate_orthonormal_frame(m, x[idx])
                v = alpha * np.einsum("nij,nj->ni", F, xi[idx, k])
                if method == "closed_form":
                    xn = m.wrap(m.closed_form_geodesic(x[idx], v, 1.0)[0])
                    out = ~m.contains(xn)
                else:
                    flow = integrate_flow(m, x[idx], v, 1.0, gcfg)
                    xn, out = m.wrap(flow.x), flow.exited
                x[idx[~out]] = xn[~out]
                exited[idx[out]] = True
            record(k + 1)
    return out_x, out_E, out_b, ptr, exited & ~drifted, drifted, max_drift


def _run(cfg: WalkConfig, replicas: range, lifted: bool, threads: int = 1,
         final_only: bool = False) -> WalkDataset:
    blocks = [range(s, min(s + BLOCK_SIZE, replicas.stop)) for s in range(replicas.start, replicas.stop, BLOCK_SIZE)]
    threads = max(1, int(threads))
    if threads == 1 or len(blocks) == 1:
        parts = [_simulate_block(cfg, b, lifted, final_only) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _simulate_block(cfg, b, lifted, final_only), blocks))
    grid = _record_grid(cfg)
    times = grid[-1:] if final_only else grid
    cat = lambda i: np.concatenate([p[i] for p in parts]) if parts[0][i] is not None else None
    return WalkDataset(cfg, times, cat(0), cat(1), cat(2), cat(3), cat(4), cat(5),
                       max((p[6] for p in parts), default=0.0), final_only)


def batch_run(cfg: WalkConfig, threads: int = 1, lifted: bool = False,
              final_only: bool = False) -> WalkDataset:
    """All ``cfg.replica_count`` replicas; exits are counted, not raised."""
    return _run(cfg, range(int(cfg.replica_count)), lifted, threads, final_only)


def run_base_walk(cfg: WalkConfig, replica: int = 0) -> Path:
    """One replica of the base walk; raises DomainExit if it leaves the chart."""
    ds = _run(cfg, range(replica, replica + 1), lifted=False)
    if ds.exited[0]:
        raise DomainExit(f"replica {replica} left the {cfg.manifold} chart")
    path = ds.path(0)
    path.replica = replica
    return path


def run_lifted_walk(cfg: WalkConfig, replica: int = 0):
    """(FramePath, coupled base Path) for one replica of the lifted walk."""
    ds = _run(cfg, range(replica, replica + 1), lifted=True)
    if ds.drifted[0]:
        raise OrthonormalityDrift(f"replica {replica}: frame drift exceeded {DRIFT_LIMIT}; "
                                  "reduce the integrator step")
    if ds.exited[0]:
        raise DomainExit(f"replica {replica} left the {cfg.manifold} chart")
    fp, bp = ds.frame_path(0), ds.coupled_path(0)
    fp.replica = bp.replica = replica
    return fp, bp
