"""Run configuration: a small TOML schema with strict validation.

Top level keys are ``version``, ``manifold``, ``seed`` and ``out``; the
remaining options live in flat sections::

    version = "horizon-walk/1"
    manifold = "sphere"
    seed = 7

    [walk]
    alpha = 0.05
    t = 1.0

Unknown keys are rejected with a close-match suggestion.  ``emit_config``
writes every key that has a value, so ``parse_config(emit_config(c)) == c``.
"""

from __future__ import annotations

import dataclasses
import difflib
import math
from dataclasses import dataclass, field
from typing import Optional

import tomli
import tomli_w

from .errors import ParseError, ValidationError
from .increments import LAW_KINDS
from .manifolds import MANIFOLD_NAMES
from .walker import FORMAT_VERSION, LIFT_METHODS, TIME_MODES, WalkConfig


@dataclass
class WalkSection:
    alpha: float = 0.05
    t: float = 1.0
    mode: str = "discrete_rescaled"
    law: str = "sphere_uniform"
    replicas: int = 100
    start: Optional[list] = None
    frame: Optional[list] = None
    lift_method: str = "auto"


@dataclass
class IntegratorSection:
    h: Optional[float] = None
    max_arclength: float = 20.0


@dataclass
class ChartSection:
    sphere_eps: float = 1e-3
    hyperbolic_y_min: float = 1e-6
    hyperbolic_y_max: float = 1e6


@dataclass
class GeneratorSection:
    alphas: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    law: str = "rademacher"
    functions: Optional[list] = None
    point: Optional[list] = None
    samples: int = 10_000
    fd_step: float = 1e-3
    tol: float = 1e-4
    frames: int = 100
    frames_per_point: int = 5
    laws: list = field(default_factory=lambda: ["gaussian", "sphere_uniform", "rademacher"])
    law_samples: int = 1_000_000
    law_points: int = 5


@dataclass
class ConvergeSection:
    alphas: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    t_grid: list = field(default_factory=lambda: [0.5])
    functions: Optional[list] = None


SECTIONS = {
    "walk": WalkSection,
    "integrator": IntegratorSection,
    "chart": ChartSection,
    "generator": GeneratorSection,
    "converge": ConvergeSection,
}
TOP_LEVEL = ("version", "manifold", "seed", "out")


@dataclass
class RunConfig:
    version: str = FORMAT_VERSION
    manifold: str = "sphere"
    seed: int = 0
    out: str = "out"
    walk: WalkSection = field(default_factory=WalkSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    chart: ChartSection = field(default_factory=ChartSection)
    generator: GeneratorSection = field(default_factory=GeneratorSection)
    converge: ConvergeSection = field(default_factory=ConvergeSection)

    def walk_config(self) -> WalkConfig:
        w = self.walk
        return WalkConfig(
            manifold=self.manifold, alpha=w.alpha, horizon_t=w.t, time_mode=w.mode, law=w.law,
            start=w.start, frame=w.frame, master_seed=self.seed, replica_count=w.replicas,
            lift_method=w.lift_method, integrator_h=self.integrator.h,
            max_arclength=self.integrator.max_arclength, sphere_eps=self.chart.sphere_eps,
            hyperbolic_y_min=self.chart.hyperbolic_y_min, hyperbolic_y_max=self.chart.hyperbolic_y_max,
        )

    def to_dict(self, include_out: bool = True) -> dict:
        """Nested dict with unset optional values dropped."""
        out = {"version": self.version, "manifold": self.manifold, "seed": self.seed}
        if include_out:
            out["out"] = self.out
        for name in SECTIONS:
            sec = dataclasses.asdict(getattr(self, name))
            out[name] = {k: v for k, v in sec.items() if v is not None}
        return out


# --------------------------------------------------------------------------
# Validation


def _suggest(key: str, options) -> str:
    close = difflib.get_close_matches(key, list(options), n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def _number(key, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(key, f"expected a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ValidationError(key, f"expected an integer, got {v!r}")
        return int(v)
    v = float(v)
    if not math.isfinite(v):
        raise ValidationError(key, "must be finite")
    return v


def _choice(key, v, options):
    if v not in options:
        raise ValidationError(key, f"{v!r} is not one of {', '.join(options)}{_suggest(str(v), options)}")
    return v


def _num_list(key, v, length=None):
    if not isinstance(v, (list, tuple)):
        raise ValidationError(key, f"expected a list, got {v!r}")
    vals = [_number(key, c) for c in v]
    if length is not None and len(vals) != length:
        raise ValidationError(key, f"expected {length} numbers, got {len(vals)}")
    return vals


def _str_list(key, v):
    if not isinstance(v, (list, tuple)) or not all(isinstance(c, str) for c in v):
        raise ValidationError(key, "expected a list of strings")
    return list(v)


def _positive(key, v):
    if not v > 0:
        raise ValidationError(key, f"must be positive, got {v}")
    return v


def validate(cfg: RunConfig) -> RunConfig:
    """Check ranges and types in place; returns cfg."""
    if cfg.version != FORMAT_VERSION:
        raise ValidationError("version", f"expected {FORMAT_VERSION!r}, got {cfg.version!r}")
    _choice("manifold", cfg.manifold, MANIFOLD_NAMES)
    cfg.seed = _number("seed", cfg.seed, integer=True)
    if not 0 <= cfg.seed < 2 ** 64:
        raise ValidationError("seed", "must be an unsigned 64-bit integer")
    if not isinstance(cfg.out, str) or not cfg.out:
        raise ValidationError("out", "must be a non-empty path")

    w = cfg.walk
    w.alpha = _number("alpha", w.alpha)
    if not 0 < w.alpha <= 1:
        raise ValidationError("alpha", f"must lie in (0, 1], got {w.alpha}")
    w.t = _number("t", w.t)
    if w.t < 0:
        raise ValidationError("t", f"must be >= 0, got {w.t}")
    _choice("mode", w.mode, TIME_MODES)
    _choice("law", w.law, LAW_KINDS)
    w.replicas = _number("replicas", w.replicas, integer=True)
    if w.replicas < 1:
        raise ValidationError("replicas", "must be >= 1")
    if w.start is not None:
        w.start = _num_list("start", w.start, 2)
    if w.frame is not None:
        w.frame = _num_list("frame", w.frame, 4)
    _choice("lift_method", w.lift_method, LIFT_METHODS)

    i = cfg.integrator
    if i.h is not None:
        i.h = _positive("h", _number("h", i.h))
    i.max_arclength = _positive("max_arclength", _number("max_arclength", i.max_arclength))

    c = cfg.chart
    c.sphere_eps = _number("sphere_eps", c.sphere_eps)
    if not 0 < c.sphere_eps < 0.5:
        raise ValidationError("sphere_eps", "must lie in (0, 0.5)")
    c.hyperbolic_y_min = _positive("hyperbolic_y_min", _number("hyperbolic_y_min", c.hyperbolic_y_min))
    c.hyperbolic_y_max = _number("hyperbolic_y_max", c.hyperbolic_y_max)
    if not c.hyperbolic_y_max > c.hyperbolic_y_min:
        raise ValidationError("hyperbolic_y_max", "must exceed hyperbolic_y_min")

    g = cfg.generator
    g.alphas = [_positive("alphas", a) for a in _num_list("alphas", g.alphas)]
    _choice("law", g.law, LAW_KINDS)
    if g.functions is not None:
        g.functions = _str_list("functions", g.functions)
    if g.point is not None:
        g.point = _num_list("point", g.point, 2)
    for key in ("samples", "frames", "frames_per_point", "law_samples", "law_points"):
        val = _number(key, getattr(g, key), integer=True)
        if val < 1:
            raise ValidationError(key, "must be >= 1")
        setattr(g, key, val)
    g.fd_step = _positive("fd_step", _number("fd_step", g.fd_step))
    g.tol = _positive("tol", _number("tol", g.tol))
    g.laws = [_choice("laws", law, LAW_KINDS) for law in _str_list("laws", g.laws)]

    v = cfg.converge
    v.alphas = [_positive("alphas", a) for a in _num_list("alphas", v.alphas)]
    v.t_grid = _num_list("t_grid", v.t_grid)
    if any(t < 0 for t in v.t_grid):
        raise ValidationError("t_grid", "times must be >= 0")
    if v.functions is not None:
        v.functions = _str_list("functions", v.functions)
    return cfg


def from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    for key, val in data.items():
        if key in SECTIONS:
            if not isinstance(val, dict):
                raise ValidationError(key, "expected a table")
            sec_cls = SECTIONS[key]
            names = [f.name for f in dataclasses.fields(sec_cls)]
            sec = getattr(cfg, key)
            for k, v in val.items():
                if k not in names:
                    raise ValidationError(f"{key}.{k}", f"unknown key{_suggest(k, names)}")
                setattr(sec, k, v)
        elif key in TOP_LEVEL:
            setattr(cfg, key, val)
        else:
            every = list(TOP_LEVEL) + list(SECTIONS)
            for sec_cls in SECTIONS.values():
                every += [f.name for f in dataclasses.fields(sec_cls)]
            raise ValidationError(key, f"unknown key{_suggest(key, every)}")
    return validate(cfg)


def parse_config(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ParseError(err.msg if hasattr(err, "msg") else str(err),
                         getattr(err, "lineno", None), getattr(err, "colno", None)) from None
    return from_dict(data)


def emit_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())
