"""Command line front-end.

Every subcommand computes its results in memory, then writes CSV and JSON
files into ``--out`` through temporary files and renames.  Exit status is
0 when the check passes, 1 when it fails and 2 on any error (in which case
nothing is written).
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from typing import Optional

import numpy as np

from . import config as config_mod
from .convergence import HeatReference, alpha_trend
from .errors import FitDegenerate, HorizonWalkError
from .frames import FramePoint, random_frame, standard_loop, turtle_loop_holonomy
from .functions import catalog, get_function
from .generator import (
    apply_rescaled_generator,
    check_identity,
    convergence_slope,
    horizontal_laplacian,
)
from .increments import IncrementLaw, validate_law
from .manifolds import GeodesicConfig, sample_region
from .walker import batch_run, dump_json, write_atomic

COMMANDS = ("walk", "lift", "validate-law", "generator-check", "identity-check", "slope",
            "converge", "holonomy")
SLOPE_MIN = 0.9
HOLONOMY_TOL = 1e-4


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_")


def _command_rng(seed: int, command: str) -> np.random.Generator:
    tag = COMMANDS.index(command) + 1
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(2 ** 32, tag)))


def _functions(cfg, names):
    if names is None:
        return list(catalog(cfg.manifold))
    return [get_function(cfg.manifold, n) for n in names]


def _geodesic_cfg(cfg) -> GeodesicConfig:
    h = cfg.integrator.h if cfg.integrator.h is not None else 1e-3
    return GeodesicConfig(h=h, max_arclength=cfg.integrator.max_arclength)


def _base_point(cfg, m):
    return np.array(cfg.generator.point) if cfg.generator.point is not None else m.default_start.copy()


def _error_csv(alphas, errors, stderrs) -> str:
    lines = ["alpha,error,stderr"] + [f"{float(a)!r},{float(e)!r},{float(s)!r}"
                                      for a, e, s in zip(alphas, errors, stderrs)]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Subcommands: each returns (passed, {filename: text})


def cmd_walk(cfg, threads, lifted=False):
    wc = cfg.walk_config()
    ds = batch_run(wc, threads=threads, lifted=lifted)
    stem = "lift" if lifted else "walk"
    side = ds.sidecar()
    side["run_config"] = cfg.to_dict(include_out=False)
    passed = True
    if lifted:
        ok = ds.completed
        gap = float(np.max(np.abs(ds.points[ok] - ds.coupled[ok]), initial=0.0))
        side["projection_gap"] = gap
        passed = gap <= 1e-12
    side["passed"] = passed
    return passed, {f"{stem}.csv": ds.csv_text(), f"{stem}.json": dump_json(side)}


def cmd_validate_law(cfg, threads):
    wc = cfg.walk_config()
    m = wc.chart()
    rng = _command_rng(cfg.seed, "validate-law")
    pts = sample_region(m, rng, cfg.generator.law_points)
    rows = ["law,x1,x2,mean1,mean2,cov11,cov12,cov22,target11,target12,target22,third,third_target,passed"]
    reports = []
    for name in cfg.generator.laws:
        rep = validate_law(IncrementLaw(name), m, pts, cfg.generator.law_samples, rng)
        reports.append(rep.summary())
        for k, p in enumerate(rep.points):
            c, t = rep.empirical_covariance[k], rep.target_covariance[k]
            ok = bool(rep.mean_ok[k].all() and rep.cov_ok[k].all() and rep.third_ok[k])
            vals = [*p, *rep.empirical_mean[k], c[0, 0], c[0, 1], c[1, 1], t[0, 0], t[0, 1], t[1, 1],
                    rep.empirical_third_abs_moment[k], rep.third_target]
            rows.append(name + "," + ",".join(repr(float(v)) for v in vals) + f",{int(ok)}")
    passed = all(r["passed"] for r in reports)
    doc = {"config": cfg.to_dict(include_out=False), "laws": reports, "passed": passed}
    return passed, {"validate_law.csv": "\n".join(rows) + "\n", "validate_law.json": dump_json(doc)}


def cmd_generator_check(cfg, threads, fit=False):
    wc = cfg.walk_config()
    m = wc.chart()
    g = cfg.generator
    if len(g.alphas) < (4 if fit else 1):
        raise ValueError(f"slope needs at least 4 alpha values, got {len(g.alphas)}")
    u = FramePoint.at(m, _base_point(cfg, m))
    law = IncrementLaw(g.law)
    gcfg = _geodesic_cfg(cfg)
    rng = _command_rng(cfg.seed, "slope" if fit else "generator-check")
    files, results = {}, []
    passed = True
    for f in _functions(cfg, g.functions):
        if fit:
            try:
                rep = convergence_slope(m, f, u, g.alphas, law, g.samples, rng, gcfg)
            except FitDegenerate as err:
                rep = err.report
            summ = rep.summary()
            ok = rep.monotone and (rep.status != "fitted" or rep.slope >= SLOPE_MIN)
            table = (rep.alphas, rep.errors, rep.stderrs)
        else:
            half = 0.5 * horizontal_laplacian(m, f, u, g.fd_step, gcfg, richardson=True)
            alphas = sorted(g.alphas, reverse=True)
            vals = [apply_rescaled_generator(m, f, u, a, law, g.samples, rng, gcfg) for a in alphas]
            errs = [abs(v.value - half) for v in vals]
            ses = [v.stderr for v in vals]
            ok = all(b <= a + 1e-8 for a, b in zip(errs, errs[1:]))
            summ = {"function": f.name, "half_laplacian": half, "alphas": alphas,
                    "generator_values": [v.value for v in vals], "errors": errs,
                    "stderrs": ses, "monotone": ok}
            table = (alphas, errs, ses)
        summ["passed"] = bool(ok)
        passed &= bool(ok)
        results.append(summ)
        files[f"{'slope' if fit else 'generator'}_{_slug(f.name)}.csv"] = _error_csv(*table)
    stem = "slope" if fit else "generator"
    doc = {"config": cfg.to_dict(include_out=False), "point": u.x.tolist(), "law": law.kind,
           "functions": results, "passed": passed}
    files[f"{stem}.json"] = dump_json(doc)
    return passed, files


def cmd_identity_check(cfg, threads):
    wc = cfg.walk_config()
    m = wc.chart()
    g = cfg.generator
    rng = _command_rng(cfg.seed, "identity-check")
    n_points = max(1, math.ceil(g.frames / g.frames_per_point))
    xs = sample_region(m, rng, n_points)
    frames = [random_frame(m, x, rng) for x in xs for _ in range(g.frames_per_point)][: g.frames]
    gcfg = _geodesic_cfg(cfg)
    rows = ["function,x1,x2,delta_h,delta_m,error"]
    summaries = []
    for f in _functions(cfg, g.functions):
        rep = check_identity(m, f, frames, g.tol, g.fd_step, gcfg)
        summaries.append(rep.summary())
        for x, a, b in zip(rep.base_points, rep.delta_h, rep.delta_m):
            rows.append(f"{f.name},{x[0]!r},{x[1]!r},{a!r},{b!r},{abs(a - b)!r}")
    passed = all(s["passed"] for s in summaries)
    doc = {"config": cfg.to_dict(include_out=False), "functions": summaries, "passed": passed}
    return passed, {"identity.csv": "\n".join(rows) + "\n", "identity.json": dump_json(doc)}


def cmd_converge(cfg, threads):
    wc = cfg.walk_config()
    v = cfg.converge
    fns = _functions(cfg, v.functions)
    rep = alpha_trend(wc, fns, v.t_grid, v.alphas, HeatReference(cfg.manifold), threads)
    doc = {"config": cfg.to_dict(include_out=False), **rep.summary()}
    return rep.passed, {"converge.csv": rep.csv_text(), "converge.json": dump_json(doc)}


def cmd_holonomy(cfg, threads):
    m = cfg.walk_config().chart()
    start, heading, lengths, turns = standard_loop(m)
    res = turtle_loop_holonomy(m, start, heading, lengths, turns, _geodesic_cfg(cfg), "integrate")
    passed = res.error < HOLONOMY_TOL
    doc = {"config": cfg.to_dict(include_out=False), "manifold": m.name, "angle": res.angle,
           "expected": res.expected, "error": res.error, "closure_error": res.closure_error,
           "max_drift": res.max_drift, "passed": passed}
    csv = ("manifold,angle,expected,error,closure_error\n"
           f"{m.name},{res.angle!r},{res.expected!r},{res.error!r},{res.closure_error!r}\n")
    return passed, {"holonomy.csv": csv, "holonomy.json": dump_json(doc)}


HANDLERS = {
    "walk": lambda c, t: cmd_walk(c, t, lifted=False),
    "lift": lambda c, t: cmd_walk(c, t, lifted=True),
    "validate-law": cmd_validate_law,
    "generator-check": lambda c, t: cmd_generator_check(c, t, fit=False),
    "slope": lambda c, t: cmd_generator_check(c, t, fit=True),
    "identity-check": cmd_identity_check,
    "converge": cmd_converge,
    "holonomy": cmd_holonomy,
}


def dispatch(cmd: str, cfg, threads: int = 1) -> int:
    """Run a subcommand and write its artifacts; returns the exit status."""
    if cmd not in HANDLERS:
        raise ValueError(f"unknown command {cmd!r}")
    passed, files = HANDLERS[cmd](cfg, threads)
    files["config.toml"] = config_mod.tomli_w.dumps(cfg.to_dict(include_out=False))
    for name in sorted(files):
        write_atomic(os.path.join(cfg.out, name), files[name])
    return 0 if passed else 1


# --------------------------------------------------------------------------
# Argument parsing


def _float_list(text: str):
    return [float(s) for s in text.split(",") if s.strip()]


def _str_list(text: str):
    return [s.strip() for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads; never changes results")
    common.add_argument("--manifold", help="euclidean, torus, sphere or hyperbolic")
    common.add_argument("--alpha", type=float)
    common.add_argument("--t", type=float, help="time horizon")
    common.add_argument("--law", help="increment law")
    common.add_argument("--replicas", type=int)
    common.add_argument("--mode", help="discrete_rescaled or exponential_clock")
    common.add_argument("--lift-method", dest="lift_method", help="auto, closed_form or integrate")
    common.add_argument("--alphas", type=_float_list, help="comma-separated alpha sweep")
    common.add_argument("--functions", type=_str_list, help="comma-separated catalog names")
    common.add_argument("--t-grid", dest="t_grid", type=_float_list, help="comma-separated times")
    common.add_argument("--samples", type=int, help="Monte Carlo / validation sample count")

    parser = argparse.ArgumentParser(prog="horizon-walk",
                                     description="Geodesic random walks and frame-bundle lifts.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args) -> "config_mod.RunConfig":
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = config_mod.parse_config(fh.read())
    else:
        cfg = config_mod.RunConfig()
    for attr, target in (("seed", "seed"), ("out", "out"), ("manifold", "manifold")):
        if getattr(args, attr) is not None:
            setattr(cfg, target, getattr(args, attr))
    w = cfg.walk
    for attr, key in (("alpha", "alpha"), ("t", "t"), ("law", "law"), ("replicas", "replicas"),
                      ("mode", "mode"), ("lift_method", "lift_method")):
        if getattr(args, attr) is not None:
            setattr(w, key, getattr(args, attr))
    if args.law is not None:
        cfg.generator.law = args.law
        cfg.generator.laws = [args.law]
    if args.alphas is not None:
        if args.command == "converge":
            cfg.converge.alphas = args.alphas
        else:
            cfg.generator.alphas = args.alphas
    if args.functions is not None:
        if args.command == "converge":
            cfg.converge.functions = args.functions
        else:
            cfg.generator.functions = args.functions
    if args.t_grid is not None:
        cfg.converge.t_grid = args.t_grid
    if args.samples is not None:
        cfg.generator.samples = args.samples
        cfg.generator.law_samples = args.samples
    return config_mod.validate(cfg)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("HORIZON_WALK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise HorizonWalkError(f"HORIZON_WALK_THREADS must be an integer, got {env!r}") from None
    return 1


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        status = dispatch(args.command, cfg, _threads(args))
    except (HorizonWalkError, ValueError, OSError, ArithmeticError) as err:
        print(f"horizon-walk {args.command}: error: {err}", file=sys.stderr)
        return 2
    verdict = "pass" if status == 0 else "FAIL"
    print(f"horizon-walk {args.command}: {verdict} (artifacts in {cfg.out})")
    return status


if __name__ == "__main__":
    sys.exit(main())
