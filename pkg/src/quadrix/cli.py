"""Command-line front end.

Subcommands: curvature | measures | classify | verify | sweep, all driven
by a single flat JSON config (see README for the schema).  Outputs are CSV
or JSON with the tool version, config hash and seed embedded, decimal
points and 17 significant digits, and no timestamps, so identical config
plus seed reproduces identical bytes.

Exit codes: 0 success (including clean negative classifications),
1 config error or verify-suite failure, 2 convexity-certificate failure in
`curvature`, 3 classification blocked by errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .characterize import (
    Classification,
    ClassifyConfig,
    check_condition,
    classify,
    determinant_identity_residual,
    sample_coordinates,
    sample_points,
)
from .errors import BranchError, ConfigError, ConvexityError, QuadrixError
from .funcspec import PerturbedQuadratic, QuadraticForm, parse_expression
from .measure import QuadratureSettings, section_area, cap_volume, derivative_check, starred_measures
from .quadrics import (
    invariant_constant,
    mean_value_ratio,
    paraboloid_starred,
    refutation_theta,
    unit_ball_volume,
)
from .surface import LevelFamily, curvature_invariant, gauss_kronecker, point_on_level

SCHEMA_VERSION = 1


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _build_family(cfg: dict) -> LevelFamily:
    try:
        fam = cfg["family"]
        alpha = float(fam["alpha"])
        sign = fam.get("sign", "minus")
        fspec = fam["f"]
        kind = fspec["kind"]
        if kind == "quadratic":
            f = QuadraticForm(tuple(fspec["a"]))
        elif kind == "perturbed_quadratic":
            f = PerturbedQuadratic(
                tuple(fspec["a"]),
                float(fspec.get("epsilon", 0.0)),
                fspec.get("perturbation", "quartic"),
            )
        elif kind == "expression":
            f = parse_expression(fspec["source"], int(fspec["n"]))
        else:
            raise ConfigError(f"unknown function kind {kind!r}")
        return LevelFamily(f=f, alpha=alpha, sign=sign)
    except (KeyError, TypeError, ValueError, QuadrixError) as exc:
        raise ConfigError(f"bad family config: {exc}") from exc


def _build_settings(cfg: dict, seed_override: int | None) -> QuadratureSettings:
    q = cfg.get("quadrature", {})
    pts = cfg.get("points", {})
    seed = seed_override if seed_override is not None else int(pts.get("seed", 123456789))
    try:
        target = q.get("target_rel_error")
        return QuadratureSettings(
            directions=q.get("directions"),
            radial_order=int(q.get("radial_order", 16)),
            mc_samples=int(q.get("mc_samples", 1 << 16)),
            seed=seed,
            target_rel_error=float(target) if target is not None else None,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad quadrature config: {exc}") from exc


def _levels(cfg: dict, family: LevelFamily) -> list[float]:
    levels = cfg.get("levels")
    if levels is None:
        levels = [0.5, 1.0, 2.0] if family.alpha == 2.0 else [1.0]
    levels = [float(k) for k in levels]
    if not levels:
        raise ConfigError("levels must be nonempty")
    return levels


def _offsets(cfg: dict) -> list[float] | None:
    off = cfg.get("offsets")
    if off is None:
        return None
    return [float(h) for h in off]


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    env = os.environ.get("QUADRIX_JOBS")
    return max(1, int(env)) if env else 1


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


class _Output:
    """Write to --out / config output path, or stdout; single-threaded, ordered."""

    def __init__(self, args, cfg):
        self.path = args.out or cfg.get("output", {}).get("path")

    def __enter__(self):
        self._fh = open(self.path, "w", encoding="utf-8", newline="") if self.path else sys.stdout
        return self._fh

    def __exit__(self, *exc):
        if self.path:
            self._fh.close()


def _emit_header(fh, cfg: dict, seed: int) -> None:
    fh.write(f"# quadrix {__version__}\n")
    fh.write(f"# config_sha256={_config_hash(cfg)}\n")
    fh.write(f"# seed={seed}\n")


def _sample_box(cfg: dict):
    return cfg.get("points", {}).get("box")


def _point_count(cfg: dict) -> int:
    return int(cfg.get("points", {}).get("count", 6))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_curvature(args) -> int:
    cfg = _load_config(args.config)
    family = _build_family(cfg)
    settings = _build_settings(cfg, args.seed)
    levels = _levels(cfg, family)
    n = family.n
    try:
        with _Output(args, cfg) as fh:
            _emit_header(fh, cfg, settings.seed)
            writer = csv.writer(fh)
            writer.writerow(["k"] + [f"x{i+1}" for i in range(n)] + ["z", "K", "grad_norm", "invariant"])
            for k in levels:
                xs = sample_coordinates(n, _point_count(cfg), settings.seed, _sample_box(cfg))
                for x in xs:
                    try:
                        p = point_on_level(family, k, x)
                    except BranchError:
                        continue  # off the admissible set, not a certificate failure
                    kcurv = gauss_kronecker(family, p)
                    inv = curvature_invariant(family, p)
                    writer.writerow(
                        [_fmt(k)] + [_fmt(c) for c in p.x] +
                        [_fmt(p.z), _fmt(kcurv), _fmt(p.grad_norm), _fmt(inv)]
                    )
    except ConvexityError as exc:
        print(f"convexity certificate failed: {exc}", file=sys.stderr)
        return 2
    except QuadrixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _measure_rows(family, levels, offsets, cfg, settings, jobs):
    tasks = []
    for k in levels:
        points = sample_points(family, k, _point_count(cfg), settings.seed, _sample_box(cfg))
        for h in offsets:
            for p in points:
                tasks.append((k, h, p))

    def run(task):
        k, h, p = task
        try:
            sm = starred_measures(family, p, h, settings)
        except QuadrixError as exc:
            return (k, h, None, p, str(exc))
        return (k, h, sm, p, "")

    return _pmap(run, tasks, jobs)


def cmd_measures(args) -> int:
    cfg = _load_config(args.config)
    family = _build_family(cfg)
    settings = _build_settings(cfg, args.seed)
    levels = _levels(cfg, family)
    offsets = _offsets(cfg)
    if not offsets:
        raise ConfigError("measures needs a nonempty offsets list")
    rows = _measure_rows(family, levels, offsets, cfg, settings, _jobs(args))
    failures = sum(1 for r in rows if r[2] is None)
    with _Output(args, cfg) as fh:
        _emit_header(fh, cfg, settings.seed)
        writer = csv.writer(fh)
        writer.writerow(
            "k h t Vstar Vstar_err Astar Astar_err Sstar Sstar_err grad_norm seed error".split()
        )
        for k, h, sm, p, err in rows:
            if sm is None:
                writer.writerow([_fmt(k), _fmt(h)] + [""] * 8 + [str(settings.seed), err])
            else:
                writer.writerow([
                    _fmt(k), _fmt(h), _fmt(sm.t),
                    _fmt(sm.volume.value), _fmt(sm.volume.error_estimate),
                    _fmt(sm.area.value), _fmt(sm.area.error_estimate),
                    _fmt(sm.lateral.value), _fmt(sm.lateral.error_estimate),
                    _fmt(sm.grad_norm), str(settings.seed), "",
                ])
    return 1 if rows and failures == len(rows) else 0


def cmd_classify(args) -> int:
    cfg = _load_config(args.config)
    family = _build_family(cfg)
    settings = _build_settings(cfg, args.seed)
    levels = _levels(cfg, family)
    offsets = _offsets(cfg)
    ccfg = ClassifyConfig(
        point_count=_point_count(cfg),
        box=_sample_box(cfg),
        seed=settings.seed,
        offsets=tuple(offsets) if offsets else None,
        threshold=float(cfg.get("classify", {}).get("threshold", 1e-3)),
        settings=settings,
    )
    result: Classification = classify(family, levels, ccfg)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "config_sha256": _config_hash(cfg),
        "seed": settings.seed,
        "classification": result.to_dict(),
    }
    with _Output(args, cfg) as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.verdict == "not_characterized" and result.blocked_by_errors:
        return 3
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    family = _build_family(cfg)
    settings = _build_settings(cfg, args.seed)
    levels = _levels(cfg, family)
    offsets = _offsets(cfg)
    if not offsets:
        raise ConfigError("sweep needs a nonempty offsets list")
    x = np.asarray(cfg.get("sweep", {}).get("x", [0.0] * family.n), dtype=float)

    tasks = [(k, h) for k in levels for h in offsets]

    def run(task):
        k, h = task
        try:
            p = point_on_level(family, k, x)
            sm = starred_measures(family, p, h, settings)
        except QuadrixError as exc:
            return (k, h, None, str(exc))
        return (k, h, sm, "")

    rows = _pmap(run, tasks, _jobs(args))
    with _Output(args, cfg) as fh:
        _emit_header(fh, cfg, settings.seed)
        writer = csv.writer(fh)
        writer.writerow("k h t Vstar Vstar_err Astar Astar_err Sstar Sstar_err error".split())
        for k, h, sm, err in rows:
            if sm is None:
                writer.writerow([_fmt(k), _fmt(h)] + [""] * 7 + [err])
            else:
                writer.writerow([
                    _fmt(k), _fmt(h), _fmt(sm.t),
                    _fmt(sm.volume.value), _fmt(sm.volume.error_estimate),
                    _fmt(sm.area.value), _fmt(sm.area.error_estimate),
                    _fmt(sm.lateral.value), _fmt(sm.lateral.error_estimate),
                    "",
                ])
    return 0


# ---------------------------------------------------------------------------
# Verify suites
# ---------------------------------------------------------------------------


def _verify_fixture_families():
    a = (1.0, 2.0)
    return {
        "elliptic_hyperboloid": LevelFamily(QuadraticForm(a), alpha=2.0, sign="minus"),
        "ellipsoid": LevelFamily(QuadraticForm(a), alpha=2.0, sign="plus"),
        "elliptic_paraboloid": LevelFamily(QuadraticForm(a), alpha=1.0, sign="minus"),
    }


def _suite_lemma7(settings, report):
    """Small-t ratios of the three measures against their curvature limits."""
    ok = True
    t_small = 2.0 ** -10
    for name, family in _verify_fixture_families().items():
        p = point_on_level(family, 1.0, np.zeros(2))
        kcurv = gauss_kronecker(family, p)
        n = family.n
        omega = unit_ball_volume(n)
        lim_a = 2.0 ** (n / 2.0) * omega / math.sqrt(kcurv)
        lim_v = 2.0 ** ((n + 2) / 2.0) * omega / ((n + 2) * math.sqrt(kcurv))
        ratio_a = section_area(family, p, t_small, settings).value / t_small ** (n / 2.0)
        ratio_v = cap_volume(family, p, t_small, settings).value / t_small ** ((n + 2) / 2.0)
        for tag, got, lim in (("area", ratio_a, lim_a), ("volume", ratio_v, lim_v)):
            rel = abs(got - lim) / lim
            ok &= report(f"small_t/{tag}/{name}", rel <= 0.02, f"ratio={got:.6g} limit={lim:.6g} rel={rel:.2e}")
    return ok


def _suite_derivative(settings, report):
    """Central difference of the cap volume against the section area."""
    ok = True
    rng = np.random.default_rng(settings.seed)
    fams = list(_verify_fixture_families().items())
    worst = 0.0
    for i in range(10):
        name, family = fams[i % 3]
        x = rng.uniform(-0.8, 0.8, size=2)
        if family.sign == "plus":
            x *= 0.3
        p = point_on_level(family, 1.0, x)
        t = 0.2 + 0.1 * (i % 4) / 4.0
        if family.sign == "plus":
            t = min(t, 0.25)
        worst = max(worst, derivative_check(family, p, t, 1e-3, settings))
    ok &= report("derivative/max_ratio", worst <= 1e-3, f"max={worst:.2e} tol=1e-3")
    return ok


def _suite_refutation(settings, report):
    """Lateral-area spread and the mean-value contradiction witnesses."""
    ok = True
    a = (2.0, 1.0)
    family = LevelFamily(QuadraticForm(a), alpha=2.0, sign="minus")
    k, h = 1.0, 0.5
    xs = [np.array([0.0, 0.0]), np.array([1.5, 0.0]), np.array([0.7, 0.7]), np.array([0.0, 1.2])]
    points = [point_on_level(family, k, x) for x in xs]
    rep = check_condition(family, k, "Sstar", [h], points, settings=settings)
    spread = rep.spreads[0]
    ok &= report("lateral/spread", spread >= 0.05, f"spread={spread:.4f} (>= 5%)")
    for kk in (0.5, 1.0):
        for hh in (0.25, 1.0):
            theta = refutation_theta(kk, hh, a)
            ok &= report(f"mean_value/theta(k={kk},h={hh})", theta > 1.0, f"theta={theta:.6f}")
    r0 = mean_value_ratio(np.zeros(2), a, 1.0, 0.25)
    r10 = mean_value_ratio(np.array([10.0, 0.0]), a, 1.0, 0.25)
    diff = abs(r0 - r10) / r0
    ok &= report("mean_value/ratio_variation", diff >= 0.05, f"r(0)={r0:.4f} r(10,0)={r10:.4f} diff={diff:.2%}")
    return ok


def _suite_invariant(settings, report):
    ok = True
    for name, family in _verify_fixture_families().items():
        kind_a = family.f.a
        for k in (0.5, 1.0, 2.0):
            points = sample_points(family, k, 8, settings.seed, box=(-0.3, 0.3))
            target = invariant_constant(name, kind_a, k)
            worst = max(abs(curvature_invariant(family, p) - target) / target for p in points)
            ok &= report(f"invariant/{name}/k={k}", worst <= 1e-8, f"max_rel={worst:.2e}")
    return ok


def _suite_determinant(settings, report):
    ok = True
    for name in ("elliptic_hyperboloid", "ellipsoid"):
        family = _verify_fixture_families()[name]
        points = sample_points(family, 1.0, 20, settings.seed, box=(-0.3, 0.3))
        worst = max(determinant_identity_residual(family, p) for p in points)
        ok &= report(f"determinant/{name}", worst <= 1e-10, f"max_rel={worst:.2e}")
    return ok


def _suite_scaling(settings, report):
    """Paraboloid cap volumes scale as h^((n+2)/2) with the predicted constant."""
    family = LevelFamily(QuadraticForm((1.0, 1.0)), alpha=1.0, sign="minus")
    p = point_on_level(family, 1.0, np.zeros(2))
    hs = [2.0 ** -j for j in range(1, 7)]
    vols = [starred_measures(family, p, h, settings).volume.value for h in hs]
    slope, intercept = np.polyfit(np.log(hs), np.log(vols), 1)
    gamma2 = paraboloid_starred((1.0, 1.0), 1.0, 1.0)[0]
    ok = report("scaling/slope", abs(slope - 2.0) <= 0.01, f"slope={slope:.5f}")
    rel = abs(math.exp(intercept) - gamma2) / gamma2
    ok &= report("scaling/intercept", rel <= 0.01, f"exp(b)={math.exp(intercept):.6f} target={gamma2:.6f}")
    return ok


def cmd_verify(args) -> int:
    cfg = _load_config(args.config) if args.config else {}
    settings = _build_settings(cfg, args.seed)
    failures = 0

    def report(name: str, passed: bool, detail: str) -> bool:
        nonlocal failures
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        if not passed:
            failures += 1
        return passed

    for suite in (_suite_invariant, _suite_determinant, _suite_lemma7,
                  _suite_derivative, _suite_scaling, _suite_refutation):
        suite(settings, report)
    print(f"{'OK' if failures == 0 else 'FAILED'}: {failures} failing checks")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadrix", description=__doc__)
    parser.add_argument("--version", action="version", version=f"quadrix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("curvature", cmd_curvature, True),
        ("measures", cmd_measures, True),
        ("classify", cmd_classify, True),
        ("verify", cmd_verify, False),
        ("sweep", cmd_sweep, True),
    ):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=needs_config, help="path to the JSON run config")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=None, help="output path (default: config output.path or stdout)")
        sp.add_argument("--jobs", type=int, default=None,
                        help="worker threads (default: QUADRIX_JOBS or 1)")
        sp.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
