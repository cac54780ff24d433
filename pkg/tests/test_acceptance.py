"""End-to-end acceptance checks.

One test per criterion; each prints a PASS/FAIL line with the measured
quantity next to its tolerance before asserting, so a full run doubles as
a verification report (run with -s to see every line).
"""

import json
import math
import warnings

import numpy as np
import pytest

from quadrix import (
    ClassifyConfig,
    LevelFamily,
    PerturbedQuadratic,
    QuadraticForm,
    QuadratureSettings,
    cap_volume,
    check_condition,
    curvature_invariant,
    derivative_check,
    determinant_identity_residual,
    gauss_kronecker,
    invariant_constant,
    lateral_area,
    mean_value_ratio,
    point_on_level,
    refutation_theta,
    sample_points,
    section_area,
    starred_measures,
    starred_oracle,
    unit_ball_volume,
)
from quadrix.cli import main

A2 = (1.0, 2.0)


def family_of(kind: str, a=A2) -> LevelFamily:
    alpha, sign = {
        "elliptic_hyperboloid": (2.0, "minus"),
        "ellipsoid": (2.0, "plus"),
        "elliptic_paraboloid": (1.0, "minus"),
    }[kind]
    return LevelFamily(QuadraticForm(a), alpha, sign)


def report(ok: bool, label: str, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    assert ok, f"{label}: {detail}"


def admissible_xs(kind: str, a, k: float, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = np.asarray(a)
    n = len(a)
    if kind == "ellipsoid":
        half = 0.45 * math.sqrt(k / n) / a
    elif kind == "elliptic_paraboloid":
        half = np.minimum(0.8, 0.35 / a ** 2) * np.ones(n)
    else:
        half = np.full(n, 0.8)
    return rng.uniform(-half, half, size=(count, n))


def test_criterion_1_curvature_invariant():
    """Invariant matches its closed-form constant to 1e-8 at 20 points per (family, k)."""
    worst = 0.0
    for kind in ("elliptic_paraboloid", "ellipsoid", "elliptic_hyperboloid"):
        family = family_of(kind)
        for k in (0.5, 1.0, 2.0):
            want = invariant_constant(kind, A2, k)
            for x in admissible_xs(kind, A2, k, 20, seed=101):
                p = point_on_level(family, k, x)
                worst = max(worst, abs(curvature_invariant(family, p) - want) / want)
    report(worst <= 1e-8, "criterion-1 curvature invariant", f"max rel dev {worst:.2e} <= 1e-8")


def test_criterion_2_oracle_vs_quadrature():
    """Starred cap volume and section area match the closed-form oracles on 45 fixtures."""
    coeffs = {1: (1.3,), 2: A2, 3: (1.0, 1.5, 0.7)}
    rel_offsets = {
        "elliptic_hyperboloid": [0.5, 1.0, 0.5, 1.0, 0.75],
        "ellipsoid": [-0.25, -0.5, -0.25, -0.5, -0.4],
        "elliptic_paraboloid": [0.05, 0.1, 0.08, 0.05, 0.1],
    }
    levels = [0.5, 0.5, 1.0, 1.0, 2.0]
    checked = 0
    worst = 0.0
    for kind, rels in rel_offsets.items():
        for n, a in coeffs.items():
            family = family_of(kind, a)
            for i, (k, rel) in enumerate(zip(levels, rels)):
                h = rel * k if kind != "elliptic_paraboloid" else rel
                x = admissible_xs(kind, a, k, 5, seed=200 + n)[i] * 0.9
                p = point_on_level(family, k, x)
                sm = starred_measures(family, p, h)
                v_want, a_want = starred_oracle(kind, a, k, h, p.grad_norm)
                for got, err, want in ((sm.volume.value, sm.volume.error_estimate, v_want),
                                       (sm.area.value, sm.area.error_estimate, a_want)):
                    tol = max(3.0 * err, 0.01 * abs(want))
                    dev = abs(got - want)
                    worst = max(worst, dev / abs(want))
                    assert dev <= tol, f"{kind} n={n} k={k} h={h}: {got} vs {want}"
                checked += 1
    report(checked >= 45, "criterion-2 oracle agreement",
           f"{checked} fixtures within max(3 sigma, 1%), worst rel dev {worst:.2e}")


def test_criterion_3_constancy_on_quadrics():
    """Cap-volume and section-area conditions come back constant with spread <= 1e-3."""
    setups = {
        "elliptic_hyperboloid": (None, [0.5, 1.0]),
        "ellipsoid": ([(-0.25, 0.25), (-0.125, 0.125)], [-0.25, -0.5]),
        "elliptic_paraboloid": (None, [0.1, 0.2]),
    }
    worst = 0.0
    for kind, (box, offsets) in setups.items():
        family = family_of(kind)
        pts = sample_points(family, 1.0, 6, seed=301, box=box)
        for condition in ("Vstar", "Astar"):
            rep = check_condition(family, 1.0, condition, offsets, pts)
            assert rep.verdict == "constant", f"{kind} {condition}: {rep.verdict} {rep.spreads}"
            worst = max(worst, max(rep.spreads))
    report(worst <= 1e-3, "criterion-3 quadric constancy",
           f"all verdicts constant, max spread {worst:.2e} <= 1e-3")


def test_criterion_4_perturbation_sensitivity():
    """A quartic bump of size 0.2 drives the cap-volume spread 10x above the quadric baseline."""
    offsets = [0.5, 1.0]
    base_family = LevelFamily(QuadraticForm((1.0, 1.0)), 2.0, "minus")
    pert_family = LevelFamily(PerturbedQuadratic((1.0, 1.0), 0.2, "quartic"), 2.0, "minus")
    base_pts = sample_points(base_family, 1.0, 6, seed=401)
    pert_pts = sample_points(pert_family, 1.0, 6, seed=401)
    base = check_condition(base_family, 1.0, "Vstar", offsets, base_pts)
    pert = check_condition(pert_family, 1.0, "Vstar", offsets, pert_pts)
    baseline = max(base.spreads)
    spread = max(pert.spreads)
    ok = pert.verdict == "non_constant" and spread >= 10.0 * baseline
    report(ok, "criterion-4 perturbation sensitivity",
           f"verdict {pert.verdict}, spread {spread:.3e} >= 10 x baseline {baseline:.3e}")


def test_criterion_5_lateral_area_refutation():
    """Normalized lateral area is not point-independent, and the mean-value witnesses say why."""
    a = (2.0, 1.0)
    family = family_of("elliptic_hyperboloid", a)
    xs = [np.array([0.0, 0.0]), np.array([1.5, 0.0]), np.array([0.7, 0.7]), np.array([0.0, 1.2])]
    pts = [point_on_level(family, 1.0, x) for x in xs]
    rep = check_condition(family, 1.0, "Sstar", [0.5], pts)
    spread = rep.spreads[0]
    report(spread >= 0.05, "criterion-5a lateral-area spread",
           f"spread {spread:.4f} >= 0.05 across points incl. (0,0) and (1.5,0)")

    thetas = {(k, h): refutation_theta(k, h, a) for k in (0.5, 1.0) for h in (0.25, 1.0)}
    ok = all(v > 1.0 for v in thetas.values())
    report(ok, "criterion-5b mean-value factor",
           "theta > 1 at " + ", ".join(f"(k={k},h={h})={v:.4f}" for (k, h), v in thetas.items()))

    r0 = mean_value_ratio(np.zeros(2), a, 1.0, 0.25)
    r_far = mean_value_ratio(np.array([10.0, 0.0]), a, 1.0, 0.25)
    diff = abs(r0 - r_far) / r0
    report(diff >= 0.05, "criterion-5c mean-value ratio variation",
           f"r(0)={r0:.4f}, r(10,0)={r_far:.4f}, rel diff {diff:.2%} >= 5%")


def test_criterion_6_small_t_limits():
    """Measure ratios converge to the curvature-controlled limits at each vertex."""
    worst = 0.0
    for kind in ("elliptic_hyperboloid", "ellipsoid", "elliptic_paraboloid"):
        family = family_of(kind)
        p = point_on_level(family, 1.0, np.zeros(2))
        kcurv = gauss_kronecker(family, p)
        n = 2
        lim_as = 2.0 ** (n / 2) * unit_ball_volume(n) / math.sqrt(kcurv)
        lim_v = 2.0 ** ((n + 2) / 2) * unit_ball_volume(n) / ((n + 2) * math.sqrt(kcurv))
        for op, power, lim in ((section_area, n / 2, lim_as),
                               (cap_volume, (n + 2) / 2, lim_v),
                               (lateral_area, n / 2, lim_as)):
            ratios = [op(family, p, 2.0 ** -j).value / (2.0 ** -j) ** power for j in range(4, 11)]
            final = abs(ratios[-1] - lim) / lim
            worst = max(worst, final)
    report(worst <= 0.02, "criterion-6 small-offset limits",
           f"final rel error {worst:.2e} <= 2% on all three vertices")


def test_criterion_7_volume_derivative_identity():
    """Central difference of the cap volume reproduces the section area to 1e-3."""
    kinds = ("elliptic_hyperboloid", "ellipsoid", "elliptic_paraboloid")
    worst = 0.0
    for i in range(10):
        kind = kinds[i % 3]
        family = family_of(kind)
        x = admissible_xs(kind, A2, 1.0, 10, seed=700)[i] * 0.8
        p = point_on_level(family, 1.0, x)
        t = [0.1, 0.15, 0.2, 0.12][i % 4]
        if kind == "elliptic_paraboloid":
            t = min(t, 0.1)
        worst = max(worst, derivative_check(family, p, t, 1e-3))
    report(worst <= 1e-3, "criterion-7 derivative identity",
           f"max rel mismatch {worst:.2e} <= 1e-3 over 10 fixtures")


def test_criterion_8_paraboloid_scaling():
    """Cap volumes on the round paraboloid follow gamma_2 h^2."""
    family = LevelFamily(QuadraticForm((1.0, 1.0)), 1.0, "minus")
    p = point_on_level(family, 1.0, np.zeros(2))
    hs = np.array([2.0 ** -j for j in range(6, 0, -1)])
    vols = np.array([starred_measures(family, p, h).volume.value for h in hs])
    slope, intercept = np.polyfit(np.log(hs), np.log(vols), 1)
    gamma2 = math.pi / 2.0
    rel = abs(math.exp(intercept) - gamma2) / gamma2
    ok = abs(slope - 2.0) <= 0.01 and rel <= 0.01
    report(ok, "criterion-8 paraboloid scaling",
           f"slope {slope:.4f} within 2 +- 0.01, intercept off by {rel:.2e} <= 1%")


def test_criterion_9_determinant_identity():
    """The closed-form determinant identity holds to 1e-10 on both alpha=2 families."""
    worst = 0.0
    for kind in ("elliptic_hyperboloid", "ellipsoid"):
        family = family_of(kind)
        for x in admissible_xs(kind, A2, 1.0, 20, seed=901):
            p = point_on_level(family, 1.0, x)
            worst = max(worst, determinant_identity_residual(family, p))
    report(worst <= 1e-10, "criterion-9 determinant identity",
           f"max rel residual {worst:.2e} <= 1e-10 at 20 points per family")


def test_criterion_10_reproducibility(tmp_path):
    """Identical config and seed give byte-identical measure tables."""
    cfg = {
        "family": {"alpha": 2, "sign": "minus", "f": {"kind": "quadratic", "a": [1, 2]}},
        "levels": [1.0, 2.0],
        "offsets": [0.5, 1.0],
        "points": {"count": 4, "seed": 1001},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["measures", "--config", str(path), "--out", str(out1)]) == 0
    assert main(["measures", "--config", str(path), "--out", str(out2)]) == 0
    ok = out1.read_bytes() == out2.read_bytes()
    report(ok, "criterion-10 reproducibility",
           f"two runs produced identical bytes ({len(out1.read_bytes())} bytes)")
