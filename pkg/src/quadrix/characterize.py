"""Empirical constancy tests and classification of level-set families.

For a family g = z^alpha -/+ f and a level k, the starred cap measures are
evaluated over a sampled set of surface points and a grid of level
offsets.  Point-independence of the normalized measures (and of the
curvature invariant) is what characterizes the three quadric families, so
the per-offset relative spread across points is the deciding statistic.

Verdicts are empirical: finite sampling can support or falsify constancy
on the sampled set, never prove it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import QuadrixError
from .funcspec import FunctionSpec, QuadraticForm, eval_jet2
from .measure import QuadratureSettings, starred_measures
from .quadrics import invariant_constant
from .surface import LevelFamily, SurfacePoint, curvature_invariant, point_on_level

__all__ = [
    "CONDITIONS",
    "ConstancyReport",
    "Classification",
    "ClassifyConfig",
    "sample_points",
    "check_condition",
    "check_invariant_constancy",
    "check_det_hessian",
    "determinant_identity_residual",
    "classify",
]

CONDITIONS = ("Vstar", "Astar", "Sstar", "curvature_invariant", "det_hessian")

DEFAULT_BOX = (-2.0, 2.0)
DEFAULT_THRESHOLD = 1e-3


@dataclass
class ConstancyReport:
    """Per-condition value matrix over sampled points and offsets, with a verdict.

    values[i][j] is the normalized quantity at point i and offset j (a
    single column for the offset-free conditions); spreads[j] is the
    relative spread (max - min) / mean down column j.
    """

    condition: str
    level: float | None
    offsets: list[float]
    points: list[list[float]]
    values: np.ndarray
    value_errors: np.ndarray
    spreads: list[float]
    verdict: str
    threshold: float
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    matched_constant: float | None = None

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "level": self.level,
            "offsets": list(self.offsets),
            "points": [list(map(float, p)) for p in self.points],
            "values": [[_jsonable(v) for v in row] for row in self.values.tolist()],
            "spreads": [_jsonable(s) for s in self.spreads],
            "verdict": self.verdict,
            "threshold": self.threshold,
            "errors": list(self.errors),
            "warnings": list(self.warnings),
            "matched_constant": self.matched_constant,
        }


def _jsonable(v: float):
    return None if v is None or not np.isfinite(v) else float(v)


def _verdict(spreads, threshold: float) -> str:
    finite = [s for s in spreads if np.isfinite(s)]
    if not finite:
        return "inconclusive"
    if all(s <= threshold for s in finite):
        return "constant"
    if any(s > 3.0 * threshold for s in finite):
        return "non_constant"
    return "inconclusive"


def _column_spread(col: np.ndarray) -> float:
    valid = col[np.isfinite(col)]
    if valid.size < 2:
        return np.nan
    mean = float(np.mean(valid))
    if mean == 0.0:
        return np.inf
    return float((np.max(valid) - np.min(valid)) / abs(mean))


def _normalize_box(box, n: int) -> list[tuple[float, float]]:
    if box is None:
        box = DEFAULT_BOX
    box = list(box)
    if len(box) == 2 and np.isscalar(box[0]):
        box = [tuple(box)] * n
    if len(box) != n:
        raise ValueError(f"box must have {n} coordinate ranges")
    out = []
    for lo, hi in box:
        if not lo < hi:
            raise ValueError("box ranges must be increasing")
        out.append((float(lo), float(hi)))
    return out


def sample_coordinates(n: int, count: int, seed: int, box=None) -> np.ndarray:
    """Seeded low-discrepancy base coordinates in the box, shape (count, n)."""
    ranges = _normalize_box(box, n)
    sampler = qmc.Halton(d=n, scramble=True, seed=seed)
    raw = sampler.random(count)
    lo = np.array([r[0] for r in ranges])
    hi = np.array([r[1] for r in ranges])
    return lo + raw * (hi - lo)


def sample_points(
    family: LevelFamily,
    k: float,
    count: int,
    seed: int,
    box=None,
) -> list[SurfacePoint]:
    """Lift a seeded low-discrepancy sample of base coordinates onto M_k.

    Draws count candidates from a scrambled Halton set in the box
    (default [-2, 2]^n); candidates with no admissible z > 0 branch or a
    failed convexity certificate are skipped with a warning.  Fewer than
    two admissible points is an error.
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    xs = sample_coordinates(family.n, count, seed, box)

    points: list[SurfacePoint] = []
    skipped = 0
    for x in xs:
        try:
            p = point_on_level(family, k, x)
        except QuadrixError:
            skipped += 1
            continue
        if p.f_jet.value < 0:
            warnings.warn(
                f"f({x.tolist()}) = {p.f_jet.value:.6g} < 0: nonnegativity hypothesis fails",
                stacklevel=2,
            )
        points.append(p)
    if skipped:
        warnings.warn(f"skipped {skipped} of {count} sampled points off the admissible set",
                      stacklevel=2)
    if len(points) < 2:
        raise QuadrixError(f"fewer than 2 admissible points at level k={k}")
    return points


def check_condition(
    family: LevelFamily,
    k: float,
    condition: str,
    h_grid,
    points: list[SurfacePoint],
    settings: QuadratureSettings | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> ConstancyReport:
    """Constancy report for one of the starred conditions over points x offsets.

    The cap volume is compared raw; section and lateral areas are divided
    by |grad g(p)| first.  The decision threshold is inflated by quadrature
    error: max(threshold, 5 * median relative error estimate).
    """
    if condition not in ("Vstar", "Astar", "Sstar"):
        raise ValueError(f"condition must be a starred condition, got {condition!r}")
    h_grid = [float(h) for h in h_grid]
    if not h_grid:
        raise ValueError("h_grid must be nonempty")
    if len(points) < 2:
        raise ValueError("need at least 2 points")

    measure_of = {"Vstar": "volume", "Astar": "area", "Sstar": "lateral"}[condition]
    values = np.full((len(points), len(h_grid)), np.nan)
    errors_rel = np.full_like(values, np.nan)
    cell_errors: list[str] = []
    for i, p in enumerate(points):
        for j, h in enumerate(h_grid):
            try:
                sm = starred_measures(family, p, h, settings, want=(measure_of,))
            except QuadrixError as exc:
                cell_errors.append(f"point {i}, h={h:.6g}: {exc}")
                continue
            res = getattr(sm, measure_of)
            norm = 1.0 if condition == "Vstar" else sm.grad_norm
            values[i, j] = res.value / norm
            errors_rel[i, j] = res.error_estimate / abs(res.value) if res.value else np.inf

    for j, h in enumerate(h_grid):
        if np.sum(np.isfinite(values[:, j])) < 2:
            raise QuadrixError(
                f"fewer than 2 points survived at h={h:.6g}: " + "; ".join(cell_errors)
            )

    valid_err = errors_rel[np.isfinite(errors_rel)]
    eff_threshold = threshold
    if valid_err.size:
        eff_threshold = max(threshold, 5.0 * float(np.median(valid_err)))
    spreads = [_column_spread(values[:, j]) for j in range(len(h_grid))]
    return ConstancyReport(
        condition=condition,
        level=k,
        offsets=h_grid,
        points=[p.x.tolist() for p in points],
        values=values,
        value_errors=errors_rel,
        spreads=spreads,
        verdict=_verdict(spreads, eff_threshold),
        threshold=eff_threshold,
        errors=cell_errors,
    )


def check_invariant_constancy(
    family: LevelFamily,
    k: float,
    points: list[SurfacePoint],
    threshold: float = DEFAULT_THRESHOLD,
) -> ConstancyReport:
    """Constancy of K |grad g|^{n+2} over the sampled points of M_k."""
    if len(points) < 2:
        raise ValueError("need at least 2 points")
    values = np.full((len(points), 1), np.nan)
    cell_errors: list[str] = []
    for i, p in enumerate(points):
        try:
            values[i, 0] = curvature_invariant(family, p)
        except QuadrixError as exc:
            cell_errors.append(f"point {i}: {exc}")
    spreads = [_column_spread(values[:, 0])]
    verdict = _verdict(spreads, threshold)
    matched = float(np.nanmean(values)) if verdict == "constant" else None
    return ConstancyReport(
        condition="curvature_invariant",
        level=k,
        offsets=[],
        points=[p.x.tolist() for p in points],
        values=values,
        value_errors=np.zeros_like(values),
        spreads=spreads,
        verdict=verdict,
        threshold=threshold,
        errors=cell_errors,
        matched_constant=matched,
    )


def check_det_hessian(
    f: FunctionSpec,
    sample_x,
    threshold: float = DEFAULT_THRESHOLD,
) -> ConstancyReport:
    """Constancy of det(Hessian of f) over a coordinate sample.

    A constant positive determinant is the fingerprint of the diagonal
    quadratic normal form.
    """
    sample_x = [np.atleast_1d(np.asarray(x, dtype=float)) for x in sample_x]
    if len(sample_x) < 2:
        raise ValueError("need at least 2 sample points")
    values = np.full((len(sample_x), 1), np.nan)
    for i, x in enumerate(sample_x):
        values[i, 0] = float(np.linalg.det(eval_jet2(f, x).hessian))
    spreads = [_column_spread(values[:, 0])]
    verdict = _verdict(spreads, threshold)
    matched = float(np.nanmean(values)) if verdict == "constant" else None
    return ConstancyReport(
        condition="det_hessian",
        level=None,
        offsets=[],
        points=[x.tolist() for x in sample_x],
        values=values,
        value_errors=np.zeros_like(values),
        spreads=spreads,
        verdict=verdict,
        threshold=threshold,
        matched_constant=matched,
    )


def determinant_identity_residual(family: LevelFamily, p: SurfacePoint) -> float:
    """Relative residual of the closed-form determinant identity at p.

    For alpha = 2 diagonal quadratic families,
    det(alpha z^alpha f_ij -/+ (alpha-1) f_i f_j) equals
    alpha^{n-2} c(k) z^{alpha n - 2 alpha + 2}, where the middle sign
    follows the family sign and c(k) is the invariant constant.
    """
    if family.alpha != 2.0 or not isinstance(family.f, QuadraticForm):
        raise ValueError("identity check applies to alpha = 2 diagonal quadratic families")
    kind = "elliptic_hyperboloid" if family.sign == "minus" else "ellipsoid"
    a = family.alpha
    n = family.n
    jet = p.f_jet
    term = np.outer(jet.gradient, jet.gradient) * (a - 1.0)
    mat = a * p.z ** a * jet.hessian + (term if family.sign == "plus" else -term)
    c = invariant_constant(kind, family.f.a, p.k)
    rhs = a ** (n - 2) * c * p.z ** (a * n - 2.0 * a + 2.0)
    return abs(float(np.linalg.det(mat)) - rhs) / abs(rhs)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassifyConfig:
    point_count: int = 6
    box: tuple | None = None
    seed: int = 123456789
    offsets: tuple[float, ...] | None = None  # None: relative defaults per family
    threshold: float = DEFAULT_THRESHOLD
    settings: QuadratureSettings = field(default_factory=QuadratureSettings)


@dataclass
class Classification:
    """Outcome of the decision table over the collected constancy evidence.

    blocked_by_errors distinguishes "not characterized because some
    condition was falsified" (a clean negative) from "not characterized
    because cells errored or stayed inconclusive".
    """

    verdict: str  # elliptic_paraboloid | ellipsoid | elliptic_hyperboloid | not_characterized
    evidence: list[ConstancyReport]
    matched_constant: dict[float, float]
    reasons: list[str]
    blocked_by_errors: bool

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "matched_constant": {repr(k): v for k, v in self.matched_constant.items()},
            "reasons": list(self.reasons),
            "blocked_by_errors": self.blocked_by_errors,
            "evidence": [r.to_dict() for r in self.evidence],
        }


def _normal_form_kind(family: LevelFamily) -> str | None:
    if family.alpha == 1.0 and family.sign == "minus":
        return "elliptic_paraboloid"
    if family.alpha == 2.0 and family.sign == "plus":
        return "ellipsoid"
    if family.alpha == 2.0 and family.sign == "minus":
        return "elliptic_hyperboloid"
    return None


def default_box(family: LevelFamily, k: float):
    """Sampling box for classify: [-2, 2]^n except for bounded plus-sign families.

    For g = z^alpha + f the admissible set {f < k} shrinks with k, so the
    box is scaled into it using the quadratic coefficients when available.
    """
    if family.sign != "plus":
        return None  # sample_points default [-2, 2]^n
    f = family.f
    a = getattr(f, "a", None)
    if a is None:
        return None
    half = 0.8 * np.sqrt(k / family.n) / np.asarray(a, dtype=float)
    return [(-hw, hw) for hw in half]


def default_offsets(family: LevelFamily, k: float) -> list[float]:
    """Offsets well inside the admissible interval, with the family's sign.

    alpha = 2 families scale with k.  For alpha = 1 the chart-validity
    margin is set by the coefficients of f rather than by k, so the
    defaults are small absolute offsets.
    """
    if family.sign == "plus":
        return [-0.25 * k, -0.5 * k]
    if family.alpha == 1.0:
        return [0.1, 0.2]
    return [0.5 * k, 1.0 * k]


def classify(family: LevelFamily, k_list, config: ClassifyConfig | None = None) -> Classification:
    """Run the constancy checks per level and apply the decision table.

    A positive verdict needs the curvature invariant and both starred
    conditions (cap volume, normalized section area) constant at every
    level, together with the matching normal form (alpha, sign).  The
    normalized lateral area is never used as positive evidence.
    """
    config = config or ClassifyConfig()
    k_list = [float(k) for k in k_list]
    if not k_list:
        raise ValueError("need at least one level")

    evidence: list[ConstancyReport] = []
    matched: dict[float, float] = {}
    reasons: list[str] = []
    had_errors = False
    verdicts: list[str] = []

    for k in k_list:
        box = config.box if config.box is not None else default_box(family, k)
        try:
            points = sample_points(family, k, config.point_count, config.seed, box)
        except QuadrixError as exc:
            reasons.append(f"k={k:.6g}: sampling failed: {exc}")
            had_errors = True
            continue
        inv = check_invariant_constancy(family, k, points, config.threshold)
        evidence.append(inv)
        verdicts.append(inv.verdict)
        if inv.matched_constant is not None:
            matched[k] = inv.matched_constant
        offsets = list(config.offsets) if config.offsets else default_offsets(family, k)
        for condition in ("Vstar", "Astar"):
            try:
                rep = check_condition(
                    family, k, condition, offsets, points,
                    settings=config.settings, threshold=config.threshold,
                )
            except QuadrixError as exc:
                reasons.append(f"k={k:.6g} {condition}: {exc}")
                had_errors = True
                continue
            evidence.append(rep)
            verdicts.append(rep.verdict)
            if rep.errors:
                had_errors = True

    if not evidence:
        return Classification("not_characterized", evidence, matched, reasons, True)

    kind = _normal_form_kind(family)
    falsified = any(v == "non_constant" for v in verdicts)
    undecided = any(v == "inconclusive" for v in verdicts) or had_errors
    if falsified:
        reasons.append("some condition is non-constant on the sampled set")
        verdict = "not_characterized"
    elif undecided:
        reasons.append("inconclusive or failed cells prevent a positive verdict")
        verdict = "not_characterized"
    elif kind is None:
        reasons.append(f"alpha={family.alpha:g}, sign={family.sign}: no matching normal form")
        verdict = "not_characterized"
    else:
        verdict = kind
    blocked = verdict == "not_characterized" and not falsified and undecided
    return Classification(verdict, evidence, matched, reasons, blocked)
