"""Implicit geometry of the level sets of g(x, z) = z^alpha -/+ f(x), z > 0.

A level set M_k = {g = k} is treated as a strictly convex hypersurface in
R^{n+1}.  This module lifts points onto M_k, orients the unit normal
toward the convex side, computes Gauss-Kronecker curvature and the scalar
invariant K |grad g|^{n+2}, provides the tangent-plane graph chart used by
the integration routines, and solves the parallel-tangent problem linking
M_k to nearby levels M_{k+h}.

Everything here is pure and operates on immutable inputs; the batched
chart solver is safe to call concurrently from several threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BranchError, ConvexityError, QuadrixError, RegionError, TangencyError
from .funcspec import FunctionSpec, Jet2, QuadraticForm, eval_jet2, eval_value_grad

__all__ = [
    "LevelFamily",
    "SurfacePoint",
    "TangencyResult",
    "point_on_level",
    "gauss_kronecker",
    "curvature_invariant",
    "local_graph",
    "parallel_tangent",
    "offset_map_h",
    "LocalChart",
]

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50
CHART_MAXITER = 100
_GROW_MAXITER = 120
_GROW_FACTOR = 1.6


@dataclass(frozen=True)
class LevelFamily:
    """The ambient function g(x, z) = z^alpha + sign * f(x) on the z > 0 branch.

    sign is "minus" (g = z^alpha - f) or "plus" (g = z^alpha + f).
    """

    f: FunctionSpec
    alpha: float
    sign: str = "minus"

    def __post_init__(self):
        if self.alpha == 0:
            raise ValueError("alpha must be nonzero")
        if self.sign not in ("minus", "plus"):
            raise ValueError("sign must be 'minus' or 'plus'")

    @property
    def n(self) -> int:
        return self.f.n

    @property
    def sf(self) -> float:
        """Sign with which f enters g: -1 for 'minus', +1 for 'plus'."""
        return -1.0 if self.sign == "minus" else 1.0

    def _zpow(self, z: np.ndarray, expo: float) -> np.ndarray:
        """z**expo honoring the z > 0 branch; NaN marks off-branch points."""
        z = np.asarray(z, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if float(self.alpha).is_integer() and float(expo).is_integer():
                return z ** expo
            out = np.where(z > 0, z, np.nan)
            return out ** expo

    def g_values_grads(self, X: np.ndarray, Z: np.ndarray):
        """g and its ambient gradient, batched; gradients have shape (M, n+1)."""
        fv, fg = eval_value_grad(self.f, X)
        g = self._zpow(Z, self.alpha) + self.sf * fv
        gz = self.alpha * self._zpow(Z, self.alpha - 1.0)
        grad = np.concatenate([self.sf * fg, gz[:, None]], axis=1)
        return g, grad

    def ambient_gradient(self, jet: Jet2, z: float) -> np.ndarray:
        gz = self.alpha * z ** (self.alpha - 1.0)
        return np.concatenate([self.sf * jet.gradient, [gz]])

    def ambient_hessian(self, jet: Jet2, z: float) -> np.ndarray:
        n = self.n
        h = np.zeros((n + 1, n + 1))
        h[:n, :n] = self.sf * jet.hessian
        if self.alpha != 1.0:
            h[n, n] = self.alpha * (self.alpha - 1.0) * z ** (self.alpha - 2.0)
        return h

    def solve_z(self, k: float, fval: float) -> float:
        """The real branch solution of g(x, z) = k given f(x).

        Even and non-integer alpha use the positive branch z > 0; odd
        integer alpha has a unique real root (alpha = 1 level sets are
        global graphs and may dip through z = 0).
        """
        base = k - self.sf * fval  # z^alpha
        alpha = float(self.alpha)
        if alpha.is_integer() and int(alpha) % 2 == 1:
            return float(np.sign(base) * abs(base) ** (1.0 / alpha))
        if base <= 0:
            raise BranchError(
                f"no z > 0 branch at level k={k}: z^alpha would be {base:.6g}"
            )
        return float(base ** (1.0 / self.alpha))


@dataclass(frozen=True)
class SurfacePoint:
    """A point p = (x, z) on M_k with cached gradient, normal and tangent frame.

    normal points to the convex side; frame columns are an orthonormal basis
    of the tangent space.  graph_hessian is the Hessian of z(x) at x, and
    sigma_up = +1 when the convex side lies above the graph.
    """

    x: np.ndarray
    z: float
    k: float
    grad_g: np.ndarray
    normal: np.ndarray
    frame: np.ndarray
    f_jet: Jet2
    graph_hessian: np.ndarray
    sigma_up: float

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def ambient(self) -> np.ndarray:
        return np.concatenate([self.x, [self.z]])

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad_g))


def _is_positive_definite(m: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(m)
        return True
    except np.linalg.LinAlgError:
        return False


def _complete_frame(normal: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to a unit vector."""
    d = normal.shape[0]
    basis = np.eye(d)
    # put the axis most aligned with the normal first so QR keeps full rank
    pivot = int(np.argmax(np.abs(normal)))
    basis[:, [0, pivot]] = basis[:, [pivot, 0]]
    m = np.column_stack([normal, basis[:, 1:]])
    q, _ = np.linalg.qr(m)
    return q[:, 1:]


def _graph_hessian(family: LevelFamily, jet: Jet2, z: float) -> np.ndarray:
    """Hessian of the graph z(x) solving g(x, z) = k, from exact f_i, f_ij."""
    a = family.alpha
    if a == 1.0:
        # the z factors cancel exactly; avoid 0/0 at z = 0
        return -family.sf * jet.hessian
    outer = np.outer(jet.gradient, jet.gradient)
    if family.sign == "minus":
        core = a * z ** a * jet.hessian - (a - 1.0) * outer
        return core / (a ** 2 * z ** (2 * a - 1.0))
    # g = z^alpha + f: differentiating the solve flips the sign of f
    core = a * z ** a * jet.hessian + (a - 1.0) * outer
    return -core / (a ** 2 * z ** (2 * a - 1.0))


def point_on_level(family: LevelFamily, k: float, x: np.ndarray) -> SurfacePoint:
    """Lift x to the z > 0 branch of M_k and certify convexity there.

    The convex-side orientation is chosen from the sign that makes the
    graph Hessian positive definite (Cholesky certificate); an indefinite
    Hessian raises ConvexityError.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    jet = eval_jet2(family.f, x)
    z = family.solve_z(k, jet.value)
    grad_g = family.ambient_gradient(jet, z)

    zhess = _graph_hessian(family, jet, z)
    if _is_positive_definite(zhess):
        sigma_up = 1.0
    elif _is_positive_definite(-zhess):
        sigma_up = -1.0
    else:
        raise ConvexityError(
            f"indefinite shape operator at x={x.tolist()}, k={k}: surface not strictly convex there"
        )

    grad_z = -family.sf * jet.gradient / (family.alpha * z ** (family.alpha - 1.0))
    up = np.concatenate([-grad_z, [1.0]])
    normal = sigma_up * up / np.sqrt(1.0 + grad_z @ grad_z)
    frame = _complete_frame(normal)
    return SurfacePoint(
        x=x,
        z=z,
        k=k,
        grad_g=grad_g,
        normal=normal,
        frame=frame,
        f_jet=jet,
        graph_hessian=zhess,
        sigma_up=sigma_up,
    )


def gauss_kronecker(family: LevelFamily, p: SurfacePoint) -> float:
    """Gauss-Kronecker curvature of M_k at p toward the convex side.

    det of the convexly-oriented graph Hessian over (1 + |grad z|^2)^{(n+2)/2},
    assembled from the exact derivatives of f.
    """
    n = p.n
    det = float(np.linalg.det(p.sigma_up * p.graph_hessian))
    if det <= 0:
        raise ConvexityError(f"nonpositive curvature at x={p.x.tolist()}: convexity fails")
    grad_z = -family.sf * p.f_jet.gradient / (family.alpha * p.z ** (family.alpha - 1.0))
    return det / (1.0 + grad_z @ grad_z) ** ((n + 2) / 2.0)


def curvature_invariant(family: LevelFamily, p: SurfacePoint) -> float:
    """The scalar K(p) |grad g(p)|^{n+2}, constant on M_k exactly for quadrics."""
    return gauss_kronecker(family, p) * p.grad_norm ** (p.n + 2)


# ---------------------------------------------------------------------------
# Tangent-plane chart
# ---------------------------------------------------------------------------


class LocalChart:
    """Graph coordinates of M_k over the tangent plane at p.

    Chart points are q(y, tau) = p + frame @ y + tau * normal; the surface
    height w(y) >= 0 solves g(q(y, w)) = k.  Solves are vectorized and
    safeguarded: Newton from the osculating-quadric guess, bracket growth,
    bisection fallback.  Leaving the graph region (the chart fold) raises
    RegionError instead of silently switching branches.
    """

    def __init__(self, family: LevelFamily, p: SurfacePoint):
        self.family = family
        self.p = p
        self.origin = p.ambient
        self.normal = p.normal
        self.frame = p.frame
        self.k = p.k
        gn = float(p.grad_g @ p.normal)
        self.sigma_g = 1.0 if gn > 0 else -1.0
        hg = family.ambient_hessian(p.f_jet, p.z)
        # second fundamental form w.r.t. the convex-side normal, frame coords
        self.second_form = -(p.frame.T @ hg @ p.frame) / gn
        if not _is_positive_definite(self.second_form):
            raise ConvexityError("second fundamental form not positive definite at chart origin")
        eigs = np.linalg.eigvalsh(self.second_form)
        # conservative radius inside which the Newton solve needs no safeguard
        self.trust_radius = 0.9 / float(eigs[-1])
        self._scale = 1.0 + abs(self.k)

    def _chart_points(self, Y: np.ndarray, tau: np.ndarray):
        q = self.origin[None, :] + Y @ self.frame.T + tau[:, None] * self.normal[None, :]
        return q[:, :-1], q[:, -1]

    def _residual(self, Y: np.ndarray, tau: np.ndarray):
        """sigma_g * (g - k) and its tau-derivative; NaN flags off-branch points."""
        X, Z = self._chart_points(Y, tau)
        g, grad = self.family.g_values_grads(X, Z)
        res = self.sigma_g * (g - self.k)
        slope = self.sigma_g * (grad @ self.normal)
        return res, slope

    def taylor_height(self, Y: np.ndarray) -> np.ndarray:
        return 0.5 * np.einsum("mi,ij,mj->m", Y, self.second_form, Y)

    def height(self, Y: np.ndarray, on_fail: str = "raise",
               cap: float | None = None, cap_exceed: str = "fail") -> np.ndarray:
        """Graph heights w for a batch of chart offsets Y, shape (M, n).

        When cap is given the root is known to lie in [0, cap], so the
        bracket is immediate; lanes whose height exceeds the cap are
        reported +inf if cap_exceed="outside" (rejection-sampling use) and
        count as failures otherwise.  Without a cap the upper bracket is
        grown from the osculating-quadric guess.  on_fail="mask" turns
        failures into +inf instead of raising.
        """
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        m = Y.shape[0]
        tol = NEWTON_TOL * self._scale
        failed = np.zeros(m, dtype=bool)
        outside = np.zeros(m, dtype=bool)
        lo = np.zeros(m)

        if cap is not None:
            hi = np.full(m, float(cap))
            res_hi, _ = self._residual(Y, hi)
            beyond = ~(res_hi >= 0.0)  # height above cap, or off branch (NaN)
            if cap_exceed == "outside":
                outside = beyond
            else:
                failed = beyond
        else:
            hi = 2.0 * self.taylor_height(Y) + 1e-9
            need = np.ones(m, dtype=bool)
            for _ in range(_GROW_MAXITER):
                if not need.any():
                    break
                res_hi, _ = self._residual(Y[need], hi[need])
                idx = np.flatnonzero(need)
                below = np.isfinite(res_hi) & (res_hi < 0)
                lo[idx[below]] = hi[idx[below]]
                still = idx[~(res_hi >= 0.0)]  # NaN keeps growing until exhaustion
                hi[still] *= _GROW_FACTOR
                need = np.zeros(m, dtype=bool)
                need[still] = True
            failed |= need

        skip = failed | outside
        tau = np.where(skip, 0.0, np.clip(self.taylor_height(Y), lo, hi))
        done = skip.copy()  # failed/outside lanes are left alone
        for _ in range(CHART_MAXITER):
            res, slope = self._residual(Y, tau)
            done = skip | (np.abs(res) <= tol)
            if done.all():
                break
            lo = np.where(~done & (res < 0), np.maximum(lo, tau), lo)
            hi = np.where(~done & (res > 0), np.minimum(hi, tau), hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = tau - res / np.where(slope > 0, slope, np.nan)
            bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
            tau = np.where(done, tau, np.where(bad, 0.5 * (lo + hi), cand))
        failed |= ~done

        if failed.any():
            if on_fail != "mask":
                y0 = Y[int(np.flatnonzero(failed)[0])]
                raise RegionError(
                    f"graph-height solve failed at chart offset y={y0.tolist()} "
                    f"({int(failed.sum())} of {m} points): region escapes the chart"
                )
            outside |= failed
        return np.where(outside, np.inf, tau)

    def gradient_at(self, Y: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Exact chart gradient of w at already-solved heights (implicit differentiation)."""
        X, Z = self._chart_points(np.atleast_2d(Y), np.atleast_1d(w))
        _, grad = self.family.g_values_grads(X, Z)
        denom = grad @ self.normal
        return -(grad @ self.frame) / denom[:, None]

    def height_and_gradient(self, Y: np.ndarray):
        """w and its exact chart gradient, via implicit differentiation."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        w = self.height(Y)
        return w, self.gradient_at(Y, w)

    def boundary_radius(self, U: np.ndarray, t: float) -> np.ndarray:
        """Radii rho with w(rho u) = t, solved on the section plane itself.

        U holds unit chart directions, shape (M, n).  Raises RegionError when
        t exceeds the cap height or the section crosses the chart fold.
        """
        U = np.atleast_2d(np.asarray(U, dtype=float))
        m = U.shape[0]
        tol = NEWTON_TOL * self._scale
        dirs = U @ self.frame.T
        base = self.origin + t * self.normal

        def residual(rho):
            q = base[None, :] + rho[:, None] * dirs
            g, grad = self.family.g_values_grads(q[:, :-1], q[:, -1])
            res = self.sigma_g * (g - self.k)
            slope = self.sigma_g * np.einsum("mi,mi->m", grad, dirs)
            return res, slope

        res0, _ = residual(np.zeros(m))
        if not np.all(res0 > 0):
            raise RegionError(f"offset t={t:.6g} is not below the cap top at this point")

        kappa = np.einsum("mi,ij,mj->m", U, self.second_form, U)
        guess = np.sqrt(2.0 * t / kappa)
        lo = np.zeros(m)
        hi = guess.copy()
        need = np.ones(m, dtype=bool)
        for _ in range(_GROW_MAXITER):
            if not need.any():
                break
            sub_q = base[None, :] + hi[need, None] * dirs[need]
            g, grad = self.family.g_values_grads(sub_q[:, :-1], sub_q[:, -1])
            res_hi = self.sigma_g * (g - self.k)
            idx = np.flatnonzero(need)
            inside = np.isfinite(res_hi) & (res_hi > 0)
            lo[idx[inside]] = hi[idx[inside]]
            still = idx[~(res_hi <= 0.0)]
            hi[still] *= _GROW_FACTOR
            need = np.zeros(m, dtype=bool)
            need[still] = True
        if need.any():
            raise RegionError(f"section boundary not found at t={t:.6g}: region escapes the chart")

        rho = np.clip(guess, lo, hi)
        done = np.zeros(m, dtype=bool)
        for _ in range(CHART_MAXITER):
            res, slope = residual(rho)
            done = np.abs(res) <= tol
            if done.all():
                break
            lo = np.where(~done & (res > 0), np.maximum(lo, rho), lo)
            hi = np.where(~done & (res < 0), np.minimum(hi, rho), hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = rho - res / np.where(slope != 0, slope, np.nan)
            bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
            rho = np.where(done, rho, np.where(bad, 0.5 * (lo + hi), cand))
        if not done.all():
            raise RegionError(f"section boundary solve stalled at t={t:.6g}")

        # fold check: the surface must still be a graph over the chart there
        q = base[None, :] + rho[:, None] * dirs
        _, grad = self.family.g_values_grads(q[:, :-1], q[:, -1])
        if not np.all(self.sigma_g * (grad @ self.normal) > 0):
            raise RegionError(f"section at t={t:.6g} crosses the chart fold")
        return rho


def local_graph(family: LevelFamily, p: SurfacePoint, y: np.ndarray) -> float:
    """Height w(y) of M_k over its tangent plane at p, at chart offset y.

    w(0) = 0 and grad w(0) = 0; solved by safeguarded 1-D Newton along the
    convex-side normal from the osculating-quadric initial guess.
    """
    chart = LocalChart(family, p)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(chart.height(y[None, :])[0])


# ---------------------------------------------------------------------------
# Parallel tangent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TangencyResult:
    """Tangency point v on M_{k+h} whose tangent plane is parallel to the one at p.

    t is the distance from p to that tangent plane, measured along the
    convex-side normal at p; scale is the positive gradient ratio picking
    the near tangency over the antipodal one.
    """

    v: SurfacePoint
    t: float
    newton_iterations: int
    scale: float


def offset_sign(p: SurfacePoint) -> float:
    """Direction of admissible level offsets: sign of <grad g, normal> at p."""
    return 1.0 if p.grad_g @ p.normal > 0 else -1.0


def parallel_tangent(family: LevelFamily, p: SurfacePoint, h: float) -> TangencyResult:
    """Find v on M_{k+h} with grad g(v) = lambda * grad g(p), lambda > 0.

    Newton on the (n+2)-unknown system {g(v) = k + h, grad g(v) - lambda
    grad g(p) = 0}, started from the first-order offset of p along its
    normal.  lambda > 0 picks the tangency on the same side as p.
    """
    if h == 0 or np.sign(h) != offset_sign(p):
        raise TangencyError(f"offset h={h:.6g} is outside the admissible interval at this point")
    n = p.n
    q = p.grad_g
    target = p.k + h

    gn = float(q @ p.normal)
    v = p.ambient + (h / gn) * p.normal
    if v[-1] <= 0:
        v = p.ambient.copy()
        v[-1] = 0.5 * p.z
    lam = 1.0

    scale = max(1.0, abs(target), float(np.max(np.abs(q))))

    def residual(vv, ll):
        jet = eval_jet2(family.f, vv[:n])
        gval = vv[-1] ** family.alpha + family.sf * jet.value
        grad = family.ambient_gradient(jet, vv[-1])
        return np.concatenate([[gval - target], grad - ll * q]), jet, grad

    res, jet, grad = residual(v, lam)
    iterations = 0
    for iterations in range(1, NEWTON_MAXITER + 1):
        if np.max(np.abs(res)) <= NEWTON_TOL * scale:
            break
        jac = np.zeros((n + 2, n + 2))
        jac[0, : n + 1] = grad
        jac[1:, : n + 1] = family.ambient_hessian(jet, v[-1])
        jac[1:, n + 1] = -q
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise TangencyError("singular Jacobian in parallel-tangent solve") from exc
        # damped step: keep z positive and do not let the residual grow
        norm_old = float(np.linalg.norm(res))
        damp = 1.0
        while damp > 1e-10 and v[-1] - damp * step[n] <= 0:
            damp *= 0.5
        for _ in range(40):
            v_new = v - damp * step[: n + 1]
            lam_new = lam - damp * step[n + 1]
            res_new, jet_new, grad_new = residual(v_new, lam_new)
            if np.all(np.isfinite(res_new)) and np.linalg.norm(res_new) <= (1.0 - 0.25 * damp) * norm_old:
                break
            damp *= 0.5
            if v_new[-1] <= 0 or damp <= 1e-10:
                raise TangencyError(f"parallel-tangent iteration stalled for h={h:.6g}")
        v, lam, res, jet, grad = v_new, lam_new, res_new, jet_new, grad_new
    else:
        raise TangencyError(f"parallel-tangent Newton did not converge for h={h:.6g}")

    if lam <= 0:
        raise TangencyError("wrong branch: tangency found with opposite gradient direction")
    vp = point_on_level(family, target, v[:n])
    # sine of the angle between the normals; arccos of the dot product
    # cannot resolve angles this small
    angle = float(np.linalg.norm(vp.normal - (vp.normal @ p.normal) * p.normal))
    if angle > 1e-9:
        raise TangencyError(f"tangency normals misaligned by {angle:.3g} rad")
    t = float((vp.ambient - p.ambient) @ p.normal)
    if t <= 0:
        raise TangencyError("tangency distance came out nonpositive")
    return TangencyResult(v=vp, t=t, newton_iterations=iterations, scale=float(lam))


def offset_map_h(family: LevelFamily, p: SurfacePoint, t: float) -> float:
    """Level offset h(t) reached at normal distance t from p (h(0) = 0).

    Closed form for alpha = 2 diagonal quadratic families, where
    h = |grad g|^2 t^2 / (4k) +/- |grad g| t with the sign of the family;
    otherwise computed by inverting the parallel-tangent distance t(h).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    gnorm = p.grad_norm

    if family.alpha == 2.0 and isinstance(family.f, QuadraticForm):
        k = p.k
        if family.sign == "minus":
            return gnorm ** 2 * t ** 2 / (4.0 * k) + gnorm * t
        tmax = 2.0 * k / gnorm
        if t >= tmax:
            raise RegionError(f"t={t:.6g} beyond the admissible range (max {tmax:.6g})")
        return gnorm ** 2 * t ** 2 / (4.0 * k) - gnorm * t

    sgn = offset_sign(p)

    def t_of(mu: float) -> float:
        return parallel_tangent(family, p, sgn * mu).t

    # bracket the monotone map t(|h|) around the first-order guess
    mu_lo, t_lo = 0.0, 0.0
    mu = gnorm * t
    mu_bad = None
    mu_hi = None
    for _ in range(200):
        try:
            tv = t_of(mu)
        except QuadrixError:
            mu_bad = mu
            mu = 0.5 * (mu_lo + mu)
            continue
        if tv >= t:
            mu_hi = mu
            break
        mu_lo, t_lo = mu, tv
        mu = 2.0 * mu if mu_bad is None else 0.5 * (mu + mu_bad)
        if mu_bad is not None and mu_bad - mu_lo <= 1e-13 * (1.0 + mu_bad):
            break
    if mu_hi is None:
        raise RegionError(f"t={t:.6g} beyond the admissible offset range for this family")

    from scipy.optimize import brentq

    mu_star = brentq(lambda m: t_of(m) - t, mu_lo, mu_hi, xtol=1e-15, rtol=8.9e-16)
    return float(sgn * mu_star)
