"""Sparse recovery engines.

Two engines cover all six estimators:

* ``solve_weighted_elastic_net`` -- cyclic coordinate descent on
  ``(1/n)||y - H theta||^2 + sum(l2 * theta**2) + sum(l1 * |theta|)``
* ``solve_basis_pursuit`` -- ADMM for ``min sum(w * |theta|) s.t. H theta = y``

The outlier-robust variants are the same problems on the augmented design
``[H | I]`` (see ``augment_outliers``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

DEFAULT_LAMBDA = 1.0
DEFAULT_ALPHA = 0.95
DEFAULT_MU = 0.5


class InfeasibleSystemError(ValueError):
    """The equality system y = H theta has no solution."""


class Method(enum.Enum):
    CS = "cs"
    LASSO = "lasso"
    GLMNET = "glmnet"
    M_CS = "m-cs"
    M_LASSO = "m-lasso"
    M_GLMNET = "m-glmnet"

    @property
    def robust(self) -> bool:
        return self in (Method.M_CS, Method.M_LASSO, Method.M_GLMNET)

    @property
    def base(self) -> "Method":
        return {Method.M_CS: Method.CS, Method.M_LASSO: Method.LASSO,
                Method.M_GLMNET: Method.GLMNET}.get(self, self)

    @property
    def uses_basis_pursuit(self) -> bool:
        return self.base is Method.CS

    @classmethod
    def parse(cls, name) -> "Method":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown method {name!r}")


@dataclass(frozen=True)
class Standardization:
    column_shift: np.ndarray
    column_scale: np.ndarray
    response_shift: float


@dataclass(frozen=True)
class DesignSystem:
    H: np.ndarray
    y: np.ndarray
    standardization: Standardization | None = None

    def __post_init__(self):
        H = np.array(self.H, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=float).ravel()
        if H.shape[0] < 1 or H.shape[1] < 1:
            raise ValueError("design matrix must have at least one row and column")
        if H.shape[0] != y.shape[0]:
            raise ValueError(f"H has {H.shape[0]} rows but y has {y.shape[0]} entries")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def p(self) -> int:
        return self.H.shape[1]


def standardize(sys: DesignSystem) -> DesignSystem:
    """Center y and the columns of H, then scale columns to unit L2 norm.

    Columns that are constant (zero norm after centering) keep scale 1 and
    stay all-zero; the engines pin their coefficients to 0.
    """
    shift = sys.H.mean(axis=0)
    Hc = sys.H - shift
    scale = np.linalg.norm(Hc, axis=0)
    flat = scale <= 1e-12 * max(1.0, np.abs(sys.H).max())
    Hc[:, flat] = 0.0
    scale = np.where(flat, 1.0, scale)
    y_shift = float(sys.y.mean())
    rec = Standardization(column_shift=shift, column_scale=scale, response_shift=y_shift)
    return DesignSystem(H=Hc / scale, y=sys.y - y_shift, standardization=rec)


def destandardize(theta_std, rec: Standardization):
    """Map standardized coefficients back; returns ``(theta, intercept)``."""
    theta = np.asarray(theta_std, dtype=float) / rec.column_scale
    intercept = rec.response_shift - float(rec.column_shift @ theta)
    return theta, intercept


@dataclass(frozen=True)
class PenaltyProfile:
    """Tuning parameters plus optional explicit per-coefficient weights.

    ``estimate`` builds the weights from ``lam``/``alpha``/``mu``; the two
    engines read only ``l1`` and ``l2``.
    """
    lam: float = DEFAULT_LAMBDA
    alpha: float = DEFAULT_ALPHA
    mu: float = DEFAULT_MU
    l1: np.ndarray | None = None
    l2: np.ndarray | None = None

    def __post_init__(self):
        if self.lam < 0 or self.mu < 0:
            raise ValueError("lambda and mu must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        for name in ("l1", "l2"):
            w = getattr(self, name)
            if w is not None:
                w = np.array(w, dtype=float).ravel()
                if np.any(w < 0) or not np.all(np.isfinite(w)):
                    raise ValueError(f"{name} weights must be finite and non-negative")
                object.__setattr__(self, name, w)

    @classmethod
    def lasso(cls, p: int, lam: float) -> "PenaltyProfile":
        return cls(lam=lam, alpha=1.0, l1=np.full(p, lam), l2=np.zeros(p))

    @classmethod
    def glmnet(cls, p: int, lam: float, alpha: float) -> "PenaltyProfile":
        return cls(lam=lam, alpha=alpha, l1=np.full(p, lam * alpha),
                   l2=np.full(p, lam * (1.0 - alpha)))

    @classmethod
    def unit_l1(cls, p: int) -> "PenaltyProfile":
        return cls(l1=np.ones(p), l2=np.zeros(p))

    def with_weights(self, l1, l2=None) -> "PenaltyProfile":
        l1 = np.asarray(l1, dtype=float)
        return replace(self, l1=l1, l2=np.zeros_like(l1) if l2 is None else l2)


def method_penalty(method: Method, p: int, pen: PenaltyProfile) -> PenaltyProfile:
    """Weights on the position block for ``method``'s base formulation."""
    base = Method.parse(method).base
    if base is Method.CS:
        return replace(PenaltyProfile.unit_l1(p), lam=pen.lam, alpha=pen.alpha, mu=pen.mu)
    if base is Method.LASSO:
        return replace(PenaltyProfile.lasso(p, pen.lam), mu=pen.mu)
    return replace(PenaltyProfile.glmnet(p, pen.lam, pen.alpha), mu=pen.mu)


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-7
    max_iterations: int = 10_000
    admm_rho: float = 1.0
    admm_primal_tol: float = 1e-8
    admm_dual_tol: float = 1e-8
    admm_max_iterations: int = 50_000
    admm_relaxation: float = 1.0

    def __post_init__(self):
        if self.tolerance <= 0 or self.admm_primal_tol <= 0 or self.admm_dual_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1 or self.admm_max_iterations < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.admm_rho <= 0:
            raise ValueError("ADMM penalty must be positive")
        if not 0.0 < self.admm_relaxation < 2.0:
            raise ValueError("ADMM relaxation must lie in (0, 2)")


@dataclass(frozen=True)
class SparseSolution:
    theta: np.ndarray
    kappa: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    intercept: float = 0.0
    degenerate: tuple = ()
    history: np.ndarray = field(default=None, repr=False)


@njit(cache=True)
def soft_threshold(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _en_objective(r, theta, l1, l2, n):
    val = 0.0
    for i in range(r.shape[0]):
        val += r[i] * r[i]
    val /= n
    for k in range(theta.shape[0]):
        val += l2[k] * theta[k] * theta[k] + l1[k] * abs(theta[k])
    return val


@njit(cache=True)
def _en_kkt(H, r, theta, l1, l2, sq):
    n, p = H.shape
    worst = 0.0
    for k in range(p):
        if sq[k] == 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += H[i, k] * r[i]
        g = 2.0 * g / n - 2.0 * l2[k] * theta[k]
        if theta[k] == 0.0:
            v = abs(g) - l1[k]
        elif theta[k] > 0.0:
            v = abs(g - l1[k])
        else:
            v = abs(g + l1[k])
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def _coordinate_descent(H, y, l1, l2, theta, tol, max_iter, history):
    n, p = H.shape
    sq = np.zeros(p)
    for k in range(p):
        s = 0.0
        for i in range(n):
            s += H[i, k] * H[i, k]
        sq[k] = s
    r = y.copy()
    for k in range(p):
        if sq[k] == 0.0:
            theta[k] = 0.0
        elif theta[k] != 0.0:
            for i in range(n):
                r[i] -= H[i, k] * theta[k]
    it = 0
    converged = False
    kkt = np.inf
    while it < max_iter:
        biggest = 0.0
        for k in range(p):
            if sq[k] == 0.0:
                continue
            old = theta[k]
            dot = 0.0
            for i in range(n):
                dot += H[i, k] * r[i]
            z = 2.0 * (dot + sq[k] * old) / n
            new = soft_threshold(z, l1[k]) / (2.0 * sq[k] / n + 2.0 * l2[k])
            if new != old:
                d = new - old
                for i in range(n):
                    r[i] -= H[i, k] * d
                theta[k] = new
                if abs(d) > biggest:
                    biggest = abs(d)
        history[it] = _en_objective(r, theta, l1, l2, n)
        it += 1
        if biggest < tol:
            kkt = _en_kkt(H, r, theta, l1, l2, sq)
            if kkt <= tol:
                converged = True
                break
    if not converged:
        kkt = _en_kkt(H, r, theta, l1, l2, sq)
    return it, converged, kkt


def _check_weights(pen: PenaltyProfile, p: int):
    if pen.l1 is None:
        raise ValueError("penalty profile carries no L1 weights")
    l1 = pen.l1
    l2 = np.zeros(p) if pen.l2 is None else pen.l2
    if l1.shape != (p,) or l2.shape != (p,):
        raise ValueError(f"weights must have length {p}")
    return l1, l2


def elastic_net_objective(sys: DesignSystem, pen: PenaltyProfile, theta) -> float:
    l1, l2 = _check_weights(pen, sys.p)
    theta = np.asarray(theta, dtype=float)
    r = sys.y - sys.H @ theta
    return float(r @ r / sys.n + l2 @ theta ** 2 + l1 @ np.abs(theta))


def elastic_net_kkt(sys: DesignSystem, pen: PenaltyProfile, theta) -> float:
    """Largest violation of the elastic-net optimality conditions."""
    l1, l2 = _check_weights(pen, sys.p)
    theta = np.asarray(theta, dtype=float)
    sq = (sys.H ** 2).sum(axis=0)
    return float(_en_kkt(sys.H, sys.y - sys.H @ theta, theta, l1, l2, sq))


def solve_weighted_elastic_net(sys: DesignSystem, pen: PenaltyProfile,
                               opt: SolverOptions | None = None, theta0=None) -> SparseSolution:
    opt = opt or SolverOptions()
    l1, l2 = _check_weights(pen, sys.p)
    H = np.ascontiguousarray(sys.H)
    theta = np.zeros(sys.p) if theta0 is None else np.array(theta0, dtype=float)
    history = np.empty(opt.max_iterations)
    it, converged, kkt = _coordinate_descent(H, sys.y, l1, l2, theta, opt.tolerance,
                                             opt.max_iterations, history)
    degenerate = tuple(int(k) for k in np.flatnonzero(~np.any(H != 0.0, axis=0)))
    return SparseSolution(
        theta=theta, kappa=np.zeros(0), objective=elastic_net_objective(sys, pen, theta),
        iterations=int(it), converged=bool(converged), kkt_residual=float(kkt),
        degenerate=degenerate, history=history[:it].copy(),
    )


@njit(cache=True)
def _admm_bp(P, q, H, y, w, rho, tol_p, tol_d, max_iter, relax):
    p = q.shape[0]
    n = y.shape[0]
    x = q.copy()
    z = np.zeros(p)
    u = np.zeros(p)  # scaled dual, the unscaled one is rho * u
    v = np.empty(p)
    zold = np.empty(p)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        for k in range(p):
            v[k] = z[k] - u[k]
        for a in range(p):
            s = q[a]
            for b in range(p):
                s += P[a, b] * v[b]
            x[a] = s
        for k in range(p):
            zold[k] = z[k]
            xr = relax * x[k] + (1.0 - relax) * z[k]
            z[k] = soft_threshold(xr + u[k], w[k] / rho)
            u[k] += xr - z[k]
        rp = 0.0
        rd = 0.0
        for k in range(p):
            dk = abs(x[k] - z[k])
            if dk > rp:
                rp = dk
            dk = rho * abs(z[k] - zold[k])
            if dk > rd:
                rd = dk
        if rp <= tol_p and rd <= tol_d:
            feas = 0.0
            for i in range(n):
                s = -y[i]
                for k in range(p):
                    s += H[i, k] * z[k]
                if abs(s) > feas:
                    feas = abs(s)
            if feas <= tol_p:
                converged = True
                break
    return x, z, u, rho, it, converged


def solve_basis_pursuit(sys: DesignSystem, weights, opt: SolverOptions | None = None) -> SparseSolution:
    """Weighted basis pursuit by ADMM.

    Alternates the Euclidean projection onto ``{theta : H theta = y}``
    (through the pseudo-inverse, which also covers rank-deficient ``H``)
    with weighted soft-thresholding.  The returned ``theta`` is the
    thresholded iterate, so exact zeros survive.
    """
    opt = opt or SolverOptions()
    w = np.array(weights, dtype=float).ravel()
    if w.shape != (sys.p,):
        raise ValueError(f"weights must have length {sys.p}")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    H, y = sys.H, sys.y
    # centering leaves a round-off singular value; cut well above eps
    pinv = np.linalg.pinv(H, rcond=1e-10)
    q = pinv @ y
    scale = max(1.0, float(np.abs(y).max()))
    if np.abs(H @ q - y).max() > 1e-7 * scale:
        raise InfeasibleSystemError("y is outside the range of H")
    P = np.eye(sys.p) - pinv @ H
    x, z, u, rho, it, converged = _admm_bp(np.ascontiguousarray(P), q, np.ascontiguousarray(H), y,
                                           w, opt.admm_rho, opt.admm_primal_tol, opt.admm_dual_tol,
                                           opt.admm_max_iterations, opt.admm_relaxation)
    # dual certificate: rho*u must lie in range(H^T) and in the subdifferential of sum w|z|
    v = rho * (u - P @ u)
    nz = z != 0
    viol = np.where(nz, np.abs(v - w * np.sign(z)), np.maximum(np.abs(v) - w, 0.0))
    degenerate = tuple(int(k) for k in np.flatnonzero(~np.any(H != 0.0, axis=0)))
    return SparseSolution(
        theta=z, kappa=np.zeros(0), objective=float(w @ np.abs(z)), iterations=int(it),
        converged=bool(converged), kkt_residual=float(viol.max(initial=0.0)),
        degenerate=degenerate,
    )


def augment_outliers(sys: DesignSystem, pen: PenaltyProfile):
    """Append an identity block for the per-measurement outlier vector.

    The outlier coefficients get L1 weight ``mu`` and no L2 weight; the
    position block keeps its weights.
    """
    l1, l2 = _check_weights(pen, sys.p)
    n = sys.n
    H = np.hstack([sys.H, np.eye(n)])
    new_pen = replace(pen, l1=np.concatenate([l1, np.full(n, pen.mu)]),
                      l2=np.concatenate([l2, np.zeros(n)]))
    return DesignSystem(H=H, y=sys.y), new_pen


def estimate(method, sys: DesignSystem, pen: PenaltyProfile | None = None,
             opt: SolverOptions | None = None, standardized: bool = True) -> SparseSolution:
    """Solve one of the six localization formulations.

    With ``standardized`` (the default) the problem is solved on the
    centered, unit-norm design and coefficients are mapped back afterwards;
    ``objective`` and ``kkt_residual`` refer to the standardized problem.
    """
    method = Method.parse(method)
    pen = pen or PenaltyProfile()
    opt = opt or SolverOptions()
    p, n = sys.p, sys.n
    work_pen = method_penalty(method, p, pen)
    work = sys
    if method.robust:
        work, work_pen = augment_outliers(sys, work_pen)
    if standardized:
        work = standardize(work)
    if method.uses_basis_pursuit:
        sol = solve_basis_pursuit(work, work_pen.l1, opt)
    else:
        sol = solve_weighted_elastic_net(work, work_pen, opt)
    coef, intercept = sol.theta, 0.0
    if work.standardization is not None:
        coef, intercept = destandardize(coef, work.standardization)
    return replace(sol, theta=coef[:p], kappa=coef[p:] if method.robust else np.zeros(n),
                   intercept=intercept,
                   degenerate=tuple(k for k in sol.degenerate if k < p))
