"""Penalized least squares, GCV smoothing selection and penalized IRLS."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import expit

from .errors import (
    DataError,
    DimensionError,
    IRLSDivergenceError,
    ParameterError,
    SaturatedFitError,
    SelectionError,
    SingularityError,
)

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 50
MAX_HALVINGS = 10
DEFAULT_LAMBDA_GRID = tuple(np.logspace(-4, 4, 11))

_MU_EPS = 1e-10


@dataclass(frozen=True)
class Family:
    """Exponential family with its canonical link.

    ``name`` is one of ``gaussian``, ``bernoulli`` or ``poisson``. The
    dispersion is never estimated: it is fixed at one for bernoulli and
    poisson and cancels from the mean fit for gaussian.
    """

    name: str

    SUPPORTED = ("gaussian", "bernoulli", "poisson")

    def __post_init__(self):
        if self.name not in self.SUPPORTED:
            raise ParameterError(
                f"unsupported family {self.name!r}; supported families: {', '.join(self.SUPPORTED)}"
            )

    @property
    def is_gaussian(self) -> bool:
        return self.name == "gaussian"

    def link(self, mu):
        mu = np.asarray(mu, dtype=float)
        if self.name == "gaussian":
            return mu
        if self.name == "bernoulli":
            mu = np.clip(mu, _MU_EPS, 1 - _MU_EPS)
            return np.log(mu / (1 - mu))
        return np.log(np.maximum(mu, _MU_EPS))

    def inverse_link(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.name == "gaussian":
            return eta
        if self.name == "bernoulli":
            return expit(eta)
        return np.exp(eta)

    def cumulant(self, eta):
        """The function b with b' equal to the inverse link."""
        eta = np.asarray(eta, dtype=float)
        if self.name == "gaussian":
            return 0.5 * eta**2
        if self.name == "bernoulli":
            return np.logaddexp(0.0, eta)
        return np.exp(eta)

    def variance(self, mu):
        mu = np.asarray(mu, dtype=float)
        if self.name == "gaussian":
            return np.ones_like(mu)
        if self.name == "bernoulli":
            return mu * (1 - mu)
        return mu

    def neg_loglik(self, y, eta) -> float:
        """Negative log-likelihood up to terms free of eta."""
        return float(np.sum(self.cumulant(eta) - y * eta))

    def check_response(self, y):
        y = np.asarray(y, dtype=float)
        if self.name == "bernoulli" and not np.all((y == 0) | (y == 1)):
            raise DataError("bernoulli response must be coded 0/1")
        if self.name == "poisson" and (np.any(y < 0) or np.any(y != np.round(y))):
            raise DataError("poisson response must be non-negative integers")

    def initial_mean(self, y):
        y = np.asarray(y, dtype=float)
        if self.name == "bernoulli":
            return (y + 0.5) / 2
        if self.name == "poisson":
            return y + 0.1
        return y


def as_family(family) -> Family:
    return family if isinstance(family, Family) else Family(str(family))


@dataclass
class PenalizedFit:
    theta: np.ndarray
    lambdas: tuple[float, float]
    edf: float
    gcv: float
    fitted: np.ndarray
    rss: float
    penalty: float
    ridge: float = 0.0
    irls_weights: np.ndarray | None = None
    working_residuals: np.ndarray | None = None
    converged: bool = True
    iterations: int = 1
    objective: float = field(default=np.nan)


def _as_penalty(P, q) -> np.ndarray:
    if P is None:
        return np.zeros((0, q))
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[1] != q:
        raise DimensionError(f"penalty has shape {P.shape}, expected (*, {q})")
    return P


class _System:
    """Weighted normal equations with cached Gram matrices.

    Solving for many smoothing-parameter pairs reuses ``D^T W D``.
    """

    def __init__(self, D, y, P, P_check, weights=None, extra_penalty=None):
        D = np.asarray(D, dtype=float)
        y = np.asarray(y, dtype=float)
        if D.ndim != 2 or y.shape != (D.shape[0],):
            raise DimensionError(f"design {D.shape} and response {y.shape} do not match")
        if not (np.all(np.isfinite(D)) and np.all(np.isfinite(y))):
            raise DataError("design and response must be finite")
        n, q = D.shape
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DataError("weights must be finite, non-negative and one per row")
        self.D, self.y, self.w = D, y, w
        self.n, self.q = n, q
        self.P = _as_penalty(P, q)
        self.P_check = _as_penalty(P_check, q)
        self.S_u = self.P.T @ self.P
        self.S_a = self.P_check.T @ self.P_check
        self.S_extra = np.zeros((q, q)) if extra_penalty is None else np.asarray(extra_penalty, dtype=float)
        Dw = D * w[:, None]
        self.G = D.T @ Dw
        self.b = Dw.T @ y

    def solve(self, lam: float, lam_check: float) -> PenalizedFit:
        if lam < 0 or lam_check < 0:
            raise ParameterError("smoothing parameters must be non-negative")
        S = lam * self.S_u + lam_check * self.S_a + self.S_extra
        A = self.G + S
        ridge = 0.0
        try:
            factor = linalg.cho_factor(A, lower=True, check_finite=False)
            theta = linalg.cho_solve(factor, self.b, check_finite=False)
            if not np.all(np.isfinite(theta)):
                raise linalg.LinAlgError("non-finite solution")
        except linalg.LinAlgError:
            ridge = 1e-10 * max(np.trace(A), 1e-300) / self.q
            A = A + ridge * np.eye(self.q)
            try:
                factor = linalg.cho_factor(A, lower=True, check_finite=False)
            except linalg.LinAlgError as exc:
                raise SingularityError("penalized normal equations are singular after ridge") from exc
            theta = linalg.cho_solve(factor, self.b, check_finite=False)
        # one step of iterative refinement keeps the normal-equation residual tight
        theta = theta + linalg.cho_solve(factor, self.b - A @ theta, check_finite=False)
        if not np.all(np.isfinite(theta)):
            raise SingularityError("penalized normal equations produced a non-finite solution")

        edf = float(np.trace(linalg.cho_solve(factor, self.G, check_finite=False)))
        fitted = self.D @ theta
        resid = self.y - fitted
        rss = float(np.sum(self.w * resid**2))
        pen = float(theta @ S @ theta)
        gcv = self.n * rss / (self.n - edf) ** 2 if edf < self.n else np.inf
        return PenalizedFit(
            theta=theta,
            lambdas=(float(lam), float(lam_check)),
            edf=edf,
            gcv=float(gcv),
            fitted=fitted,
            rss=rss,
            penalty=pen,
            ridge=ridge,
            objective=rss + pen,
        )


def penalized_ls_solve(D, y, P, P_check, lam: float, lam_check: float, weights=None, extra_penalty=None) -> PenalizedFit:
    """Minimize ``|W^(1/2)(y - D theta)|^2 + lam |P theta|^2 + lam_check |P_check theta|^2``.

    ``extra_penalty`` is an already scaled ``q x q`` penalty added to the
    normal matrix as is (used for fixed-smoothness side terms).
    """
    return _System(D, y, P, P_check, weights, extra_penalty).solve(lam, lam_check)


def gcv_score(D, y, theta, edf: float, weights=None) -> float:
    """``n * sum w (y - D theta)^2 / (n - edf)^2``."""
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    if edf >= n:
        raise SaturatedFitError(f"edf={edf:.3f} is not below n={n}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    resid = y - D @ np.asarray(theta, dtype=float)
    return float(n * np.sum(w * resid**2) / (n - edf) ** 2)


def _penalized_nll(family, y, eta, theta, S) -> float:
    return family.neg_loglik(y, eta) + 0.5 * float(theta @ S @ theta)


def pirls_fit(
    D,
    y,
    P,
    P_check,
    lam: float,
    lam_check: float,
    family,
    offset=None,
    extra_penalty=None,
    theta_start=None,
) -> PenalizedFit:
    """Penalized IRLS with the canonical link.

    Each iteration solves the weighted penalized least-squares problem for
    the working response; a step that raises the penalized negative
    log-likelihood (or produces non-finite values) is halved back toward
    the previous iterate, at most ``MAX_HALVINGS`` times.

    For the gaussian family this is exactly one call to
    :func:`penalized_ls_solve`.
    """
    family = as_family(family)
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    n, q = D.shape
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)

    if family.is_gaussian:
        fit = penalized_ls_solve(D, y - off, P, P_check, lam, lam_check, extra_penalty=extra_penalty)
        fit.irls_weights = np.ones(n)
        fit.working_residuals = (y - off) - fit.fitted
        return fit

    family.check_response(y)
    Pu, Pa = _as_penalty(P, q), _as_penalty(P_check, q)
    S = lam * Pu.T @ Pu + lam_check * Pa.T @ Pa
    if extra_penalty is not None:
        S = S + np.asarray(extra_penalty, dtype=float)

    if theta_start is None:
        theta = None
        eta = family.link(family.initial_mean(y))
        obj = np.inf
    else:
        theta = np.asarray(theta_start, dtype=float)
        eta = off + D @ theta
        obj = _penalized_nll(family, y, eta, theta, S)

    converged = False
    fit = None
    for it in range(1, IRLS_MAX_ITER + 1):
        mu = family.inverse_link(eta)
        w = np.maximum(family.variance(mu), _MU_EPS)
        z = eta - off + (y - mu) / w
        fit = penalized_ls_solve(D, z, Pu, Pa, lam, lam_check, weights=w, extra_penalty=extra_penalty)
        new_theta = fit.theta
        new_eta = off + D @ new_theta
        new_obj = _penalized_nll(family, y, new_eta, new_theta, S) if np.all(np.isfinite(new_eta)) else np.inf

        halvings = 0
        while not (np.isfinite(new_obj) and new_obj <= obj + 1e-10 * (1 + abs(obj))) and theta is not None:
            if halvings == MAX_HALVINGS:
                if not np.isfinite(new_obj):
                    raise IRLSDivergenceError(f"IRLS diverged after {MAX_HALVINGS} step halvings")
                break
            new_theta = 0.5 * (theta + new_theta)
            new_eta = off + D @ new_theta
            new_obj = _penalized_nll(family, y, new_eta, new_theta, S) if np.all(np.isfinite(new_eta)) else np.inf
            halvings += 1
        if not np.isfinite(new_obj):
            raise IRLSDivergenceError("IRLS produced a non-finite linear predictor")

        step = np.inf if theta is None else np.max(np.abs(new_theta - theta)) / (1 + np.max(np.abs(new_theta)))
        theta, eta, obj = new_theta, new_eta, new_obj
        if step < IRLS_TOL or (halvings == MAX_HALVINGS):
            converged = step < IRLS_TOL
            break

    # final weights, working residuals and diagnostics at the accepted iterate
    mu = family.inverse_link(eta)
    w = np.maximum(family.variance(mu), _MU_EPS)
    r = (y - mu) / w
    z = eta - off + r
    system = _System(D, z, Pu, Pa, weights=w, extra_penalty=extra_penalty)
    A = system.G + S
    try:
        factor = linalg.cho_factor(A + fit.ridge * np.eye(q), lower=True, check_finite=False)
        edf = float(np.trace(linalg.cho_solve(factor, system.G, check_finite=False)))
    except linalg.LinAlgError as exc:
        raise SingularityError("IRLS weighted system became singular") from exc
    pearson = float(np.sum(w * r**2))
    gcv = n * pearson / (n - edf) ** 2 if edf < n else np.inf
    return PenalizedFit(
        theta=theta,
        lambdas=(float(lam), float(lam_check)),
        edf=edf,
        gcv=float(gcv),
        fitted=eta - off,
        rss=pearson,
        penalty=float(theta @ S @ theta),
        ridge=fit.ridge,
        irls_weights=w,
        working_residuals=r,
        converged=converged,
        iterations=it,
        objective=2.0 * obj,
    )


def fit_with_gcv(
    D,
    y,
    P,
    P_check,
    family="gaussian",
    grid=DEFAULT_LAMBDA_GRID,
    offset=None,
    extra_penalty=None,
) -> PenalizedFit:
    """Fit at every ``(lam, lam_check)`` in ``grid x grid`` and keep the GCV minimizer.

    Ties go to the larger ``lam`` and then the larger ``lam_check``.
    """
    family = as_family(family)
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0 or np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise ParameterError("lambda grid must be non-empty, finite and non-negative")
    order = np.sort(np.unique(grid))[::-1]

    y = np.asarray(y, dtype=float)
    off = np.zeros(y.size) if offset is None else np.asarray(offset, dtype=float)
    best = None
    failures = []
    if family.is_gaussian:
        system = _System(D, y - off, P, P_check, extra_penalty=extra_penalty)
        for lam in order:
            for lam_check in order:
                try:
                    fit = system.solve(lam, lam_check)
                except SingularityError as exc:
                    failures.append(((lam, lam_check), str(exc)))
                    continue
                if best is None or fit.gcv < best.gcv:
                    best = fit
        if best is not None:
            best.irls_weights = np.ones(y.size)
            best.working_residuals = (y - off) - best.fitted
    else:
        for lam in order:
            warm = None
            for lam_check in order:
                try:
                    fit = pirls_fit(D, y, P, P_check, lam, lam_check, family, offset=off,
                                    extra_penalty=extra_penalty, theta_start=warm)
                except (SingularityError, IRLSDivergenceError) as exc:
                    failures.append(((lam, lam_check), str(exc)))
                    continue
                warm = fit.theta
                if best is None or fit.gcv < best.gcv:
                    best = fit
    if best is None:
        detail = "; ".join(f"{pair}: {msg}" for pair, msg in failures)
        raise SelectionError(f"no smoothing-parameter pair produced a fit ({detail})")
    return best


def select_lambdas(D, y, P, P_check, family="gaussian", grid=DEFAULT_LAMBDA_GRID, offset=None, extra_penalty=None):
    """GCV-optimal ``(lam, lam_check)`` over ``grid x grid``."""
    return fit_with_gcv(D, y, P, P_check, family, grid, offset, extra_penalty).lambdas


def weighted_ls(X, y, w) -> np.ndarray:
    """Minimize ``sum w_i (y_i - x_i^T beta)^2``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],) or w.shape != y.shape:
        raise DimensionError("weighted_ls: X, y and w have inconsistent shapes")
    if np.any(w < 0):
        raise DataError("weights must be non-negative")
    Xw = X * w[:, None]
    A = X.T @ Xw
    b = Xw.T @ y
    try:
        factor = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError:
        p = A.shape[0]
        A = A + 1e-10 * max(np.trace(A), 1e-300) / p * np.eye(p)
        try:
            factor = linalg.cho_factor(A, lower=True)
        except linalg.LinAlgError as exc:
            raise SingularityError("weighted least squares system is singular") from exc
    beta = linalg.cho_solve(factor, b)
    beta = beta + linalg.cho_solve(factor, b - A @ beta)
    return beta
