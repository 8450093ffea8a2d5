"""Alternating estimation of the single-index model with a surface link.

Step 1 fits the dose-by-index surface for a fixed index direction with a
tensor-product P-spline whose dose margin sums to zero over the training
doses, so the surface carries no pure function of the index. Step 2
linearizes the surface in the index and re-estimates the direction by
(weighted) least squares. After the direction settles, an unconstrained
tensor surface is refit on the final index and used for prediction.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .errors import (
    BootstrapUnstableError,
    DataError,
    DimensionError,
    FlatIndexError,
    NumericalError,
    ParameterError,
)
from .penalized import (
    DEFAULT_LAMBDA_GRID,
    Family,
    PenalizedFit,
    as_family,
    fit_with_gcv,
    penalized_ls_solve,
    pirls_fit,
    weighted_ls,
)
from .splines import (
    ConstrainedTensorDesign,
    SplineBasis,
    absorb_sum_to_zero,
    basis_matrix,
    constrained_tensor_design,
    deriv_basis_matrix,
    difference_penalty,
    make_knots,
    row_kronecker,
    tensor_penalties,
)

logger = logging.getLogger(__name__)

_SIGN_TOL = 1e-10
MAX_BETA_HALVINGS = 10


@dataclass(frozen=True)
class Dataset:
    """Outcome ``y``, dose ``a`` and covariate matrix ``x`` (one row per subject)."""

    y: np.ndarray
    a: np.ndarray
    x: np.ndarray
    column_names: tuple[str, ...] | None = None
    main_effects: tuple | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        a = np.asarray(self.a, dtype=float).ravel()
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DimensionError("covariates must form a 2-D matrix")
        n, p = x.shape
        if y.size != n or a.size != n:
            raise DimensionError(f"lengths differ: y={y.size}, a={a.size}, x rows={n}")
        if p < 1:
            raise DimensionError("need at least one covariate")
        if n <= p:
            raise DataError(f"need more rows than covariates (n={n}, p={p})")
        for name, arr in (("y", y), ("a", a), ("x", x)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
        names = tuple(self.column_names) if self.column_names is not None else tuple(f"X{j + 1}" for j in range(p))
        if len(names) != p:
            raise DimensionError(f"{len(names)} column names for {p} covariates")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "column_names", names)
        if self.main_effects is not None:
            object.__setattr__(self, "main_effects", tuple(self.main_effects))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def take(self, rows) -> Dataset:
        return replace(self, y=self.y[rows], a=self.a[rows], x=self.x[rows])


@dataclass(frozen=True)
class SimslConfig:
    family: Family | str = "gaussian"
    num_basis_u: int = 8
    num_basis_a: int = 8
    degree: int = 3
    penalty_order: int = 2
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    beta_tol: float = 1e-4
    max_outer_iter: int = 30
    include_main_effects: bool = False
    main_effect_num_basis: int = 6
    main_effect_lambda: float = 1.0
    absorb_index_effect: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", as_family(self.family))
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in np.ravel(self.lambda_grid)))
        if not self.beta_tol > 0:
            raise ParameterError("beta_tol must be positive")
        if self.max_outer_iter < 1:
            raise ParameterError("max_outer_iter must be at least 1")
        if self.num_basis_u < self.penalty_order + 1 or self.num_basis_a < self.penalty_order + 2:
            raise ParameterError("too few basis functions for the penalty order")


def canonical_sign(beta) -> np.ndarray:
    """Scale to unit length with the first non-negligible entry positive."""
    beta = np.asarray(beta, dtype=float)
    norm_ = np.linalg.norm(beta)
    if not norm_ > 0 or not np.isfinite(norm_):
        raise FlatIndexError("index coefficient vector is zero or non-finite")
    beta = beta / norm_
    lead = np.flatnonzero(np.abs(beta) > _SIGN_TOL)
    if beta[lead[0]] < 0:
        beta = -beta
    return beta


def _check_theta_membership(beta):
    beta = np.asarray(beta, dtype=float)
    if abs(np.linalg.norm(beta) - 1.0) > 1e-8:
        raise ParameterError("beta must have unit length")
    lead = np.flatnonzero(np.abs(beta) > _SIGN_TOL)
    if lead.size == 0 or beta[lead[0]] <= 0:
        raise ParameterError("beta must have a positive leading coefficient")


def _angle_deg(b1, b2) -> float:
    c = abs(float(np.dot(b1, b2))) / (np.linalg.norm(b1) * np.linalg.norm(b2))
    return math.degrees(math.acos(min(1.0, c)))


def init_beta(data: Dataset) -> np.ndarray:
    """Starting direction from a linear-interaction regression.

    Regresses ``y`` on ``X_j * (A - mean A)`` (with an intercept and the raw
    columns as nuisance terms when the sample allows), normalizes the
    interaction coefficients and fixes their sign. Falls back to the first
    coordinate axis when the regression is singular or returns zero.
    """
    fallback = np.zeros(data.p)
    fallback[0] = 1.0
    ac = data.a - data.a.mean()
    inter = data.x * ac[:, None]
    nuisance = [np.ones((data.n, 1))]
    if data.n > 2 * data.p + 1:
        nuisance.append(data.x)
    Z = np.hstack([inter, *nuisance])
    coef, _, rank, _ = np.linalg.lstsq(Z, data.y, rcond=None)
    if rank < Z.shape[1]:
        return fallback
    b = coef[: data.p]
    if not np.all(np.isfinite(b)) or np.linalg.norm(b) <= 1e-12 * (1 + np.abs(data.y).max()):
        return fallback
    return canonical_sign(b)


# ---------------------------------------------------------------------------
# main-effect terms


@dataclass(frozen=True)
class MainEffectTerm:
    """Additive main effect for one covariate: a centered P-spline or a linear term."""

    column: int
    name: str
    kind: str
    basis: SplineBasis | None = None
    z_transform: np.ndarray | None = None
    coef: np.ndarray | None = None

    @property
    def width(self) -> int:
        return 1 if self.kind == "linear" else self.z_transform.shape[1]

    def columns(self, x) -> np.ndarray:
        col = np.asarray(x, dtype=float)[:, self.column]
        if self.kind == "linear":
            return col[:, None]
        return basis_matrix(self.basis, col) @ self.z_transform

    def penalty(self, order: int) -> np.ndarray:
        if self.kind == "linear":
            return np.zeros((0, 1))
        return np.asarray(difference_penalty(order, self.basis.num_basis)) @ self.z_transform


def build_main_effects(data: Dataset, config: SimslConfig) -> list[MainEffectTerm]:
    if not config.include_main_effects:
        return []
    wanted = data.main_effects if data.main_effects is not None else range(data.p)
    terms = []
    for key in wanted:
        j = data.column_names.index(key) if isinstance(key, str) else int(key)
        col = data.x[:, j]
        if np.unique(col).size <= 2:
            terms.append(MainEffectTerm(j, data.column_names[j], "linear"))
            continue
        basis = make_knots(col, config.main_effect_num_basis, config.degree)
        absorbed = absorb_sum_to_zero(basis_matrix(basis, col), difference_penalty(config.penalty_order, basis.num_basis))
        terms.append(MainEffectTerm(j, data.column_names[j], "spline", basis, absorbed.z_transform))
    return terms


# ---------------------------------------------------------------------------
# step 1


@dataclass(frozen=True)
class InteractionDesign:
    """Step-1 design: constrained tensor columns, then main-effect columns, then an optional intercept."""

    tensor: ConstrainedTensorDesign
    main_terms: tuple
    intercept: bool
    matrix: np.ndarray
    P: np.ndarray
    P_check: np.ndarray
    extra_penalty: np.ndarray | None
    u: np.ndarray

    @property
    def n_tensor(self) -> int:
        return self.tensor.num_columns


def _pad(P, q, start):
    P = np.asarray(P, dtype=float)
    out = np.zeros((P.shape[0], q))
    out[:, start : start + P.shape[1]] = P
    return out


def _side_columns(x, main_terms, intercept, n):
    blocks = [t.columns(x) for t in main_terms]
    if intercept:
        blocks.append(np.ones((n, 1)))
    return blocks


def _side_penalty(main_terms, order, lam, q, start):
    if not main_terms:
        return None
    S = np.zeros((q, q))
    pos = start
    for t in main_terms:
        R = t.penalty(order)
        S[pos : pos + t.width, pos : pos + t.width] += lam * (R.T @ R)
        pos += t.width
    return S


def build_interaction_design(
    data: Dataset,
    beta,
    config: SimslConfig,
    basis_a: SplineBasis | None = None,
    main_terms=None,
) -> InteractionDesign:
    """Constrained tensor design on ``(X beta, A)`` plus optional side columns."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.p,):
        raise DimensionError(f"beta has {beta.size} entries, data has {data.p} covariates")
    _check_theta_membership(beta)
    if basis_a is None:
        basis_a = make_knots(data.a, config.num_basis_a, config.degree)
    if main_terms is None:
        main_terms = build_main_effects(data, config)
    u = data.x @ beta
    basis_u = make_knots(u, config.num_basis_u, config.degree)
    tensor = constrained_tensor_design(u, data.a, basis_u, basis_a, config.penalty_order)

    intercept = (not config.family.is_gaussian) or bool(main_terms)
    side = _side_columns(data.x, main_terms, intercept, data.n)
    matrix = np.hstack([tensor.design, *side]) if side else tensor.design
    q = matrix.shape[1]
    k = tensor.num_columns
    return InteractionDesign(
        tensor=tensor,
        main_terms=tuple(main_terms),
        intercept=intercept,
        matrix=matrix,
        P=_pad(tensor.penalty_u, q, 0),
        P_check=_pad(tensor.penalty_a, q, 0),
        extra_penalty=_side_penalty(main_terms, config.penalty_order, config.main_effect_lambda, q, k),
        u=u,
    )


def _working_response(data: Dataset, family: Family) -> np.ndarray:
    return data.y - data.y.mean() if family.is_gaussian else data.y


def fit_theta_step(design: InteractionDesign, data: Dataset, config: SimslConfig) -> PenalizedFit:
    """Select smoothing parameters by GCV and return the corresponding surface fit."""
    return fit_with_gcv(
        design.matrix,
        _working_response(data, config.family),
        design.P,
        design.P_check,
        config.family,
        config.lambda_grid,
        extra_penalty=design.extra_penalty,
    )


def _fit_fixed(design: InteractionDesign, data: Dataset, config: SimslConfig, lambdas) -> PenalizedFit:
    y = _working_response(data, config.family)
    if config.family.is_gaussian:
        return penalized_ls_solve(design.matrix, y, design.P, design.P_check, *lambdas,
                                  extra_penalty=design.extra_penalty)
    return pirls_fit(design.matrix, y, design.P, design.P_check, *lambdas, config.family,
                     extra_penalty=design.extra_penalty)


# ---------------------------------------------------------------------------
# step 2


def update_beta_step(data: Dataset, design: InteractionDesign, fit: PenalizedFit, beta_tilde, config: SimslConfig) -> np.ndarray:
    """One linearized least-squares update of the index direction.

    With ``gdot`` the derivative of the current constrained surface in u
    at the training points, solves ``min |W^(1/2)(r + gdot*X beta_tilde - gdot*X beta)|``
    where ``r`` is the residual (gaussian) or the final IRLS working
    residual, and ``W`` is the identity or the final IRLS weights.

    Two nuisance blocks enter the regression and are discarded: ``gdot``
    itself (a shift of u, absorbed by the rebuilt knots) and, when
    ``config.absorb_index_effect`` is set, the u-margin B-spline basis. The
    latter keeps a main effect of the current index, which the constrained
    surface cannot represent, from leaking into the direction update.
    """
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    theta = fit.theta[: design.n_tensor]
    gdot = design.tensor.deriv_rows(design.u, data.a) @ theta
    scale = 1.0 + np.max(np.abs(fit.fitted))
    if not np.max(np.abs(gdot)) > 1e-10 * scale:
        raise FlatIndexError("fitted surface is flat in the index; beta is not identified")

    x_star = data.x * gdot[:, None]
    if config.family.is_gaussian:
        resid = _working_response(data, config.family) - fit.fitted
        weights = np.ones(data.n)
    else:
        resid = fit.working_residuals
        weights = fit.irls_weights
    y_star = resid + gdot * (data.x @ beta_tilde)
    nuisance = [gdot[:, None]]
    if config.absorb_index_effect:
        nuisance.append(basis_matrix(design.tensor.basis_u, design.u))
    coef = weighted_ls(np.hstack([x_star, *nuisance]), y_star, weights)
    return canonical_sign(coef[: data.p])


# ---------------------------------------------------------------------------
# final unconstrained surface and the fitted model


@dataclass(frozen=True)
class FinalSurface:
    """Unconstrained tensor surface ``intercept + sum_rs B_r(u) C_s(a) theta[r, s]`` plus side terms."""

    basis_u: SplineBasis
    basis_a: SplineBasis
    theta: np.ndarray
    lambdas: tuple[float, float]
    intercept: float
    main_terms: tuple = ()

    def main_effects(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[0])
        for t in self.main_terms:
            out += t.columns(x) @ t.coef
        return out

    def grid(self, u, doses) -> np.ndarray:
        """Tensor part on all pairs: ``(len(u), len(doses))``."""
        return basis_matrix(self.basis_u, u) @ self.theta @ basis_matrix(self.basis_a, doses).T

    def tensor(self, u, a) -> np.ndarray:
        Bu = basis_matrix(self.basis_u, u)
        Ba = basis_matrix(self.basis_a, a)
        return np.einsum("ir,rs,is->i", Bu, self.theta, Ba)

    def tensor_du(self, u, a) -> np.ndarray:
        dBu = deriv_basis_matrix(self.basis_u, u)
        Ba = basis_matrix(self.basis_a, a)
        return np.einsum("ir,rs,is->i", dBu, self.theta, Ba)


def fit_final_surface(data: Dataset, beta, config: SimslConfig, basis_a: SplineBasis, main_terms=()) -> tuple[FinalSurface, PenalizedFit]:
    """Unconstrained tensor fit on ``(X beta, A)`` with GCV-selected smoothing.

    The intercept enters as a fixed offset (sample mean on the link scale);
    the tensor basis reproduces constants, so it absorbs any remainder.
    """
    family = config.family
    u = data.x @ beta
    basis_u = make_knots(u, config.num_basis_u, config.degree)
    N, M = basis_u.num_basis, basis_a.num_basis
    D = row_kronecker(basis_matrix(basis_u, u), basis_matrix(basis_a, data.a))
    P, P_check = tensor_penalties(
        difference_penalty(config.penalty_order, N), difference_penalty(config.penalty_order, M), N, M
    )
    side = [t.columns(data.x) for t in main_terms]
    matrix = np.hstack([D, *side]) if side else D
    q = matrix.shape[1]
    intercept = float(family.link(np.mean(data.y)))
    fit = fit_with_gcv(
        matrix,
        data.y,
        _pad(P, q, 0),
        _pad(P_check, q, 0),
        family,
        config.lambda_grid,
        offset=np.full(data.n, intercept),
        extra_penalty=_side_penalty(list(main_terms), config.penalty_order, config.main_effect_lambda, q, N * M),
    )
    pos = N * M
    fitted_terms = []
    for t in main_terms:
        fitted_terms.append(replace(t, coef=fit.theta[pos : pos + t.width].copy()))
        pos += t.width
    surface = FinalSurface(
        basis_u=basis_u,
        basis_a=basis_a,
        theta=fit.theta[: N * M].reshape(N, M),
        lambdas=fit.lambdas,
        intercept=intercept,
        main_terms=tuple(fitted_terms),
    )
    return surface, fit


@dataclass
class SimslModel:
    beta: np.ndarray
    family: Family
    final: FinalSurface
    column_names: tuple[str, ...]
    converged: bool
    outer_iterations: int
    u_range: tuple[float, float]
    a_range: tuple[float, float]
    constrained_fit: PenalizedFit | None = None
    constrained_design: InteractionDesign | None = None
    final_fit: PenalizedFit | None = None
    beta_path: list = field(default_factory=list)

    @property
    def p(self) -> int:
        return self.beta.size

    def index(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.p:
            raise DimensionError(f"expected {self.p} covariates, got {x.shape[1]}")
        return x @ self.beta

    def predict_surface(self, x, a) -> np.ndarray:
        """Link-scale prediction, including intercept and any main effects."""
        u = self.index(x)
        a = np.asarray(a, dtype=float).ravel()
        if a.size != u.size:
            raise DimensionError("x and a have different lengths")
        return self.final.intercept + self.final.tensor(u, a) + self.final.main_effects(np.atleast_2d(x))

    def predict_mean(self, x, a) -> np.ndarray:
        return self.family.inverse_link(self.predict_surface(x, a))

    def partial_deriv_u(self, x, a) -> np.ndarray:
        u = self.index(x)
        return self.final.tensor_du(u, np.asarray(a, dtype=float).ravel())

    def surface_grid(self, x, doses) -> np.ndarray:
        """Link-scale surface for every row of ``x`` at every dose: ``(n, len(doses))``."""
        u = self.index(x)
        base = self.final.intercept + self.final.main_effects(np.atleast_2d(x))
        return self.final.grid(u, np.asarray(doses, dtype=float)) + base[:, None]

    # persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        f = self.final
        out = {
            "family": self.family.name,
            "beta": self.beta.tolist(),
            "knots_u": f.basis_u.knots.tolist(),
            "knots_a": f.basis_a.knots.tolist(),
            "degree": f.basis_u.degree,
            "theta_final": f.theta.tolist(),
            "lambda_u": f.lambdas[0],
            "lambda_a": f.lambdas[1],
            "intercept": f.intercept,
            "u_range": list(self.u_range),
            "a_range": list(self.a_range),
            "column_names": list(self.column_names),
            "converged": bool(self.converged),
            "outer_iterations": int(self.outer_iterations),
        }
        if f.main_terms:
            out["main_effect_terms"] = [
                {
                    "column": t.column,
                    "name": t.name,
                    "kind": t.kind,
                    "knots": None if t.basis is None else t.basis.knots.tolist(),
                    "z_transform": None if t.z_transform is None else t.z_transform.tolist(),
                    "coef": t.coef.tolist(),
                }
                for t in f.main_terms
            ]
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> SimslModel:
        degree = int(doc["degree"])
        terms = []
        for t in doc.get("main_effect_terms") or []:
            basis = None if t["knots"] is None else SplineBasis(np.array(t["knots"]), degree)
            z = None if t["z_transform"] is None else np.array(t["z_transform"])
            terms.append(MainEffectTerm(int(t["column"]), t["name"], t["kind"], basis, z, np.array(t["coef"])))
        final = FinalSurface(
            basis_u=SplineBasis(np.array(doc["knots_u"]), degree),
            basis_a=SplineBasis(np.array(doc["knots_a"]), degree),
            theta=np.array(doc["theta_final"], dtype=float),
            lambdas=(float(doc["lambda_u"]), float(doc["lambda_a"])),
            intercept=float(doc["intercept"]),
            main_terms=tuple(terms),
        )
        return cls(
            beta=np.array(doc["beta"], dtype=float),
            family=Family(doc["family"]),
            final=final,
            column_names=tuple(doc["column_names"]),
            converged=bool(doc["converged"]),
            outer_iterations=int(doc["outer_iterations"]),
            u_range=tuple(doc["u_range"]),
            a_range=tuple(doc["a_range"]),
        )

    def to_json(self) -> str:
        # json writes floats with repr, i.e. shortest round-tripping form
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> SimslModel:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> SimslModel:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def fit_simsl(data: Dataset, config: SimslConfig | None = None) -> SimslModel:
    """Alternate surface and direction updates, then refit an unconstrained surface.

    The loop stops when the direction moves less than ``beta_tol`` (L2) or
    after ``max_outer_iter`` updates. A proposed direction that raises the
    step-1 penalized objective (at the current smoothing parameters) is
    halved back toward the current direction up to ten times; if none of
    the halvings help, the current direction is kept and the loop ends.
    """
    config = config or SimslConfig()
    family = config.family
    family.check_response(data.y)
    basis_a = make_knots(data.a, config.num_basis_a, config.degree)
    main_terms = build_main_effects(data, config)

    beta = init_beta(data)
    design = build_interaction_design(data, beta, config, basis_a, main_terms)
    fit = fit_theta_step(design, data, config)
    path = [beta]
    converged = False
    iterations = 0

    for iterations in range(1, config.max_outer_iter + 1):
        proposal = update_beta_step(data, design, fit, beta, config)
        accepted = None
        step = proposal - beta
        for k in range(MAX_BETA_HALVINGS + 1):
            cand = canonical_sign(beta + step / 2**k)
            cand_design = build_interaction_design(data, cand, config, basis_a, main_terms)
            cand_fit = _fit_fixed(cand_design, data, config, fit.lambdas)
            if cand_fit.objective <= fit.objective:
                accepted = cand
                break
        if accepted is None:
            logger.debug("no objective decrease after %d halvings; stopping", MAX_BETA_HALVINGS)
            converged = True
            break

        delta = float(np.linalg.norm(accepted - beta))
        beta = accepted
        design = build_interaction_design(data, beta, config, basis_a, main_terms)
        fit = fit_theta_step(design, data, config)
        path.append(beta)
        logger.debug("outer iteration %d: |dbeta|=%.3g lambdas=%s", iterations, delta, fit.lambdas)
        if delta < config.beta_tol:
            converged = True
            break

    final, final_fit = fit_final_surface(data, beta, config, basis_a, main_terms)
    u = data.x @ beta
    return SimslModel(
        beta=beta,
        family=family,
        final=final,
        column_names=data.column_names,
        converged=converged,
        outer_iterations=iterations,
        u_range=(float(u.min()), float(u.max())),
        a_range=(float(data.a.min()), float(data.a.max())),
        constrained_fit=fit,
        constrained_design=design,
        final_fit=final_fit,
        beta_path=path,
    )


# ---------------------------------------------------------------------------
# bootstrap


@dataclass(frozen=True)
class BootstrapResult:
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sd: np.ndarray
    mean: np.ndarray
    level: float
    n_boot: int
    failures: int
    column_names: tuple[str, ...]


def _bootstrap_replicate(args):
    data, config, seed = args
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = rng.integers(0, data.n, size=data.n)
    try:
        return fit_simsl(data.take(rows), config).beta
    except NumericalError as exc:
        logger.debug("bootstrap replicate failed: %s", exc)
        return None


def replicate_seed(*keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(k) for k in keys])


def bootstrap_beta_ci(
    data: Dataset,
    config: SimslConfig | None = None,
    n_boot: int = 500,
    level: float = 0.95,
    threads: int = 1,
    replicate_seeds=None,
    estimate=None,
) -> BootstrapResult:
    """Normal-approximation bootstrap intervals for the index coefficients.

    Replicate ``b`` resamples rows with a PCG64 stream seeded from
    ``(config.seed, b)`` unless ``replicate_seeds`` overrides the seeds.
    Each replicate direction is sign-aligned with the full-data estimate.
    """
    config = config or SimslConfig()
    if n_boot < 2:
        raise ParameterError("n_boot must be at least 2")
    if not 0 < level < 1:
        raise ParameterError("level must lie strictly between 0 and 1")
    if replicate_seeds is not None and len(replicate_seeds) != n_boot:
        raise ParameterError("need one seed per bootstrap replicate")

    beta_hat = fit_simsl(data, config).beta if estimate is None else np.asarray(estimate, dtype=float)
    seeds = [
        replicate_seed(replicate_seeds[b]) if replicate_seeds is not None else replicate_seed(config.seed, b)
        for b in range(n_boot)
    ]
    jobs = [(data, config, s) for s in seeds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            betas = list(pool.map(_bootstrap_replicate, jobs))
    else:
        betas = [_bootstrap_replicate(j) for j in jobs]

    good = [b if np.dot(b, beta_hat) >= 0 else -b for b in betas if b is not None]
    failures = n_boot - len(good)
    if failures > 0.2 * n_boot:
        raise BootstrapUnstableError(f"{failures} of {n_boot} bootstrap replicates failed")
    draws = np.vstack(good)
    sd = draws.std(axis=0, ddof=1)
    z = norm.ppf(0.5 * (1 + level))
    return BootstrapResult(
        estimate=beta_hat,
        lower=beta_hat - z * sd,
        upper=beta_hat + z * sd,
        sd=sd,
        mean=draws.mean(axis=0),
        level=level,
        n_boot=n_boot,
        failures=failures,
        column_names=data.column_names,
    )
