"""Dose rules from a fitted surface and value estimates for them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .penalized import fit_with_gcv
from .splines import basis_matrix, difference_penalty, make_knots, row_kronecker, tensor_penalties

DEFAULT_GRID_SIZE = 100
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class DoseRuleEvaluation:
    doses: np.ndarray
    value: float
    method: str
    grid_size: int
    degenerate: bool = False

    def report(self) -> dict:
        return {"value": self.value, "method": self.method, "n": int(self.doses.size), "grid_size": self.grid_size}


def dose_grid(a_range, grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    if grid_size < 1:
        raise ParameterError("grid_size must be positive")
    lo, hi = a_range
    return np.linspace(lo, hi, grid_size)


def argmax_dose(values, grid) -> np.ndarray:
    """Per-row grid maximizer; near-ties (relative 1e-12) go to the smallest dose."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    grid = np.asarray(grid, dtype=float)
    order = np.argsort(grid, kind="stable")
    values, grid = values[:, order], grid[order]
    top = values.max(axis=1, keepdims=True)
    near = values >= top - _TIE_RTOL * np.maximum(1.0, np.abs(top))
    return grid[np.argmax(near, axis=1)]


def optimal_dose(model, x, dose_grid_values=None, grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Estimated rule: the grid dose maximizing the fitted link-scale surface.

    The default grid has ``grid_size`` equally spaced doses over the
    training dose range; a supplied grid is clipped to that range.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.p:
        raise DimensionError(f"expected {model.p} covariates, got {x.shape[1]}")
    if dose_grid_values is None:
        grid = dose_grid(model.a_range, grid_size)
    else:
        grid = np.clip(np.asarray(dose_grid_values, dtype=float).ravel(), *model.a_range)
        if grid.size == 0:
            raise ParameterError("dose grid is empty")
    return argmax_dose(model.surface_grid(x, grid), grid)


def evaluate_rule(model, x, grid_size: int = DEFAULT_GRID_SIZE, scenario: int | None = None, x_raw=None) -> DoseRuleEvaluation:
    """Dose rule plus its true value under a simulation scenario."""
    from .simulation import true_value_scenario

    doses = optimal_dose(model, x, grid_size=grid_size)
    value = float("nan") if scenario is None else true_value_scenario(doses, x if x_raw is None else x_raw, scenario)
    return DoseRuleEvaluation(doses, value, "oracle-scenario", grid_size)


def _standardize(v):
    v = np.asarray(v, dtype=float)
    sd = v.std()
    return (v - v.mean()) / sd, v.mean(), sd


def estimate_value_test(y, a, doses, num_basis: int = 8, degree: int = 3, penalty_order: int = 2,
                        lambda_grid=None) -> DoseRuleEvaluation:
    """Test-set value of a rule via a smoother of the outcome on (dose, recommended dose).

    Fits an unconstrained tensor P-spline ``m(A, f(X))`` on standardized axes
    (smoothing by GCV) and averages it along the diagonal ``(f(X_i), f(X_i))``.
    If every recommended dose is identical, a 1-D smooth of the outcome on the
    dose is evaluated at that dose instead and ``degenerate`` is set.
    """
    y = np.asarray(y, dtype=float).ravel()
    a = np.asarray(a, dtype=float).ravel()
    f = np.asarray(doses, dtype=float).ravel()
    if not (y.size == a.size == f.size):
        raise DimensionError("y, a and doses must have equal lengths")
    kwargs = {} if lambda_grid is None else {"grid": lambda_grid}

    a_std, a_mu, a_sd = _standardize(a)
    ybar = y.mean()
    basis_a = make_knots(a_std, num_basis, degree)
    Pa = difference_penalty(penalty_order, basis_a.num_basis)

    if np.ptp(f) == 0:
        Ba = basis_matrix(basis_a, a_std)
        fit = fit_with_gcv(Ba, y, Pa, None, "gaussian", offset=np.full(y.size, ybar), **kwargs)
        at = basis_matrix(basis_a, (f[:1] - a_mu) / a_sd)
        value = float(ybar + (at @ fit.theta)[0])
        return DoseRuleEvaluation(f, value, "smoother", 0, degenerate=True)

    f_std = (f - a_mu) / a_sd
    basis_f = make_knots(f_std, num_basis, degree)
    N, M = basis_a.num_basis, basis_f.num_basis
    D = row_kronecker(basis_matrix(basis_a, a_std), basis_matrix(basis_f, f_std))
    P, P_check = tensor_penalties(Pa, difference_penalty(penalty_order, M), N, M)
    fit = fit_with_gcv(D, y, P, P_check, "gaussian", offset=np.full(y.size, ybar), **kwargs)
    diag = row_kronecker(basis_matrix(basis_a, f_std), basis_matrix(basis_f, f_std)) @ fit.theta
    return DoseRuleEvaluation(f, float(ybar + diag.mean()), "smoother", 0)
