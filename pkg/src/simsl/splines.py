"""B-spline bases, difference penalties and tensor-product designs.

The tensor-product coefficient vector is ordered with the dose index
running fastest: column ``r * M + s`` of a tensor design multiplies
``B_r(u) * C_s(a)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.interpolate import BSpline

from .errors import DegenerateAxisError, DimensionError, ParameterError


@dataclass(frozen=True)
class SplineBasis:
    """Clamped B-spline basis on one axis.

    Parameters
    ----------
    knots : numpy.ndarray
        Non-decreasing knot vector with each boundary knot repeated
        ``degree + 1`` times.
    degree : int
        Polynomial degree of the pieces.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim != 1 or np.any(np.diff(knots) < 0):
            raise ParameterError("knots must be a non-decreasing 1-D vector")
        if self.degree < 0:
            raise ParameterError("degree must be non-negative")
        if knots.size < 2 * (self.degree + 1):
            raise ParameterError("too few knots for the requested degree")
        if knots[-1] <= knots[0]:
            raise DegenerateAxisError("knot vector spans an empty interval")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def num_basis(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def lower(self) -> float:
        return float(self.knots[0])

    @property
    def upper(self) -> float:
        return float(self.knots[-1])

    @cached_property
    def _spline(self) -> BSpline:
        return BSpline(self.knots, np.eye(self.num_basis), self.degree, extrapolate=True)

    @cached_property
    def _dspline(self) -> BSpline:
        return self._spline.derivative(1)

    def clamp(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def __call__(self, x) -> np.ndarray:
        return basis_matrix(self, x)


def make_knots(values, num_basis: int, degree: int = 3) -> SplineBasis:
    """Build a clamped basis with interior knots at equally spaced quantiles.

    When the data are so tied that quantile knots coincide with each other
    or with a boundary, the interior knots are spread uniformly over the
    range instead.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ParameterError("cannot place knots on an empty axis")
    if num_basis < degree + 1:
        raise ParameterError(f"num_basis={num_basis} must be at least degree + 1 = {degree + 1}")
    lo, hi = float(values.min()), float(values.max())
    if not hi > lo:
        raise DegenerateAxisError(f"all axis values equal {lo}; cannot build a spline basis")

    n_interior = num_basis - degree - 1
    probs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    interior = np.quantile(values, probs)
    if n_interior and (np.any(np.diff(interior) <= 0) or interior[0] <= lo or interior[-1] >= hi):
        interior = np.linspace(lo, hi, n_interior + 2)[1:-1]

    knots = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    return SplineBasis(knots, degree)


def basis_matrix(basis: SplineBasis, x) -> np.ndarray:
    """Evaluate every basis function at ``x`` (clamped to the knot span)."""
    x = basis.clamp(np.atleast_1d(x))
    out = basis._spline(x)
    # de Boor can leave -0.0 or 1e-17 negatives at knots
    np.maximum(out, 0.0, out=out)
    return out


def deriv_basis_matrix(basis: SplineBasis, x) -> np.ndarray:
    """First derivatives of the basis functions at ``x`` (clamped to the knot span)."""
    if basis.degree == 0:
        return np.zeros((np.atleast_1d(x).size, basis.num_basis))
    x = basis.clamp(np.atleast_1d(x))
    return basis._dspline(x)


@dataclass(frozen=True)
class PenaltyMatrix:
    """Square-root form of a roughness penalty: the quadratic form is ``|entries @ theta|^2``."""

    entries: np.ndarray
    order: int

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def shape(self):
        return self.entries.shape

    @property
    def gram(self) -> np.ndarray:
        return self.entries.T @ self.entries


def difference_penalty(order: int, size: int) -> PenaltyMatrix:
    """``(size - order) x size`` matrix of ``order``-th finite differences."""
    if order < 1:
        raise ParameterError("difference order must be >= 1")
    if size <= order:
        raise ParameterError(f"size={size} must exceed the difference order {order}")
    return PenaltyMatrix(np.diff(np.eye(size), n=order, axis=0), order)


def row_kronecker(B, C) -> np.ndarray:
    """Row-wise Kronecker product; row ``i`` is ``kron(B[i], C[i])``."""
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    if B.ndim != 2 or C.ndim != 2:
        raise DimensionError("row_kronecker expects two matrices")
    if B.shape[0] != C.shape[0]:
        raise DimensionError(f"row counts differ: {B.shape[0]} vs {C.shape[0]}")
    return (B[:, :, None] * C[:, None, :]).reshape(B.shape[0], -1)


class SumToZero(NamedTuple):
    basis: np.ndarray
    penalty: PenaltyMatrix
    z_transform: np.ndarray
    degenerate: bool


def absorb_sum_to_zero(B_a, P_a: PenaltyMatrix) -> SumToZero:
    """Reparametrize a marginal basis so that its columns sum to zero over the rows.

    ``Z`` holds an orthonormal basis of the null space of ``(B_a^T 1)^T``
    taken from a complete QR factorization, so ``1^T (B_a Z) = 0``.
    """
    B_a = np.asarray(B_a, dtype=float)
    col_sums = B_a.sum(axis=0)
    k = B_a.shape[1]
    if not np.any(col_sums):
        warnings.warn("basis columns already sum to zero; constraint not absorbed", RuntimeWarning, stacklevel=2)
        return SumToZero(B_a, P_a, np.eye(k), True)
    q, _ = np.linalg.qr(col_sums.reshape(-1, 1), mode="complete")
    z = q[:, 1:]
    penalty = PenaltyMatrix(np.asarray(P_a) @ z, getattr(P_a, "order", 0))
    return SumToZero(B_a @ z, penalty, z, False)


def tensor_penalties(P_u, P_a, N: int, M: int) -> tuple[PenaltyMatrix, PenaltyMatrix]:
    """Expand marginal penalties to the tensor coefficient space.

    Returns ``kron(P_u, I_M)`` (roughness along u) and ``kron(I_N, P_a)``
    (roughness along the dose).
    """
    pu = np.asarray(P_u, dtype=float)
    pa = np.asarray(P_a, dtype=float)
    if pu.shape[1] != N:
        raise DimensionError(f"u-penalty has {pu.shape[1]} columns, expected N={N}")
    if pa.shape[1] != M:
        raise DimensionError(f"dose penalty has {pa.shape[1]} columns, expected M={M}")
    return (
        PenaltyMatrix(np.kron(pu, np.eye(M)), getattr(P_u, "order", 0)),
        PenaltyMatrix(np.kron(np.eye(N), pa), getattr(P_a, "order", 0)),
    )


@dataclass(frozen=True)
class ConstrainedTensorDesign:
    """Tensor design on (u, dose) whose dose margin sums to zero over the training doses."""

    design: np.ndarray
    z_transform: np.ndarray
    penalty_u: PenaltyMatrix
    penalty_a: PenaltyMatrix
    basis_u: SplineBasis
    basis_a: SplineBasis

    @property
    def num_columns(self) -> int:
        return self.design.shape[1]

    def rows(self, u, a) -> np.ndarray:
        return row_kronecker(basis_matrix(self.basis_u, u), basis_matrix(self.basis_a, a) @ self.z_transform)

    def deriv_rows(self, u, a) -> np.ndarray:
        """Rows whose product with theta gives d g / d u."""
        return row_kronecker(deriv_basis_matrix(self.basis_u, u), basis_matrix(self.basis_a, a) @ self.z_transform)


def constrained_tensor_design(
    u,
    a,
    basis_u: SplineBasis,
    basis_a: SplineBasis,
    penalty_order: int = 2,
) -> ConstrainedTensorDesign:
    B_u = basis_matrix(basis_u, u)
    B_a = basis_matrix(basis_a, a)
    absorbed = absorb_sum_to_zero(B_a, difference_penalty(penalty_order, basis_a.num_basis))
    pu, pa = tensor_penalties(
        difference_penalty(penalty_order, basis_u.num_basis),
        absorbed.penalty,
        basis_u.num_basis,
        absorbed.z_transform.shape[1],
    )
    return ConstrainedTensorDesign(
        design=row_kronecker(B_u, absorbed.basis),
        z_transform=absorbed.z_transform,
        penalty_u=pu,
        penalty_a=pa,
        basis_u=basis_u,
        basis_a=basis_a,
    )
