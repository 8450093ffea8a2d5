"""Tests for B-spline bases, difference penalties and tensor designs."""

from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simsl.errors import DegenerateAxisError, DimensionError, ParameterError
from simsl.splines import (
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


def cox_de_boor(knots, degree, x):
    """Plain recursive Cox-de Boor evaluation, right-closed at the last knot."""
    knots = np.asarray(knots, dtype=float)
    n_basis = knots.size - degree - 1

    def b(i, k):
        if k == 0:
            if knots[i] <= x < knots[i + 1]:
                return 1.0
            # the last non-empty span includes its right end
            last = np.flatnonzero(knots < knots[-1]).max()
            return 1.0 if (x == knots[-1] and i == last) else 0.0
        out = 0.0
        if knots[i + k] > knots[i]:
            out += (x - knots[i]) / (knots[i + k] - knots[i]) * b(i, k - 1)
        if knots[i + k + 1] > knots[i + 1]:
            out += (knots[i + k + 1] - x) / (knots[i + k + 1] - knots[i + 1]) * b(i + 1, k - 1)
        return out

    return np.array([b(i, degree) for i in range(n_basis)])


def cubic_basis(lo=0.0, hi=1.0, num_basis=8):
    return make_knots(np.linspace(lo, hi, 201), num_basis, 3)


class TestMakeKnots:
    def test_no_interior_knots(self):
        basis = make_knots([0.0, 1.0], 4, 3)
        np.testing.assert_array_equal(basis.knots, [0, 0, 0, 0, 1, 1, 1, 1])
        assert basis.num_basis == 4

    def test_single_interior_knot_at_median(self):
        basis = make_knots(np.linspace(0, 1, 101), 5, 3)
        np.testing.assert_allclose(basis.knots[4], 0.5, atol=1e-15)
        assert basis.knots.size == 9

    def test_quantile_knots_match_sort_and_index_oracle(self):
        values = np.random.default_rng(2024).uniform(-1, 1, 1000)
        basis = make_knots(values, 8, 3)
        # linear-interpolation quantile by hand
        s = np.sort(values)
        oracle = []
        for p in (0.2, 0.4, 0.6, 0.8):
            h = (s.size - 1) * p
            lo = int(np.floor(h))
            oracle.append(s[lo] + (h - lo) * (s[lo + 1] - s[lo]))
        np.testing.assert_allclose(basis.knots[4:8], oracle, rtol=0, atol=1e-14)
        assert basis.lower == s[0] and basis.upper == s[-1]

    def test_boundary_knots_repeated(self):
        basis = make_knots(np.random.default_rng(1).normal(size=50), 7, 3)
        assert np.all(basis.knots[:4] == basis.knots[0])
        assert np.all(basis.knots[-4:] == basis.knots[-1])
        assert basis.num_basis == basis.knots.size - 3 - 1 == 7

    def test_tied_values_fall_back_to_uniform(self):
        values = np.r_[np.zeros(90), np.linspace(0, 1, 10)]
        basis = make_knots(values, 8, 3)
        assert np.all(np.diff(basis.knots[3:9]) > 0)

    def test_constant_axis_raises(self):
        with pytest.raises(DegenerateAxisError):
            make_knots(np.ones(10), 8, 3)

    def test_too_few_basis_functions(self):
        with pytest.raises(ParameterError):
            make_knots([0.0, 1.0], 3, 3)

    def test_knots_are_read_only(self):
        basis = make_knots([0.0, 1.0], 4, 3)
        with pytest.raises(ValueError):
            basis.knots[0] = -1.0

    def test_decreasing_knots_rejected(self):
        with pytest.raises(ParameterError):
            SplineBasis(np.array([0, 0, 1, 0.5]), 1)


class TestBasisMatrix:
    def test_linear_hat_functions(self):
        basis = SplineBasis(np.array([0, 0, 1, 2, 2.0]), 1)
        np.testing.assert_allclose(basis_matrix(basis, [0.5]), [[0.5, 0.5, 0.0]])

    def test_cubic_center_values(self):
        # uniform knots 0..8, the span [3, 4] has full support; centre value 2/3, neighbours 1/6
        knots = np.r_[np.zeros(3), np.arange(9.0), np.full(3, 8.0)]
        basis = SplineBasis(knots, 3)
        row = basis_matrix(basis, [4.0])[0]
        j = np.argmax(row)
        np.testing.assert_allclose(row[j], 2 / 3, atol=1e-14)
        np.testing.assert_allclose([row[j - 1], row[j + 1]], [1 / 6, 1 / 6], atol=1e-14)

    def test_matches_cox_de_boor_oracle(self):
        basis = make_knots(np.random.default_rng(5).uniform(0, 3, 300), 9, 3)
        xs = np.r_[basis.lower, np.random.default_rng(6).uniform(basis.lower, basis.upper, 25), basis.upper]
        ours = basis_matrix(basis, xs)
        oracle = np.array([cox_de_boor(basis.knots, 3, x) for x in xs])
        np.testing.assert_allclose(ours, oracle, atol=1e-13)

    def test_non_negative(self):
        basis = cubic_basis()
        assert np.all(basis_matrix(basis, np.linspace(0, 1, 501)) >= 0)

    def test_out_of_range_is_clamped(self):
        basis = cubic_basis()
        np.testing.assert_array_equal(basis_matrix(basis, [-3.0, 7.0]), basis_matrix(basis, [0.0, 1.0]))

    def test_local_support(self):
        basis = make_knots(np.random.default_rng(3).uniform(size=200), 8, 3)
        xs = np.linspace(basis.lower, basis.upper, 400)
        B = basis_matrix(basis, xs)
        for r in range(basis.num_basis):
            outside = (xs < basis.knots[r]) | (xs > basis.knots[r + 4])
            assert np.all(B[outside, r] == 0)


class TestDerivBasis:
    def test_linear_slopes(self):
        basis = SplineBasis(np.array([0, 0, 1, 2, 2.0]), 1)
        np.testing.assert_allclose(deriv_basis_matrix(basis, [0.5]), [[-1.0, 1.0, 0.0]])

    def test_rows_sum_to_zero(self):
        basis = make_knots(np.random.default_rng(8).uniform(-2, 2, 100), 10, 3)
        dB = deriv_basis_matrix(basis, np.random.default_rng(9).uniform(-1.9, 1.9, 100))
        np.testing.assert_allclose(dB.sum(axis=1), 0, atol=1e-10)

    def test_matches_central_differences(self):
        basis = make_knots(np.random.default_rng(10).uniform(size=300), 8, 3)
        xs = np.random.default_rng(11).uniform(basis.lower + 1e-3, basis.upper - 1e-3, 50)
        h = 1e-5
        fd = (basis_matrix(basis, xs + h) - basis_matrix(basis, xs - h)) / (2 * h)
        dB = deriv_basis_matrix(basis, xs)
        scale = np.abs(dB).max()
        np.testing.assert_allclose(dB, fd, atol=1e-5 * scale)

    def test_degree_zero_is_zero(self):
        basis = SplineBasis(np.array([0.0, 1.0, 2.0]), 0)
        np.testing.assert_array_equal(deriv_basis_matrix(basis, [0.5, 1.5]), np.zeros((2, 2)))


class TestDifferencePenalty:
    def test_second_order(self):
        P = np.asarray(difference_penalty(2, 5))
        np.testing.assert_array_equal(P, [[1, -2, 1, 0, 0], [0, 1, -2, 1, 0], [0, 0, 1, -2, 1]])

    def test_first_order(self):
        np.testing.assert_array_equal(np.asarray(difference_penalty(1, 3)), [[-1, 1, 0], [0, -1, 1]])

    def test_annihilates_constants(self):
        P = difference_penalty(2, 9)
        np.testing.assert_array_equal(np.asarray(P) @ np.full(9, 3.7), np.zeros(7))

    def test_gram(self):
        P = difference_penalty(2, 6)
        np.testing.assert_array_equal(P.gram, np.asarray(P).T @ np.asarray(P))

    @pytest.mark.parametrize("order,size", [(2, 2), (3, 1), (0, 5)])
    def test_invalid(self, order, size):
        with pytest.raises(ParameterError):
            difference_penalty(order, size)


class TestRowKronecker:
    def test_definition(self):
        np.testing.assert_array_equal(row_kronecker([[1, 2]], [[3, 4]]), [[3, 4, 6, 8]])

    def test_ones_column_is_identity(self):
        C = np.random.default_rng(0).normal(size=(6, 3))
        np.testing.assert_array_equal(row_kronecker(np.ones((6, 1)), C), C)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(1)
        B, C = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
        D = row_kronecker(B, C)
        assert D.shape == (5, 6)
        for i in range(5):
            np.testing.assert_array_equal(D[i], np.kron(B[i], C[i]))
            for r in range(3):
                for s in range(2):
                    assert D[i, r * 2 + s] == B[i, r] * C[i, s]

    def test_row_mismatch(self):
        with pytest.raises(DimensionError):
            row_kronecker(np.ones((3, 2)), np.ones((4, 2)))


class TestSumToZero:
    def test_two_by_two_identity(self):
        res = absorb_sum_to_zero(np.eye(2), difference_penalty(1, 2))
        z = res.z_transform[:, 0]
        np.testing.assert_allclose(np.abs(z), [1 / np.sqrt(2)] * 2, atol=1e-15)
        assert z[0] * z[1] < 0
        np.testing.assert_allclose(np.ones(2) @ res.basis, 0, atol=1e-15)

    def test_column_sums_vanish_and_z_orthonormal(self):
        basis = cubic_basis(0, 2)
        a = np.random.default_rng(4).uniform(0, 2, 400)
        res = absorb_sum_to_zero(basis_matrix(basis, a), difference_penalty(2, 8))
        assert res.basis.shape == (400, 7)
        assert np.abs(res.basis.sum(axis=0)).max() <= 1e-10 * 400
        np.testing.assert_allclose(res.z_transform.T @ res.z_transform, np.eye(7), atol=1e-12)
        np.testing.assert_allclose(np.asarray(res.penalty), np.asarray(difference_penalty(2, 8)) @ res.z_transform)
        assert not res.degenerate

    def test_zero_column_sums_warn(self):
        B = np.array([[1.0, -1.0], [-1.0, 1.0]])
        with pytest.warns(RuntimeWarning):
            res = absorb_sum_to_zero(B, difference_penalty(1, 2))
        assert res.degenerate
        np.testing.assert_array_equal(res.z_transform, np.eye(2))


class TestTensorPenalties:
    def test_shapes(self):
        P, Pc = tensor_penalties(np.ones((2, 4)), np.ones((1, 3)), 4, 3)
        assert P.shape == (6, 12) and Pc.shape == (4, 12)

    def test_constant_in_u_is_unpenalized(self):
        P, _ = tensor_penalties(difference_penalty(2, 6), difference_penalty(2, 5), 6, 5)
        col = np.random.default_rng(0).normal(size=5)
        theta = np.tile(col, 6)  # theta[r, s] = col[s]
        np.testing.assert_allclose(np.asarray(P) @ theta, 0, atol=1e-14)

    def test_reshape_and_sum_oracle(self):
        N, M = 6, 5
        Pu, Pa = difference_penalty(2, N), difference_penalty(2, M)
        P, Pc = tensor_penalties(Pu, Pa, N, M)
        theta = np.random.default_rng(1).normal(size=N * M)
        T = theta.reshape(N, M)
        u_oracle = sum(np.sum((np.asarray(Pu) @ T[:, s]) ** 2) for s in range(M))
        a_oracle = sum(np.sum((np.asarray(Pa) @ T[r, :]) ** 2) for r in range(N))
        np.testing.assert_allclose(np.sum((np.asarray(P) @ theta) ** 2), u_oracle, rtol=1e-12)
        np.testing.assert_allclose(np.sum((np.asarray(Pc) @ theta) ** 2), a_oracle, rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            tensor_penalties(difference_penalty(2, 6), difference_penalty(2, 5), 7, 5)


class TestConstrainedDesign:
    def test_fixed_u_sum_over_training_doses_vanishes(self):
        rng = np.random.default_rng(7)
        u, a = rng.uniform(-1, 1, 300), rng.uniform(0, 2, 300)
        des = constrained_tensor_design(u, a, make_knots(u, 8), make_knots(a, 8))
        for _ in range(20):
            theta = rng.normal(size=des.num_columns)
            for u0 in rng.uniform(-1, 1, 10):
                g = des.rows(np.full(a.size, u0), a) @ theta
                assert abs(g.sum()) <= 1e-8 * np.linalg.norm(theta)

    def test_rows_reproduce_design(self):
        rng = np.random.default_rng(8)
        u, a = rng.uniform(-1, 1, 50), rng.uniform(0, 2, 50)
        des = constrained_tensor_design(u, a, make_knots(u, 6), make_knots(a, 7))
        assert des.design.shape == (50, 6 * 6)
        np.testing.assert_allclose(des.rows(u, a), des.design, atol=1e-15)

    def test_deriv_rows_match_differences(self):
        rng = np.random.default_rng(9)
        u, a = rng.uniform(-1, 1, 200), rng.uniform(0, 2, 200)
        des = constrained_tensor_design(u, a, make_knots(u, 8), make_knots(a, 8))
        theta = rng.normal(size=des.num_columns)
        u0, a0 = rng.uniform(-0.9, 0.9, 30), rng.uniform(0, 2, 30)
        h = 1e-5
        fd = (des.rows(u0 + h, a0) - des.rows(u0 - h, a0)) @ theta / (2 * h)
        np.testing.assert_allclose(des.deriv_rows(u0, a0) @ theta, fd, rtol=1e-5, atol=1e-6)


@st.composite
def bases(draw):
    degree = draw(st.integers(1, 4))
    num_basis = draw(st.integers(degree + 1, degree + 9))
    lo = draw(st.floats(-100, 100))
    width = draw(st.floats(1e-2, 50))
    seed = draw(st.integers(0, 2**32 - 1))
    values = np.random.default_rng(seed).uniform(lo, lo + width, 60)
    return make_knots(values, num_basis, degree), seed


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(bases())
    def test_partition_of_unity(self, arg):
        basis, seed = arg
        xs = np.random.default_rng(seed + 1).uniform(basis.lower, basis.upper, 100)
        np.testing.assert_allclose(basis_matrix(basis, xs).sum(axis=1), 1.0, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(bases())
    def test_derivative_rows_sum_to_zero(self, arg):
        basis, seed = arg
        xs = np.random.default_rng(seed + 2).uniform(basis.lower, basis.upper, 50)
        dB = deriv_basis_matrix(basis, xs)
        scale = max(1.0, np.abs(dB).max())
        np.testing.assert_allclose(dB.sum(axis=1), 0, atol=1e-10 * scale)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_row_kronecker_entries(self, n, N, M, seed):
        rng = np.random.default_rng(seed)
        B, C = rng.normal(size=(n, N)), rng.normal(size=(n, M))
        D = row_kronecker(B, C)
        assert D.shape == (n, N * M)
        np.testing.assert_array_equal(D, np.einsum("ir,is->irs", B, C).reshape(n, N * M))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 12), st.integers(5, 80), st.integers(0, 2**32 - 1))
    def test_sum_to_zero_any_basis(self, M, n, seed):
        rng = np.random.default_rng(seed)
        B = rng.uniform(0.01, 1, size=(n, M))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            res = absorb_sum_to_zero(B, difference_penalty(2, M))
        assert np.abs(res.basis.sum(axis=0)).max() <= 1e-10 * n * max(1.0, np.abs(B).sum(axis=0).max())
        np.testing.assert_allclose(res.z_transform.T @ res.z_transform, np.eye(M - 1), atol=1e-12)
