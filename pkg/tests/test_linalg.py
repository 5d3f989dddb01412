from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from povar.errors import ConvergenceError, DomainError, InstabilityError
from povar.linalg import (as_matrix, check_psd, lyapunov_residual, max_norm, op_norm_1, op_norm_inf,
                          pseudo_inverse, spectral_norm, stationary_covariance, sym_inv_sqrt, sym_sqrt)

from oracles import jacobi_eigvalsh, row_sum_norm, truncated_series_gamma0

# zero or moderately scaled entries; subnormals would overflow any reciprocal
finite = st.one_of(st.just(0.0), st.floats(1e-3, 10), st.floats(-10, -1e-3))


def small_matrices(max_side=5):
    return st.tuples(st.integers(1, max_side), st.integers(1, max_side)).flatmap(
        lambda s: arrays(float, s, elements=finite))


def test_op_norm_inf_trivial():
    assert op_norm_inf(np.eye(3)) == 1
    # max row sum; the column-sum norm of the same matrix is 4
    assert op_norm_inf([[1, -2], [3, 0]]) == 3
    assert op_norm_1([[1, -2], [3, 0]]) == 4


def test_op_norm_inf_matches_loop_oracle(rng):
    M = rng.standard_normal((5, 5))
    assert op_norm_inf(M) == pytest.approx(row_sum_norm(M), abs=1e-14)
    assert op_norm_1(M) == pytest.approx(row_sum_norm(M.T), abs=1e-14)


def test_max_norm():
    assert max_norm(np.zeros((2, 3))) == 0
    assert max_norm([[1, -7], [3, 2]]) == 7


def test_max_norm_random(rng):
    M = rng.standard_normal((4, 6))
    assert max_norm(M) == max(abs(v) for v in M.ravel())


@pytest.mark.parametrize("bad", [np.zeros((0, 3)), [[1.0, np.nan]], [[np.inf]]])
def test_rejects_empty_or_nonfinite(bad):
    with pytest.raises(DomainError):
        op_norm_inf(bad)
    with pytest.raises(DomainError):
        as_matrix(bad)


def test_spectral_norm_trivial():
    assert spectral_norm(np.eye(4)) == pytest.approx(1.0, rel=1e-10)
    assert spectral_norm(np.diag([2.0, 1.0])) == pytest.approx(2.0, rel=1e-10)


def test_spectral_norm_against_jacobi(rng):
    for _ in range(5):
        M = rng.standard_normal((4, 4))
        ref = np.sqrt(jacobi_eigvalsh(M.T @ M)[-1])
        assert spectral_norm(M) == pytest.approx(ref, rel=1e-9)


def test_spectral_norm_rectangular_and_orthogonal_start():
    # all-ones start is orthogonal to the top singular vector here
    M = np.array([[1.0, -1.0], [1.0, 1.0]]) / np.sqrt(2) @ np.diag([1.0, 3.0]) @ np.array([[1.0, 1.0], [-1.0, 1.0]]) / np.sqrt(2)
    assert spectral_norm(M) == pytest.approx(3.0, rel=1e-9)
    R = np.arange(6.0).reshape(2, 3)
    assert spectral_norm(R) == pytest.approx(np.linalg.norm(R, 2), rel=1e-9)


def test_spectral_norm_iteration_cap():
    M = np.diag([1.0, 0.999999, 0.5])
    with pytest.raises(ConvergenceError) as info:
        spectral_norm(M, tol=1e-15, max_iter=2)
    assert info.value.last is not None


@settings(max_examples=60, deadline=None)
@given(small_matrices())
def test_norm_inequalities(M):
    assert op_norm_inf(M) >= max_norm(M) - 1e-12
    sn = spectral_norm(M) if np.any(M) else 0.0
    assert sn <= np.sqrt(op_norm_inf(M) * op_norm_1(M)) * (1 + 1e-8) + 1e-12


def penrose_residuals(M, P):
    return (max_norm(M @ P @ M - M), max_norm(P @ M @ P - P),
            max_norm((M @ P).T - M @ P), max_norm((P @ M).T - P @ M))


def test_pinv_nonsingular(rng):
    M = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    assert max_norm(M @ pseudo_inverse(M) - np.eye(4)) < 1e-12


def test_pinv_rank_deficient_diagonal():
    np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]), atol=1e-15)


def test_pinv_zero_matrix():
    assert np.array_equal(pseudo_inverse(np.zeros((2, 3))), np.zeros((3, 2)))


def test_pinv_rank_one_penrose(rng):
    u, v = rng.standard_normal(3), rng.standard_normal(3)
    M = np.outer(u, v)
    P = pseudo_inverse(M)
    assert max(penrose_residuals(M, P)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(small_matrices(4))
def test_pinv_penrose_property(M):
    P = pseudo_inverse(M)
    scale = max(1.0, max_norm(M)) ** 2 * max(1.0, max_norm(P)) ** 2
    assert max(penrose_residuals(M, P)) <= 100 * 1e-10 * scale


def test_stationary_covariance_scalar():
    assert stationary_covariance([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3, rel=1e-12)


def test_stationary_covariance_zero_theta(rng):
    S = rng.standard_normal((3, 3))
    S = S @ S.T
    np.testing.assert_allclose(stationary_covariance(np.zeros((3, 3)), S), S, atol=1e-15)


def test_stationary_covariance_series_oracle(rng):
    for _ in range(5):
        th = rng.standard_normal((4, 4))
        th *= 0.8 / np.linalg.norm(th, 2)
        G = stationary_covariance(th, np.eye(4))
        assert lyapunov_residual(th, np.eye(4), G) <= 1e-11
        np.testing.assert_allclose(G, truncated_series_gamma0(th, np.eye(4)), atol=1e-10)
        assert np.allclose(G, G.T, atol=1e-12)
        assert spectral_norm(G) <= 1.0 / (1 - 0.8**2) + 1e-9


def test_stationary_covariance_errors():
    with pytest.raises(InstabilityError):
        stationary_covariance(np.diag([1.0, 0.2]), np.eye(2))
    with pytest.raises(DomainError):
        stationary_covariance(np.zeros((2, 2)), [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(DomainError):
        stationary_covariance(np.zeros((2, 2)), np.diag([1.0, -1.0]))


def test_symmetric_roots(rng):
    A = rng.standard_normal((4, 4))
    S = A @ A.T + 0.5 * np.eye(4)
    R = sym_sqrt(S)
    np.testing.assert_allclose(R @ R, S, atol=1e-12)
    Ri = sym_inv_sqrt(S, 1e-3)
    np.testing.assert_allclose(Ri @ S @ Ri, np.eye(4), atol=1e-10)
    check_psd(S)
