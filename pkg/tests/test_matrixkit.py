import numpy as np
import pytest
from conftest import crandn, random_pd

from coupledmimo import matrixkit as mk
from coupledmimo.errors import DimensionMismatch, NotPositiveDefinite


def test_hermitian_solve_identity_returns_rhs(rng):
    y = crandn(rng, 3, 2)
    np.testing.assert_allclose(mk.hermitian_solve(np.eye(3), y), y)


def test_hermitian_solve_scaled_identity():
    np.testing.assert_allclose(mk.hermitian_solve(2 * np.eye(2), np.eye(2)), 0.5 * np.eye(2))


def test_hermitian_solve_residual_random(rng):
    a = random_pd(rng, 6)
    y = crandn(rng, 6, 3)
    x = mk.hermitian_solve(a, y)
    assert np.linalg.norm(a @ x - y) / np.linalg.norm(y) <= 1e-9


def test_hermitian_solve_vector_rhs(rng):
    a = random_pd(rng, 4)
    y = crandn(rng, 4)
    x = mk.hermitian_solve(a, y)
    assert x.shape == (4,)
    np.testing.assert_allclose(a @ x, y, atol=1e-12)


def test_hermitian_solve_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        mk.hermitian_solve(np.diag([1.0, -1.0]), np.eye(2))


def test_hermitian_solve_rejects_non_hermitian():
    with pytest.raises(NotPositiveDefinite):
        mk.hermitian_solve(np.array([[2.0, 1.0], [0.0, 2.0]]), np.eye(2))


def test_hermitian_solve_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        mk.hermitian_solve(np.eye(3), np.ones((2, 1)))


def test_cholesky_trivial_cases():
    np.testing.assert_allclose(mk.cholesky_lower(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(mk.cholesky_lower(4 * np.eye(2)), 2 * np.eye(2))


def test_cholesky_reconstructs_small_example():
    r = np.array([[2.0, 1.0], [1.0, 2.0]])
    low = mk.cholesky_lower(r)
    assert np.allclose(np.triu(low, 1), 0)
    np.testing.assert_allclose(low @ low.conj().T, r, atol=1e-12)


def test_cholesky_rejects_singular():
    with pytest.raises(NotPositiveDefinite):
        mk.cholesky_lower(np.ones((2, 2)))


def test_svd_identity_and_diagonal():
    _, s, _ = mk.svd(np.eye(4))
    np.testing.assert_allclose(s, np.ones(4))
    u, s, v = mk.svd(np.diag([3.0, -4.0]))
    np.testing.assert_allclose(s, [4.0, 3.0])
    np.testing.assert_allclose(u[:, :2] @ np.diag(s) @ v.conj().T, np.diag([3.0, -4.0]), atol=1e-12)


def test_svd_matches_gram_eigenvalues(rng):
    a = crandn(rng, 8, 4)
    _, s, _ = mk.svd(a)
    eig = np.sort(np.linalg.eigvalsh(a.conj().T @ a))[::-1]
    np.testing.assert_allclose(s**2, eig, rtol=1e-9)


def test_kron_trivial():
    np.testing.assert_allclose(mk.kron(np.eye(2), np.eye(3)), np.eye(6))
    b = np.arange(6.0).reshape(2, 3)
    np.testing.assert_allclose(mk.kron([[2.0]], b), 2 * b)


def test_vec_identity(rng):
    a, x, b = (crandn(rng, 3, 3) for _ in range(3))
    np.testing.assert_allclose(mk.vec(a @ x @ b), mk.kron(b.T, a) @ mk.vec(x), atol=1e-12)


def test_vec_unvec_round_trip(rng):
    a = crandn(rng, 3, 5)
    np.testing.assert_array_equal(mk.unvec(mk.vec(a), 3, 5), a)


def test_hermitian_sqrt_squares_back(rng):
    r = random_pd(rng, 5)
    h = mk.hermitian_sqrt(r)
    np.testing.assert_allclose(h @ h, r, atol=1e-10)
    assert mk.is_hermitian(h)


def test_as_cmat_rejects_nan():
    with pytest.raises(ValueError):
        mk.as_cmat([[np.nan]])


def test_inputs_are_not_mutated(rng):
    r = random_pd(rng, 3)
    keep = r.copy()
    mk.cholesky_lower(r)
    mk.hermitian_solve(r, np.eye(3))
    mk.hermitian_sqrt(r)
    np.testing.assert_array_equal(r, keep)
