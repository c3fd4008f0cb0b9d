import numpy as np
import pytest
from hypothesis import given, strategies as st

from airfl import linalg
from conftest import random_hermitian, random_hpd


class TestHermitianEig:
    def test_diagonal(self):
        eig = linalg.hermitian_eig(np.diag([2.0, 1.0]).astype(complex))
        np.testing.assert_allclose(eig.eigenvalues, [1.0, 2.0])

    def test_identity(self):
        eig = linalg.hermitian_eig(np.eye(3, dtype=complex))
        np.testing.assert_allclose(eig.eigenvalues, [1.0, 1.0, 1.0])

    def test_reconstruction_residual(self, rng):
        X = random_hermitian(rng, 5)
        eig = linalg.hermitian_eig(X)
        res = np.linalg.norm(eig.reconstruct() - X)
        assert res <= 1e-9 * (1.0 + np.linalg.norm(X))

    def test_orthonormal_columns(self, rng):
        X = random_hermitian(rng, 6)
        Q = linalg.hermitian_eig(X).eigenvectors
        np.testing.assert_allclose(Q.conj().T @ Q, np.eye(6), atol=1e-10)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            linalg.hermitian_eig(np.ones((2, 3)))

    def test_rejects_non_hermitian(self, rng):
        X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        with pytest.raises(ValueError):
            linalg.hermitian_eig(X)

    def test_rejects_non_finite(self):
        X = np.eye(2, dtype=complex)
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            linalg.hermitian_eig(X)

    def test_deterministic_phase(self, rng):
        X = random_hermitian(rng, 5)
        e1 = linalg.hermitian_eig(X)
        e2 = linalg.hermitian_eig(X.copy())
        np.testing.assert_array_equal(e1.eigenvectors, e2.eigenvectors)
        # pinned: largest-magnitude component of each column is real positive
        for j in range(5):
            col = e1.eigenvectors[:, j]
            piv = col[np.argmax(np.abs(col))]
            assert piv.real > 0 and abs(piv.imag) < 1e-12 * abs(piv)

    @given(st.integers(2, 16), st.integers(0, 1000))
    def test_reconstruction_property(self, n, seed):
        rng = np.random.default_rng(seed)
        X = random_hermitian(rng, n)
        eig = linalg.hermitian_eig(X)
        assert np.linalg.norm(eig.reconstruct() - X) <= 1e-9 * (1 + np.linalg.norm(X))


class TestSolveHpd:
    def test_identity(self, rng):
        y = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        np.testing.assert_allclose(linalg.solve_hpd(np.eye(4, dtype=complex), y), y)

    def test_diagonal(self):
        x = linalg.solve_hpd(np.diag([2.0, 4.0]).astype(complex), np.array([2.0, 4.0]))
        np.testing.assert_allclose(x, [1.0, 1.0])

    def test_residual(self, rng):
        A = random_hpd(rng, 6)
        y = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        x = linalg.solve_hpd(A, y)
        assert np.linalg.norm(A @ x - y) <= 1e-9 * (1.0 + np.linalg.norm(y))

    def test_roundtrip(self, rng):
        A = random_hpd(rng, 5)
        x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        x2 = linalg.solve_hpd(A, A @ x)
        assert np.linalg.norm(x2 - x) <= 1e-8 * np.linalg.norm(x)

    def test_indefinite_raises(self):
        with pytest.raises(linalg.SingularSystemError):
            linalg.solve_hpd(np.diag([1.0, -1.0]).astype(complex), np.ones(2))


class TestPsdProject:
    def test_clips_negative_eigenvalue(self):
        P = linalg.psd_project(np.diag([1.0, -2.0]).astype(complex))
        np.testing.assert_allclose(P, np.diag([1.0, 0.0]), atol=1e-12)

    def test_fixed_point_on_psd(self, rng):
        A = random_hpd(rng, 4)
        np.testing.assert_allclose(linalg.psd_project(A), A, atol=1e-10 * np.linalg.norm(A))

    def test_idempotent(self, rng):
        X = random_hermitian(rng, 5)
        P1 = linalg.psd_project(X)
        P2 = linalg.psd_project(P1)
        assert np.linalg.norm(P2 - P1) <= 1e-10 * (1 + np.linalg.norm(P1))

    def test_nearest_among_random_psd(self, rng):
        # the projection must beat 100 random PSD matrices in Frobenius distance
        X = random_hermitian(rng, 4)
        P = linalg.psd_project(X)
        dist = np.linalg.norm(X - P)
        for _ in range(100):
            S = random_hpd(rng, 4) * rng.uniform(0.01, 2.0)
            assert np.linalg.norm(X - S) >= dist - 1e-12


class TestLeadingEigpair:
    def test_diagonal(self):
        lam, q = linalg.leading_eigpair(np.diag([3.0, 1.0]).astype(complex))
        assert lam == pytest.approx(3.0)
        np.testing.assert_allclose(np.abs(q), [1.0, 0.0], atol=1e-12)

    def test_rank_one(self, rng):
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        v /= np.linalg.norm(v)
        lam, q = linalg.leading_eigpair(np.outer(v, v.conj()))
        assert lam == pytest.approx(1.0)
        assert abs(abs(v.conj() @ q) - 1.0) < 1e-10  # equal up to global phase

    def test_matches_full_decomposition(self, rng):
        X = random_hermitian(rng, 5)
        lam, q = linalg.leading_eigpair(X)
        eig = linalg.hermitian_eig(X)
        assert lam == pytest.approx(eig.eigenvalues[-1])
        assert np.linalg.norm(X @ q - lam * q) <= 1e-8 * (1 + abs(lam))
