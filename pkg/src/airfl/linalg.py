"""Dense complex linear algebra helpers shared by all optimization modules.

Thin wrappers around LAPACK (via numpy/scipy) that add the validation and
determinism guarantees the solvers rely on: inputs are symmetrized before
eigendecompositions, eigenvector global phases are pinned, and factorization
failures surface as a single exception type.
"""

import numpy as np
import scipy.linalg
from dataclasses import dataclass

# Relative asymmetry tolerated before a matrix is rejected as non-Hermitian.
HERM_TOL = 1e-8


class SingularSystemError(ValueError):
    """Linear system is singular or not positive definite."""


def _check_square(X, name="matrix"):
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"{name} must be square, got shape {X.shape}")
    if not np.all(np.isfinite(X.real)) or not np.all(np.isfinite(X.imag)):
        raise ValueError(f"{name} has non-finite entries")
    return X


def _symmetrize(X, name="matrix"):
    nrm = np.linalg.norm(X)
    asym = np.linalg.norm(X - X.conj().T)
    if asym > HERM_TOL * max(nrm, 1e-300):
        raise ValueError(
            f"{name} is not Hermitian: relative asymmetry {asym / max(nrm, 1e-300):.3e}"
        )
    return 0.5 * (X + X.conj().T)


def _fix_phase(Q):
    # Pin each eigenvector's global phase: largest-magnitude entry real positive.
    # np.argmax returns the first maximizer, which also settles ties.
    Q = Q.copy()
    for j in range(Q.shape[1]):
        i = int(np.argmax(np.abs(Q[:, j])))
        piv = Q[i, j]
        if abs(piv) > 0:
            Q[:, j] *= np.conj(piv) / abs(piv)
    return Q


@dataclass(frozen=True)
class HermEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray  # real, ascending
    eigenvectors: np.ndarray  # unitary, columns match eigenvalues

    def reconstruct(self):
        Q = self.eigenvectors
        return (Q * self.eigenvalues) @ Q.conj().T


def hermitian_eig(X) -> HermEig:
    """Full eigendecomposition of a Hermitian matrix with pinned phases."""
    X = _check_square(X)
    H = _symmetrize(X)
    w, Q = np.linalg.eigh(H)
    return HermEig(eigenvalues=w, eigenvectors=_fix_phase(Q))


def solve_hpd(A, y):
    """Solve A x = y for Hermitian positive definite A via Cholesky.

    Raises SingularSystemError when the factorization fails (singular or
    indefinite A).
    """
    A = _check_square(A, "A")
    y = np.asarray(y, dtype=complex)
    try:
        c, low = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular system: {exc}") from exc
    return scipy.linalg.cho_solve((c, low), y, check_finite=False)


def psd_project(X):
    """Frobenius-nearest positive semidefinite matrix (eigenvalue clipping)."""
    X = _check_square(X)
    H = 0.5 * (X + X.conj().T)
    w, Q = np.linalg.eigh(H)
    wc = np.clip(w, 0.0, None)
    P = (Q * wc) @ Q.conj().T
    return 0.5 * (P + P.conj().T)


def leading_eigpair(X):
    """Largest eigenvalue and its unit eigenvector (phase pinned)."""
    X = _check_square(X)
    H = _symmetrize(X)
    w, Q = np.linalg.eigh(H)
    q = _fix_phase(Q[:, -1:])[:, 0]
    return float(w[-1]), q
