"""Dense complex linear-algebra kernel.

Thin, contract-checked wrappers over numpy/scipy LAPACK routines. Every
function takes array-likes, never mutates its inputs, and returns fresh
``complex128`` arrays.
"""

from __future__ import annotations

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .errors import ConvergenceFailure, DimensionMismatch, NotPositiveDefinite

CMat = npt.NDArray[np.complex128]

HERMITIAN_RTOL = 1e-10


def as_cmat(a, name: str = "matrix") -> CMat:
    """Return ``a`` as a finite 2-D complex array (a copy)."""
    m = np.array(a, dtype=np.complex128)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf")
    return m


def _require_square(a: CMat, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {a.shape}")


def is_hermitian(a: CMat, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    return bool(np.linalg.norm(a - a.conj().T) <= rtol * scale)


def _require_hermitian(a: CMat, name: str) -> None:
    _require_square(a, name)
    if not is_hermitian(a):
        raise NotPositiveDefinite(f"{name} is not Hermitian within {HERMITIAN_RTOL:g}")


def cholesky_lower(r) -> CMat:
    """Lower-triangular ``L`` with ``L @ L^H == r``.

    Raises
    ------
    NotPositiveDefinite
        If ``r`` is not Hermitian or a pivot is non-positive.
    """
    r = as_cmat(r, "R")
    _require_hermitian(r, "R")
    herm = 0.5 * (r + r.conj().T)
    try:
        return np.linalg.cholesky(herm)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky failed: {exc}") from None


def hermitian_solve(a, y) -> CMat:
    """Solve ``a @ x = y`` for Hermitian positive-definite ``a``."""
    a = as_cmat(a, "A")
    y_arr = np.asarray(y, dtype=np.complex128)
    vector = y_arr.ndim == 1
    y = as_cmat(y_arr, "Y")
    _require_hermitian(a, "A")
    if a.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"A is {a.shape} but Y has {y.shape[0]} rows")
    herm = 0.5 * (a + a.conj().T)
    try:
        factor = scipy.linalg.cho_factor(herm, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky failed: {exc}") from None
    x = scipy.linalg.cho_solve(factor, y, check_finite=False)
    return x[:, 0] if vector else x


def svd(a) -> tuple[CMat, np.ndarray, CMat]:
    """Full SVD ``a = U diag(sigma) V^H`` with ``sigma`` descending.

    Returns ``(U, sigma, V)``; note ``V`` rather than ``V^H``.
    """
    a = as_cmat(a, "A")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD did not converge: {exc}") from None
    return u, s, vh.conj().T


def kron(a, b) -> CMat:
    return np.kron(as_cmat(a, "A"), as_cmat(b, "B"))


def hermitian_sqrt(r) -> CMat:
    """Principal square root of a Hermitian positive-semidefinite matrix.

    Tiny negative eigenvalues from round-off are clipped to zero.
    """
    r = as_cmat(r, "R")
    _require_hermitian(r, "R")
    w, v = np.linalg.eigh(0.5 * (r + r.conj().T))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(w))))
    if np.min(w) < -tol:
        raise NotPositiveDefinite(f"matrix has negative eigenvalue {np.min(w):.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def min_eigenvalue(r) -> float:
    r = as_cmat(r, "R")
    return float(np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0])


def vec(a) -> np.ndarray:
    """Column-major vectorisation."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v).reshape(rows, cols, order="F")


def block_diag(blocks) -> CMat:
    return scipy.linalg.block_diag(*[np.asarray(b, dtype=np.complex128) for b in blocks])
