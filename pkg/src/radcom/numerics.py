"""Dense complex linear-algebra primitives used throughout the package.

Everything here operates on plain complex numpy arrays.  Hermitian inputs are
re-symmetrized as ``(x + x^H)/2`` before factorization so that round-off from
upstream products never leaks into eigensolvers.
"""

from __future__ import annotations

import numpy as np

from .errors import DefinitenessError

__all__ = [
    "herm",
    "is_hermitian",
    "herm_inv_sqrt",
    "logdet_hpd",
    "svd_complex",
    "ensure_psd",
]

#: relative Frobenius asymmetry beyond which an input is rejected as non-Hermitian
_HERM_RTOL = 1e-8


def herm(a: np.ndarray) -> np.ndarray:
    """Return the Hermitian part ``(a + a^H) / 2`` of a square matrix."""
    return 0.5 * (a + a.conj().T)


def is_hermitian(a: np.ndarray, rtol: float = _HERM_RTOL) -> bool:
    """True if ``a`` is Hermitian up to a relative Frobenius tolerance."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return True
    return np.linalg.norm(a - a.conj().T) <= rtol * scale


def _checked_herm(a: np.ndarray, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError(f"{what}: non-finite entries")
    if not is_hermitian(a):
        raise ValueError(f"{what}: input is not Hermitian")
    return herm(a)

def herm_inv_sqrt(a: np.ndarray) -> np.ndarray:
    """Inverse matrix square root of a Hermitian positive definite matrix.

    Computed from the eigendecomposition ``a = V diag(lam) V^H`` as
    ``V diag(lam^-1/2) V^H``; the result is Hermitian positive definite and
    commutes with ``a``.

    Raises
    ------
    DefinitenessError
        If the smallest eigenvalue is non-positive (within round-off of zero).
    """
    a = _checked_herm(a, "herm_inv_sqrt")
    lam, vec = np.linalg.eigh(a)
    if lam[0] <= max(0.0, 1e-15 * lam[-1]):
        raise DefinitenessError(
            f"herm_inv_sqrt: matrix is not positive definite "
            f"(min eigenvalue {lam[0]:.3e}, max {lam[-1]:.3e})"
        )
    root = (vec * (1.0 / np.sqrt(lam))) @ vec.conj().T
    return herm(root)


def logdet_hpd(a: np.ndarray) -> float:
    """``log det(a)`` (natural log) for Hermitian positive definite ``a``.

    Uses a triangular (Cholesky) factorization; never forms the determinant.
    Raises :class:`DefinitenessError` if the factorization fails.
    """
    a = _checked_herm(a, "logdet_hpd")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"logdet_hpd: not positive definite ({exc})") from exc
    return float(2.0 * np.sum(np.log(np.real(np.diag(chol)))))


def svd_complex(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Economy-size SVD ``a = u @ diag(s) @ v^H`` of a complex matrix.

    Returns ``(u, s, v)`` where the *columns* of ``v`` are the right singular
    vectors (note: numpy's ``svd`` returns ``v^H``; this returns ``v``), and
    ``s`` is sorted in descending order.
    """
    a = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("svd_complex: non-finite entries")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return u, s, vh.conj().T


def ensure_psd(a: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Repair a nominally PSD Hermitian matrix whose eigenvalues dip below zero.

    Eigenvalues in ``[-rel_tol * lam_max, 0)`` are treated as round-off and
    clipped to zero; anything more negative raises :class:`DefinitenessError`
    (it indicates a logic error upstream, not noise).
    """
    a = _checked_herm(a, "ensure_psd")
    lam, vec = np.linalg.eigh(a)
    lam_max = max(lam[-1], 0.0)
    if lam[0] < -rel_tol * max(lam_max, np.finfo(float).tiny):
        raise DefinitenessError(
            f"ensure_psd: eigenvalue {lam[0]:.3e} is too negative to be round-off "
            f"(max eigenvalue {lam_max:.3e})"
        )
    if lam[0] >= 0.0:
        return a
    return herm((vec * np.maximum(lam, 0.0)) @ vec.conj().T)
