"""Dense complex Hermitian helpers.

Everything here is a thin, validated layer over LAPACK (``numpy.linalg``):
matrices in this package are at most a few hundred rows, dense, and
either complex Hermitian (states, POVM elements) or real symmetric
(moment-matrix blocks).
"""

from __future__ import annotations

import numpy as np

from .tolerances import POLICY


class NotHermitianError(ValueError):
    """Raised when a matrix expected to be Hermitian is not."""


def as_cmatrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def is_hermitian(a, tol: float = POLICY.hermiticity) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(
        np.max(np.abs(a - a.conj().T), initial=0.0) <= tol
    )


def _require_hermitian(a, tol: float) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not is_hermitian(a, tol):
        err = np.max(np.abs(a - a.conj().T))
        raise NotHermitianError(f"matrix is not Hermitian (max |A - A^H| = {err:.3e})")
    return a


def dagger(a) -> np.ndarray:
    return np.asarray(a).conj().T


def kron(*mats) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    if not mats:
        raise ValueError("kron needs at least one matrix")
    out = np.asarray(mats[0])
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m))
    return out


def herm_eigs(a, tol: float = POLICY.hermiticity) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian (or real symmetric) matrix."""
    a = _require_hermitian(a, tol)
    return np.linalg.eigvalsh(a)


def herm_eigh(a, tol: float = POLICY.hermiticity) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition ``A = V diag(w) V^H`` with ascending ``w``."""
    a = _require_hermitian(a, tol)
    w, v = np.linalg.eigh(a)
    return w, v


def max_abs_eig(a, tol: float = POLICY.hermiticity) -> float:
    """Spectral norm of a Hermitian matrix."""
    w = herm_eigs(a, tol)
    if w.size == 0:
        return 0.0
    return float(max(abs(w[0]), abs(w[-1])))


def min_eig(a, tol: float = POLICY.hermiticity) -> float:
    return float(herm_eigs(a, tol)[0])


def real_embed(a, tol: float = POLICY.hermiticity) -> np.ndarray:
    """Real symmetric ``2n x 2n`` embedding ``[[Re A, -Im A], [Im A, Re A]]``.

    Each eigenvalue of ``A`` appears twice in the embedding, so PSD-ness is
    preserved in both directions.
    """
    a = _require_hermitian(a, tol)
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def is_psd(a, slack: float = POLICY.psd_slack) -> bool:
    return min_eig(a, tol=max(POLICY.hermiticity, slack)) >= -slack


def projector(v) -> np.ndarray:
    """Rank-one projector ``|v><v|`` for a (normalised) vector."""
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())
