"""Dense symmetric helpers shared by the estimators and the oracles."""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

PSD_TOL = 1e-8
JITTER_BASE = 1e-12
JITTER_STEPS = 3


class NotPSDError(la.LinAlgError):
    pass


def jitter_cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``A``, retrying with diagonal jitter.

    Jitter starts at ``1e-12 * trace(A) / m`` and grows tenfold, at most
    three times, before giving up.
    """
    try:
        return la.cholesky(A, lower=True, check_finite=False)
    except la.LinAlgError:
        pass
    m = A.shape[0]
    jitter = JITTER_BASE * np.trace(A) / m
    for _ in range(JITTER_STEPS):
        try:
            return la.cholesky(A + jitter * np.eye(m), lower=True, check_finite=False)
        except la.LinAlgError:
            jitter *= 10
    raise la.LinAlgError("matrix not positive definite after jitter escalation")


def spd_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    L = jitter_cholesky(A)
    return la.cho_solve((L, True), B, check_finite=False)


def check_psd_eigenvalues(eigvals: np.ndarray, what: str = "kernel matrix") -> np.ndarray:
    """Clamp tiny negative eigenvalues to zero; reject real negativity."""
    top = max(float(np.max(eigvals)), 0.0) if eigvals.size else 0.0
    low = float(np.min(eigvals)) if eigvals.size else 0.0
    if low < -PSD_TOL * top:
        raise NotPSDError(f"{what} is not PSD: min eigenvalue {low:.3e}, max {top:.3e}")
    return np.clip(eigvals, 0.0, None)


def psd_eigh(K: np.ndarray, what: str = "kernel matrix") -> tuple[np.ndarray, np.ndarray]:
    lam, U = np.linalg.eigh(K)
    return check_psd_eigenvalues(lam, what), U
