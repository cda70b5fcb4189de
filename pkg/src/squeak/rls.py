"""Ridge leverage scores: the dense exact values and dictionary-based estimates.

The exact scores ``tau_i = [K (K + gamma I)^-1]_ii`` need the whole Gram
matrix and only serve as an oracle. The estimators look at kernel values on
a dictionary's support only:

    tau~_i = (1 - eps) * phi_i^T (Phi S S^T Phi^T + c * gamma * I)^-1 phi_i
           = (1 - eps) / (c * gamma) * (k_ii - v_i^T (D G D + c * gamma I)^-1 v_i)

with ``G`` the support Gram matrix, ``D = diag(sqrt(w))``, ``v_i = D k_i``
and ridge factor ``c = 1 + (ways - 1) * eps`` when ``ways`` approximate
dictionaries are pooled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg as la

from .dictionary import Dictionary
from .kernels import EvalCounter, symmetric_gram
from .linalg import check_psd_eigenvalues, jitter_cholesky


class RlsEstimate(NamedTuple):
    tau_tilde: float
    index: int
    alpha: float


def _check_gamma(gamma: float) -> None:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def exact_rls(K: np.ndarray, gamma: float) -> np.ndarray:
    """Diagonal of ``K (K + gamma I)^-1`` via a Cholesky factor of ``K + gamma I``.

    Raises :class:`~squeak.linalg.NotPSDError` when ``K`` has an eigenvalue
    below ``-1e-8 * lambda_max``.
    """
    _check_gamma(gamma)
    K = np.asarray(K, dtype=np.float64)
    check_psd_eigenvalues(np.linalg.eigvalsh(K))
    n = K.shape[0]
    L = la.cholesky(K + gamma * np.eye(n), lower=True)
    # K (K + gI)^-1 = I - g (K + gI)^-1, and diag((K + gI)^-1) = column norms of L^-1
    Linv = la.solve_triangular(L, np.eye(n), lower=True)
    return 1.0 - gamma * np.einsum("ij,ij->j", Linv, Linv)


def effective_dimension(K: np.ndarray, gamma: float) -> float:
    return float(exact_rls(K, gamma).sum())


@dataclass(frozen=True)
class Estimator:
    """Which shrunk estimator to use: ``ways`` approximate dictionaries pooled.

    ``ways=1`` is the sequential estimator (one approximate dictionary plus
    exact material); ``ways=2`` is the two-dictionary merge estimator.
    """

    ways: int = 1

    def __post_init__(self):
        if self.ways < 1:
            raise ValueError("ways must be >= 1")

    @classmethod
    def sequential(cls) -> "Estimator":
        return cls(1)

    @classmethod
    def merge(cls, k: int = 2) -> "Estimator":
        return cls(k)

    def ridge_factor(self, epsilon: float) -> float:
        return 1.0 + (self.ways - 1) * epsilon

    def alpha(self, epsilon: float) -> float:
        return (1.0 + (2 * self.ways - 1) * epsilon) / (1.0 - epsilon)


def shrunk_scores(
    G: np.ndarray,
    weights: np.ndarray,
    gamma: float,
    epsilon: float,
    estimator: Estimator = Estimator(),
) -> np.ndarray:
    """Estimates for every support point at once, clamped to [0, 1].

    One factorization of the support system serves all of them.
    """
    _check_gamma(gamma)
    m = G.shape[0]
    if m == 0:
        raise ValueError("estimator undefined on an empty support")
    ridge = estimator.ridge_factor(epsilon) * gamma
    d = np.sqrt(weights)
    A = d[:, None] * G * d[None, :]
    A[np.diag_indices(m)] += ridge
    L = jitter_cholesky(A)
    Z = la.solve_triangular(L, d[:, None] * G, lower=True, check_finite=False)
    residual = np.diag(G) - np.einsum("ij,ij->j", Z, Z)
    return np.clip((1.0 - epsilon) / ridge * residual, 0.0, 1.0)


def _support_scores(d: Dictionary, data, estimator: Estimator, counter: Optional[EvalCounter]):
    support, w = d.weights_on_support()
    if support.size == 0:
        raise ValueError("estimator undefined on an empty support")
    G = symmetric_gram(d.kernel, data.vectors(support), counter)
    return support, shrunk_scores(G, w, d.gamma, d.epsilon, estimator)


def _pick(support: np.ndarray, scores: np.ndarray, i: int, alpha: float) -> RlsEstimate:
    pos = np.searchsorted(support, i)
    if pos >= support.size or support[pos] != i:
        raise KeyError(f"point {i} is not in the dictionary support")
    return RlsEstimate(float(scores[pos]), int(i), alpha)


def estimate_rls_sequential(d: Dictionary, data, i: int, counter: Optional[EvalCounter] = None) -> RlsEstimate:
    """Sequential estimate for point ``i`` of an already-expanded dictionary."""
    if i not in d:
        raise KeyError(f"point {i} is not in the dictionary support")
    est = Estimator.sequential()
    support, scores = _support_scores(d, data, est, counter)
    return _pick(support, scores, i, est.alpha(d.epsilon))


def concatenate(dicts: Sequence[Dictionary]) -> Dictionary:
    """Union of dictionaries over disjoint point sets sharing all parameters."""
    if not dicts:
        raise ValueError("need at least one dictionary")
    first = dicts[0]
    for other in dicts[1:]:
        if not first.same_parameters(other):
            raise ValueError("dictionaries disagree on gamma, epsilon, q_bar or kernel")
    indices = np.concatenate([d.indices for d in dicts])
    if np.unique(indices).size != indices.size:
        raise ValueError("dictionaries share point ids; datasets must be disjoint")
    return first.replace(
        indices,
        np.concatenate([d.p_tilde for d in dicts]),
        np.concatenate([d.q for d in dicts]),
        n_processed=sum(d.n_processed for d in dicts),
    )


def estimate_rls_merge(
    dicts: Sequence[Dictionary], data, i: int, counter: Optional[EvalCounter] = None
) -> RlsEstimate:
    """Estimate for point ``i`` from ``k`` dictionaries built on disjoint data."""
    union = concatenate(dicts)
    if union.size() == 0:
        raise ValueError("estimator undefined on an empty support")
    if i not in union:
        raise KeyError(f"point {i} is not in the dictionary support")
    est = Estimator.merge(len(dicts))
    support, scores = _support_scores(union, data, est, counter)
    return _pick(support, scores, i, est.alpha(union.epsilon))


def clamp_min_estimate(tau_tilde, p_prev, halving_floor: bool = True):
    """New sampling probability: ``max(min(tau~, p_prev), p_prev / 2)``.

    Works elementwise on arrays. With ``halving_floor=False`` this is the
    plain ``min(tau~, p_prev)``.
    """
    tau_tilde = getattr(tau_tilde, "tau_tilde", tau_tilde)
    p = np.minimum(tau_tilde, p_prev)
    if halving_floor:
        p = np.maximum(p, np.asarray(p_prev) / 2.0)
    return p if np.ndim(p) else float(p)
