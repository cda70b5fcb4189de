"""Regularized Nystrom approximation and kernel ridge regression from a dictionary.

With ``C = K[:, support] * sqrt(w)`` and ``W = sqrt(w) G sqrt(w) + gamma I``
the approximation is ``K~ = C W^-1 C^T``. The regression weights solve
``(K~ + mu I) w~ = y`` through the Woodbury form

    w~ = (y - C (C^T C + mu W)^-1 C^T y) / mu

so nothing larger than ``n x m`` is ever built.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .dictionary import Dictionary
from .kernels import EvalCounter, KernelSpec, gram_matrix, pairwise, symmetric_gram
from .linalg import spd_solve


def _factors(data, d: Dictionary, counter: Optional[EvalCounter] = None):
    support, w = d.weights_on_support()
    if support.size == 0:
        raise ValueError("Nystrom approximation needs a nonempty dictionary")
    s = np.sqrt(w)
    S = data.vectors(support)
    C = pairwise(d.kernel, data.points, S) * s[None, :]
    if counter is not None:
        counter.add(C.size)
    G = symmetric_gram(d.kernel, S, counter)
    W = s[:, None] * G * s[None, :]
    W[np.diag_indices_from(W)] += d.gamma
    return support, w, C, W


def nystrom_gap(data, d: Dictionary) -> np.ndarray:
    """Dense ``K - K~`` for oracle checks; builds the full Gram matrix."""
    support, w = d.weights_on_support()
    if support.size == 0:
        raise ValueError("Nystrom approximation needs a nonempty dictionary")
    K = gram_matrix(d.kernel, data)
    cols = data.rows(support)
    s = np.sqrt(w)
    C = K[:, cols] * s[None, :]
    W = s[:, None] * K[np.ix_(cols, cols)] * s[None, :]
    W[np.diag_indices_from(W)] += d.gamma
    Kt = C @ spd_solve(W, C.T)
    gap = K - Kt
    return (gap + gap.T) / 2


@dataclass(frozen=True, eq=False)
class NystromModel:
    support: np.ndarray
    weights: np.ndarray
    gamma: float
    mu: float
    w_tilde: np.ndarray
    kernel: KernelSpec

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if support.shape != weights.shape:
            raise ValueError("support and weights must have the same length")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "w_tilde", np.asarray(self.w_tilde, dtype=np.float64))

    @property
    def n(self) -> int:
        return int(self.w_tilde.size)

    def to_json(self) -> dict[str, Any]:
        return {
            "support": [int(i) for i in self.support],
            "weights": [float(v) for v in self.weights],
            "gamma": float(self.gamma),
            "mu": float(self.mu),
            "w_tilde": [float(v) for v in self.w_tilde],
            "kernel": self.kernel.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NystromModel":
        missing = [k for k in ("support", "weights", "gamma", "mu", "w_tilde", "kernel") if k not in obj]
        if missing:
            raise ValueError(f"{missing[0]}: missing")
        return cls(
            obj["support"], obj["weights"], float(obj["gamma"]), float(obj["mu"]),
            obj["w_tilde"], KernelSpec.from_json(obj["kernel"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def fit_krr(data, d: Dictionary, mu: float, y: Optional[np.ndarray] = None) -> NystromModel:
    """Regression weights on the training points, ``O(n m^2 + m^3)`` time."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if y is None:
        if data.labels is None:
            raise ValueError("kernel ridge regression needs labels")
        y = data.labels
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (len(data),):
        raise ValueError(f"expected {len(data)} targets, got shape {y.shape}")
    support, w, C, W = _factors(data, d)
    inner = C.T @ C + mu * W
    w_tilde = (y - C @ spd_solve(inner, C.T @ y)) / mu
    return NystromModel(support, w, d.gamma, float(mu), w_tilde, d.kernel)


def predict(model: NystromModel, data, ids: Optional[Sequence[int]] = None) -> np.ndarray:
    """Fixed-design predictions ``K~ w~`` at training points, via ``C W^-1 C^T w~``."""
    if len(data) != model.n:
        raise ValueError(f"model was fit on {model.n} points, data has {len(data)}")
    s = np.sqrt(model.weights)
    S = data.vectors(model.support)
    C = pairwise(model.kernel, data.points, S) * s[None, :]
    W = s[:, None] * symmetric_gram(model.kernel, S) * s[None, :]
    W[np.diag_indices_from(W)] += model.gamma
    beta = spd_solve(W, C.T @ model.w_tilde)
    rows = slice(None) if ids is None else data.rows(ids)
    return C[rows] @ beta


def dense_krr(K: np.ndarray, y: np.ndarray, mu: float) -> np.ndarray:
    """Exact weights ``(K + mu I)^-1 y``; the baseline the approximation is measured against."""
    return spd_solve(K + mu * np.eye(K.shape[0]), y)


def empirical_risk(predictions, truth) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predictions.shape != truth.shape:
        raise ValueError(f"length mismatch: {predictions.shape} vs {truth.shape}")
    return float(np.mean((predictions - truth) ** 2))
