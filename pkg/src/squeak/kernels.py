"""Kernel functions, Gram matrices and kernel-evaluation accounting.

Kernel values are only ever produced here; feature maps are never built.
Every evaluation routed through these helpers can be charged to an
:class:`EvalCounter` so the drivers can report how much of the kernel
matrix they actually looked at.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

KINDS = ("gaussian", "linear", "polynomial")


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Declarative kernel: ``kind`` plus its hyperparameters.

    gaussian:   k(x, y) = exp(-||x - y||^2 / (2 * bandwidth^2))
    linear:     k(x, y) = x . y
    polynomial: k(x, y) = (x . y + offset) ** degree
    """

    kind: str = "gaussian"
    bandwidth: float = 1.0
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KernelError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "gaussian" and not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise KernelError(f"gaussian bandwidth must be positive, got {self.bandwidth}")
        if self.kind == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise KernelError(f"polynomial degree must be a positive integer, got {self.degree}")
            if not self.offset >= 0:
                raise KernelError(f"polynomial offset must be nonnegative, got {self.offset}")

    @classmethod
    def gaussian(cls, bandwidth: float = 1.0) -> "KernelSpec":
        return cls("gaussian", bandwidth=float(bandwidth))

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear")

    @classmethod
    def polynomial(cls, degree: int = 2, offset: float = 1.0) -> "KernelSpec":
        return cls("polynomial", degree=int(degree), offset=float(offset))

    def to_json(self) -> dict[str, Any]:
        if self.kind == "gaussian":
            return {
                "kind": "gaussian",
                "bandwidth": float(self.bandwidth),
                "form": "exp(-|x-y|^2/(2*bandwidth^2))",
            }
        if self.kind == "linear":
            return {"kind": "linear"}
        return {"kind": "polynomial", "degree": int(self.degree), "offset": float(self.offset)}

    @classmethod
    def from_json(cls, obj: Any) -> "KernelSpec":
        if not isinstance(obj, dict):
            raise KernelError("kernel: expected an object")
        kind = obj.get("kind")
        try:
            if kind == "gaussian":
                return cls.gaussian(_number(obj, "bandwidth"))
            if kind == "linear":
                return cls.linear()
            if kind == "polynomial":
                degree = obj.get("degree")
                if not isinstance(degree, int) or isinstance(degree, bool):
                    raise KernelError("kernel.degree: expected an integer")
                return cls.polynomial(degree, _number(obj, "offset"))
        except KernelError as exc:
            raise KernelError(f"kernel: {exc}") from None
        raise KernelError(f"kernel.kind: unknown kernel kind {kind!r}")


def _number(obj: dict, key: str) -> float:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise KernelError(f"kernel.{key}: expected a number")
    return float(value)


@dataclass
class EvalCounter:
    """Number of kernel-function evaluations charged so far."""

    count: int = 0

    def add(self, n: int) -> None:
        self.count += int(n)

    def merge(self, other: "EvalCounter") -> None:
        self.count += other.count


def _charge(counter: Optional[EvalCounter], n: int) -> None:
    if counter is not None:
        counter.add(n)


def pairwise(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Kernel block between the rows of ``X`` and ``Y`` (uncounted)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise KernelError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if X.shape[0] == 0 or Y.shape[0] == 0:
        return np.zeros((X.shape[0], Y.shape[0]))
    if spec.kind == "gaussian":
        # cdist gives an exact zero for identical rows, so k(x, x) == 1.0
        sq = cdist(X, Y, "sqeuclidean")
        return np.exp(-sq / (2.0 * spec.bandwidth**2))
    inner = X @ Y.T
    if spec.kind == "linear":
        return inner
    return (inner + spec.offset) ** spec.degree


def evaluate(spec: KernelSpec, x, y, counter: Optional[EvalCounter] = None) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise KernelError(f"dimension mismatch: {x.size} vs {y.size}")
    _charge(counter, 1)
    return float(pairwise(spec, x[None, :], y[None, :])[0, 0])


def symmetric_gram(spec: KernelSpec, X: np.ndarray, counter: Optional[EvalCounter] = None) -> np.ndarray:
    """Gram matrix of the rows of ``X``, one evaluation per unordered pair.

    The lower triangle is a mirror of the upper one, so the result is
    exactly symmetric.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    m = X.shape[0]
    G = pairwise(spec, X, X)
    upper = np.triu(G)
    G = upper + np.triu(upper, 1).T
    _charge(counter, m * (m + 1) // 2)
    return G


def gram_matrix(spec: KernelSpec, data, counter: Optional[EvalCounter] = None) -> np.ndarray:
    if len(data) == 0:
        raise KernelError("gram_matrix needs a nonempty dataset")
    return symmetric_gram(spec, data.points, counter)


def column_on_support(
    spec: KernelSpec,
    data,
    i: int,
    support: Sequence[int],
    counter: Optional[EvalCounter] = None,
) -> np.ndarray:
    """``[k(x_i, x_s) for s in support]``, charging exactly ``len(support)``."""
    x = data.vectors([i])
    support = list(support)
    if not support:
        return np.zeros(0)
    S = data.vectors(support)
    _charge(counter, len(support))
    return pairwise(spec, x, S)[0]


def diagonal(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if spec.kind == "gaussian":
        return np.ones(X.shape[0])
    sq = np.einsum("ij,ij->i", X, X)
    if spec.kind == "linear":
        return sq
    return (sq + spec.offset) ** spec.degree


__all__ = [
    "KernelSpec",
    "KernelError",
    "EvalCounter",
    "evaluate",
    "pairwise",
    "symmetric_gram",
    "gram_matrix",
    "column_on_support",
    "diagonal",
]
