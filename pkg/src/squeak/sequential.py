"""Single-pass sequential sampler: read each point once, expand, shrink.

The working state keeps the raw vectors and the support Gram matrix of the
current dictionary only, so every step costs ``|I_{t-1}| + 1`` kernel
evaluations for the new column and one factorization of the support system.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .dictionary import Dictionary
from .kernels import EvalCounter, KernelSpec, pairwise
from .rls import Estimator
from .sampler import RngStream, shrink_step

log = logging.getLogger(__name__)

SEQUENTIAL_DOMAIN = (0,)


def qbar_from_theorem(n: int, epsilon: float, delta: float, mode: str = "sequential") -> int:
    """``ceil(39 * alpha * ln(2n / delta) / epsilon^2)``.

    ``alpha`` is ``(1+eps)/(1-eps)`` for ``mode="sequential"`` and
    ``(1+3eps)/(1-eps)`` for ``mode="merge"``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if mode == "sequential":
        alpha = Estimator.sequential().alpha(epsilon)
    elif mode == "merge":
        alpha = Estimator.merge(2).alpha(epsilon)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return math.ceil(39.0 * alpha * math.log(2.0 * n / delta) / epsilon**2)


@functools.lru_cache(maxsize=None)
def warn_small_gamma(gamma: float) -> None:
    """Log once per distinct value: the accuracy constants assume gamma > 1."""
    if gamma < 1:
        log.warning("gamma=%g < 1: accuracy constants are only established for gamma > 1", gamma)


@dataclass(frozen=True)
class SqueakConfig:
    gamma: float
    epsilon: float
    delta: float = 0.5
    kernel: KernelSpec = field(default_factory=KernelSpec)
    q_bar_override: Optional[int] = None
    seed: int = 0
    halving_floor: bool = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.q_bar_override is not None and (int(self.q_bar_override) != self.q_bar_override or self.q_bar_override < 1):
            raise ValueError(f"q_bar override must be a positive integer, got {self.q_bar_override}")

    def theorem_q_bar(self, n: int, mode: str = "sequential") -> Optional[int]:
        if self.epsilon == 0:
            return None
        return qbar_from_theorem(n, self.epsilon, self.delta, mode)

    def q_bar(self, n: int, mode: str = "sequential") -> int:
        if self.q_bar_override is not None:
            return int(self.q_bar_override)
        value = self.theorem_q_bar(n, mode)
        if value is None:
            raise ValueError("epsilon = 0 needs an explicit q_bar override")
        return value


@dataclass
class RunReport:
    dictionary: Dictionary
    max_dict_size: int
    kernel_evals: int
    per_step_sizes: np.ndarray
    q_bar: int
    q_bar_theorem: Optional[int]
    points_read: int
    eval_budget: int

    def to_json(self) -> dict[str, Any]:
        d = self.dictionary
        return {
            "algorithm": "squeak",
            "n": int(d.n_processed),
            "seed": int(d.seed),
            "gamma": d.gamma,
            "epsilon": d.epsilon,
            "q_bar": int(self.q_bar),
            "q_bar_theorem": self.q_bar_theorem,
            "dict_size": d.size(),
            "mass": d.mass(),
            "max_dict_size": int(self.max_dict_size),
            "kernel_evals": int(self.kernel_evals),
            "eval_budget": int(self.eval_budget),
            "points_read": int(self.points_read),
            "per_step_sizes": [int(s) for s in self.per_step_sizes],
        }


def run(data, cfg: SqueakConfig, domain: tuple = SEQUENTIAL_DOMAIN, q_bar: Optional[int] = None) -> RunReport:
    """Stream ``data`` once in its own order and return the final dictionary.

    ``data`` only needs ``len`` and iteration over ``(id, vector)`` pairs.
    Step ``t`` (1-based) draws from ``RngStream(cfg.seed, t, domain)``.
    """
    n = len(data)
    if n == 0:
        raise ValueError("cannot run on an empty dataset")
    warn_small_gamma(cfg.gamma)
    theorem = cfg.theorem_q_bar(n)
    if q_bar is None:
        q_bar = cfg.q_bar(n)
    est = Estimator.sequential()
    counter = EvalCounter()

    ids = np.zeros(0, dtype=np.int64)
    p = np.zeros(0)
    q = np.zeros(0, dtype=np.int64)
    X: Optional[np.ndarray] = None
    G = np.zeros((0, 0))
    sizes = np.zeros(n, dtype=np.int64)
    budget = 0
    t = 0
    seen = set()

    for pid, x in data:
        if pid in seen:
            raise ValueError(f"point id {pid} appears twice in the stream")
        seen.add(pid)
        t += 1
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        m = ids.size
        budget += (m + 1) ** 2
        if X is None:
            X = np.zeros((0, x.shape[1]))
        col = pairwise(cfg.kernel, X, x)[:, 0]
        kxx = pairwise(cfg.kernel, x, x)[0, 0]
        counter.add(m + 1)

        pos = int(np.searchsorted(ids, pid))
        ids = np.insert(ids, pos, pid)
        p = np.insert(p, pos, 1.0)
        q = np.insert(q, pos, q_bar)
        X = np.insert(X, pos, x[0], axis=0)
        G = np.insert(np.insert(G, pos, col, axis=0), pos, np.insert(col, pos, kxx), axis=1)

        _, p_new, q_new = shrink_step(
            G, p, q, q_bar, cfg.gamma, cfg.epsilon, est,
            RngStream(cfg.seed, t, domain).generator(), cfg.halving_floor,
        )
        keep = q_new > 0
        ids, p, q, X = ids[keep], p_new[keep], q_new[keep], X[keep]
        G = G[np.ix_(keep, keep)]
        sizes[t - 1] = ids.size

    if t != n:
        raise ValueError(f"dataset reported {n} points but yielded {t}")
    final = Dictionary(ids, p, q, cfg.gamma, cfg.epsilon, q_bar, cfg.kernel, cfg.seed, n)
    return RunReport(
        final, int(sizes.max()), counter.count, sizes, q_bar, theorem, t, budget
    )
