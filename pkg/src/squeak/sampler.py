"""Dict-Update: expand a dictionary, re-estimate scores on the frozen support,
then thin multiplicities by binomial resampling. Also the exact-RLS baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dictionary import Dictionary
from .kernels import EvalCounter, KernelSpec, gram_matrix, symmetric_gram
from .rls import Estimator, clamp_min_estimate, exact_rls, shrunk_scores


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(seed, domain..., stream_id)``.

    The domain separates families of streams (sequential steps, tree nodes,
    leaves) so that equal stream ids in different families never collide.
    """

    seed: int
    stream_id: int
    domain: tuple = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(*self.domain, int(self.stream_id)))
        return np.random.Generator(np.random.PCG64(ss))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def expand(d: Dictionary, new_index: int) -> Dictionary:
    """Add ``new_index`` at ``p_tilde = 1`` and full multiplicity ``q_bar``."""
    if new_index in d:
        raise ValueError(f"point {new_index} is already in the dictionary")
    return d.replace(
        np.append(d.indices, new_index),
        np.append(d.p_tilde, 1.0),
        np.append(d.q, d.q_bar),
        n_processed=d.n_processed + 1,
    )


@dataclass(frozen=True)
class ShrinkReport:
    """Outcome of one Dict-Update pass, aligned with the augmented support."""

    updated: Dictionary
    dropped: int
    indices: np.ndarray
    p_before: np.ndarray
    tau_tilde: np.ndarray
    p_after: np.ndarray
    q_before: np.ndarray
    q_after: np.ndarray
    _estimates: dict = field(default=None, repr=False, compare=False)

    @property
    def estimates(self) -> dict:
        """``index -> (p_before, tau_tilde, p_after, q_before, q_after)``."""
        if self._estimates is None:
            table = {
                int(i): (float(pb), float(t), float(pa), int(qb), int(qa))
                for i, pb, t, pa, qb, qa in zip(
                    self.indices, self.p_before, self.tau_tilde, self.p_after, self.q_before, self.q_after
                )
            }
            object.__setattr__(self, "_estimates", table)
        return self._estimates


def shrink_step(
    G: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    q_bar: int,
    gamma: float,
    epsilon: float,
    estimator: Estimator,
    gen: np.random.Generator,
    halving_floor: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scores, new probabilities and new multiplicities for one pass.

    Every score is computed before any draw, so the result does not depend
    on the order of the support.
    """
    w = q / (q_bar * p)
    tau = shrunk_scores(G, w, gamma, epsilon, estimator)
    p_new = clamp_min_estimate(tau, p, halving_floor)
    ratio = np.minimum(p_new / p, 1.0)
    q_new = gen.binomial(q, ratio)
    return tau, p_new, q_new


def dict_update(
    augmented: Dictionary,
    data,
    estimator: Estimator,
    rng,
    halving_floor: bool = True,
    counter: Optional[EvalCounter] = None,
) -> ShrinkReport:
    if augmented.size() == 0:
        raise ValueError("dict_update needs a nonempty dictionary")
    support = augmented.indices
    G = symmetric_gram(augmented.kernel, data.vectors(support), counter)
    tau, p_new, q_new = shrink_step(
        G, augmented.p_tilde, augmented.q, augmented.q_bar, augmented.gamma, augmented.epsilon,
        estimator, _as_generator(rng), halving_floor,
    )
    keep = q_new > 0
    updated = augmented.replace(support[keep], p_new[keep], q_new[keep])
    return ShrinkReport(
        updated, int((~keep).sum()), support.copy(), augmented.p_tilde.copy(), tau, p_new,
        augmented.q.copy(), q_new,
    )


def sample_exact_rls(
    data,
    kernel: KernelSpec,
    gamma: float,
    m: int,
    rng,
    epsilon: float = 0.0,
    seed: int = 0,
) -> Dictionary:
    """``m`` draws with replacement proportional to the exact scores.

    Stored with ``q_bar = m``, ``p_tilde`` the normalized probability and
    ``q`` the draw count, so the weight is ``count / (m * p)``.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    tau = exact_rls(gram_matrix(kernel, data), gamma)
    probs = tau / tau.sum()
    counts = _as_generator(rng).multinomial(m, probs)
    hit = counts > 0
    return Dictionary(
        data.ids[hit], probs[hit], counts[hit], gamma, epsilon, m, kernel, seed, len(data)
    )
