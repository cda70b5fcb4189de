"""Dense oracles: projection error, accuracy verdicts, and a randomized lemma suite.

For ``K = U diag(lam) U^T`` and ``Psi = U diag(sqrt(lam / (lam + gamma))) U^T``,
the distance between the ridge projection and its dictionary counterpart is

    || Psi (I - S S^T) Psi ||_2

with ``S S^T`` the diagonal of dictionary weights (zero off the support).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Callable, Optional

import numpy as np

from .data import Dataset
from .dictionary import Dictionary
from .kernels import KernelSpec, gram_matrix
from .linalg import psd_eigh
from .nystrom import nystrom_gap
from .rls import Estimator, concatenate, exact_rls, shrunk_scores
from .sampler import expand
from .sequential import SqueakConfig, run as squeak_run

SLACK = 1e-10


def _support_weights(data, d: Dictionary) -> np.ndarray:
    support, w = d.weights_on_support()
    s = np.zeros(len(data))
    s[data.rows(support)] = w
    return s


def projection_error(data, d: Dictionary, K: Optional[np.ndarray] = None) -> float:
    if K is None:
        K = gram_matrix(d.kernel, data)
    lam, U = psd_eigh(K)
    Psi = (U * np.sqrt(lam / (lam + d.gamma))) @ U.T
    s = _support_weights(data, d)
    M = Psi @ ((1.0 - s)[:, None] * Psi)
    M = (M + M.T) / 2
    return float(np.max(np.abs(np.linalg.eigvalsh(M))))


@dataclass(frozen=True)
class AccuracyReport:
    error: float
    epsilon: float
    passed: bool
    d_eff: float
    dict_size: int
    mass: int
    size_bound: float

    @property
    def within_size_bound(self) -> bool:
        return self.mass <= self.size_bound

    def to_json(self) -> dict[str, Any]:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        out["within_size_bound"] = self.within_size_bound
        return out


def check_accuracy(data, d: Dictionary, K: Optional[np.ndarray] = None, epsilon: Optional[float] = None) -> AccuracyReport:
    """Projection error against ``epsilon`` (default: the dictionary's own)."""
    if K is None:
        K = gram_matrix(d.kernel, data)
    eps = d.epsilon if epsilon is None else epsilon
    err = projection_error(data, d, K)
    d_eff = float(exact_rls(K, d.gamma).sum())
    return AccuracyReport(err, eps, err <= eps, d_eff, d.size(), d.mass(), 3.0 * d.q_bar * d_eff)


# randomized instances ------------------------------------------------------


def random_points(rng: np.random.Generator, n: int, dim: Optional[int] = None) -> np.ndarray:
    """A few Gaussian blobs, so Gram spectra decay at different rates."""
    dim = int(rng.integers(1, 5)) if dim is None else dim
    centers = rng.normal(scale=2.0, size=(int(rng.integers(1, 4)), dim))
    labels = rng.integers(0, centers.shape[0], size=n)
    return centers[labels] + rng.normal(scale=rng.uniform(0.3, 1.0), size=(n, dim))


def random_kernel(rng: np.random.Generator) -> KernelSpec:
    return KernelSpec.gaussian(float(rng.uniform(0.5, 2.0)))


def _relative_violation(lhs: float, rhs: float) -> bool:
    """True when ``lhs <= rhs`` fails by more than the floating-point slack."""
    return lhs > rhs + SLACK * max(1.0, abs(rhs))


def monotonicity_block(rng: np.random.Generator, streams: int = 100, max_len: int = 30, gammas=(0.1, 1.0, 10.0)) -> dict:
    """Adding a point to a stream, checked against the dense scores.

    Counted as violations: an old score going up, the effective dimension
    going down, or an old score dropping below ``(1 - tau_tt) * tau_old``
    (``tau_tt`` the new point's own score), which is what Sherman-Morrison
    guarantees. The tighter ``tau_old / (tau_old + 1)`` floor is tallied
    separately under ``ratio_floor_violations``; it does not hold in general.
    """
    records = []
    for s in range(streams):
        n = int(rng.integers(2, max_len + 1))
        X = random_points(rng, n)
        kernel = random_kernel(rng)
        K = gram_matrix(kernel, Dataset(X))
        for gamma in gammas:
            bad = floor_bad = 0
            prev = exact_rls(K[:1, :1], gamma)
            for t in range(2, n + 1):
                cur = exact_rls(K[:t, :t], gamma)
                old = cur[: t - 1]
                bad += int(np.sum(old > prev + SLACK))
                bad += int(np.sum((1.0 - cur[-1]) * prev > old + SLACK))
                bad += int(_relative_violation(prev.sum(), cur.sum()))
                floor_bad += int(np.sum(prev / (prev + 1) > old + SLACK))
                prev = cur
            records.append(
                {"instance": s, "gamma": gamma, "n": n, "violations": bad, "ratio_floor_violations": floor_bad}
            )
    out = _summary("monotonicity", records)
    out["ratio_floor_violations"] = int(sum(r["ratio_floor_violations"] for r in records))
    return out


def split_block(rng: np.random.Generator, splits: int = 100, max_n: int = 60) -> dict:
    """Scores shrink when data is added; effective dimension is subadditive
    and at most halves under a disjoint split."""
    records = []
    for s in range(splits):
        n = int(rng.integers(2, max_n + 1))
        X = random_points(rng, n)
        kernel = random_kernel(rng)
        gamma = float(10 ** rng.uniform(-1, 1))
        K = gram_matrix(kernel, Dataset(X))
        mask = np.zeros(n, dtype=bool)
        mask[rng.choice(n, size=int(rng.integers(1, n)), replace=False)] = True
        a, b = np.flatnonzero(mask), np.flatnonzero(~mask)
        tau_u = exact_rls(K, gamma)
        tau_a = exact_rls(K[np.ix_(a, a)], gamma)
        tau_b = exact_rls(K[np.ix_(b, b)], gamma)
        bad = int(np.sum(tau_u[a] > tau_a + SLACK)) + int(np.sum(tau_u[b] > tau_b + SLACK))
        du, split = tau_u.sum(), tau_a.sum() + tau_b.sum()
        bad += int(_relative_violation(du, split)) + int(_relative_violation(split, 2 * du))
        records.append({"instance": s, "n": n, "gamma": gamma, "violations": bad})
    return _summary("split", records)


def accurate_dictionary(
    rng: np.random.Generator,
    data: Dataset,
    kernel: KernelSpec,
    gamma: float,
    epsilon: float,
    q_bar: Optional[int] = None,
    attempts: int = 20,
) -> Optional[Dictionary]:
    """A sequential-run dictionary on ``data`` that the oracle verifies accurate.

    Small multiplicity budgets make the dictionaries genuinely approximate;
    the first verified one wins.
    """
    K = gram_matrix(kernel, data)
    for _ in range(attempts):
        budget = int(rng.integers(3, 40)) if q_bar is None else q_bar
        cfg = SqueakConfig(gamma, epsilon, kernel=kernel, q_bar_override=budget, seed=int(rng.integers(2**31)))
        d = squeak_run(data, cfg).dictionary
        if d.size() and projection_error(data, d, K) <= epsilon:
            return d
    return None


def _random_instance(rng, max_n):
    n = int(rng.integers(6, max_n + 1))
    X = random_points(rng, n)
    kernel = random_kernel(rng)
    gamma = float(10 ** rng.uniform(0, 1))
    epsilon = float(rng.choice([0.2, 0.3, 0.5]))
    return X, kernel, gamma, epsilon


def sequential_sandwich_block(rng: np.random.Generator, instances: int = 100, max_n: int = 50) -> dict:
    """Estimates from an accurate dictionary plus one fresh point bracket the true scores."""
    records = []
    while len(records) < instances:
        X, kernel, gamma, epsilon = _random_instance(rng, max_n)
        data = Dataset(X)
        head = data.subset(data.ids[:-1])
        d = accurate_dictionary(rng, head, kernel, gamma, epsilon)
        if d is None:
            continue
        aug = expand(d, int(data.ids[-1]))
        records.append(_sandwich_record(len(records), data, aug, Estimator.sequential()))
    return _summary("sequential_sandwich", records)


def merge_sandwich_block(rng: np.random.Generator, instances: int = 100, max_n: int = 50) -> dict:
    """Two accurate dictionaries over disjoint halves, pooled with the 2-way estimator."""
    records = []
    while len(records) < instances:
        X, kernel, gamma, epsilon = _random_instance(rng, max_n)
        data = Dataset(X)
        left, right = data.partition(2)
        q_bar = int(rng.integers(3, 40))
        a = accurate_dictionary(rng, left, kernel, gamma, epsilon, q_bar)
        b = accurate_dictionary(rng, right, kernel, gamma, epsilon, q_bar) if a is not None else None
        if b is None:
            continue
        records.append(_sandwich_record(len(records), data, concatenate([a, b]), Estimator.merge(2)))
    return _summary("merge_sandwich", records)


def _sandwich_record(k: int, data: Dataset, d: Dictionary, est: Estimator) -> dict:
    K = gram_matrix(d.kernel, data)
    tau = exact_rls(K, d.gamma)
    rows = data.rows(d.indices)
    tilde = shrunk_scores(K[np.ix_(rows, rows)], d.weights(), d.gamma, d.epsilon, est)
    alpha = est.alpha(d.epsilon)
    truth = tau[rows]
    bad = int(np.sum(tilde > truth + SLACK)) + int(np.sum(truth / alpha > tilde + SLACK))
    return {
        "instance": k, "n": len(data), "gamma": d.gamma, "epsilon": d.epsilon, "alpha": alpha,
        "support": d.size(), "violations": bad,
    }


def nystrom_order_block(rng: np.random.Generator, dictionaries: int = 50, max_n: int = 40) -> dict:
    """``0 <= K - K~ <= gamma/(1-eps) K (K + gamma I)^-1`` in the PSD order."""
    records = []
    while len(records) < dictionaries:
        X, kernel, gamma, epsilon = _random_instance(rng, max_n)
        data = Dataset(X)
        d = accurate_dictionary(rng, data, kernel, gamma, epsilon)
        if d is None:
            continue
        records.append(_nystrom_order_record(len(records), data, d))
    return _summary("nystrom_order", records)


def _nystrom_order_record(k: int, data: Dataset, d: Dictionary) -> dict:
    K = gram_matrix(d.kernel, data)
    lam, U = psd_eigh(K)
    tol = 1e-8 * max(float(lam.max()), 1.0)
    gap = nystrom_gap(data, d)
    envelope = (U * (d.gamma / (1 - d.epsilon) * lam / (lam + d.gamma))) @ U.T
    low = float(np.linalg.eigvalsh(gap).min())
    high = float(np.linalg.eigvalsh(envelope - gap).min())
    bad = int(low < -tol) + int(high < -tol)
    return {"instance": k, "n": len(data), "min_gap_eig": low, "min_envelope_eig": high, "violations": bad}


def _summary(name: str, records: list) -> dict:
    return {
        "lemma": name,
        "instances": len(records),
        "violations": int(sum(r["violations"] for r in records)),
        "records": records,
    }


BLOCKS: dict[str, Callable[..., dict]] = {
    "monotonicity": monotonicity_block,
    "sequential_sandwich": sequential_sandwich_block,
    "split": split_block,
    "merge_sandwich": merge_sandwich_block,
    "nystrom_order": nystrom_order_block,
}


def lemma_suite(seed_count: int = 100, sizes: Optional[dict] = None, seed: int = 0) -> dict:
    """Run every randomized block with ``seed_count`` instances each.

    ``sizes`` maps block-specific size knobs (``max_len``, ``max_n``) by block
    name, e.g. ``{"monotonicity": {"max_len": 20}}``.
    """
    sizes = sizes or {}
    out = {"seed": seed, "blocks": []}
    for j, (name, block) in enumerate(BLOCKS.items()):
        rng = np.random.default_rng([seed, j])
        count = seed_count if name != "nystrom_order" else max(1, seed_count // 2)
        out["blocks"].append(block(rng, count, **sizes.get(name, {})))
    out["violations"] = sum(b["violations"] for b in out["blocks"])
    out["pass"] = out["violations"] == 0
    return out
