"""Distributed sampler: leaf dictionaries merged pairwise up a binary tree.

Leaves are nodes ``0..k-1`` (one per contiguous data block); internal nodes
are ``k..2k-2`` in creation order. Each merge draws from its own
``RngStream(seed, node, MERGE_DOMAIN)``, so the root does not depend on how
many workers run or in which order subtrees finish.
"""

from __future__ import annotations

import json
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import sequential
from .dictionary import Dictionary, init_full
from .kernels import EvalCounter, symmetric_gram
from .rls import Estimator, concatenate
from .sampler import RngStream, shrink_step
from .sequential import SqueakConfig

MERGE_DOMAIN = (1,)
LEAF_DOMAIN = 2
LEAF_THRESHOLD = 4096
SHAPES = ("balanced", "unbalanced", "custom")


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class MergeTree:
    k: int
    shape: str
    parents: tuple

    def __post_init__(self):
        k = self.k
        if k < 1:
            raise TreeError(f"need at least one leaf, got k={k}")
        if self.shape not in SHAPES:
            raise TreeError(f"unknown tree shape {self.shape!r}")
        parents = tuple(None if p is None else int(p) for p in self.parents)
        if len(parents) != 2 * k - 1:
            raise TreeError(f"a full binary tree with {k} leaves has {2 * k - 1} nodes, got {len(parents)}")
        roots = [j for j, p in enumerate(parents) if p is None]
        if len(roots) != 1:
            raise TreeError(f"expected exactly one root, found {len(roots)}")
        children: list[list[int]] = [[] for _ in parents]
        for j, p in enumerate(parents):
            if p is None:
                continue
            if not 0 <= p < len(parents) or p == j:
                raise TreeError(f"node {j}: invalid parent {p}")
            if p < k:
                raise TreeError(f"node {j}: parent {p} is a leaf")
            children[p].append(j)
        for j in range(k, 2 * k - 1):
            if len(children[j]) != 2:
                raise TreeError(f"internal node {j} has {len(children[j])} children, expected 2")
        for j in range(len(parents)):
            seen, node = set(), j
            while parents[node] is not None:
                if node in seen:
                    raise TreeError(f"cycle through node {node}")
                seen.add(node)
                node = parents[node]
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "_children", tuple(tuple(sorted(c)) for c in children))

    @property
    def n_nodes(self) -> int:
        return 2 * self.k - 1

    @property
    def root(self) -> int:
        return self.parents.index(None)

    def children(self, node: int) -> tuple:
        return self._children[node]

    def is_leaf(self, node: int) -> bool:
        return node < self.k

    @property
    def merges(self) -> int:
        return self.k - 1

    def height(self, node: int) -> int:
        if self.is_leaf(node):
            return 1
        return 1 + max(self.height(c) for c in self.children(node))

    def leaves_under(self, node: int) -> list[int]:
        if self.is_leaf(node):
            return [node]
        out = []
        for c in self.children(node):
            out.extend(self.leaves_under(c))
        return sorted(out)

    def path_to_root(self, node: int) -> list[int]:
        path = [node]
        while self.parents[path[-1]] is not None:
            path.append(self.parents[path[-1]])
        return path

    def to_json(self) -> dict[str, Any]:
        obj = {"shape": self.shape, "k": self.k}
        if self.shape == "custom":
            obj["parents"] = list(self.parents)
        return obj

    @classmethod
    def from_json(cls, obj: Any) -> "MergeTree":
        if not isinstance(obj, dict):
            raise TreeError("tree spec: expected a JSON object")
        shape, k = obj.get("shape"), obj.get("k")
        if isinstance(k, bool) or not isinstance(k, int):
            raise TreeError("k: expected an integer")
        if shape == "custom":
            parents = obj.get("parents")
            if not isinstance(parents, list):
                raise TreeError("parents: expected a list")
            return build_tree(k, "custom", parents)
        return build_tree(k, shape)

    @classmethod
    def load(cls, path) -> "MergeTree":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise TreeError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_json(obj)


def build_tree(k: int, shape: str = "balanced", parents: Optional[Sequence] = None) -> MergeTree:
    """Balanced pairs adjacent nodes level by level (an odd one is carried up);
    unbalanced folds leaves into an accumulator from the left."""
    if k < 1:
        raise TreeError(f"need at least one leaf, got k={k}")
    if shape == "custom":
        if parents is None:
            raise TreeError("custom tree needs a parents list")
        return MergeTree(k, shape, tuple(parents))
    if shape not in SHAPES:
        raise TreeError(f"unknown tree shape {shape!r}")
    par: list = [None] * (2 * k - 1)
    nxt = k

    def join(a, b):
        nonlocal nxt
        par[a] = par[b] = nxt
        nxt += 1
        return nxt - 1

    if shape == "balanced":
        level = list(range(k))
        while len(level) > 1:
            up = [join(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
            if len(level) % 2:
                up.append(level[-1])
            level = up
    else:
        acc = 0
        for leaf in range(1, k):
            acc = join(acc, leaf)
    return MergeTree(k, shape, tuple(par))


@dataclass(frozen=True)
class NodeCost:
    node: int
    height: int
    m: int
    factor_cost: int
    solves: int
    kernel_evals: int
    transfer: int


@dataclass
class WorkAccount:
    tree: MergeTree
    costs: dict = field(default_factory=dict)

    def add(self, cost: NodeCost) -> None:
        self.costs[cost.node] = cost

    @property
    def total_work(self) -> int:
        return sum(c.factor_cost for c in self.costs.values())

    @property
    def critical_path(self) -> int:
        """Largest accumulated factorization cost along any leaf-to-root path."""
        return max(
            sum(self.costs[j].factor_cost for j in self.tree.path_to_root(leaf))
            for leaf in range(self.tree.k)
        )

    @property
    def kernel_evals(self) -> int:
        return sum(c.kernel_evals for c in self.costs.values())

    def merges_by_height(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for c in self.costs.values():
            if not self.tree.is_leaf(c.node):
                out[c.height] = out.get(c.height, 0) + 1
        return dict(sorted(out.items()))

    def unit_work_bound(self) -> tuple[int, int]:
        """Total merges against twice the lowest merge layer, one unit per merge.

        This is the equal-cost model: every merge handles dictionaries of the
        same bounded size, so work is proportional to the merge count.
        """
        layers = self.merges_by_height()
        if not layers:
            return 0, 0
        return sum(layers.values()), 2 * layers[min(layers)]

    def to_json(self) -> dict[str, Any]:
        total, bound = self.unit_work_bound()
        return {
            "total_work": int(self.total_work),
            "critical_path": int(self.critical_path),
            "kernel_evals": int(self.kernel_evals),
            "merges": self.tree.merges,
            "merges_by_height": {str(h): n for h, n in self.merges_by_height().items()},
            "unit_work": total,
            "unit_work_bound": bound,
            "nodes": [
                {
                    "node": c.node, "height": c.height, "m": c.m, "factor_cost": c.factor_cost,
                    "solves": c.solves, "kernel_evals": c.kernel_evals, "transfer": c.transfer,
                }
                for c in sorted(self.costs.values(), key=lambda c: c.node)
            ],
        }


def merge_estimator(dicts: Sequence[Dictionary]) -> Estimator:
    """Pool with ridge ``(1 + (a-1) eps) gamma`` where ``a`` counts approximate inputs.

    Exact (never shrunk, complete) inputs add no approximation error, so a
    merge with at most one approximate input reduces to the sequential case.
    """
    approximate = sum(not d.is_exact() for d in dicts)
    return Estimator.merge(max(1, approximate))


def _merge(a: Dictionary, b: Dictionary, data, rng, halving_floor: bool, counter: Optional[EvalCounter]):
    if a.n_processed == 0 or b.n_processed == 0:
        raise ValueError("cannot merge with a dictionary over an empty dataset")
    union = concatenate([a, b])
    if union.size() == 0:
        raise ValueError("both dictionaries are empty")
    est = merge_estimator([a, b])
    G = symmetric_gram(union.kernel, data.vectors(union.indices), counter)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    _, p_new, q_new = shrink_step(
        G, union.p_tilde, union.q, union.q_bar, union.gamma, union.epsilon, est, gen, halving_floor
    )
    keep = q_new > 0
    return union.replace(union.indices[keep], p_new[keep], q_new[keep]), union.size()


def merge(
    a: Dictionary,
    b: Dictionary,
    data_union,
    rng,
    halving_floor: bool = True,
    counter: Optional[EvalCounter] = None,
) -> Dictionary:
    """Concatenate two dictionaries over disjoint data and shrink the union."""
    return _merge(a, b, data_union, rng, halving_floor, counter)[0]


@dataclass
class DisqueakResult:
    dictionary: Dictionary
    work: WorkAccount
    tree: MergeTree
    q_bar: int
    q_bar_theorem: Optional[int]
    nodes: Optional[dict] = None

    @property
    def merges(self) -> int:
        return sum(1 for j in self.work.costs if not self.tree.is_leaf(j))

    def to_json(self) -> dict[str, Any]:
        d = self.dictionary
        return {
            "algorithm": "disqueak",
            "n": int(d.n_processed),
            "seed": int(d.seed),
            "gamma": d.gamma,
            "epsilon": d.epsilon,
            "q_bar": int(self.q_bar),
            "q_bar_theorem": self.q_bar_theorem,
            "dict_size": d.size(),
            "mass": d.mass(),
            "tree": self.tree.to_json(),
            "work": self.work.to_json(),
        }


def run(
    data,
    cfg: SqueakConfig,
    tree: MergeTree,
    workers: int = 1,
    leaf_threshold: int = LEAF_THRESHOLD,
    keep_nodes: bool = False,
) -> DisqueakResult:
    """Build leaf dictionaries, then merge up ``tree`` with a pool of ``workers``.

    Leaves larger than ``leaf_threshold`` are summarized by a nested
    sequential run instead of being kept whole.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    n = len(data)
    if tree.k > n:
        raise TreeError(f"cannot split {n} points into {tree.k} leaves")
    sequential.warn_small_gamma(cfg.gamma)
    q_bar = cfg.q_bar(n, "merge")
    theorem = cfg.theorem_q_bar(n, "merge")
    parts = data.partition(tree.k)
    account = WorkAccount(tree)
    results: dict[int, Dictionary] = {}

    def do_leaf(leaf: int):
        part = parts[leaf]
        if len(part) > leaf_threshold:
            report = sequential.run(part, cfg, domain=(LEAF_DOMAIN, leaf), q_bar=q_bar)
            sizes = np.concatenate([[0], report.per_step_sizes[:-1]]) + 1
            cost = int(np.sum(sizes.astype(np.int64) ** 3))
            d = report.dictionary
            return d, NodeCost(leaf, 1, int(sizes.max()), cost, int(sizes.sum()), report.kernel_evals, d.size())
        d = init_full(part, cfg.kernel, cfg.gamma, cfg.epsilon, q_bar, cfg.seed)
        return d, NodeCost(leaf, 1, d.size(), 0, 0, 0, d.size())

    def do_merge(node: int):
        a, b = (results[c] for c in tree.children(node))
        counter = EvalCounter()
        out, m = _merge(a, b, data, RngStream(cfg.seed, node, MERGE_DOMAIN), cfg.halving_floor, counter)
        return out, NodeCost(node, tree.height(node), m, m**3, m, counter.count, out.size())

    pending_children = {j: len(tree.children(j)) for j in range(tree.n_nodes)}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        running = {pool.submit(do_leaf, leaf): leaf for leaf in range(tree.k)}
        while running:
            done, _ = wait(running, return_when=FIRST_COMPLETED)
            for fut in done:
                node = running.pop(fut)
                d, cost = fut.result()
                results[node] = d
                account.add(cost)
                parent = tree.parents[node]
                if parent is None:
                    continue
                pending_children[parent] -= 1
                if pending_children[parent] == 0:
                    running[pool.submit(do_merge, parent)] = parent

    root = results[tree.root]
    return DisqueakResult(root, account, tree, q_bar, theorem, dict(results) if keep_nodes else None)


def node_dataset(data, tree: MergeTree, node: int):
    """The points summarized by ``node``: the union of its leaves' blocks."""
    parts = data.partition(tree.k)
    ids = np.concatenate([parts[leaf].ids for leaf in tree.leaves_under(node)])
    return data.subset(ids)
