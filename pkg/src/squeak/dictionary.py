"""Weighted column dictionaries ``{(index, p_tilde, q)}`` and their JSON form.

A dictionary stands in for the selection matrix ``S = Diag(sqrt(w))`` with
``w_i = q_i / (q_bar * p_tilde_i)``; columns with ``q_i = 0`` are simply not
stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterator, NamedTuple

import numpy as np

from .kernels import KernelError, KernelSpec

FORMAT_VERSION = 1


class DictionaryFormatError(ValueError):
    """Malformed serialized dictionary; the message names the offending field."""


class DictionaryEntry(NamedTuple):
    index: int
    p_tilde: float
    q: int


@dataclass(frozen=True, eq=False)
class Dictionary:
    indices: np.ndarray
    p_tilde: np.ndarray
    q: np.ndarray
    gamma: float
    epsilon: float
    q_bar: int
    kernel: KernelSpec
    seed: int = 0
    n_processed: int = 0

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64).ravel()
        p = np.asarray(self.p_tilde, dtype=np.float64).ravel()
        q = np.asarray(self.q, dtype=np.int64).ravel()
        if not (indices.shape == p.shape == q.shape):
            raise ValueError("indices, p_tilde and q must have the same length")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if int(self.q_bar) != self.q_bar or self.q_bar < 1:
            raise ValueError(f"q_bar must be a positive integer, got {self.q_bar}")
        order = np.argsort(indices, kind="stable")
        indices, p, q = indices[order], p[order], q[order]
        if indices.size and np.any(np.diff(indices) == 0):
            raise ValueError("duplicate index in dictionary")
        if np.any(~(p > 0)) or np.any(p > 1):
            raise ValueError("p_tilde must lie in (0, 1]")
        if np.any(q < 1) or np.any(q > self.q_bar):
            raise ValueError("stored multiplicities must lie in [1, q_bar]")
        for arr in (indices, p, q):
            arr.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "p_tilde", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "q_bar", int(self.q_bar))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @classmethod
    def empty(cls, kernel: KernelSpec, gamma: float, epsilon: float, q_bar: int, seed: int = 0) -> "Dictionary":
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64), gamma, epsilon, q_bar, kernel, seed, 0)

    def replace(self, indices, p_tilde, q, n_processed=None) -> "Dictionary":
        return Dictionary(
            indices, p_tilde, q, self.gamma, self.epsilon, self.q_bar, self.kernel, self.seed,
            self.n_processed if n_processed is None else n_processed,
        )

    def size(self) -> int:
        return int(self.indices.size)

    def __len__(self) -> int:
        return self.size()

    def mass(self) -> int:
        return int(self.q.sum())

    def __contains__(self, index) -> bool:
        pos = np.searchsorted(self.indices, index)
        return bool(pos < self.indices.size and self.indices[pos] == index)

    def __iter__(self) -> Iterator[DictionaryEntry]:
        for i, p, q in zip(self.indices, self.p_tilde, self.q):
            yield DictionaryEntry(int(i), float(p), int(q))

    def entry(self, index: int) -> DictionaryEntry:
        pos = np.searchsorted(self.indices, index)
        if pos >= self.indices.size or self.indices[pos] != index:
            raise KeyError(index)
        return DictionaryEntry(int(index), float(self.p_tilde[pos]), int(self.q[pos]))

    def weights(self) -> np.ndarray:
        return self.q / (self.q_bar * self.p_tilde)

    def weights_on_support(self) -> tuple[np.ndarray, np.ndarray]:
        """Support ids in ascending order and their weights ``q / (q_bar p_tilde)``."""
        return self.indices.copy(), self.weights()

    def is_exact(self) -> bool:
        """True for a never-shrunk dictionary holding every point it summarizes."""
        return (
            self.size() > 0
            and self.size() == self.n_processed
            and bool(np.all(self.p_tilde == 1.0))
            and bool(np.all(self.q == self.q_bar))
        )

    def same_parameters(self, other: "Dictionary") -> bool:
        return (
            self.gamma == other.gamma
            and self.epsilon == other.epsilon
            and self.q_bar == other.q_bar
            and self.kernel == other.kernel
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dictionary):
            return NotImplemented
        return (
            self.same_parameters(other)
            and self.seed == other.seed
            and self.n_processed == other.n_processed
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.p_tilde, other.p_tilde)
            and np.array_equal(self.q, other.q)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"Dictionary(size={self.size()}, mass={self.mass()}, q_bar={self.q_bar}, "
            f"gamma={self.gamma}, epsilon={self.epsilon}, n_processed={self.n_processed})"
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "version": FORMAT_VERSION,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "q_bar": self.q_bar,
            "seed": int(self.seed),
            "n_processed": int(self.n_processed),
            "kernel": self.kernel.to_json(),
            "entries": [{"index": e.index, "p_tilde": e.p_tilde, "q": e.q} for e in self],
        }


def init_full(data, kernel: KernelSpec, gamma: float, epsilon: float, q_bar: int, seed: int = 0) -> Dictionary:
    """Every point of ``data`` at probability 1 and multiplicity ``q_bar``."""
    if len(data) == 0:
        raise ValueError("init_full needs a nonempty dataset")
    if q_bar < 1:
        raise ValueError(f"q_bar must be a positive integer, got {q_bar}")
    n = len(data)
    return Dictionary(
        data.ids, np.ones(n), np.full(n, q_bar, dtype=np.int64), gamma, epsilon, q_bar, kernel, seed, n
    )


def serialize(d: Dictionary) -> bytes:
    return (json.dumps(d.to_json(), indent=2) + "\n").encode()


def _field(obj: dict, key: str, kind, where: str = ""):
    name = f"{where}{key}"
    if key not in obj:
        raise DictionaryFormatError(f"{name}: missing")
    value = obj[key]
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise DictionaryFormatError(f"{name}: expected an integer, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise DictionaryFormatError(f"{name}: expected a finite number, got {value!r}")
        value = float(value)
    elif not isinstance(value, kind):
        raise DictionaryFormatError(f"{name}: expected {kind.__name__}")
    return value


def from_json(obj: Any) -> Dictionary:
    if not isinstance(obj, dict):
        raise DictionaryFormatError("<root>: expected a JSON object")
    version = _field(obj, "version", int)
    if version != FORMAT_VERSION:
        raise DictionaryFormatError(f"version: unsupported version {version}")
    gamma = _field(obj, "gamma", float)
    epsilon = _field(obj, "epsilon", float)
    q_bar = _field(obj, "q_bar", int)
    seed = _field(obj, "seed", int)
    n_processed = _field(obj, "n_processed", int)
    try:
        kernel = KernelSpec.from_json(_field(obj, "kernel", dict))
    except KernelError as exc:
        raise DictionaryFormatError(str(exc)) from None
    raw = _field(obj, "entries", list)
    indices, p, q = [], [], []
    for k, item in enumerate(raw):
        where = f"entries[{k}]."
        if not isinstance(item, dict):
            raise DictionaryFormatError(f"entries[{k}]: expected an object")
        indices.append(_field(item, "index", int, where))
        p_k = _field(item, "p_tilde", float, where)
        if not 0 < p_k <= 1:
            raise DictionaryFormatError(f"{where}p_tilde: must lie in (0, 1], got {p_k}")
        p.append(p_k)
        q_k = _field(item, "q", int, where)
        if not 1 <= q_k <= q_bar:
            raise DictionaryFormatError(f"{where}q: must lie in [1, q_bar={q_bar}], got {q_k}")
        q.append(q_k)
    if not gamma > 0:
        raise DictionaryFormatError(f"gamma: must be positive, got {gamma}")
    if not 0 <= epsilon < 1:
        raise DictionaryFormatError(f"epsilon: must lie in [0, 1), got {epsilon}")
    if q_bar < 1:
        raise DictionaryFormatError(f"q_bar: must be positive, got {q_bar}")
    if len(set(indices)) != len(indices):
        raise DictionaryFormatError("entries: duplicate index")
    return Dictionary(
        np.array(indices, dtype=np.int64), np.array(p, dtype=np.float64), np.array(q, dtype=np.int64),
        gamma, epsilon, q_bar, kernel, seed, n_processed,
    )


def deserialize(raw: bytes | str) -> Dictionary:
    try:
        obj = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DictionaryFormatError(f"<root>: not valid JSON ({exc})") from None
    return from_json(obj)
