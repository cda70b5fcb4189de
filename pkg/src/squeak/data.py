"""Datasets with stable point ids, partitioning, and file loaders."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered points, optional labels, and one stable integer id per point.

    Ids survive :meth:`subset` and :meth:`partition`, so a dictionary built
    on a piece of the data can be checked against the whole.
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    ids: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2:
            raise DataError(f"points must be a 2-d array, got shape {points.shape}")
        n = points.shape[0]
        ids = np.arange(n, dtype=np.int64) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.shape != (n,):
            raise DataError(f"expected {n} ids, got shape {ids.shape}")
        if len(np.unique(ids)) != n:
            raise DataError("point ids must be unique")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.float64).ravel()
            if labels.shape != (n,):
                raise DataError(f"expected {n} labels, got {labels.size}")
            labels.setflags(write=False)
        points.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "_row", {int(j): r for r, j in enumerate(ids)})

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self) -> Iterator[tuple[int, np.ndarray]]:
        for j, x in zip(self.ids, self.points):
            yield int(j), x

    def __contains__(self, point_id) -> bool:
        return int(point_id) in self._row

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def rows(self, ids: Iterable[int]) -> np.ndarray:
        try:
            return np.fromiter((self._row[int(j)] for j in ids), dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"unknown point id {exc.args[0]}") from None

    def vectors(self, ids: Sequence[int]) -> np.ndarray:
        return self.points[self.rows(ids)]

    def __getitem__(self, point_id: int) -> np.ndarray:
        return self.vectors([point_id])[0]

    def subset(self, ids: Sequence[int]) -> "Dataset":
        rows = self.rows(ids)
        labels = None if self.labels is None else self.labels[rows]
        return Dataset(self.points[rows], labels, self.ids[rows])

    def partition(self, k: int) -> list["Dataset"]:
        """Split into ``k`` contiguous, disjoint, nonempty pieces."""
        if not 1 <= k <= len(self):
            raise DataError(f"cannot split {len(self)} points into {k} nonempty parts")
        return [self.subset(chunk) for chunk in np.array_split(self.ids, k)]

    def union(self, other: "Dataset") -> "Dataset":
        if set(self._row) & set(other._row):
            raise DataError("datasets overlap")
        if (self.labels is None) != (other.labels is None):
            raise DataError("cannot join labelled and unlabelled datasets")
        labels = None if self.labels is None else np.concatenate([self.labels, other.labels])
        return Dataset(
            np.vstack([self.points, other.points]), labels, np.concatenate([self.ids, other.ids])
        )


def load_csv(path, *, header: bool = False, labels: bool = False) -> Dataset:
    """One point per row; with ``labels`` the last column is the target."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
    arr = np.array(rows, dtype=np.float64)
    if labels:
        if width < 2:
            raise DataError(f"{path}: need at least one feature column besides the label")
        return Dataset(arr[:, :-1], arr[:, -1])
    return Dataset(arr)


def load_libsvm(path) -> Dataset:
    """LIBSVM/svmlight text: ``label idx:val ...`` with 1-based indices, densified."""
    from sklearn.datasets import load_svmlight_file

    try:
        X, y = load_svmlight_file(str(path), zero_based=False, dtype=np.float64)
    except (ValueError, OSError) as exc:
        raise DataError(f"{path}: {exc}") from None
    if X.shape[0] == 0:
        raise DataError(f"{path}: no data rows")
    return Dataset(X.toarray(), y)


def load(path, fmt: str = "csv", *, header: bool = False, labels: bool = False) -> Dataset:
    if not Path(path).is_file():
        raise DataError(f"{path}: no such file")
    if fmt == "csv":
        return load_csv(path, header=header, labels=labels)
    if fmt == "libsvm":
        return load_libsvm(path)
    raise DataError(f"unknown data format {fmt!r}")
