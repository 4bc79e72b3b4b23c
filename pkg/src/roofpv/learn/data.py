"""Modeling dataset container and CSV interchange."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class Dataset:
    """Dense feature matrix with named columns and one target vector."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    tag: str = ""

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2 or self.y.ndim != 1:
            raise ValueError("X must be (n, p) and y must be (n,)")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y row counts differ")
        if self.X.shape[0] == 0:
            raise ValueError("dataset is empty")
        self.feature_names = tuple(self.feature_names)
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names length mismatch")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("duplicate feature names")
        if not np.isfinite(self.X).all() or not np.isfinite(self.y).all():
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def take(self, idx, tag: str | None = None) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.feature_names, tag if tag is not None else self.tag)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]


def write_dataset_csv(path, ds: Dataset, target_name: str = "target") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [target_name])
        for i in range(ds.n):
            writer.writerow([repr(float(v)) for v in ds.X[i]] + [repr(float(ds.y[i]))])


def read_dataset_csv(path, target_name: str | None = None, tag: str = "") -> Dataset:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header = rows[0]
    if target_name is None:
        target_name = header[-1]
    t = header.index(target_name)
    names = tuple(h for i, h in enumerate(header) if i != t)
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64)
    cols = [i for i in range(len(header)) if i != t]
    return Dataset(data[:, cols], data[:, t], names, tag)
