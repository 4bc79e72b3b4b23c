"""Fit metrics (MAE, RMSE, R²) and deterministic dataset splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class MetricsReport:
    """MAE = mean |y - yhat|; RMSE = sqrt(mean (y - yhat)^2);
    R² = 1 - SSE/SST about the observed target mean (None when the target
    has no variance)."""

    mae: float
    rmse: float
    r2: float | None
    n: int
    dataset: str = ""
    algorithm: str = ""
    split: str = ""


def metrics(y, yhat, dataset: str = "", algorithm: str = "", split: str = "") -> MetricsReport:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError("y and yhat must be 1-D with equal length")
    if y.size == 0:
        raise ValueError("empty vectors")
    err = y - yhat
    mae = float(np.mean(np.abs(err)))
    rmse = float(math.sqrt(np.mean(err * err)))
    sst = float(np.sum((y - y.mean()) ** 2))
    if y.size < 2 or sst == 0.0:
        r2 = None
    else:
        r2 = float(1.0 - np.sum(err * err) / sst)
    return MetricsReport(mae, rmse, r2, int(y.size), dataset, algorithm, split)


def split_dataset(ds: Dataset, fractions, seed: int) -> tuple[Dataset, ...]:
    """Shuffled disjoint partition with deterministic sizes.

    All parts except the last get floor(n * fraction) rows; the last
    absorbs the remainder. An empty part is an error.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) < 2:
        raise ValueError("need at least two fractions")
    if any(f <= 0 for f in fractions):
        raise ValueError("fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions sum to {sum(fractions)}, expected 1")
    n = ds.n
    sizes = [math.floor(n * f) for f in fractions[:-1]]
    sizes.append(n - sum(sizes))
    if any(s <= 0 for s in sizes):
        raise ValueError(f"fractions {fractions} produce an empty part for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    parts = []
    start = 0
    for s in sizes:
        parts.append(ds.take(np.sort(perm[start : start + s])))
        start += s
    return tuple(parts)
