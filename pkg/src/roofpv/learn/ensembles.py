"""Random forests and second-order gradient boosting over the tree grower.

Per-tree (forest) and per-round (boosting) random number streams are
derived from the config seed through ``SeedSequence(seed, spawn_key=(i,))``
so serial and threaded training produce bit-identical ensembles.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import LearnerConfig
from .trees import CandidateBins, Grower, SecondOrderCriterion, TreeNode, VarianceCriterion, tree_predict

SCHEMA_VERSION = 1


@dataclass
class TreeEnsemble:
    """Ordered trees plus the combination rule.

    ``kind == "random_forest"`` predicts the unweighted mean of its trees;
    ``kind == "gbdt"`` predicts ``base_score + learning_rate * sum(trees)``.
    """

    kind: str
    trees: list[TreeNode]
    base_score: float
    learning_rate: float
    feature_names: tuple[str, ...]
    config: LearnerConfig
    schema_version: int = SCHEMA_VERSION

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def tree_weight(self) -> float:
        if self.kind == "gbdt":
            return self.learning_rate
        return 1.0 / len(self.trees)


def _default_names(p: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(p))


def _prepare(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, p) and y must be (n,)")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    return X, y


def _tree_rng(seed: int, index: int):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _feature_pool(rng, p: int, fraction: float) -> np.ndarray:
    if fraction >= 1.0:
        return np.arange(p)
    k = min(p, max(1, math.ceil(fraction * p)))
    return np.sort(rng.choice(p, size=k, replace=False))


def fit_random_forest(X, y, config: LearnerConfig, feature_names=None, n_jobs: int = 1) -> TreeEnsemble:
    """Bagged variance-criterion trees, prediction = mean over trees."""
    if config.algorithm != "random_forest":
        raise ValueError(f"config.algorithm is {config.algorithm!r}, expected 'random_forest'")
    X, y = _prepare(X, y)
    n, p = X.shape
    names = tuple(feature_names) if feature_names is not None else _default_names(p)
    if len(names) != p:
        raise ValueError("feature_names length mismatch")
    bins = CandidateBins(X, config.max_bin)
    h = np.ones(n)
    criterion = VarianceCriterion()

    def build(i: int) -> TreeNode:
        rng = _tree_rng(config.seed, i)
        rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        pool = _feature_pool(rng, p, config.feature_fraction)
        return Grower(X, y, h, config, criterion, bins, rng, pool).grow(rows)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(build, range(config.n_estimators)))
    else:
        trees = [build(i) for i in range(config.n_estimators)]
    return TreeEnsemble("random_forest", trees, 0.0, 1.0, names, config)


def fit_gbdt(X, y, config: LearnerConfig, feature_names=None) -> TreeEnsemble:
    """Stagewise squared-loss boosting.

    Each round fits a tree to gradients ``g_i = yhat_i - y_i`` (unit
    hessians) and the ensemble adds ``learning_rate`` times the tree. Row
    bagging re-samples every ``bagging_freq`` rounds; feature fractions
    re-sample every round.
    """
    if config.algorithm != "gbdt":
        raise ValueError(f"config.algorithm is {config.algorithm!r}, expected 'gbdt'")
    X, y = _prepare(X, y)
    n, p = X.shape
    names = tuple(feature_names) if feature_names is not None else _default_names(p)
    if len(names) != p:
        raise ValueError("feature_names length mismatch")
    base = float(np.mean(y)) if config.base_score is None else float(config.base_score)
    bins = CandidateBins(X, config.max_bin)
    h = np.ones(n)
    criterion = SecondOrderCriterion(config.reg_lambda, config.alpha)
    bagging = config.bagging_fraction < 1.0 and config.bagging_freq > 0
    pred = np.full(n, base)
    rows = np.arange(n)
    trees: list[TreeNode] = []
    for m in range(config.n_estimators):
        rng = _tree_rng(config.seed, m)
        if bagging and m % config.bagging_freq == 0:
            k = min(n, max(1, math.ceil(config.bagging_fraction * n)))
            rows = np.sort(rng.choice(n, size=k, replace=False))
        pool = _feature_pool(rng, p, config.feature_fraction)
        g = pred - y
        tree = Grower(X, g, h, config, criterion, bins, rng, pool).grow(rows)
        trees.append(tree)
        pred = pred + config.learning_rate * tree_predict(tree, X)
    return TreeEnsemble("gbdt", trees, base, config.learning_rate, names, config)


def predict(ensemble: TreeEnsemble, X, feature_names=None) -> np.ndarray | float:
    """Ensemble prediction for a vector or matrix of features.

    When ``feature_names`` is given, columns are remapped by name onto the
    training order, so permuted inputs with matching names predict
    identically.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("X must be 1-D or 2-D")
    if feature_names is not None:
        given = list(feature_names)
        if len(given) != X.shape[1]:
            raise ValueError("feature_names length mismatch with X")
        if tuple(given) != ensemble.feature_names:
            try:
                perm = [given.index(name) for name in ensemble.feature_names]
            except ValueError as exc:
                raise ValueError(f"missing feature in input: {exc}") from None
            X = X[:, perm]
    if X.shape[1] != ensemble.n_features:
        raise ValueError(f"expected {ensemble.n_features} features, got {X.shape[1]}")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    total = np.zeros(X.shape[0])
    for tree in ensemble.trees:
        total += tree_predict(tree, X)
    if ensemble.kind == "gbdt":
        out = ensemble.base_score + ensemble.learning_rate * total
    else:
        out = total / len(ensemble.trees)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# JSON serialization (schema_version 1): nested nodes, config embedded.

def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value, "cover": node.cover}
    return {
        "feature_index": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "cover": node.cover,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict) -> TreeNode:
    if "feature_index" not in d:
        return TreeNode(value=d["value"], cover=d.get("cover", 0.0))
    return TreeNode(
        feature=d["feature_index"],
        threshold=d["threshold"],
        gain=d.get("gain", 0.0),
        cover=d.get("cover", 0.0),
        left=_node_from_dict(d["left"]),
        right=_node_from_dict(d["right"]),
    )


def ensemble_to_dict(ensemble: TreeEnsemble) -> dict:
    return {
        "schema_version": ensemble.schema_version,
        "kind": ensemble.kind,
        "base_score": ensemble.base_score,
        "learning_rate": ensemble.learning_rate,
        "feature_names": list(ensemble.feature_names),
        "config": dataclasses.asdict(ensemble.config),
        "trees": [_node_to_dict(t) for t in ensemble.trees],
    }


def ensemble_from_dict(data: dict) -> TreeEnsemble:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported ensemble schema version {version!r}")
    return TreeEnsemble(
        kind=data["kind"],
        trees=[_node_from_dict(t) for t in data["trees"]],
        base_score=data["base_score"],
        learning_rate=data["learning_rate"],
        feature_names=tuple(data["feature_names"]),
        config=LearnerConfig(**data["config"]),
        schema_version=version,
    )


def save_ensemble(path, ensemble: TreeEnsemble) -> None:
    Path(path).write_text(json.dumps(ensemble_to_dict(ensemble), sort_keys=True))


def load_ensemble(path) -> TreeEnsemble:
    return ensemble_from_dict(json.loads(Path(path).read_text()))
