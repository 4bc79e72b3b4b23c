"""Feature importance scores: per-model split gains, standardized and
aggregated across models with explained-variance weights.

Raw importance is the total split gain a feature accumulates in an
ensemble. Within each model the gains are min-max scaled to [0, 1]; the
aggregate score of a feature is the weighted mean of its standardized
scores with each model's R² as the weight, so rescaling the weight vector
leaves the ranking unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..learn.ensembles import TreeEnsemble


def gain_importance(ensemble: TreeEnsemble) -> dict[str, float]:
    """Total split gain per feature name; features never split get 0."""
    gains = {name: 0.0 for name in ensemble.feature_names}
    for tree in ensemble.trees:
        stack = [tree]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                continue
            gains[ensemble.feature_names[node.feature]] += node.gain
            stack.append(node.left)
            stack.append(node.right)
    return gains


def standardize_fis(raw: dict[str, float]) -> tuple[dict[str, float], bool]:
    """Min-max scale raw gains to [0, 1] within one model.

    Degenerate inputs are flagged: all-equal gains map to 0, a single
    feature maps to 1 by convention.
    """
    if not raw:
        raise ValueError("no features to standardize")
    if len(raw) == 1:
        return {name: 1.0 for name in raw}, True
    lo = min(raw.values())
    hi = max(raw.values())
    if hi == lo:
        return {name: 0.0 for name in raw}, True
    return {name: (g - lo) / (hi - lo) for name, g in raw.items()}, False


@dataclass(frozen=True)
class ModelImportance:
    model_id: str
    raw_gain: dict[str, float]
    standardized: dict[str, float]
    weight: float
    degenerate: bool


@dataclass
class FISTable:
    models: list[ModelImportance]
    aggregate: list[tuple[str, float]]  # descending score


def aggregate_fis(models: list[ModelImportance]) -> list[tuple[str, float]]:
    """Weighted mean of standardized scores, sorted descending.

    All models must share one feature set and carry positive weights.
    """
    if not models:
        raise ValueError("no models to aggregate")
    features = set(models[0].standardized)
    for m in models[1:]:
        if set(m.standardized) != features:
            raise ValueError(f"model {m.model_id!r} has a mismatched feature set")
    weights = [m.weight for m in models]
    if any(w <= 0 for w in weights):
        raise ValueError("aggregation weights must be positive")
    total = sum(weights)
    scores = {
        f: sum(m.weight * m.standardized[f] for m in models) / total for f in features
    }
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def build_fis_table(ensembles: dict[str, tuple[TreeEnsemble, float]]) -> FISTable:
    """FIS table from (ensemble, R² weight) pairs keyed by model id."""
    models = []
    for model_id in sorted(ensembles):
        ens, weight = ensembles[model_id]
        raw = gain_importance(ens)
        std, degenerate = standardize_fis(raw)
        models.append(ModelImportance(model_id, raw, std, weight, degenerate))
    return FISTable(models, aggregate_fis(models))


def fis_csv_rows(table: FISTable, X=None, y=None, feature_names=None) -> list[list]:
    """CSV rows: feature, aggregate score, per-model scores, and (when data
    is supplied) the bivariate Pearson correlation with the target and its
    p-value."""
    header = ["feature", "aggregate"]
    header += [f"score_{m.model_id}" for m in table.models]
    with_corr = X is not None and y is not None and feature_names is not None
    if with_corr:
        header += ["pearson_r", "p_value"]
        name_idx = {n: i for i, n in enumerate(feature_names)}
    rows = [header]
    for feature, score in table.aggregate:
        row = [feature, repr(score)]
        row += [repr(m.standardized[feature]) for m in table.models]
        if with_corr:
            if feature in name_idx:
                col = np.asarray(X)[:, name_idx[feature]]
                if np.std(col) == 0.0:
                    row += ["", ""]
                else:
                    r, p = stats.pearsonr(col, np.asarray(y))
                    row += [repr(float(r)), repr(float(p))]
            else:
                row += ["", ""]
        rows.append(row)
    return rows
