"""Four-dataset / four-algorithm experiment harness (16 models).

The default grid carries the tuned hyperparameter dictionaries of the four
third-party learners verbatim; ``config_from_params`` maps them onto the
unified learner. Each grid cell trains on a deterministic 80/20 split of
its dataset and reports test metrics (train metrics ride along in labeled
columns since the original split protocol is not recorded anywhere).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from ..ingest.schema import POLICY_FEATURES, TABLE_SCHEMA, feature_names, target_names
from .config import config_from_params
from .data import Dataset
from .ensembles import TreeEnsemble, fit_gbdt, fit_random_forest, predict
from .metrics import MetricsReport, metrics, split_dataset

DATASET_LABELS = {
    "pv_count": "PV count per HH",
    "pv_count_policy": "PV count per HH + Energy policy",
    "pv_ratio": "PV-to-roof ratio",
    "pv_ratio_policy": "PV-to-roof ratio + Energy policy",
}

ALGORITHM_LABELS = {
    "xgboost": "XGBoost",
    "catboost": "CATBoost",
    "lightgbm": "LightGBM",
    "random_forest": "Random Forest",
}


@dataclass(frozen=True)
class GridEntry:
    model_id: str
    dataset: str
    algorithm: str
    params: MappingProxyType

    @staticmethod
    def make(model_id, dataset, algorithm, params: dict) -> "GridEntry":
        return GridEntry(model_id, dataset, algorithm, MappingProxyType(dict(params)))


_LGBM_COMMON = {
    "objective": "regression",
    "metric": "rmse",
    "is_unbalance": "true",
    "is_training_metric": "true",
    "boosting": "gbdt",
}

DEFAULT_GRID: tuple[GridEntry, ...] = (
    GridEntry.make("M1", "pv_count", "xgboost", {
        "gamma": 0, "alpha": 12, "learning_rate": 0.027, "seed": 712,
        "colsample_bytree": 0.3, "reg_lambda": 1, "random_state": 700,
        "n_estimators": 299, "base_score": 0.29, "max_depth": 7,
    }),
    GridEntry.make("M2", "pv_count", "catboost", {
        "l2_leaf_reg": 2, "learning_rate": 0.1, "depth": 9, "iterations": 150,
    }),
    GridEntry.make("M3", "pv_count", "lightgbm", {
        **_LGBM_COMMON, "num_leaves": 36, "feature_fraction": 0.99,
        "bagging_fraction": 0.69, "bagging_freq": 4, "learning_rate": 0.01,
        "max_depth": 15, "max_bin": 23,
    }),
    GridEntry.make("M4", "pv_count", "random_forest", {
        "n_estimators": 19, "max_depth": 150, "min_samples_split": 2,
        "max_features": "sqrt", "min_samples_leaf": 2, "random_state": 531,
    }),
    GridEntry.make("M5", "pv_count_policy", "xgboost", {
        "gamma": 0, "alpha": 5, "learning_rate": 0.05, "random_state": 185,
        "colsample_bytree": 0.5, "reg_lambda": 0, "n_estimators": 311,
        "base_score": 0.5, "max_depth": 7, "seed": 855,
    }),
    GridEntry.make("M6", "pv_count_policy", "catboost", {
        "l2_leaf_reg": 2, "learning_rate": 0.1, "depth": 6, "iterations": 200,
    }),
    GridEntry.make("M7", "pv_count_policy", "lightgbm", {
        **_LGBM_COMMON, "num_leaves": 36, "feature_fraction": 0.81,
        "bagging_fraction": 0.91, "bagging_freq": 20, "learning_rate": 0.021,
        "max_depth": 14, "max_bin": 23,
    }),
    GridEntry.make("M8", "pv_count_policy", "random_forest", {
        "n_estimators": 700, "max_depth": 150, "min_samples_split": 2,
        "max_features": "sqrt", "min_samples_leaf": 2, "random_state": 372,
    }),
    GridEntry.make("M9", "pv_ratio", "xgboost", {
        "gamma": 0, "alpha": 12, "learning_rate": 0.025, "seed": 712,
        "colsample_bytree": 0.35, "reg_lambda": 1, "random_state": 789,
        "n_estimators": 300, "base_score": 0.5, "max_depth": 8,
    }),
    GridEntry.make("M10", "pv_ratio", "catboost", {
        "l2_leaf_reg": 1, "learning_rate": 0.09, "depth": 10, "iterations": 200,
    }),
    GridEntry.make("M11", "pv_ratio", "lightgbm", {
        **_LGBM_COMMON, "num_leaves": 45, "feature_fraction": 0.25,
        "bagging_fraction": 0.75, "bagging_freq": 4, "learning_rate": 0.01,
        "max_depth": 15, "max_bin": 52,
    }),
    GridEntry.make("M12", "pv_ratio", "random_forest", {
        "n_estimators": 300, "max_depth": 64, "min_samples_split": 3,
        "max_features": "sqrt", "min_samples_leaf": 2, "random_state": 435,
    }),
    GridEntry.make("M13", "pv_ratio_policy", "xgboost", {
        "gamma": 0, "alpha": 5, "learning_rate": 0.05, "seed": 1164,
        "colsample_bytree": 0.5, "reg_lambda": 0, "random_state": 185,
        "n_estimators": 500, "base_score": 0.52, "max_depth": 9,
    }),
    GridEntry.make("M14", "pv_ratio_policy", "catboost", {
        "l2_leaf_reg": 1, "learning_rate": 0.09, "depth": 6, "iterations": 150,
    }),
    GridEntry.make("M15", "pv_ratio_policy", "lightgbm", {
        **_LGBM_COMMON, "num_leaves": 36, "feature_fraction": 0.34,
        "bagging_fraction": 0.75, "bagging_freq": 4, "learning_rate": 0.01,
        "max_depth": 15, "max_bin": 23,
    }),
    GridEntry.make("M16", "pv_ratio_policy", "random_forest", {
        "n_estimators": 300, "max_depth": 280, "min_samples_split": 2,
        "max_features": "sqrt", "min_samples_leaf": 2, "random_state": 42,
    }),
)


@dataclass(frozen=True)
class GridRow:
    model_id: str
    dataset: str
    algorithm: str
    test: MetricsReport
    train: MetricsReport
    seed: int


@dataclass
class GridResult:
    rows: list[GridRow]
    ensembles: dict[str, TreeEnsemble]
    errors: dict[str, str]


def _record_value(record, name):
    if hasattr(record, "values"):
        return record.values.get(name)
    return record.get(name)


def assemble_datasets(records, targets=None) -> dict[str, Dataset]:
    """Four model datasets from joined block-group records.

    The policy variants keep the six energy-policy columns and only the
    rows where all of them are present; the non-policy variants drop those
    columns and keep every complete-case row. Rows with any remaining null
    are excluded (tree fitting takes no nulls).
    """
    targets = targets or target_names()
    base_features = [f for f in feature_names() if f not in POLICY_FEATURES]
    tags = {
        "pv_count": (targets[0], base_features),
        "pv_count_policy": (targets[0], list(feature_names())),
        "pv_ratio": (targets[1], base_features),
        "pv_ratio_policy": (targets[1], list(feature_names())),
    }
    out: dict[str, Dataset] = {}
    for tag, (target, feats) in tags.items():
        X_rows, y_rows = [], []
        for rec in records:
            y = _record_value(rec, target)
            if y is None:
                continue
            vals = [_record_value(rec, f) for f in feats]
            if any(v is None for v in vals):
                continue
            X_rows.append(vals)
            y_rows.append(y)
        if X_rows:
            out[tag] = Dataset(np.array(X_rows), np.array(y_rows), tuple(feats), tag)
    return out


def _fit(entry: GridEntry, train: Dataset) -> TreeEnsemble:
    cfg = config_from_params(entry.algorithm, dict(entry.params))
    if cfg.algorithm == "random_forest":
        return fit_random_forest(train.X, train.y, cfg, train.feature_names)
    return fit_gbdt(train.X, train.y, cfg, train.feature_names)


def run_experiment_grid(
    datasets: dict[str, Dataset],
    grid: tuple[GridEntry, ...] = DEFAULT_GRID,
    test_fraction: float = 0.2,
    seed: int = 0,
) -> GridResult:
    """Train every grid cell; failures are recorded and the grid completes."""
    splits = {
        tag: split_dataset(ds, (1.0 - test_fraction, test_fraction), seed)
        for tag, ds in datasets.items()
    }
    rows: list[GridRow] = []
    ensembles: dict[str, TreeEnsemble] = {}
    errors: dict[str, str] = {}
    for entry in grid:
        if entry.dataset not in splits:
            errors[entry.model_id] = f"dataset {entry.dataset!r} not assembled"
            continue
        train, test = splits[entry.dataset]
        try:
            ens = _fit(entry, train)
            m_test = metrics(test.y, predict(ens, test.X), entry.dataset, entry.algorithm, "test")
            m_train = metrics(train.y, predict(ens, train.X), entry.dataset, entry.algorithm, "train")
        except Exception as exc:  # keep the grid going, report per cell
            errors[entry.model_id] = f"{type(exc).__name__}: {exc}"
            continue
        ensembles[entry.model_id] = ens
        rows.append(GridRow(entry.model_id, entry.dataset, entry.algorithm, m_test, m_train, seed))
    return GridResult(rows, ensembles, errors)


GRID_CSV_COLUMNS = (
    "model", "dataset", "algorithm", "mae", "rmse", "r2",
    "mae_train", "rmse_train", "r2_train", "seed",
)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_grid_csv(path, rows: list[GridRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRID_CSV_COLUMNS)
        for r in rows:
            writer.writerow([
                r.model_id, r.dataset, r.algorithm,
                _fmt(r.test.mae), _fmt(r.test.rmse), _fmt(r.test.r2),
                _fmt(r.train.mae), _fmt(r.train.rmse), _fmt(r.train.r2),
                r.seed,
            ])


def table1_rows(rows: list[GridRow]) -> list[list[str]]:
    """Model-performance table rows: Model, Dataset, Algorithm, MAE, RMSE, R2."""
    out = [["Model", "Dataset", "Algorithm", "MAE", "RMSE", "R2"]]
    for r in rows:
        out.append([
            r.model_id,
            DATASET_LABELS.get(r.dataset, r.dataset),
            ALGORITHM_LABELS.get(r.algorithm, r.algorithm),
            f"{r.test.mae:.3f}",
            f"{r.test.rmse:.3f}",
            "" if r.test.r2 is None else f"{100.0 * r.test.r2:.1f}%",
        ])
    return out


def write_table1_csv(path, rows: list[GridRow]) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(table1_rows(rows))
