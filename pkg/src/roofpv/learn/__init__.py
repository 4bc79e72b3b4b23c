"""Regression-tree ensembles, fit metrics, and the 16-model experiment grid."""

from .config import LearnerConfig, config_from_params
from .data import Dataset
from .ensembles import (
    TreeEnsemble,
    ensemble_from_dict,
    ensemble_to_dict,
    fit_gbdt,
    fit_random_forest,
    load_ensemble,
    predict,
    save_ensemble,
)
from .metrics import MetricsReport, metrics, split_dataset
from .trees import TreeNode, fit_tree
from .experiment import (
    DEFAULT_GRID,
    GridEntry,
    GridResult,
    GridRow,
    assemble_datasets,
    run_experiment_grid,
    table1_rows,
    write_grid_csv,
    write_table1_csv,
)

__all__ = [
    "LearnerConfig",
    "config_from_params",
    "Dataset",
    "TreeNode",
    "fit_tree",
    "TreeEnsemble",
    "fit_random_forest",
    "fit_gbdt",
    "predict",
    "save_ensemble",
    "load_ensemble",
    "ensemble_to_dict",
    "ensemble_from_dict",
    "MetricsReport",
    "metrics",
    "split_dataset",
    "DEFAULT_GRID",
    "GridEntry",
    "GridRow",
    "GridResult",
    "assemble_datasets",
    "run_experiment_grid",
    "table1_rows",
    "write_grid_csv",
    "write_table1_csv",
]
