"""Unified learner configuration and the third-party parameter vocabulary.

One config type drives both the random forest and the gradient-boosted
learner. ``config_from_params`` accepts hyperparameter dictionaries in the
XGBoost, CATBoost, LightGBM, and scikit-learn random-forest vocabularies
and maps them onto the unified fields:

==================  =======================  =============================
source key          algorithms               unified field
==================  =======================  =============================
learning_rate       xgboost/catboost/lgbm    learning_rate
n_estimators        xgboost/random_forest    n_estimators
iterations          catboost                 n_estimators
max_depth           xgboost/lgbm/rf          max_depth
depth               catboost                 max_depth
num_leaves          lgbm                     num_leaves
colsample_bytree    xgboost                  feature_fraction
feature_fraction    lgbm                     feature_fraction
bagging_fraction    lgbm                     bagging_fraction
bagging_freq        lgbm                     bagging_freq
reg_lambda          xgboost                  reg_lambda
l2_leaf_reg         catboost                 reg_lambda
alpha               xgboost                  alpha
gamma               xgboost                  gamma
max_bin             lgbm                     max_bin
base_score          xgboost                  base_score
min_samples_split   rf                       min_samples_split
min_samples_leaf    rf                       min_samples_leaf
max_features        rf                       max_features
seed/random_state   all                      seed ('seed' wins when both)
==================  =======================  =============================

LightGBM bookkeeping keys (objective, metric, boosting, is_unbalance,
is_training_metric) are accepted and ignored. XGBoost and CATBoost map to
depth-wise growth with the exact candidate scan; LightGBM maps to
leaf-wise growth with histogram candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

GROWTHS = ("depth_wise", "leaf_wise")
ALGORITHMS = ("random_forest", "gbdt")


@dataclass(frozen=True)
class LearnerConfig:
    algorithm: str = "gbdt"
    learning_rate: float = 0.1
    n_estimators: int = 100
    max_depth: int = 6  # <= 0 means unlimited
    num_leaves: int = 31
    growth: str = "depth_wise"
    feature_fraction: float = 1.0
    bagging_fraction: float = 1.0
    bagging_freq: int = 0
    reg_lambda: float = 1.0
    alpha: float = 0.0
    gamma: float = 0.0
    max_bin: int = 0  # 0 selects the exact candidate scan
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    base_score: float | None = None  # None: start boosting from the target mean
    max_features: str | None = None  # "sqrt" enables per-split subsampling
    bootstrap: bool = True  # random_forest only
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.growth not in GROWTHS:
            raise ValueError(f"unknown growth {self.growth!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be positive")
        for name in ("feature_fraction", "bagging_fraction"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} {v} outside (0, 1]")
        if self.reg_lambda < 0 or self.alpha < 0 or self.gamma < 0:
            raise ValueError("regularization terms must be nonnegative")
        if self.max_bin < 0:
            raise ValueError("max_bin must be nonnegative")
        if self.min_samples_leaf < 1 or self.min_samples_split < 2:
            raise ValueError("min_samples_leaf >= 1 and min_samples_split >= 2 required")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be at least 2")
        if self.max_features not in (None, "sqrt"):
            raise ValueError(f"unsupported max_features {self.max_features!r}")


_IGNORED_KEYS = {"objective", "metric", "boosting", "is_unbalance", "is_training_metric"}

_KEY_MAP = {
    "learning_rate": "learning_rate",
    "n_estimators": "n_estimators",
    "iterations": "n_estimators",
    "max_depth": "max_depth",
    "depth": "max_depth",
    "num_leaves": "num_leaves",
    "colsample_bytree": "feature_fraction",
    "feature_fraction": "feature_fraction",
    "bagging_fraction": "bagging_fraction",
    "bagging_freq": "bagging_freq",
    "reg_lambda": "reg_lambda",
    "l2_leaf_reg": "reg_lambda",
    "alpha": "alpha",
    "gamma": "gamma",
    "max_bin": "max_bin",
    "base_score": "base_score",
    "min_samples_split": "min_samples_split",
    "min_samples_leaf": "min_samples_leaf",
    "max_features": "max_features",
    "bootstrap": "bootstrap",
}

_ALGORITHM_DEFAULTS = {
    "xgboost": {"algorithm": "gbdt", "growth": "depth_wise", "max_bin": 0, "base_score": 0.5},
    "catboost": {"algorithm": "gbdt", "growth": "depth_wise", "max_bin": 0},
    "lightgbm": {"algorithm": "gbdt", "growth": "leaf_wise", "max_bin": 255},
    "random_forest": {"algorithm": "random_forest", "growth": "depth_wise", "max_bin": 0},
    "gbdt": {"algorithm": "gbdt"},
}

_CONFIG_FIELDS = {f.name for f in fields(LearnerConfig)}


def config_from_params(algorithm: str, params: dict) -> LearnerConfig:
    """LearnerConfig from a third-party-style hyperparameter dictionary."""
    label = algorithm.lower().replace(" ", "_").replace("-", "_")
    if label == "randomforest":
        label = "random_forest"
    if label not in _ALGORITHM_DEFAULTS:
        raise ValueError(f"unknown algorithm label {algorithm!r}")
    kwargs = dict(_ALGORITHM_DEFAULTS[label])
    seed = None
    for key, value in params.items():
        if key in _IGNORED_KEYS:
            continue
        if key == "seed":
            seed = int(value)
            continue
        if key == "random_state":
            if seed is None:
                seed = int(value)
            continue
        if key not in _KEY_MAP:
            raise ValueError(f"unknown hyperparameter {key!r} for {algorithm}")
        target = _KEY_MAP[key]
        if target not in _CONFIG_FIELDS:
            raise ValueError(f"unmapped hyperparameter {key!r}")
        if key == "max_features" and value not in (None, "sqrt"):
            raise ValueError(f"unsupported max_features {value!r}")
        kwargs[target] = value
    if seed is not None:
        kwargs["seed"] = seed
    return LearnerConfig(**kwargs)
