"""Model interpretation: FIS aggregation, TreeSHAP, OLS/AME."""

from .fis import (
    FISTable,
    ModelImportance,
    aggregate_fis,
    build_fis_table,
    fis_csv_rows,
    gain_importance,
    standardize_fis,
)
from .shap_values import (
    ShapExplanation,
    expected_value,
    shap_matrix,
    shap_summary,
    tree_shap,
)
from .linear import (
    AMEReport,
    LinearModelSpec,
    OLSFit,
    Term,
    ame,
    ols_fit,
    ols_table_rows,
    ols_table_text,
    parse_terms,
    significance_stars,
)

__all__ = [
    "ModelImportance",
    "FISTable",
    "gain_importance",
    "standardize_fis",
    "aggregate_fis",
    "build_fis_table",
    "fis_csv_rows",
    "ShapExplanation",
    "tree_shap",
    "shap_matrix",
    "shap_summary",
    "expected_value",
    "Term",
    "LinearModelSpec",
    "OLSFit",
    "AMEReport",
    "ols_fit",
    "ame",
    "parse_terms",
    "ols_table_rows",
    "ols_table_text",
    "significance_stars",
]
