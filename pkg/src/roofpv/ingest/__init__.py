"""Feature-table construction: schema, spatial joins, imputation, tile fetch."""

from .schema import (
    FEATURES,
    POLICY_FEATURES,
    SVI_FEATURES,
    TABLE_SCHEMA,
    TARGETS,
    FeatureSpec,
    Schema,
    feature_names,
    target_names,
)
from .joins import (
    AdjacencyGraph,
    BlockGroupRecord,
    OverlayFeature,
    OverlayLayer,
    ValidationReport,
    assign_zip_by_population,
    broadcast_tract_to_blockgroups,
    build_adjacency,
    impute_adjacent_mean,
    read_features_csv,
    read_overlay_layer,
    spatial_join_largest_share,
    validate_schema,
    write_features_csv,
)
from .tilefetch import FetchError, OfflineCacheMiss, TileFetchConfig, TileFetcher, TokenBucket

__all__ = [
    "FeatureSpec",
    "Schema",
    "FEATURES",
    "TARGETS",
    "TABLE_SCHEMA",
    "POLICY_FEATURES",
    "SVI_FEATURES",
    "feature_names",
    "target_names",
    "BlockGroupRecord",
    "OverlayFeature",
    "OverlayLayer",
    "AdjacencyGraph",
    "ValidationReport",
    "spatial_join_largest_share",
    "assign_zip_by_population",
    "broadcast_tract_to_blockgroups",
    "impute_adjacent_mean",
    "validate_schema",
    "build_adjacency",
    "read_overlay_layer",
    "read_features_csv",
    "write_features_csv",
    "TileFetchConfig",
    "TileFetcher",
    "TokenBucket",
    "FetchError",
    "OfflineCacheMiss",
]
