"""Per-image feature families and ensemble feature matrices."""

from .extract import (
    FAMILIES,
    PUBLIC_FEATURE_NAMES,
    FeatureMatrix,
    FeatureSchema,
    default_schema,
    extract_all,
    extract_features,
    fg_ratio,
)
from .summary import SummaryStats, summary_stats

__all__ = [
    "FAMILIES",
    "PUBLIC_FEATURE_NAMES",
    "FeatureMatrix",
    "FeatureSchema",
    "SummaryStats",
    "default_schema",
    "extract_all",
    "extract_features",
    "fg_ratio",
    "summary_stats",
]
