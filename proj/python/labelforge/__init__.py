"""Python bindings for the labelforge C++ core."""

from ._labelforge import (
    ConfusionMatrix,
    FeatureSchema,
    ForestModel,
    Label,
    LabelforgeError,
    Manifest,
    Snapshot,
    Store,
    Strategy,
    accuracy,
    cross_validate,
    find_optimal_threshold,
    load_manifest,
    mcc,
    parse_snapshot,
    precision,
    recall,
    select_features,
    specificity,
    train_forest,
)

__all__ = [
    "ConfusionMatrix",
    "FeatureSchema",
    "ForestModel",
    "Label",
    "LabelforgeError",
    "Manifest",
    "Snapshot",
    "Store",
    "Strategy",
    "accuracy",
    "cross_validate",
    "find_optimal_threshold",
    "load_manifest",
    "mcc",
    "parse_snapshot",
    "precision",
    "recall",
    "select_features",
    "specificity",
    "train_forest",
]
