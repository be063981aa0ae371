"""Dilated 1-D convolutional malware classification with adversarial
training, recursive feature elimination, and a reproducible batch CLI."""

from .attack import (
    AdversarialBatch,
    FgsmConfig,
    adversarial_augment,
    fgsm_perturb,
    robustness_sweep,
)
from .classifier import DicnnClassifier
from .data import (
    ColumnStandardizer,
    Dataset,
    PreprocessReport,
    RawTable,
    SplitSpec,
    build_family_subsets,
    build_multifamily_dataset,
    encode_labels,
    impute_or_drop,
    load_csv,
    missing_value_ratio,
    one_hot,
    preprocess_table,
    standardize,
    stratified_split,
)
from .errors import (
    CompatibilityError,
    ConfigError,
    CsvParseError,
    DataError,
    DicnnError,
    NumericError,
    SchemaError,
    ShapeError,
    StateError,
)
from .metrics import (
    ConfusionMatrix,
    EvalReport,
    comparison_table,
    confusion,
    load_published_rows,
    metrics,
    sweep_to_csv,
    sweep_to_svg,
)
from .numkit import Rng, derive_seed, matmul, tensor
from .rfe import (
    FeatureMask,
    RfeConfig,
    RfeSelector,
    apply_mask,
    feature_importance,
    rfe_select,
)
from . import nn

__version__ = "0.1.0"

__all__ = [
    "AdversarialBatch",
    "ColumnStandardizer",
    "CompatibilityError",
    "ConfigError",
    "ConfusionMatrix",
    "CsvParseError",
    "DataError",
    "Dataset",
    "DicnnClassifier",
    "DicnnError",
    "EvalReport",
    "FeatureMask",
    "FgsmConfig",
    "NumericError",
    "PreprocessReport",
    "RawTable",
    "RfeConfig",
    "RfeSelector",
    "Rng",
    "SchemaError",
    "ShapeError",
    "SplitSpec",
    "StateError",
    "adversarial_augment",
    "apply_mask",
    "build_family_subsets",
    "build_multifamily_dataset",
    "comparison_table",
    "confusion",
    "derive_seed",
    "encode_labels",
    "feature_importance",
    "fgsm_perturb",
    "impute_or_drop",
    "load_csv",
    "load_published_rows",
    "matmul",
    "metrics",
    "missing_value_ratio",
    "nn",
    "one_hot",
    "preprocess_table",
    "rfe_select",
    "robustness_sweep",
    "standardize",
    "stratified_split",
    "sweep_to_csv",
    "sweep_to_svg",
    "tensor",
]
