"""CSV ingestion and tabular preprocessing.

Pipeline order mirrors the experiment: load the feature table, measure the
missing-value ratio per column, drop or median-impute, encode labels, carve
balanced per-family subsets, standardize columns (population statistics,
divisor n), and produce a seeded stratified train/validation split.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    CsvParseError,
    DataError,
    SchemaError,
    ShapeError,
    StateError,
)
from .numkit import Rng, check_finite, derive_seed

DEFAULT_MISSING_MARKERS = ("", "NA", "?")


@dataclass
class RawTable:
    """Parsed numeric grid with per-cell missing flags and raw labels."""

    feature_names: list[str]
    values: np.ndarray          # n x F float64, NaN where missing
    missing: np.ndarray         # n x F bool
    labels: list[str]
    source: str

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass
class Dataset:
    """Feature matrix plus encoded labels and naming metadata."""

    features: np.ndarray        # n x F float64
    labels: np.ndarray          # n int64, values in 0..k-1
    feature_names: list[str]
    class_names: list[str]
    source: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n, f = self.features.shape
        if n < 1 or f < 1:
            raise ShapeError(f"dataset needs n>=1 and F>=1, got {n}x{f}")
        if len(self.labels) != n:
            raise ShapeError(f"{n} rows but {len(self.labels)} labels")
        k = len(self.class_names)
        if k < 2:
            raise DataError(f"need at least 2 classes, got {k}")
        if self.labels.min() < 0 or self.labels.max() >= k:
            raise ShapeError(f"label out of range for k={k}")
        if len(self.feature_names) != f:
            raise ShapeError(f"{f} columns but {len(self.feature_names)} names")
        if len(set(self.feature_names)) != f:
            raise DataError("feature names are not unique")
        check_finite(self.features, "dataset features")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def take_rows(self, indices, source_suffix: str = "") -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            feature_names=list(self.feature_names),
            class_names=list(self.class_names),
            source=self.source + source_suffix,
        )


@dataclass
class PreprocessReport:
    """Everything the cleaning and scaling stages decided, for audit/replay."""

    mvr: dict[str, float]
    mu: dict[str, float]
    sigma: dict[str, float]
    dropped_features: list[dict[str, str]]
    constant_features: list[str]
    class_proportions: dict[str, float]
    n_samples: int

    def to_json(self) -> str:
        payload = {"schema_version": 1, **self.__dict__}
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PreprocessReport":
        raw = json.loads(text)
        raw.pop("schema_version", None)
        return cls(**raw)


@dataclass
class SplitSpec:
    """Seeded stratified split, serializable for exact replay."""

    eta: float
    seed: int
    train_indices: np.ndarray
    val_indices: np.ndarray

    def __post_init__(self):
        self.train_indices = np.asarray(self.train_indices, dtype=np.int64)
        self.val_indices = np.asarray(self.val_indices, dtype=np.int64)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "eta": self.eta,
                "seed": self.seed,
                "train_indices": self.train_indices.tolist(),
                "val_indices": self.val_indices.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitSpec":
        raw = json.loads(text)
        return cls(
            eta=raw["eta"],
            seed=raw["seed"],
            train_indices=raw["train_indices"],
            val_indices=raw["val_indices"],
        )


def load_csv(
    path,
    label_column: str,
    drop_columns=(),
    missing_markers=DEFAULT_MISSING_MARKERS,
) -> RawTable:
    """Parse a UTF-8 header CSV into a numeric grid.

    Cells matching ``missing_markers`` (plus the empty cell) are flagged
    missing.  Every retained column must parse as float; identifier columns
    (package names, hashes) belong in ``drop_columns``.
    """
    markers = set(missing_markers) | {""}
    drop = set(drop_columns)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        if label_column not in header:
            raise SchemaError(f"{path}: label column {label_column!r} not in header")
        unknown_drop = drop - set(header)
        if unknown_drop:
            raise SchemaError(
                f"{path}: drop_columns not in header: {sorted(unknown_drop)}"
            )
        label_pos = header.index(label_column)
        keep_pos = [
            i for i, name in enumerate(header) if name not in drop and i != label_pos
        ]
        feature_names = [header[i] for i in keep_pos]
        if len(set(feature_names)) != len(feature_names):
            raise SchemaError(f"{path}: duplicate feature column names")

        rows, miss_rows, labels = [], [], []
        for row_no, cells in enumerate(reader, start=2):  # 1-based, after header
            if len(cells) != len(header):
                raise CsvParseError(
                    f"{path}: row {row_no} has {len(cells)} cells, expected {len(header)}"
                )
            labels.append(cells[label_pos])
            vals = np.empty(len(keep_pos))
            miss = np.zeros(len(keep_pos), dtype=bool)
            for out_i, col_i in enumerate(keep_pos):
                cell = cells[col_i].strip()
                if cell in markers:
                    vals[out_i] = np.nan
                    miss[out_i] = True
                    continue
                try:
                    vals[out_i] = float(cell)
                except ValueError:
                    raise CsvParseError(
                        f"{path}: row {row_no}, column {header[col_i]!r}: "
                        f"cannot parse {cell!r} as a number (non-numeric "
                        f"identifier columns must be listed in drop_columns)"
                    ) from None
            rows.append(vals)
            miss_rows.append(miss)

    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return RawTable(
        feature_names=feature_names,
        values=np.vstack(rows),
        missing=np.vstack(miss_rows),
        labels=labels,
        source=str(path),
    )


def missing_value_ratio(table: RawTable) -> np.ndarray:
    """Per-feature fraction of missing cells, computed as exact counts / n."""
    if table.n_rows == 0:
        raise DataError("missing_value_ratio: empty table")
    return table.missing.sum(axis=0) / table.n_rows


def impute_or_drop(
    table: RawTable, mvr: np.ndarray, drop_threshold: float = 0.5
) -> tuple[RawTable, list[dict[str, str]]]:
    """Drop columns whose missing ratio exceeds the threshold; median-impute
    the remaining gaps.  Returns the cleaned table and drop records."""
    if not 0.0 <= drop_threshold <= 1.0:
        raise DataError(f"drop_threshold must be in [0,1], got {drop_threshold}")
    mvr = np.asarray(mvr, dtype=np.float64)
    if mvr.shape != (table.n_features,):
        raise ShapeError(
            f"mvr length {mvr.shape} does not match {table.n_features} features"
        )
    keep = mvr <= drop_threshold
    dropped = [
        {
            "name": table.feature_names[i],
            "reason": f"missing ratio {mvr[i]:.4f} > threshold {drop_threshold}",
        }
        for i in np.nonzero(~keep)[0]
    ]
    values = table.values[:, keep].copy()
    missing = table.missing[:, keep].copy()
    names = [n for n, k in zip(table.feature_names, keep) if k]
    for j in range(values.shape[1]):
        col_missing = missing[:, j]
        if not col_missing.any():
            continue
        present = values[~col_missing, j]
        if present.size == 0:
            raise DataError(
                f"feature {names[j]!r} is entirely missing and cannot be imputed"
            )
        values[col_missing, j] = float(np.median(present))
    missing[:] = False
    return (
        RawTable(
            feature_names=names,
            values=values,
            missing=missing,
            labels=list(table.labels),
            source=table.source,
        ),
        dropped,
    )


def standardize(features: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale each column by its mean and population std
    (divisor n, not n-1).  Constant columns (sigma == 0) map to all zeros."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(f"standardize expects an n x F matrix, got {x.shape}")
    mu = x.mean(axis=0)
    sigma = np.sqrt(((x - mu) ** 2).mean(axis=0))
    safe = np.where(sigma == 0.0, 1.0, sigma)
    out = (x - mu) / safe
    out[:, sigma == 0.0] = 0.0
    return out, mu, sigma


def encode_labels(raw_labels) -> tuple[np.ndarray, list[str]]:
    """Map string labels to 0..k-1 with lexicographically ordered classes."""
    classes = sorted(set(raw_labels))
    if len(classes) < 2:
        raise DataError(
            f"need at least 2 distinct labels, got {classes!r}"
        )
    index = {name: i for i, name in enumerate(classes)}
    return np.array([index[l] for l in raw_labels], dtype=np.int64), classes


def one_hot(indices, k: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= k):
        raise ShapeError(f"label index out of range for k={k}")
    out = np.zeros((idx.shape[0], k))
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(dataset: Dataset, eta: float, seed: int) -> SplitSpec:
    """Per class: seeded shuffle, first round(eta * class size) rows to
    validation, rest to training.  Class proportions survive within one
    sample per class."""
    if not 0.0 < eta < 1.0:
        raise DataError(f"eta must be in (0,1), got {eta}")
    rng = Rng(derive_seed(seed, "stratified_split"))
    train, val = [], []
    for c in range(dataset.n_classes):
        members = np.nonzero(dataset.labels == c)[0]
        if members.size < 2:
            raise DataError(
                f"class {dataset.class_names[c]!r} has {members.size} sample(s); "
                f"stratified split needs at least 2"
            )
        order = rng.shuffle(members.size)
        shuffled = members[order]
        n_val = _round_half_up(eta * members.size)
        val.extend(shuffled[:n_val].tolist())
        train.extend(shuffled[n_val:].tolist())
    return SplitSpec(
        eta=eta,
        seed=seed,
        train_indices=np.array(sorted(train), dtype=np.int64),
        val_indices=np.array(sorted(val), dtype=np.int64),
    )


def build_family_subsets(
    dataset: Dataset,
    families,
    benign_label: str = "benign",
    seed: int = 0,
) -> dict[str, Dataset]:
    """One balanced two-class {benign, family} dataset per requested family.

    The larger side is downsampled (seeded, without replacement) to the
    smaller side's count, so both classes end up equal.
    """
    if benign_label not in dataset.class_names:
        raise DataError(f"benign label {benign_label!r} not among classes")
    benign_idx = np.nonzero(
        dataset.labels == dataset.class_names.index(benign_label)
    )[0]
    subsets = {}
    for family in families:
        if family not in dataset.class_names:
            raise DataError(f"unknown family {family!r}; classes: {dataset.class_names}")
        fam_idx = np.nonzero(dataset.labels == dataset.class_names.index(family))[0]
        cap = min(benign_idx.size, fam_idx.size)
        if cap == 0:
            raise DataError(f"no samples available to pair benign with {family!r}")
        rng = Rng(derive_seed(seed, f"subset:{family}"))
        benign_take = benign_idx[rng.sample_without_replacement(benign_idx.size, cap)]
        fam_take = fam_idx[rng.sample_without_replacement(fam_idx.size, cap)]
        rows = np.sort(np.concatenate([benign_take, fam_take]))
        class_names = sorted([benign_label, family])
        labels = np.array(
            [
                class_names.index(
                    family
                    if dataset.labels[i] == dataset.class_names.index(family)
                    else benign_label
                )
                for i in rows
            ],
            dtype=np.int64,
        )
        subsets[family] = Dataset(
            features=dataset.features[rows],
            labels=labels,
            feature_names=list(dataset.feature_names),
            class_names=class_names,
            source=dataset.source + f"#subset:{family}",
        )
    return subsets


def build_multifamily_dataset(dataset: Dataset, families, seed: int = 0) -> Dataset:
    """Balanced k-way dataset over the named families (no benign class)."""
    if len(families) < 2:
        raise DataError("multifamily mode needs at least 2 families")
    per_family = {}
    for family in families:
        if family not in dataset.class_names:
            raise DataError(f"unknown family {family!r}; classes: {dataset.class_names}")
        per_family[family] = np.nonzero(
            dataset.labels == dataset.class_names.index(family)
        )[0]
    cap = min(idx.size for idx in per_family.values())
    if cap == 0:
        raise DataError("a requested family has no samples")
    rows = []
    for family in families:
        rng = Rng(derive_seed(seed, f"multifamily:{family}"))
        idx = per_family[family]
        rows.extend(idx[rng.sample_without_replacement(idx.size, cap)].tolist())
    rows = np.array(sorted(rows), dtype=np.int64)
    class_names = sorted(families)
    labels = np.array(
        [class_names.index(dataset.class_names[dataset.labels[i]]) for i in rows],
        dtype=np.int64,
    )
    return Dataset(
        features=dataset.features[rows],
        labels=labels,
        feature_names=list(dataset.feature_names),
        class_names=class_names,
        source=dataset.source + "#multifamily",
    )


def preprocess_table(
    table: RawTable,
    eta: float = 0.2,
    seed: int = 0,
    drop_threshold: float = 0.5,
) -> tuple[Dataset, PreprocessReport, SplitSpec]:
    """Full cleaning pass over one table: MVR, impute/drop, encode,
    standardize, stratified split."""
    mvr = missing_value_ratio(table)
    mvr_by_name = {n: float(r) for n, r in zip(table.feature_names, mvr)}
    clean, dropped = impute_or_drop(table, mvr, drop_threshold)
    labels, class_names = encode_labels(clean.labels)
    std, mu, sigma = standardize(clean.values)
    constant = [n for n, s in zip(clean.feature_names, sigma) if s == 0.0]
    dataset = Dataset(
        features=std,
        labels=labels,
        feature_names=list(clean.feature_names),
        class_names=class_names,
        source=clean.source,
    )
    counts = dataset.class_counts()
    report = PreprocessReport(
        mvr=mvr_by_name,
        mu={n: float(v) for n, v in zip(clean.feature_names, mu)},
        sigma={n: float(v) for n, v in zip(clean.feature_names, sigma)},
        dropped_features=dropped,
        constant_features=constant,
        class_proportions={
            name: float(c / dataset.n_samples)
            for name, c in zip(class_names, counts)
        },
        n_samples=dataset.n_samples,
    )
    split = stratified_split(dataset, eta, seed)
    return dataset, report, split


class ColumnStandardizer(BaseEstimator, TransformerMixin):
    """Transformer wrapper around :func:`standardize` so the scaling step
    composes with sklearn pipelines.

    Uses population statistics (divisor n); constant columns transform
    to zeros instead of being dropped, keeping column indices stable for
    downstream feature masks.
    """

    def fit(self, X, y=None):
        _, mu, sigma = standardize(X)
        self.mu_ = mu
        self.sigma_ = sigma
        self.n_features_in_ = mu.shape[0]
        return self

    def transform(self, X):
        if not hasattr(self, "mu_"):
            raise StateError("ColumnStandardizer.transform called before fit")
        x = np.asarray(X, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features_in_:
            raise ShapeError(
                f"expected n x {self.n_features_in_} matrix, got {x.shape}"
            )
        safe = np.where(self.sigma_ == 0.0, 1.0, self.sigma_)
        out = (x - self.mu_) / safe
        out[:, self.sigma_ == 0.0] = 0.0
        return out
