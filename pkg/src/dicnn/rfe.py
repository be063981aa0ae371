"""Recursive feature elimination.

Each round trains a surrogate classifier on the surviving columns, scores
every column, removes the weakest ceil(step_fraction * surviving) of them
(never undershooting the target count), and repeats until exactly
``target_count`` columns remain.  The default surrogate is a linear softmax
model; a full convolutional surrogate can be selected for fidelity runs at
much higher cost.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .data import Dataset, one_hot
from .errors import ConfigError, ShapeError, StateError
from .numkit import derive_seed
from .nn import (
    DicnnNetwork,
    LayerSpec,
    TrainConfig,
    default_architecture,
    dense_spec,
    train,
)

SURROGATES = ("linear_softmax", "dicnn")


@dataclass
class RfeConfig:
    target_count: int
    step_fraction: float = 0.1
    surrogate: str = "linear_softmax"
    seed: int = 0

    def __post_init__(self):
        if self.target_count < 1:
            raise ConfigError(f"target_count must be >= 1, got {self.target_count}")
        if not 0.0 < self.step_fraction <= 1.0:
            raise ConfigError(
                f"step_fraction must be in (0,1], got {self.step_fraction}"
            )
        if self.surrogate not in SURROGATES:
            raise ConfigError(
                f"unknown surrogate {self.surrogate!r}; choose from {SURROGATES}"
            )


@dataclass
class FeatureMask:
    """Outcome of an elimination run over the original column order.

    ``ranking[f]`` is the 1-based round in which column f was removed;
    surviving columns share one final round number strictly greater than
    every eliminated column's.
    """

    feature_names: list[str]
    selected: np.ndarray                 # bool per original feature
    ranking: np.ndarray                  # int per original feature
    importance_trace: list[dict[str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.selected = np.asarray(self.selected, dtype=bool)
        self.ranking = np.asarray(self.ranking, dtype=np.int64)

    @property
    def n_selected(self) -> int:
        return int(self.selected.sum())

    def selected_names(self) -> list[str]:
        return [n for n, s in zip(self.feature_names, self.selected) if s]

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "feature_names": self.feature_names,
                "selected": self.selected.tolist(),
                "ranking": self.ranking.tolist(),
                "importance_trace": self.importance_trace,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "FeatureMask":
        raw = json.loads(text)
        return cls(
            feature_names=raw["feature_names"],
            selected=raw["selected"],
            ranking=raw["ranking"],
            importance_trace=raw.get("importance_trace", []),
        )


class LinearSoftmaxSurrogate:
    """Single dense layer + softmax head, trained with Adam."""

    def __init__(self, seed: int, epochs: int = 60, learning_rate: float = 0.05):
        self.seed = seed
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.network: DicnnNetwork | None = None

    def fit(self, x: np.ndarray, targets: np.ndarray) -> "LinearSoftmaxSurrogate":
        n_features = x.shape[1]
        k = targets.shape[1]
        specs = [dense_spec(n_features, k), LayerSpec(kind="softmax_head")]
        self.network = DicnnNetwork(specs, n_features, self.seed)
        config = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=x.shape[0],
            max_epochs=self.epochs,
            patience=self.epochs,  # run the full budget, no early stop
            seed=self.seed,
        )
        labels = targets.argmax(axis=1)
        train(self.network, x, targets, x, labels, config)
        return self

    def feature_scores(self) -> np.ndarray:
        if self.network is None:
            raise StateError("surrogate has not been trained")
        weight = dict(self.network.parameters())["0.weight"]  # (F, k)
        return np.sqrt((weight**2).sum(axis=1))


class DicnnSurrogate:
    """Small convolutional surrogate scored by mean absolute input-loss
    gradient (saliency) over the training rows."""

    def __init__(self, seed: int, epochs: int = 15):
        self.seed = seed
        self.epochs = epochs
        self.network: DicnnNetwork | None = None
        self._saliency: np.ndarray | None = None

    def fit(self, x: np.ndarray, targets: np.ndarray) -> "DicnnSurrogate":
        n_features = x.shape[1]
        k = targets.shape[1]
        dilations = [d for d in (1, 2, 4) if (3 - 1) * d < n_features // 2] or [1]
        specs = default_architecture(
            n_features, k, channels=8, kernel_size=3, dilations=dilations
        )
        self.network = DicnnNetwork(specs, n_features, self.seed)
        config = TrainConfig(
            learning_rate=3e-3,
            batch_size=min(256, x.shape[0]),
            max_epochs=self.epochs,
            patience=self.epochs,
            seed=self.seed,
        )
        train(self.network, x, targets, x, targets.argmax(axis=1), config)
        _, _, input_grad = self.network.loss_and_grads(x, targets)
        self._saliency = np.abs(input_grad).mean(axis=0)
        return self

    def feature_scores(self) -> np.ndarray:
        if self._saliency is None:
            raise StateError("surrogate has not been trained")
        return self._saliency


def feature_importance(surrogate) -> np.ndarray:
    """Non-negative per-column score; for the linear surrogate this is the
    L2 norm of each column's weights across classes."""
    return surrogate.feature_scores()


def _make_surrogate(config: RfeConfig, round_no: int):
    seed = derive_seed(config.seed, f"rfe_round:{round_no}")
    if config.surrogate == "linear_softmax":
        return LinearSoftmaxSurrogate(seed)
    return DicnnSurrogate(seed)


def rfe_select(dataset: Dataset, config: RfeConfig) -> FeatureMask:
    """Iterative train / score / eliminate loop down to target_count
    surviving columns.  Deterministic given (data, config)."""
    n_features = dataset.n_features
    if config.target_count >= n_features:
        raise ConfigError(
            f"target_count {config.target_count} must be below the "
            f"{n_features} available features"
        )
    targets = one_hot(dataset.labels, dataset.n_classes)
    surviving = np.arange(n_features)
    ranking = np.zeros(n_features, dtype=np.int64)
    trace: list[dict[str, float]] = []
    round_no = 1
    while surviving.size > config.target_count:
        surrogate = _make_surrogate(config, round_no)
        surrogate.fit(dataset.features[:, surviving], targets)
        scores = feature_importance(surrogate)
        trace.append(
            {dataset.feature_names[f]: float(s) for f, s in zip(surviving, scores)}
        )
        n_remove = min(
            math.ceil(config.step_fraction * surviving.size),
            surviving.size - config.target_count,
        )
        # weakest first; ties resolved toward the lower column index
        order = np.lexsort((surviving, scores))
        removed = surviving[order[:n_remove]]
        ranking[removed] = round_no
        keep = np.ones(surviving.size, dtype=bool)
        keep[order[:n_remove]] = False
        surviving = surviving[keep]
        round_no += 1
    ranking[surviving] = round_no
    selected = np.zeros(n_features, dtype=bool)
    selected[surviving] = True
    return FeatureMask(
        feature_names=list(dataset.feature_names),
        selected=selected,
        ranking=ranking,
        importance_trace=trace,
    )


def apply_mask(dataset: Dataset, mask: FeatureMask) -> Dataset:
    if len(mask.selected) != dataset.n_features:
        raise ShapeError(
            f"mask covers {len(mask.selected)} features, dataset has "
            f"{dataset.n_features}"
        )
    keep = np.nonzero(mask.selected)[0]
    return Dataset(
        features=dataset.features[:, keep],
        labels=dataset.labels,
        feature_names=[dataset.feature_names[i] for i in keep],
        class_names=list(dataset.class_names),
        source=dataset.source,
    )


class RfeSelector(BaseEstimator):
    """sklearn-style selector around :func:`rfe_select`.

    fit(X, y) learns the mask; transform(X) keeps the selected columns.
    """

    def __init__(self, target_count=100, step_fraction=0.1,
                 surrogate="linear_softmax", seed=0):
        self.target_count = target_count
        self.step_fraction = step_fraction
        self.surrogate = surrogate
        self.seed = seed

    def fit(self, X, y):
        x = np.asarray(X, dtype=np.float64)
        labels = np.asarray(y)
        classes = sorted(set(labels.tolist()))
        encoded = np.array([classes.index(v) for v in labels.tolist()])
        names = [f"f{i}" for i in range(x.shape[1])]
        dataset = Dataset(
            features=x,
            labels=encoded,
            feature_names=names,
            class_names=[str(c) for c in classes],
        )
        config = RfeConfig(
            target_count=self.target_count,
            step_fraction=self.step_fraction,
            surrogate=self.surrogate,
            seed=self.seed,
        )
        self.mask_ = rfe_select(dataset, config)
        self.support_ = self.mask_.selected.copy()
        self.ranking_ = self.mask_.ranking.copy()
        self.n_features_in_ = x.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "support_"):
            raise StateError("RfeSelector.transform called before fit")
        x = np.asarray(X, dtype=np.float64)
        if x.shape[1] != self.n_features_in_:
            raise ShapeError(
                f"expected {self.n_features_in_} columns, got {x.shape[1]}"
            )
        return x[:, self.support_]

    def fit_transform(self, X, y):
        return self.fit(X, y).transform(X)

    def get_support(self):
        if not hasattr(self, "support_"):
            raise StateError("RfeSelector.get_support called before fit")
        return self.support_.copy()
