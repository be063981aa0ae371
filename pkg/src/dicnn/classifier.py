"""Dilated-convolution classifier with optional adversarial training,
shaped like an sklearn estimator so it slots into pipelines and grids."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .attack import FgsmConfig, adversarial_augment
from .data import Dataset, one_hot, stratified_split
from .errors import ShapeError, StateError
from .nn import DicnnNetwork, TrainConfig, default_architecture, train
from .numkit import derive_seed, tensor


class DicnnClassifier(BaseEstimator, ClassifierMixin):
    """Stacked dilated 1-D convolutions over the feature vector treated as a
    1-channel sequence, global average pooling, dense softmax head.

    ``adversarial=True`` hardens training by replacing a share of every
    batch with one-step gradient-sign perturbations (labels unchanged),
    with clip bounds taken from the training data.

    Expects standardized inputs; compose with ``ColumnStandardizer`` and
    ``RfeSelector`` for the full pipeline.
    """

    def __init__(
        self,
        channels=32,
        kernel_size=3,
        dilations=(1, 2, 4),
        learning_rate=1e-3,
        batch_size=128,
        max_epochs=50,
        patience=5,
        adversarial=False,
        epsilon=0.05,
        mix_ratio=0.5,
        validation_fraction=0.2,
        seed=0,
    ):
        self.channels = channels
        self.kernel_size = kernel_size
        self.dilations = dilations
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.adversarial = adversarial
        self.epsilon = epsilon
        self.mix_ratio = mix_ratio
        self.validation_fraction = validation_fraction
        self.seed = seed

    def fit(self, X, y, validation_data=None):
        """Train on (X, y); early stopping watches ``validation_data`` when
        given, otherwise an internal stratified holdout."""
        x = tensor(np.asarray(X, dtype=np.float64))
        labels_raw = np.asarray(y)
        self.classes_ = np.unique(labels_raw)
        if self.classes_.size < 2:
            raise StateError("need at least two classes to fit")
        class_index = {c: i for i, c in enumerate(self.classes_.tolist())}
        labels = np.array([class_index[v] for v in labels_raw.tolist()])
        self.n_features_in_ = x.shape[1]

        if validation_data is not None:
            val_x = np.asarray(validation_data[0], dtype=np.float64)
            val_raw = np.asarray(validation_data[1])
            val_labels = np.array([class_index[v] for v in val_raw.tolist()])
            train_x, train_labels = x, labels
        else:
            holdout = stratified_split(
                Dataset(
                    features=x,
                    labels=labels,
                    feature_names=[f"f{i}" for i in range(x.shape[1])],
                    class_names=[str(c) for c in self.classes_.tolist()],
                ),
                eta=self.validation_fraction,
                seed=derive_seed(self.seed, "holdout"),
            )
            train_x = x[holdout.train_indices]
            train_labels = labels[holdout.train_indices]
            val_x = x[holdout.val_indices]
            val_labels = labels[holdout.val_indices]

        specs = default_architecture(
            x.shape[1],
            self.classes_.size,
            channels=self.channels,
            kernel_size=self.kernel_size,
            dilations=tuple(int(d) for d in self.dilations),
        )
        self.network_ = DicnnNetwork(
            specs, x.shape[1], derive_seed(self.seed, "init")
        )
        hook = None
        if self.adversarial:
            self.fgsm_config_ = FgsmConfig.from_training_data(
                train_x, epsilon=self.epsilon, mix_ratio=self.mix_ratio
            )

            def hook(bx, by, network, rng):
                return adversarial_augment(bx, by, network, self.fgsm_config_, rng)

        config = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.seed,
        )
        targets = one_hot(train_labels, self.classes_.size)
        self.history_ = train(
            self.network_, train_x, targets, val_x, val_labels, config,
            adversarial_hook=hook,
        )
        return self

    def _check_ready(self, X) -> np.ndarray:
        if not hasattr(self, "network_"):
            raise StateError("classifier has not been fitted")
        x = np.asarray(X, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features_in_:
            raise ShapeError(
                f"expected n x {self.n_features_in_} matrix, got {x.shape}"
            )
        return x

    def predict_proba(self, X):
        return self.network_.predict_proba(self._check_ready(X))

    def predict(self, X):
        return self.classes_[self.network_.predict(self._check_ready(X))]
