"""Fast gradient sign perturbations and the adversarial-training policy.

The attack is the untargeted one-step rule x_adv = x + eps * sign(dJ/dx):
one forward and one backward pass per batch, every perturbed coordinate
moved by exactly +-eps (zero-gradient coordinates untouched).  Perturbed
rows keep their labels.  Results are clipped toward per-feature bounds
observed on the standardized training data, but never farther than eps
from the original value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, one_hot
from .errors import ConfigError, ShapeError
from .numkit import Rng
from .metrics import EvalReport, confusion, metrics
from .nn import DicnnNetwork


@dataclass
class FgsmConfig:
    epsilon: float
    clip_low: np.ndarray | None = None   # per-feature lower bounds
    clip_high: np.ndarray | None = None
    mix_ratio: float = 0.5               # fraction of each batch perturbed

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.mix_ratio <= 1.0:
            raise ConfigError(f"mix_ratio must be in [0,1], got {self.mix_ratio}")
        if (self.clip_low is None) != (self.clip_high is None):
            raise ConfigError("clip_low and clip_high must be given together")
        if self.clip_low is not None:
            self.clip_low = np.asarray(self.clip_low, dtype=np.float64)
            self.clip_high = np.asarray(self.clip_high, dtype=np.float64)
            if self.clip_low.shape != self.clip_high.shape:
                raise ConfigError("clip bound shapes differ")
            if np.any(self.clip_low > self.clip_high):
                raise ConfigError("clip_low exceeds clip_high somewhere")

    @classmethod
    def from_training_data(cls, x: np.ndarray, epsilon: float, mix_ratio: float = 0.5):
        x = np.asarray(x, dtype=np.float64)
        return cls(
            epsilon=epsilon,
            clip_low=x.min(axis=0),
            clip_high=x.max(axis=0),
            mix_ratio=mix_ratio,
        )


@dataclass
class AdversarialBatch:
    x_adv: np.ndarray
    source_indices: np.ndarray
    epsilon: float


def fgsm_perturb(
    network: DicnnNetwork,
    x: np.ndarray,
    targets: np.ndarray,
    config: FgsmConfig,
) -> AdversarialBatch:
    """One-step loss-ascent perturbation of a standardized batch.

    eps = 0 returns the input unchanged, bit for bit.  Clipping moves a
    coordinate toward the configured bounds but never more than eps away
    from its original value, so out-of-range inputs stay out of range
    rather than jumping.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D batch, got shape {x.shape}")
    indices = np.arange(x.shape[0], dtype=np.int64)
    if config.epsilon == 0.0:
        return AdversarialBatch(x.copy(), indices, 0.0)
    _, _, input_grad = network.loss_and_grads(x, targets)
    x_adv = x + config.epsilon * np.sign(input_grad)
    if config.clip_low is not None:
        boxed = np.clip(x_adv, config.clip_low, config.clip_high)
        x_adv = x + np.clip(boxed - x, -config.epsilon, config.epsilon)
    return AdversarialBatch(x_adv, indices, config.epsilon)


def adversarial_augment(
    batch_x: np.ndarray,
    batch_targets: np.ndarray,
    network: DicnnNetwork,
    config: FgsmConfig,
    rng: Rng,
) -> np.ndarray:
    """Replace a seeded mix_ratio share of the batch with perturbed
    counterparts; labels are untouched.  Costs one forward and one backward
    pass regardless of the share (zero extra at mix_ratio 0)."""
    n = batch_x.shape[0]
    count = int(np.floor(config.mix_ratio * n + 0.5))
    if count == 0 or config.epsilon == 0.0:
        return batch_x
    chosen = rng.sample_without_replacement(n, count)
    adv = fgsm_perturb(network, batch_x, batch_targets, config)
    out = batch_x.copy()
    out[chosen] = adv.x_adv[chosen]
    return out


def robustness_sweep(
    network: DicnnNetwork,
    dataset: Dataset,
    epsilons,
    clip_low: np.ndarray | None = None,
    clip_high: np.ndarray | None = None,
    positive_class: str | None = None,
) -> list[EvalReport]:
    """Evaluate the model on sign-perturbed copies of the dataset, one
    report per epsilon.  The eps = 0 entry is the clean evaluation."""
    targets = one_hot(dataset.labels, dataset.n_classes)
    reports = []
    for eps in epsilons:
        config = FgsmConfig(
            epsilon=float(eps), clip_low=clip_low, clip_high=clip_high
        )
        adv = fgsm_perturb(network, dataset.features, targets, config)
        predicted = network.predict(adv.x_adv)
        matrix = confusion(predicted, dataset.labels, dataset.n_classes)
        report = metrics(
            matrix,
            class_names=dataset.class_names,
            positive_class=positive_class,
            dataset_id=dataset.source,
            arch_id=network.arch_id,
            epsilon=float(eps),
        )
        reports.append(report)
    return reports
