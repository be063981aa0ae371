"""Mini-batch training loop with seeded shuffling, early stopping on
validation accuracy, and an optional per-batch adversarial hook."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericError
from ..numkit import Rng, check_finite, derive_seed
from .network import DicnnNetwork
from .optim import Adam


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 50
    patience: int = 5
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError(f"non-positive training hyper-parameter: {self}")
        if self.patience < 0:
            raise ConfigError(f"patience must be >= 0, got {self.patience}")


def accuracy(network: DicnnNetwork, x: np.ndarray, labels: np.ndarray) -> float:
    return float((network.predict(x) == labels).mean())


def train(
    network: DicnnNetwork,
    train_x: np.ndarray,
    train_targets: np.ndarray,
    val_x: np.ndarray,
    val_labels: np.ndarray,
    config: TrainConfig,
    adversarial_hook=None,
) -> list[dict]:
    """Train in place; returns per-epoch history records.

    ``adversarial_hook(batch_x, batch_targets, network, rng) -> batch_x`` is
    applied to every batch when given.  Training stops once validation
    accuracy fails to improve for more than ``patience`` consecutive epochs;
    the best-epoch parameters are restored at the end.
    """
    n = train_x.shape[0]
    batch = min(config.batch_size, n)
    rng = Rng(derive_seed(config.seed, "train_shuffle"))
    hook_rng = Rng(derive_seed(config.seed, "adversarial_mix"))
    optimizer = Adam(
        network.parameters(),
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps_opt,
    )
    history: list[dict] = []
    best_val = -np.inf
    best_params = network.snapshot()
    stale = 0
    try:
        for epoch in range(config.max_epochs):
            order = rng.shuffle(n)
            losses = []
            hits = 0
            for start in range(0, n, batch):
                rows = order[start : start + batch]
                bx = train_x[rows]
                by = train_targets[rows]
                if adversarial_hook is not None:
                    bx = adversarial_hook(bx, by, network, hook_rng)
                loss, grads, _ = network.loss_and_grads(bx, by)
                # running train accuracy from the pre-update batch logits
                hits += int(
                    (network.last_logits.argmax(axis=1) == by.argmax(axis=1)).sum()
                )
                optimizer.step(grads)
                for name, arr in network.parameters():
                    check_finite(arr, f"epoch {epoch}, parameter {name}")
                losses.append(loss)
            val_acc = accuracy(network, val_x, val_labels)
            history.append(
                {
                    "epoch": epoch,
                    "train_loss": float(np.mean(losses)),
                    "train_accuracy": hits / n,
                    "val_accuracy": val_acc,
                }
            )
            if val_acc > best_val:
                best_val = val_acc
                best_params = network.snapshot()
                stale = 0
            else:
                stale += 1
                if stale > config.patience:
                    break
    except NumericError as err:
        # leave the network on its best finite parameters for salvage
        network.set_parameters(best_params)
        raise NumericError(f"{err}; restored best finite parameters") from err
    network.set_parameters(best_params)
    return history
