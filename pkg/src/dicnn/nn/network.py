"""Network assembly: layer specifications, shape chaining, forward pass,
loss with exact gradients, and deterministic seeded initialization."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import NumericError, ShapeError
from ..numkit import Rng, derive_seed
from .layers import (
    Dense,
    DilatedConv1d,
    GlobalAvgPool,
    Relu,
    SoftmaxCrossEntropy,
    conv_output_length,
    softmax,
)

LAYER_KINDS = ("dilated_conv1d", "relu", "global_avg_pool", "dense", "softmax_head")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int | None = None
    out_channels: int | None = None
    kernel_size: int | None = None
    dilation: int | None = None
    in_dim: int | None = None
    out_dim: int | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, raw: dict) -> "LayerSpec":
        return cls(**raw)


def conv_spec(in_channels, out_channels, kernel_size, dilation) -> LayerSpec:
    return LayerSpec(
        kind="dilated_conv1d",
        in_channels=in_channels,
        out_channels=out_channels,
        kernel_size=kernel_size,
        dilation=dilation,
    )


def dense_spec(in_dim, out_dim) -> LayerSpec:
    return LayerSpec(kind="dense", in_dim=in_dim, out_dim=out_dim)


def default_architecture(
    n_features: int,
    n_classes: int,
    channels: int = 32,
    kernel_size: int = 3,
    dilations=(1, 2, 4),
) -> list[LayerSpec]:
    """Conv blocks (ReLU each) over a 1-channel feature sequence, then
    global average pooling into a dense softmax head."""
    specs = []
    in_ch = 1
    length = n_features
    for d in dilations:
        specs.append(conv_spec(in_ch, channels, kernel_size, int(d)))
        specs.append(LayerSpec(kind="relu"))
        length = conv_output_length(length, kernel_size, int(d))
        in_ch = channels
    if length < 1:
        raise ShapeError(
            f"{n_features} features are too few for kernel {kernel_size} with "
            f"dilations {tuple(dilations)}"
        )
    specs.append(LayerSpec(kind="global_avg_pool"))
    specs.append(dense_spec(channels, n_classes))
    specs.append(LayerSpec(kind="softmax_head"))
    return specs


def validate_specs(specs: list[LayerSpec], input_width: int) -> int:
    """Check the layer chain end to end; returns the class count.

    Two chain forms are valid: a convolutional stack over a 1-channel
    sequence that pools into dense layers, or a purely dense ("flat")
    stack fed the feature vector directly.
    """
    if not specs or specs[-1].kind != "softmax_head":
        raise ShapeError("architecture must end with a softmax_head")
    if specs[0].kind == "dense":
        flat = input_width
        channels, length = None, None
    else:
        flat = None
        channels, length = 1, input_width
    for i, spec in enumerate(specs[:-1]):
        if spec.kind == "dilated_conv1d":
            if flat is not None:
                raise ShapeError(f"layer {i}: convolution after flattening")
            if spec.in_channels != channels:
                raise ShapeError(
                    f"layer {i}: expects {spec.in_channels} channels, chain has {channels}"
                )
            if spec.dilation < 1 or spec.kernel_size < 1:
                raise ShapeError(f"layer {i}: dilation and kernel size must be >= 1")
            length = conv_output_length(length, spec.kernel_size, spec.dilation)
            if length < 1:
                raise ShapeError(
                    f"layer {i}: sequence exhausted (length {length}); "
                    f"reduce dilation or kernel size"
                )
            channels = spec.out_channels
        elif spec.kind == "relu":
            pass
        elif spec.kind == "global_avg_pool":
            if flat is not None:
                raise ShapeError(f"layer {i}: pooling on flattened data")
            flat = channels
        elif spec.kind == "dense":
            if flat is None:
                raise ShapeError(f"layer {i}: dense before pooling")
            if spec.in_dim != flat:
                raise ShapeError(
                    f"layer {i}: dense expects {spec.in_dim}, chain has {flat}"
                )
            flat = spec.out_dim
        else:
            raise ShapeError(f"layer {i}: unknown kind {spec.kind!r}")
    if flat is None:
        raise ShapeError("architecture never pools into a dense head")
    return flat


def arch_id(specs: list[LayerSpec], input_width: int) -> str:
    blob = json.dumps(
        {"input_width": input_width, "layers": [s.to_dict() for s in specs]},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


class DicnnNetwork:
    """Ordered layer stack over a 1-channel feature sequence.

    Instrumented with forward/backward call counters so the one-step cost
    of the gradient-sign attack is checkable.  A network is exclusive while
    training; once trained it is read-only and safe to share.
    """

    def __init__(self, specs: list[LayerSpec], input_width: int, init_seed: int):
        self.n_classes = validate_specs(specs, input_width)
        self.specs = list(specs)
        self.input_width = input_width
        self.init_seed = init_seed
        self.arch_id = arch_id(specs, input_width)
        self.flat_input = specs[0].kind == "dense"
        self.loss_head = SoftmaxCrossEntropy()
        self.layers = []
        for i, spec in enumerate(specs[:-1]):
            rng = Rng(derive_seed(init_seed, f"layer:{i}"))
            if spec.kind == "dilated_conv1d":
                self.layers.append(
                    DilatedConv1d(
                        spec.in_channels,
                        spec.out_channels,
                        spec.kernel_size,
                        spec.dilation,
                        rng,
                    )
                )
            elif spec.kind == "relu":
                self.layers.append(Relu())
            elif spec.kind == "global_avg_pool":
                self.layers.append(GlobalAvgPool())
            elif spec.kind == "dense":
                self.layers.append(Dense(spec.in_dim, spec.out_dim, rng))
        self.forward_calls = 0
        self.backward_calls = 0

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"{i}.{name}", arr) for name, arr in layer.parameters())
        return out

    def gradients(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"{i}.{name}", arr) for name, arr in layer.gradients())
        return out

    def set_parameters(self, named: dict[str, np.ndarray]) -> None:
        for i, layer in enumerate(self.layers):
            for name, arr in layer.parameters():
                key = f"{i}.{name}"
                new = np.asarray(named[key], dtype=np.float64)
                if new.shape != arr.shape:
                    raise ShapeError(
                        f"parameter {key}: expected shape {arr.shape}, got {new.shape}"
                    )
                arr[...] = new

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.parameters()}

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_width:
            raise ShapeError(
                f"batch must be n x {self.input_width}, got {x.shape}"
            )
        return x

    def forward(self, batch: np.ndarray) -> np.ndarray:
        """Logits for a (B, F) batch; activations are cached for backward."""
        x = self._check_batch(batch)
        self.forward_calls += 1
        h = x if self.flat_input else x[:, np.newaxis, :]  # 1-channel sequence
        for layer in self.layers:
            h = layer.forward(h)
        self.last_logits = h
        return h

    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        return softmax(self.forward(batch))

    def predict(self, batch: np.ndarray) -> np.ndarray:
        # np.argmax breaks ties toward the lowest class index
        return np.argmax(self.forward(batch), axis=1)

    def loss_and_grads(
        self, batch: np.ndarray, targets: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
        """Mean cross-entropy plus gradients for every parameter and for the
        input batch itself (the attack consumes the latter)."""
        logits = self.forward(batch)
        loss = self.loss_head.loss(logits, targets)
        if not np.isfinite(loss):
            raise NumericError(f"training loss became non-finite ({loss})")
        self.backward_calls += 1
        grad = self.loss_head.grad(logits, targets)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        input_grad = grad if self.flat_input else grad[:, 0, :]
        return loss, dict(self.gradients()), input_grad
