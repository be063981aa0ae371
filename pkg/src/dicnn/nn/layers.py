"""Network layers with hand-written forward and backward passes.

The dilated convolution follows the convolution orientation
``out[s] = sum_tau K[tau] * x[s - d*tau]`` evaluated in valid mode (no
padding): with taps tau = 0..r-1 and dilation d, output position j reads
input positions j + d*(r-1-tau), and the output length is L - (r-1)*d.
Dilation 1 reduces to a standard valid convolution.

Contractions go through numpy matmul/tensordot, which are deterministic for
a fixed environment; nothing here mutates shared state, so a trained layer
is safe for concurrent inference.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..numkit import Rng


def conv_output_length(length: int, kernel_size: int, dilation: int) -> int:
    return length - (kernel_size - 1) * dilation


def dilated_conv1d_forward(
    inp: np.ndarray, kernel: np.ndarray, dilation: int, bias: np.ndarray | None = None
) -> np.ndarray:
    """Valid-mode dilated convolution of a (C, L) or (B, C, L) signal with an
    (O, C, r) kernel.  Output length is L - (r-1)*dilation."""
    x = np.asarray(inp, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[np.newaxis]
    if x.ndim != 3 or kernel.ndim != 3:
        raise ShapeError(
            f"expected (B,C,L) input and (O,C,r) kernel, got {inp.shape} and {kernel.shape}"
        )
    n_out, n_in, taps = kernel.shape
    if x.shape[1] != n_in:
        raise ShapeError(
            f"input has {x.shape[1]} channels but kernel expects {n_in}"
        )
    if dilation < 1:
        raise ShapeError(f"dilation must be >= 1, got {dilation}")
    length = x.shape[2]
    out_len = conv_output_length(length, taps, dilation)
    if out_len < 1:
        raise ShapeError(
            f"input length {length} too short for kernel {taps} at dilation "
            f"{dilation}; need at least {(taps - 1) * dilation + 1}"
        )
    out = np.zeros((x.shape[0], n_out, out_len))
    for tau in range(taps):
        offset = dilation * (taps - 1 - tau)
        # (O,C) @ (B,C,L') broadcasts to per-sample channel mixing
        out += np.matmul(kernel[:, :, tau], x[:, :, offset : offset + out_len])
    if bias is not None:
        out += bias[np.newaxis, :, np.newaxis]
    return out[0] if squeeze else out


def dilated_conv1d_backward(
    grad_out: np.ndarray,
    cached_inp: np.ndarray,
    kernel: np.ndarray,
    dilation: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of the valid-mode dilated convolution.

    Returns (input grad, kernel grad, bias grad).  The input gradient is
    produced even for a first layer: the sign-perturbation attack consumes
    the loss gradient at the input.
    """
    g = np.asarray(grad_out, dtype=np.float64)
    x = np.asarray(cached_inp, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[np.newaxis]
        g = g[np.newaxis]
    n_out, n_in, taps = kernel.shape
    out_len = conv_output_length(x.shape[2], taps, dilation)
    if g.shape != (x.shape[0], n_out, out_len):
        raise ShapeError(
            f"upstream grad shape {grad_out.shape} does not match cached "
            f"forward output ({x.shape[0]}, {n_out}, {out_len})"
        )
    grad_x = np.zeros_like(x)
    grad_k = np.zeros_like(kernel)
    for tau in range(taps):
        offset = dilation * (taps - 1 - tau)
        window = x[:, :, offset : offset + out_len]
        # contract batch and position dims: (B,O,L'),(B,C,L') -> (O,C)
        grad_k[:, :, tau] = np.tensordot(g, window, axes=([0, 2], [0, 2]))
        grad_x[:, :, offset : offset + out_len] += np.matmul(
            kernel[:, :, tau].T, g
        )
    grad_b = g.sum(axis=(0, 2))
    if squeeze:
        grad_x = grad_x[0]
    return grad_x, grad_k, grad_b


class DilatedConv1d:
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        dilation: int,
        rng: Rng,
    ):
        if kernel_size < 1 or dilation < 1:
            raise ShapeError("kernel_size and dilation must be >= 1")
        # He-style scaling keeps activation variance stable under ReLU stacks
        scale = np.sqrt(2.0 / (in_channels * kernel_size))
        self.weight = rng.normals((out_channels, in_channels, kernel_size)) * scale
        self.bias = np.zeros(out_channels)
        self.dilation = dilation
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._cache = None

    def parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def gradients(self):
        return [("weight", self.grad_weight), ("bias", self.grad_bias)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x
        return dilated_conv1d_forward(x, self.weight, self.dilation, self.bias)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_x, self.grad_weight, self.grad_bias = dilated_conv1d_backward(
            grad_out, self._cache, self.weight, self.dilation
        )
        return grad_x


class Relu:
    def __init__(self):
        self._mask = None

    def parameters(self):
        return []

    def gradients(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return np.where(self._mask, grad_out, 0.0)


class GlobalAvgPool:
    """(B, C, L) -> (B, C) mean over positions."""

    def __init__(self):
        self._length = None

    def parameters(self):
        return []

    def gradients(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._length = x.shape[2]
        return x.mean(axis=2)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return np.repeat(
            grad_out[:, :, np.newaxis] / self._length, self._length, axis=2
        )


class Dense:
    def __init__(self, in_dim: int, out_dim: int, rng: Rng):
        scale = np.sqrt(2.0 / in_dim)
        self.weight = rng.normals((in_dim, out_dim)) * scale
        self.bias = np.zeros(out_dim)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._cache = None

    def parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def gradients(self):
        return [("weight", self.grad_weight), ("bias", self.grad_bias)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weight.shape[0]:
            raise ShapeError(
                f"dense layer expects n x {self.weight.shape[0]}, got {x.shape}"
            )
        self._cache = x
        return np.matmul(x, self.weight) + self.bias

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        self.grad_weight = np.matmul(self._cache.T, grad_out)
        self.grad_bias = grad_out.sum(axis=0)
        return np.matmul(grad_out, self.weight.T)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class SoftmaxCrossEntropy:
    """Loss head: mean cross-entropy of softmax probabilities against
    one-hot targets.  Gradient w.r.t. logits is (p - y) / batch."""

    def loss(self, logits: np.ndarray, targets: np.ndarray) -> float:
        if logits.shape != targets.shape:
            raise ShapeError(
                f"logits {logits.shape} and targets {targets.shape} differ"
            )
        return float(-(targets * log_softmax(logits)).sum() / logits.shape[0])

    def grad(self, logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
        return (softmax(logits) - targets) / logits.shape[0]
