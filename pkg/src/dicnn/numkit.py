"""Deterministic numeric kernel: validated float64 arrays, a fixed-order
matrix multiply, and a seedable counter-based random number generator.

Tensors are plain C-contiguous ``numpy.float64`` arrays; :func:`tensor`
constructs one and enforces the invariants (declared shape, finite values).
The RNG is SplitMix64: 64-bit state advanced by a fixed odd constant, output
mixed through two xor-multiply rounds.  It is implemented in pure integer
arithmetic, so a given seed replays the same stream on any platform.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericError, ShapeError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def tensor(data, shape=None) -> np.ndarray:
    """Build a C-ordered float64 array, rejecting NaN/Inf entries."""
    arr = np.array(data, dtype=np.float64, order="C")
    if shape is not None:
        declared = int(np.prod(shape))
        if arr.size != declared:
            raise ShapeError(
                f"declared shape {tuple(shape)} holds {declared} elements, "
                f"got {arr.size}"
            )
        arr = arr.reshape(shape)
    check_finite(arr, "tensor")
    return arr


def check_finite(arr: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise NumericError(f"{context}: {bad} non-finite element(s)")


def matmul(a, b) -> np.ndarray:
    """Matrix product with the reduction summed in ascending index order.

    c[i][j] accumulates a[i][t]*b[t][j] for t = 0,1,...,k-1 in that exact
    order, so the result is bit-identical to a naive triple loop and
    reproducible across runs.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for t in range(a.shape[1]):
        out += a[:, t, np.newaxis] * b[np.newaxis, t, :]
    return out


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def derive_seed(seed: int, tag: str) -> int:
    """Stable sub-seed for a named purpose (init, shuffle, subset, ...)."""
    return _mix64((seed & _MASK64) ^ _fnv1a64(tag))


class Rng:
    """SplitMix64 stream; single-owner, not safe for concurrent draws."""

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._state = self._seed
        self._spare_normal: float | None = None

    @property
    def seed(self) -> int:
        return self._seed

    def next_uint64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_uint64() >> 11) * 2.0**-53

    def normal(self) -> float:
        # Box-Muller; u1 shifted into (0, 1] so log stays finite.
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = ((self.next_uint64() >> 11) + 1) * 2.0**-53
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = radius * math.sin(2.0 * math.pi * u2)
        return radius * math.cos(2.0 * math.pi * u2)

    def normals(self, shape) -> np.ndarray:
        flat = [self.normal() for _ in range(int(np.prod(shape)))]
        return np.array(flat, dtype=np.float64).reshape(shape)

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ShapeError(f"randbelow needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_uint64()
            if r < limit:
                return r % n

    def shuffle(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of 0..n-1; unbiased, seed-determined."""
        if n < 0:
            raise ShapeError(f"shuffle needs n >= 0, got {n}")
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return np.array(perm, dtype=np.int64)

    def sample_without_replacement(self, n: int, count: int) -> np.ndarray:
        if count > n:
            raise ShapeError(f"cannot sample {count} of {n} without replacement")
        return self.shuffle(n)[:count]
