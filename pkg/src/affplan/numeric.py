"""Small dense-tensor core: shape-checked float64 arrays plus the few
operations the rest of the package builds on (matrix product, row softmax,
central-difference gradients).

Everything is desk scale. The point is exactness and checkability, not
throughput; the hot paths live in affplan._kernels.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "Tensor",
    "matmul",
    "softmax_rows",
    "finite_diff_grad",
]


class ShapeError(ValueError):
    """Raised when operand shapes or data lengths do not line up."""


def _prod(shape: Sequence[int]) -> int:
    out = 1
    for s in shape:
        out *= s
    return out


class Tensor:
    """Immutable n-dimensional float64 array with explicit shape.

    Data is stored row-major. Construction validates that the flat data
    length matches the shape product and that every entry is finite.
    """

    __slots__ = ("_a",)

    def __init__(self, shape: Sequence[int], data: Iterable[float]):
        shape = tuple(int(s) for s in shape)
        if any(s < 0 for s in shape):
            raise ShapeError(f"negative dimension in shape {shape}")
        a = np.asarray(list(data), dtype=np.float64)
        if a.ndim != 1:
            raise ShapeError("data must be a flat sequence of numbers")
        if a.size != _prod(shape):
            raise ShapeError(
                f"shape {shape} needs {_prod(shape)} values, got {a.size}"
            )
        a = a.reshape(shape)
        if not np.all(np.isfinite(a)):
            raise ShapeError("tensor entries must be finite")
        a.flags.writeable = False
        self._a = a

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Tensor":
        a = np.array(arr, dtype=np.float64)  # copy, so callers cannot mutate
        if not np.all(np.isfinite(a)):
            raise ShapeError("tensor entries must be finite")
        t = object.__new__(cls)
        a.flags.writeable = False
        t._a = a
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self._a.shape

    @property
    def data(self) -> list[float]:
        """Flat row-major copy of the entries."""
        return self._a.ravel().tolist()

    def to_array(self) -> np.ndarray:
        """Read-only ndarray view (no copy)."""
        return self._a

    def reshape(self, shape: Sequence[int]) -> "Tensor":
        shape = tuple(int(s) for s in shape)
        if _prod(shape) != self._a.size:
            raise ShapeError(f"cannot reshape {self.shape} to {shape}")
        return Tensor.from_array(self._a.reshape(shape))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._a, other._a))

    def __hash__(self) -> int:
        return hash((self.shape, self._a.tobytes()))

    def __repr__(self) -> str:
        flat = self._a.ravel()
        head = ", ".join(f"{v:g}" for v in flat[:6])
        tail = ", ..." if flat.size > 6 else ""
        return f"Tensor(shape={self.shape}, data=[{head}{tail}])"


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two rank-2 tensors."""
    if len(a.shape) != 2 or len(b.shape) != 2:
        raise ShapeError(
            f"matmul needs rank-2 operands, got {a.shape} and {b.shape}"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"inner dimensions differ: {a.shape} x {b.shape}"
        )
    return Tensor.from_array(a.to_array() @ b.to_array())


def softmax_rows(m: Tensor) -> Tensor:
    """Row-wise softmax of a rank-2 tensor.

    The row maximum is subtracted before exponentiation, so large logits
    cannot overflow. Every output row sums to 1.
    """
    if len(m.shape) != 2:
        raise ShapeError(f"softmax_rows needs a rank-2 tensor, got {m.shape}")
    a = m.to_array()
    z = a - a.max(axis=1, keepdims=True)
    e = np.exp(z)
    return Tensor.from_array(e / e.sum(axis=1, keepdims=True))


def finite_diff_grad(
    f: Callable[[Tensor], float], x: Tensor, eps: float = 1e-5
) -> Tensor:
    """Central-difference gradient of a scalar function at x.

    Each coordinate is perturbed by +/- eps in turn:
    g_i = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = x.to_array()
    flat = base.ravel()
    grad = np.empty_like(flat)
    for i in range(flat.size):
        bump = flat.copy()
        bump[i] = flat[i] + eps
        hi = f(Tensor.from_array(bump.reshape(base.shape)))
        bump[i] = flat[i] - eps
        lo = f(Tensor.from_array(bump.reshape(base.shape)))
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise ValueError("function returned a non-finite value")
        grad[i] = (hi - lo) / (2.0 * eps)
    return Tensor.from_array(grad.reshape(base.shape))
