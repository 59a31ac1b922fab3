"""Region self-attention block.

A feature map A with c channels over a u x v grid is treated as n = u * v
column vectors. Three bias-free 1x1 channel mixes produce keys, queries and
values; attention weights are a row softmax over key-query dot products; the
weighted values are scaled by a learned scalar and added back to the input:

    k = Wk A,  q = Wq A,  v = Wv A
    L[j, i] = q_i . k_j          w = softmax over each row of L
    B[:, j] = alpha * sum_i w[j, i] v[:, i] + A[:, j]

With alpha = 0 the block is the identity, which is also its initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .numeric import ShapeError, Tensor

__all__ = [
    "RegionFeature",
    "AttentionParams",
    "attention_forward",
    "attention_backward",
]


@dataclass(frozen=True)
class RegionFeature:
    """Feature map over a spatial grid: values has shape (channels, u, v)."""

    values: Tensor

    def __post_init__(self):
        if len(self.values.shape) != 3:
            raise ShapeError(
                f"RegionFeature needs a (channels, u, v) tensor, got {self.values.shape}"
            )
        if min(self.values.shape) < 1:
            raise ShapeError("RegionFeature dimensions must be positive")

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def grid(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[2]

    @property
    def positions(self) -> int:
        u, v = self.grid
        return u * v


@dataclass(frozen=True)
class AttentionParams:
    """Channel-mixing maps (each c x c) and the residual scale alpha."""

    wk: Tensor
    wq: Tensor
    wv: Tensor
    alpha: float = 0.0

    def __post_init__(self):
        c = self.channels
        for name, w in (("wk", self.wk), ("wq", self.wq), ("wv", self.wv)):
            if w.shape != (c, c):
                raise ShapeError(
                    f"{name} must be square of shape ({c}, {c}), got {w.shape}"
                )
        if not np.isfinite(self.alpha):
            raise ShapeError("alpha must be finite")

    @property
    def channels(self) -> int:
        return self.wk.shape[0]

    @classmethod
    def init(cls, channels: int, rng: np.random.Generator) -> "AttentionParams":
        """Random maps with std 1/sqrt(channels); alpha starts at 0."""
        scale = 1.0 / np.sqrt(channels)
        draw = lambda: Tensor.from_array(
            rng.standard_normal((channels, channels)) * scale
        )
        return cls(wk=draw(), wq=draw(), wv=draw(), alpha=0.0)


def _check_pair(a: RegionFeature, p: AttentionParams) -> None:
    if a.channels != p.channels:
        raise ShapeError(
            f"feature has {a.channels} channels but params expect {p.channels}"
        )


def attention_forward(
    a: RegionFeature, p: AttentionParams
) -> tuple[RegionFeature, Tensor]:
    """Apply the block. Returns (output feature, attention weights).

    The weight tensor has shape (n, n) with n = u * v; row j holds the
    softmax distribution attending position j over all positions i, so each
    row sums to 1.
    """
    _check_pair(a, p)
    c = a.channels
    n = a.positions
    a2 = a.values.to_array().reshape(c, n)
    b2, w = _kernels.attention_forward(
        a2,
        p.wk.to_array(),
        p.wq.to_array(),
        p.wv.to_array(),
        p.alpha,
    )
    out = RegionFeature(Tensor.from_array(b2.reshape(a.values.shape)))
    return out, Tensor.from_array(w)


def attention_backward(
    a: RegionFeature, p: AttentionParams, upstream: RegionFeature
) -> tuple[RegionFeature, AttentionParams]:
    """Exact reverse-mode gradients of the block.

    upstream holds dLoss/dOutput with the output's shape. Returns the
    gradient wrt the input feature and an AttentionParams carrying the
    gradients wrt wk, wq, wv and alpha.
    """
    _check_pair(a, p)
    if upstream.values.shape != a.values.shape:
        raise ShapeError(
            f"upstream shape {upstream.values.shape} != input shape {a.values.shape}"
        )
    c = a.channels
    n = a.positions
    a2 = a.values.to_array().reshape(c, n)
    u2 = upstream.values.to_array().reshape(c, n)
    da, dwk, dwq, dwv, dalpha = _kernels.attention_backward(
        a2,
        p.wk.to_array(),
        p.wq.to_array(),
        p.wv.to_array(),
        p.alpha,
        u2,
    )
    grad_a = RegionFeature(Tensor.from_array(da.reshape(a.values.shape)))
    grad_p = AttentionParams(
        wk=Tensor.from_array(dwk),
        wq=Tensor.from_array(dwq),
        wv=Tensor.from_array(dwv),
        alpha=dalpha,
    )
    return grad_a, grad_p
