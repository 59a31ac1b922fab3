"""Weighted F-measure for affordance segmentation maps.

The per-pixel error E = |G - D| is reweighted in two steps before the usual
precision/recall bookkeeping:

  * dependency: on foreground pixels, E may be replaced by the Gaussian-
    weighted mean of E over nearby foreground pixels when that mean is
    smaller (a wrong pixel inside a mostly-correct neighborhood counts
    less). The Gaussian has std sigma and is truncated to a square window
    of radius ceil(3 sigma).
  * distance: on background pixels, E is scaled by B = 2 - exp(alpha * dist)
    with dist the exact Euclidean distance to the nearest foreground pixel
    and alpha < 0, so false positives far from the object cost more
    (B -> 2) than those hugging its boundary (B -> 1).

Weighted TP/FP/FN then give precision, recall and the F-measure; a ranked
variant combines the scores of up to three ranked predictions with
geometrically decaying weights.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels

__all__ = [
    "EmptyGroundTruthWarning",
    "MetricParams",
    "GroundTruthMask",
    "PredictionMap",
    "RankWeights",
    "distance_transform",
    "weighted_pr_rc",
    "weighted_fmeasure",
    "rank_weights",
    "ranked_weighted_fmeasure",
    "MAX_RANKS",
]

MAX_RANKS = 3


class EmptyGroundTruthWarning(UserWarning):
    """Issued when a ground-truth mask has no foreground pixels."""


@dataclass(frozen=True)
class MetricParams:
    """beta trades precision against recall; sigma is the dependency
    smoothing radius; alpha < 0 sets the distance-decay rate."""

    beta: float = 1.0
    sigma: float = 5.0
    alpha: float = math.log(0.5) / 5.0

    def __post_init__(self):
        if not (self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (self.alpha < 0):
            raise ValueError(f"alpha must be negative, got {self.alpha}")

    @property
    def radius(self) -> int:
        return int(math.ceil(3.0 * self.sigma))


@dataclass(frozen=True)
class GroundTruthMask:
    """Binary mask, shape (h, w), entries 0/1."""

    values: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.values)
        if a.ndim != 2 or a.size == 0:
            raise ValueError(f"mask must be 2-d and non-empty, got shape {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("mask entries must be 0 or 1")
        a = a.astype(np.uint8)
        a.flags.writeable = False
        object.__setattr__(self, "values", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def foreground_count(self) -> int:
        return int(self.values.sum())


@dataclass(frozen=True)
class PredictionMap:
    """Real-valued map, shape (h, w), entries in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        if a.ndim != 2 or a.size == 0:
            raise ValueError(f"map must be 2-d and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("map entries must lie in [0, 1]")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "values", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def distance_transform(mask: GroundTruthMask) -> np.ndarray:
    """Exact Euclidean distance from each pixel to the nearest foreground
    pixel (0 on foreground). All-background masks give +inf everywhere."""
    return np.sqrt(_kernels.squared_edt(mask.values.astype(bool)))


def _pair(pred: PredictionMap, gt: GroundTruthMask) -> None:
    if pred.shape != gt.shape:
        raise ValueError(
            f"prediction shape {pred.shape} != ground truth shape {gt.shape}"
        )


def weighted_pr_rc(
    pred: PredictionMap, gt: GroundTruthMask, params: MetricParams = MetricParams()
) -> tuple[float, float]:
    """Dependency- and distance-weighted precision and recall.

    Empty ground truth raises EmptyGroundTruthWarning and scores (0, 0).
    Both outputs are clamped to [0, 1]; an empty denominator gives 0.
    """
    _pair(pred, gt)
    fg = gt.values.astype(bool)
    if not fg.any():
        warnings.warn(
            "ground-truth mask has no foreground; scoring 0",
            EmptyGroundTruthWarning,
            stacklevel=2,
        )
        return 0.0, 0.0

    d = pred.values
    g = fg.astype(np.float64)
    e = np.abs(g - d)

    ea = _kernels.masked_gaussian_smooth(e, g, params.sigma, params.radius)
    e_dep = np.where(fg & (ea < e), ea, e)

    dist = np.sqrt(_kernels.squared_edt(fg))
    b = np.where(fg, 1.0, 2.0 - np.exp(params.alpha * dist))
    ew = e_dep * b

    tp = float(np.sum(1.0 - ew[fg]))
    fp = float(np.sum(ew[~fg]))
    fn = float(np.sum(ew[fg]))

    pr = tp / (tp + fp) if tp + fp > 0.0 else 0.0
    rc = tp / (tp + fn) if tp + fn > 0.0 else 0.0
    return min(max(pr, 0.0), 1.0), min(max(rc, 0.0), 1.0)


def weighted_fmeasure(
    pred: PredictionMap, gt: GroundTruthMask, params: MetricParams = MetricParams()
) -> float:
    """F-measure over the weighted precision/recall pair:

        F = (1 + beta^2) Pr Rc / (beta^2 Pr + Rc)

    0 when the denominator vanishes. A perfect binary prediction scores
    exactly 1.0.
    """
    pr, rc = weighted_pr_rc(pred, gt, params)
    den = params.beta * params.beta * pr + rc
    if den == 0.0:
        return 0.0
    return (1.0 + params.beta * params.beta) * pr * rc / den


@dataclass(frozen=True)
class RankWeights:
    """Normalized, strictly decreasing weights over prediction ranks."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not w:
            raise ValueError("need at least one rank")
        if any(v <= 0 for v in w):
            raise ValueError("rank weights must be positive")
        if any(b >= a for a, b in zip(w, w[1:])):
            raise ValueError("rank weights must be strictly decreasing")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ValueError("rank weights must sum to 1")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, i: int) -> float:
        return self.weights[i]


def rank_weights(count: int) -> RankWeights:
    """Geometric rank weights: w_r proportional to 2^-r for r = 1..count."""
    if not (1 <= count <= MAX_RANKS):
        raise ValueError(f"count must be in 1..{MAX_RANKS}, got {count}")
    raw = [2.0 ** -(r + 1) for r in range(count)]
    s = sum(raw)
    return RankWeights(tuple(v / s for v in raw))


def ranked_weighted_fmeasure(
    preds: Sequence[PredictionMap],
    gt: GroundTruthMask,
    params: MetricParams = MetricParams(),
) -> float:
    """Weighted sum of per-rank F-measures over 1..3 ranked predictions."""
    if not (1 <= len(preds) <= MAX_RANKS):
        raise ValueError(
            f"need 1..{MAX_RANKS} ranked predictions, got {len(preds)}"
        )
    w = rank_weights(len(preds))
    return float(
        sum(w[i] * weighted_fmeasure(p, gt, params) for i, p in enumerate(preds))
    )
