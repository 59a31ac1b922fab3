"""Training losses for the detector and the per-region affordance head.

Three pieces:
  * detection loss: objectness cross-entropy, plus box l1 and attribute
    binary cross-entropies gated on the positive class;
  * affordance loss: multinomial cross-entropy between per-pixel label
    distributions and a one-hot ground truth, averaged over the region
    (with a KL variant for soft targets);
  * total loss: plain sum of the three stage losses.

Probabilities are clamped at CLAMP before any log, so losses stay finite on
degenerate inputs; inside the clamped zone the gradient is 0 (the loss is
flat there).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numeric import ShapeError, Tensor

__all__ = [
    "CLAMP",
    "LossWeights",
    "DetectionPrediction",
    "DetectionTarget",
    "DetectionGrad",
    "AffordancePrediction",
    "detection_loss",
    "detection_loss_grad",
    "affordance_loss",
    "affordance_loss_grad",
    "kl_affordance_loss",
    "kl_affordance_loss_grad",
    "total_loss",
]

CLAMP = 1e-12

ROW_SUM_TOL = 1e-9


def _check_unit(name: str, vals: Sequence[float]) -> tuple[float, ...]:
    out = tuple(float(v) for v in vals)
    for v in out:
        if not np.isfinite(v) or v < 0.0 or v > 1.0:
            raise ValueError(f"{name} entries must lie in [0, 1], got {v}")
    return out


@dataclass(frozen=True)
class LossWeights:
    """Weights of the box and attribute terms inside the detection loss."""

    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class DetectionPrediction:
    """One detection: objectness in [0,1], box coords, attribute probs."""

    objectness: float
    bbox: tuple[float, float, float, float]
    attributes: tuple[float, ...]

    def __post_init__(self):
        _check_unit("objectness", (self.objectness,))
        if len(self.bbox) != 4:
            raise ShapeError("bbox must have 4 coordinates")
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        object.__setattr__(
            self, "attributes", _check_unit("attributes", self.attributes)
        )


@dataclass(frozen=True)
class DetectionTarget:
    """Ground truth for one detection; cls is 0 (background) or 1."""

    cls: int
    bbox: tuple[float, float, float, float]
    attributes: tuple[int, ...]

    def __post_init__(self):
        if self.cls not in (0, 1):
            raise ValueError(f"cls must be 0 or 1, got {self.cls}")
        if len(self.bbox) != 4:
            raise ShapeError("bbox must have 4 coordinates")
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        attrs = tuple(int(v) for v in self.attributes)
        if any(v not in (0, 1) for v in attrs):
            raise ValueError("target attributes must be 0/1")
        object.__setattr__(self, "attributes", attrs)


@dataclass(frozen=True)
class DetectionGrad:
    """Gradient of the detection loss wrt the prediction fields."""

    objectness: float
    bbox: tuple[float, float, float, float]
    attributes: tuple[float, ...]


@dataclass(frozen=True)
class AffordancePrediction:
    """Per-pixel label distributions over a region.

    probs has shape (pixels, labels); every row is a distribution
    (non-negative, sums to 1 within a small tolerance).
    """

    probs: Tensor

    def __post_init__(self):
        if len(self.probs.shape) != 2 or min(self.probs.shape) < 1:
            raise ShapeError(
                f"probs must be (pixels, labels) with both >= 1, got {self.probs.shape}"
            )
        a = self.probs.to_array()
        if np.any(a < 0.0):
            raise ValueError("probabilities must be non-negative")
        if np.max(np.abs(a.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("each pixel's probabilities must sum to 1")

    @property
    def pixels(self) -> int:
        return self.probs.shape[0]

    @property
    def labels(self) -> int:
        return self.probs.shape[1]


# ---------------------------------------------------------------------------
# array-level cores
# The typed ops below and the finite-difference tests both call these, so the
# tests can perturb raw entries without fighting the row-sum invariant.


def _ce_scalar(p: float, y: int) -> tuple[float, float]:
    """Binary cross-entropy of one probability; returns (loss, dloss/dp)."""
    if y == 1:
        if p < CLAMP:
            return -float(np.log(CLAMP)), 0.0
        return -float(np.log(p)), -1.0 / p
    pn = 1.0 - p
    if pn < CLAMP:
        return -float(np.log(CLAMP)), 0.0
    return -float(np.log(pn)), 1.0 / pn


def _l1_core(b: np.ndarray, b_star: np.ndarray) -> tuple[float, np.ndarray]:
    d = b - b_star
    return float(np.sum(np.abs(d))), np.sign(d)


def _bce_core(p: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    loss = 0.0
    grad = np.zeros_like(p)
    for i in range(p.size):
        li, gi = _ce_scalar(float(p[i]), int(y[i]))
        loss += li
        grad[i] = gi
    return loss, grad


def _ce_grid(q: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Multinomial cross-entropy mean over rows; y is one-hot."""
    rows = q.shape[0]
    qc = np.maximum(q, CLAMP)
    loss = -float(np.sum(y * np.log(qc))) / rows
    grad = np.where((y > 0) & (q >= CLAMP), -y / (rows * qc), 0.0)
    return loss, grad


def _kl_grid(q: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over rows of KL(y || q), with 0 log 0 taken as 0."""
    rows = q.shape[0]
    qc = np.maximum(q, CLAMP)
    pos = y > 0
    loss = float(np.sum(y[pos] * (np.log(y[pos]) - np.log(qc[pos])))) / rows
    grad = np.where(pos & (q >= CLAMP), -y / (rows * qc), 0.0)
    return loss, grad


# ---------------------------------------------------------------------------
# typed ops


def _pair_check(pred: DetectionPrediction, target: DetectionTarget) -> None:
    if len(pred.attributes) != len(target.attributes):
        raise ShapeError(
            f"attribute counts differ: prediction {len(pred.attributes)}, "
            f"target {len(target.attributes)}"
        )


def detection_loss(
    pred: DetectionPrediction,
    target: DetectionTarget,
    weights: LossWeights = LossWeights(),
) -> float:
    """Objectness cross-entropy; box and attribute terms only when cls = 1.

    loss = CE(objectness, cls)
         + [cls = 1] * (lambda1 * l1(bbox, bbox*)
                        + lambda2 / N * sum_i BCE(attr_i, attr*_i))

    A background target (cls = 0) makes the loss independent of the box and
    attribute predictions.
    """
    _pair_check(pred, target)
    loss, _ = _ce_scalar(pred.objectness, target.cls)
    if target.cls == 1:
        l1, _ = _l1_core(np.asarray(pred.bbox), np.asarray(target.bbox))
        bce, _ = _bce_core(
            np.asarray(pred.attributes), np.asarray(target.attributes)
        )
        n = len(pred.attributes)
        loss += weights.lambda1 * l1
        if n:
            loss += weights.lambda2 * bce / n
    return loss


def detection_loss_grad(
    pred: DetectionPrediction,
    target: DetectionTarget,
    weights: LossWeights = LossWeights(),
) -> DetectionGrad:
    """Exact gradient of detection_loss wrt the prediction fields."""
    _pair_check(pred, target)
    _, d_rho = _ce_scalar(pred.objectness, target.cls)
    n = len(pred.attributes)
    d_bbox = np.zeros(4)
    d_attr = np.zeros(n)
    if target.cls == 1:
        _, d_bbox = _l1_core(np.asarray(pred.bbox), np.asarray(target.bbox))
        d_bbox = weights.lambda1 * d_bbox
        if n:
            _, g = _bce_core(
                np.asarray(pred.attributes), np.asarray(target.attributes)
            )
            d_attr = weights.lambda2 * g / n
    return DetectionGrad(
        objectness=float(d_rho),
        bbox=tuple(float(v) for v in d_bbox),
        attributes=tuple(float(v) for v in d_attr),
    )


def _one_hot_check(pred: AffordancePrediction, target: Tensor) -> np.ndarray:
    if target.shape != pred.probs.shape:
        raise ShapeError(
            f"target shape {target.shape} != prediction shape {pred.probs.shape}"
        )
    y = target.to_array()
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("one-hot target entries must be 0 or 1")
    if not np.all(y.sum(axis=1) == 1.0):
        raise ValueError("each one-hot target row must have exactly one 1")
    return y


def _dist_check(pred: AffordancePrediction, target: Tensor) -> np.ndarray:
    if target.shape != pred.probs.shape:
        raise ShapeError(
            f"target shape {target.shape} != prediction shape {pred.probs.shape}"
        )
    y = target.to_array()
    if np.any(y < 0.0):
        raise ValueError("target distributions must be non-negative")
    if np.max(np.abs(y.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
        raise ValueError("each target row must sum to 1")
    return y


def affordance_loss(pred: AffordancePrediction, target: Tensor) -> float:
    """Mean over pixels of the cross-entropy against a one-hot target."""
    y = _one_hot_check(pred, target)
    loss, _ = _ce_grid(pred.probs.to_array(), y)
    return loss


def affordance_loss_grad(pred: AffordancePrediction, target: Tensor) -> Tensor:
    """Gradient of affordance_loss wrt the probability grid."""
    y = _one_hot_check(pred, target)
    _, grad = _ce_grid(pred.probs.to_array(), y)
    return Tensor.from_array(grad)


def kl_affordance_loss(pred: AffordancePrediction, target: Tensor) -> float:
    """Mean over pixels of KL(target || prediction) for soft targets.

    Coincides exactly with affordance_loss when the target is one-hot.
    """
    y = _dist_check(pred, target)
    loss, _ = _kl_grid(pred.probs.to_array(), y)
    return loss


def kl_affordance_loss_grad(pred: AffordancePrediction, target: Tensor) -> Tensor:
    """Gradient of kl_affordance_loss wrt the probability grid."""
    y = _dist_check(pred, target)
    _, grad = _kl_grid(pred.probs.to_array(), y)
    return Tensor.from_array(grad)


def total_loss(detection: float, proposal: float, affordance: float) -> float:
    """Plain sum of the three training-stage losses."""
    vals = (detection, proposal, affordance)
    if not all(np.isfinite(v) for v in vals):
        raise ValueError("loss terms must be finite")
    return float(detection + proposal + affordance)
