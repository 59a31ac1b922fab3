"""Detection and affordance losses against scalar oracles and identities."""

import math

import numpy as np
import pytest

from affplan.losses import (
    CLAMP,
    AffordancePrediction,
    DetectionPrediction,
    DetectionTarget,
    LossWeights,
    _bce_core,
    _ce_grid,
    _ce_scalar,
    _kl_grid,
    _l1_core,
    affordance_loss,
    affordance_loss_grad,
    detection_loss,
    detection_loss_grad,
    kl_affordance_loss,
    kl_affordance_loss_grad,
    total_loss,
)
from affplan.numeric import ShapeError, Tensor

import oracles


def _rand_dist(rng, rows, cols):
    q = rng.random(size=(rows, cols)) + 0.05
    return q / q.sum(axis=1, keepdims=True)


def _one_hot(rng, rows, cols):
    y = np.zeros((rows, cols))
    y[np.arange(rows), rng.integers(cols, size=rows)] = 1.0
    return y


# ---------------------------------------------------------------------------
# detection


def test_detection_loss_positive_case_matches_oracle():
    pred = DetectionPrediction(
        objectness=0.8, bbox=(1.0, 2.0, 5.0, 7.0), attributes=(0.9, 0.2, 0.6)
    )
    target = DetectionTarget(cls=1, bbox=(1.5, 2.0, 4.0, 8.0), attributes=(1, 0, 1))
    w = LossWeights(lambda1=0.5, lambda2=2.0)
    want = (
        oracles.ce_scalar_oracle(0.8, 1)
        + 0.5 * oracles.l1_oracle(pred.bbox, target.bbox)
        + 2.0 * oracles.bce_mean_oracle(pred.attributes, target.attributes)
    )
    assert detection_loss(pred, target, w) == pytest.approx(want, abs=1e-12)


def test_background_ignores_box_and_attributes():
    target = DetectionTarget(cls=0, bbox=(0, 0, 1, 1), attributes=(0, 1, 0))
    base = None
    for bbox, attrs in [
        ((0, 0, 1, 1), (0.1, 0.2, 0.3)),
        ((9, 9, 20, 30), (0.99, 0.01, 0.5)),
        ((-5, 2, 0, 4), (0.5, 0.5, 0.5)),
    ]:
        pred = DetectionPrediction(objectness=0.3, bbox=bbox, attributes=attrs)
        loss = detection_loss(pred, target)
        grad = detection_loss_grad(pred, target)
        if base is None:
            base = loss
        assert loss == base == pytest.approx(oracles.ce_scalar_oracle(0.3, 0))
        assert grad.bbox == (0.0, 0.0, 0.0, 0.0)
        assert all(g == 0.0 for g in grad.attributes)
        assert grad.objectness != 0.0


def test_detection_grad_finite_difference():
    rng = np.random.default_rng(31)
    eps = 1e-6
    for _ in range(50):
        rho = float(rng.uniform(0.05, 0.95))
        bbox = tuple(rng.normal(size=4))
        tb = tuple(rng.normal(size=4))
        attrs = tuple(rng.uniform(0.05, 0.95, size=3))
        ta = tuple(int(v) for v in rng.integers(0, 2, size=3))
        cls = int(rng.integers(0, 2))
        w = LossWeights(lambda1=float(rng.uniform(0, 2)), lambda2=float(rng.uniform(0, 2)))
        target = DetectionTarget(cls=cls, bbox=tb, attributes=ta)

        def loss_at(rho=rho, bbox=bbox, attrs=attrs):
            return detection_loss(
                DetectionPrediction(objectness=rho, bbox=bbox, attributes=attrs),
                target,
                w,
            )

        g = detection_loss_grad(
            DetectionPrediction(objectness=rho, bbox=bbox, attributes=attrs),
            target,
            w,
        )
        fd_rho = (loss_at(rho=rho + eps) - loss_at(rho=rho - eps)) / (2 * eps)
        assert g.objectness == pytest.approx(fd_rho, rel=1e-4, abs=1e-6)
        for i in range(4):
            hi = list(bbox)
            lo = list(bbox)
            hi[i] += eps
            lo[i] -= eps
            fd = (loss_at(bbox=tuple(hi)) - loss_at(bbox=tuple(lo))) / (2 * eps)
            assert g.bbox[i] == pytest.approx(fd, rel=1e-4, abs=1e-6)
        for i in range(3):
            hi = list(attrs)
            lo = list(attrs)
            hi[i] += eps
            lo[i] -= eps
            fd = (loss_at(attrs=tuple(hi)) - loss_at(attrs=tuple(lo))) / (2 * eps)
            assert g.attributes[i] == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_detection_validation():
    with pytest.raises(ValueError):
        DetectionPrediction(objectness=1.5, bbox=(0, 0, 1, 1), attributes=())
    with pytest.raises(ShapeError):
        DetectionPrediction(objectness=0.5, bbox=(0, 0, 1), attributes=())
    with pytest.raises(ValueError):
        DetectionTarget(cls=2, bbox=(0, 0, 1, 1), attributes=())
    with pytest.raises(ValueError):
        DetectionTarget(cls=1, bbox=(0, 0, 1, 1), attributes=(2,))
    with pytest.raises(ShapeError):
        detection_loss(
            DetectionPrediction(objectness=0.5, bbox=(0, 0, 1, 1), attributes=(0.5,)),
            DetectionTarget(cls=1, bbox=(0, 0, 1, 1), attributes=(1, 0)),
        )
    with pytest.raises(ValueError):
        LossWeights(lambda1=-1.0)


def test_ce_scalar_clamp_zone_flat():
    loss, grad = _ce_scalar(0.0, 1)
    assert math.isfinite(loss) and loss == pytest.approx(-math.log(CLAMP))
    assert grad == 0.0
    loss, grad = _ce_scalar(1.0, 0)
    assert math.isfinite(loss)
    assert grad == 0.0


# ---------------------------------------------------------------------------
# affordance cross-entropy and the KL variant


def test_uniform_prediction_loss_is_log_labels():
    for labels in (2, 3, 5, 8):
        rows = 6
        q = np.full((rows, labels), 1.0 / labels)
        y = np.zeros((rows, labels))
        y[:, 0] = 1.0
        pred = AffordancePrediction(Tensor.from_array(q))
        loss = affordance_loss(pred, Tensor.from_array(y))
        assert abs(loss - math.log(labels)) < 1e-12


def test_affordance_matches_loop_oracle():
    rng = np.random.default_rng(32)
    for _ in range(30):
        rows = int(rng.integers(1, 8))
        cols = int(rng.integers(2, 6))
        q = _rand_dist(rng, rows, cols)
        y = _one_hot(rng, rows, cols)
        pred = AffordancePrediction(Tensor.from_array(q))
        got = affordance_loss(pred, Tensor.from_array(y))
        assert got == pytest.approx(oracles.grid_ce_oracle(q, y), abs=1e-12)


def test_kl_matches_loop_oracle():
    rng = np.random.default_rng(33)
    for _ in range(30):
        rows = int(rng.integers(1, 8))
        cols = int(rng.integers(2, 6))
        q = _rand_dist(rng, rows, cols)
        y = _rand_dist(rng, rows, cols)
        pred = AffordancePrediction(Tensor.from_array(q))
        got = kl_affordance_loss(pred, Tensor.from_array(y))
        assert got == pytest.approx(oracles.grid_kl_oracle(q, y), abs=1e-12)


def test_kl_equals_ce_for_one_hot():
    rng = np.random.default_rng(34)
    for _ in range(30):
        rows = int(rng.integers(1, 8))
        cols = int(rng.integers(2, 6))
        q = _rand_dist(rng, rows, cols)
        y = _one_hot(rng, rows, cols)
        pred = AffordancePrediction(Tensor.from_array(q))
        ce = affordance_loss(pred, Tensor.from_array(y))
        kl = kl_affordance_loss(pred, Tensor.from_array(y))
        assert abs(ce - kl) < 1e-12
        g_ce = affordance_loss_grad(pred, Tensor.from_array(y)).to_array()
        g_kl = kl_affordance_loss_grad(pred, Tensor.from_array(y)).to_array()
        assert np.array_equal(g_ce, g_kl)


def test_kl_is_zero_iff_equal_and_nonnegative():
    rng = np.random.default_rng(35)
    q = _rand_dist(rng, 4, 3)
    pred = AffordancePrediction(Tensor.from_array(q))
    assert kl_affordance_loss(pred, Tensor.from_array(q)) == pytest.approx(0.0, abs=1e-15)
    for _ in range(20):
        y = _rand_dist(rng, 4, 3)
        assert kl_affordance_loss(pred, Tensor.from_array(y)) >= -1e-15


def test_grid_gradients_finite_difference():
    rng = np.random.default_rng(36)
    eps = 1e-6
    for core, make_y in ((_ce_grid, _one_hot), (_kl_grid, _rand_dist)):
        for _ in range(25):
            rows = int(rng.integers(1, 6))
            cols = int(rng.integers(2, 5))
            q = _rand_dist(rng, rows, cols)
            y = make_y(rng, rows, cols)
            _, grad = core(q, y)
            for r in range(rows):
                for c in range(cols):
                    saved = q[r, c]
                    q[r, c] = saved + eps
                    hi, _ = core(q, y)
                    q[r, c] = saved - eps
                    lo, _ = core(q, y)
                    q[r, c] = saved
                    fd = (hi - lo) / (2 * eps)
                    assert grad[r, c] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_clamped_zone_is_flat_and_finite():
    q = np.array([[0.0, 1.0], [0.5, 0.5]])
    y = np.array([[1.0, 0.0], [1.0, 0.0]])
    loss, grad = _ce_grid(q, y)
    assert math.isfinite(loss)
    assert grad[0, 0] == 0.0  # clamped entry: flat
    assert grad[1, 0] != 0.0
    loss_kl, grad_kl = _kl_grid(q, y)
    assert math.isfinite(loss_kl)
    assert grad_kl[0, 0] == 0.0


def test_bce_core_matches_oracle():
    rng = np.random.default_rng(37)
    p = rng.uniform(0.01, 0.99, size=6)
    y = rng.integers(0, 2, size=6)
    loss, _ = _bce_core(p, y)
    assert loss / 6 == pytest.approx(oracles.bce_mean_oracle(p, y), abs=1e-12)


def test_l1_core():
    loss, grad = _l1_core(np.array([1.0, -2.0, 3.0, 0.0]), np.array([0.0, 0.0, 3.0, 1.0]))
    assert loss == pytest.approx(1.0 + 2.0 + 0.0 + 1.0)
    assert list(grad) == [1.0, -1.0, 0.0, -1.0]


def test_affordance_validation():
    good = _rand_dist(np.random.default_rng(0), 2, 3)
    with pytest.raises(ValueError):
        AffordancePrediction(Tensor.from_array(good * 2.0))
    with pytest.raises(ShapeError):
        AffordancePrediction(Tensor.from_array(good.ravel()))
    pred = AffordancePrediction(Tensor.from_array(good))
    y_bad = np.array([[0.5, 0.5, 0.0], [1.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        affordance_loss(pred, Tensor.from_array(y_bad))  # not one-hot
    with pytest.raises(ShapeError):
        affordance_loss(pred, Tensor.from_array(np.eye(3)))
    y_neg = np.array([[1.1, -0.1, 0.0], [1.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        kl_affordance_loss(pred, Tensor.from_array(y_neg))


def test_total_loss_is_plain_sum():
    assert total_loss(1.25, 0.5, 2.0) == 3.75
    with pytest.raises(ValueError):
        total_loss(math.inf, 0.0, 0.0)
