import math

import numpy as np
import pytest

from mtboost.losses import (LossKind, loss_value, one_hot, pseudo_residual,
                            sigmoid, softmax)
from oracles import fd_score_gradient, relative_error

SQ = LossKind.SQUARED_ERROR
CE = LossKind.CROSS_ENTROPY


def test_squared_loss_exact_fit_is_zero():
    assert loss_value(SQ, [2.0], np.array([[2.0]])) == 0.0


def test_squared_loss_half_factor():
    # 0.5 * (3 - 1)^2 = 2
    assert loss_value(SQ, [3.0], np.array([[1.0]])) == 2.0


def test_cross_entropy_uniform_scores():
    value = loss_value(CE, [0], np.array([[0.0, 0.0]]))
    assert value == pytest.approx(math.log(2.0), abs=1e-12)


def test_cross_entropy_nonnegative_and_tight_only_at_certainty():
    rng = np.random.default_rng(0)
    for _ in range(20):
        scores = rng.normal(size=(6, 3))
        y = rng.integers(0, 3, size=6)
        assert loss_value(CE, y, scores) >= 0.0
    # a huge margin on the true class drives the loss to ~0
    scores = np.zeros((4, 3))
    y = np.array([0, 1, 2, 1])
    scores[np.arange(4), y] = 60.0
    assert loss_value(CE, y, scores) < 1e-20
    assert loss_value(CE, y, np.zeros((4, 3))) > 1.0


def test_softmax_symmetry_and_shift_invariance():
    assert np.allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)
    for c in (-7.3, 0.0, 123.4):
        assert np.allclose(softmax([c, c, c]), np.ones(3) / 3, atol=1e-15)
    rng = np.random.default_rng(1)
    scores = rng.normal(size=(10, 4))
    shifted = scores + rng.normal(size=(10, 1))
    assert np.allclose(softmax(scores), softmax(shifted), atol=1e-12)


def test_softmax_hand_value():
    assert np.allclose(softmax([math.log(3.0), 0.0]), [0.75, 0.25], atol=1e-12)


def test_softmax_rows_positive_sum_to_one_order_preserving():
    rng = np.random.default_rng(2)
    scores = rng.normal(scale=30.0, size=(50, 5))
    p = softmax(scores)
    assert (p > 0).all()
    assert np.abs(p.sum(axis=1) - 1.0).max() < 1e-12
    assert (np.argsort(p, axis=1) == np.argsort(scores, axis=1)).all()


def test_sigmoid_basics():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(1000.0) == 1.0
    assert sigmoid(-1000.0) == 0.0
    rng = np.random.default_rng(3)
    theta = rng.normal(scale=5.0, size=100)
    assert np.abs(sigmoid(theta) + sigmoid(-theta) - 1.0).max() < 1e-15
    assert (np.diff(sigmoid(np.linspace(-8, 8, 200))) > 0).all()


def test_pseudo_residual_regression():
    r = pseudo_residual(SQ, [5.0], np.array([[3.0]]))
    assert r.shape == (1, 1)
    assert r[0, 0] == 2.0


def test_pseudo_residual_classification():
    scores = np.log(np.array([[0.7, 0.3]]))
    r = pseudo_residual(CE, [0], scores)
    assert np.allclose(r, [[0.3, -0.3]], atol=1e-12)


def test_classification_residual_rows_sum_to_zero():
    rng = np.random.default_rng(4)
    scores = rng.normal(size=(30, 4))
    y = rng.integers(0, 4, size=30)
    r = pseudo_residual(CE, y, scores)
    assert np.abs(r.sum(axis=1)).max() < 1e-12


@pytest.mark.parametrize("loss,k", [(SQ, 1), (CE, 3), (CE, 2)])
def test_pseudo_residual_matches_finite_differences(loss, k):
    rng = np.random.default_rng(5)
    for _ in range(5):
        n = int(rng.integers(3, 10))
        scores = rng.normal(size=(n, k))
        if loss is SQ:
            targets = rng.normal(size=n)
        else:
            targets = rng.integers(0, k, size=n)
        fd = fd_score_gradient(loss, targets, scores)
        r = pseudo_residual(loss, targets, scores)
        assert relative_error(-fd, r, floor=1e-3) < 1e-5


def test_one_hot_rejects_bad_labels():
    with pytest.raises(ValueError):
        one_hot(np.array([0, 3]), 3)


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        loss_value(SQ, [1.0, 2.0], np.array([[1.0]]))
    with pytest.raises(ValueError):
        loss_value(CE, [0], np.array([[1.0]]))
    with pytest.raises(ValueError):
        pseudo_residual(SQ, [1.0], np.array([[1.0, 2.0]]))
