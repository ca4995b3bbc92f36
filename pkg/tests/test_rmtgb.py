import json

import numpy as np
import pytest

from mtboost.data import MultiTaskDataset
from mtboost.losses import LossKind, pseudo_residual, sigmoid
from mtboost.rmtgb import (RmtgbConfig, RmtgbModel, fit_rmtgb,
                           non_outlier_residuals, outlier_residuals,
                           predict_rmtgb, rmtgb_from_dict, rmtgb_to_dict,
                           shared_residuals, task_residuals, theta_gradient)
from mtboost.boosting import fit_gb, predict_gb
from mtboost.stump import fit_stump, predict_stump
from oracles import fd_theta_gradient, relative_error

SQ = LossKind.SQUARED_ERROR
CE = LossKind.CROSS_ENTROPY


def _mt(rng, tasks=4, per_task=12, d=3, classes=1):
    n = tasks * per_task
    if classes >= 2:
        targets = rng.integers(0, classes, size=n)
    else:
        targets = rng.normal(size=n)
    return MultiTaskDataset(
        features=rng.normal(size=(n, d)),
        targets=targets,
        task_of=np.repeat(np.arange(tasks), per_task),
        num_tasks=tasks,
        num_classes=classes,
    )


def _component_scores(model, mt):
    shared = model.shared.predict(mt.features)
    out = model.outlier.predict(mt.features)
    non = model.non_outlier.predict(mt.features)
    task = np.zeros_like(shared)
    for t in range(mt.num_tasks):
        idx = mt.task_indices(t)
        task[idx] = model.per_task[t].predict(mt.features[idx])
    return shared, out, non, task


def _total_at_theta(model, mt, theta):
    shared, out, non, task = _component_scores(model, mt)
    s = sigmoid(np.asarray(theta))[mt.task_of][:, None]
    return shared + (1.0 - s) * non + s * out + task


def test_shared_residuals_match_core():
    rng = np.random.default_rng(0)
    mt = _mt(rng)
    scores = rng.normal(size=(mt.num_samples, 1))
    assert np.array_equal(
        shared_residuals(SQ, mt, scores), pseudo_residual(SQ, mt.targets, scores)
    )
    zeros = np.zeros((mt.num_samples, 1))
    assert np.array_equal(shared_residuals(SQ, mt, zeros)[:, 0], mt.targets)


def test_gated_residual_scaling_and_complementarity():
    rng = np.random.default_rng(1)
    mt = _mt(rng, classes=3)
    scores = rng.normal(size=(mt.num_samples, 3))
    r = pseudo_residual(CE, mt.targets, scores)
    theta = np.zeros(mt.num_tasks)
    assert np.allclose(outlier_residuals(CE, mt, scores, theta), 0.5 * r, atol=1e-15)
    assert np.allclose(
        non_outlier_residuals(CE, mt, scores, theta), 0.5 * r, atol=1e-15
    )
    theta = rng.normal(scale=3.0, size=mt.num_tasks)
    out = outlier_residuals(CE, mt, scores, theta)
    non = non_outlier_residuals(CE, mt, scores, theta)
    # the pair is an exact partition of the ungated rows
    assert np.array_equal(non, r - out)
    assert np.abs((out + non) - r).max() <= np.spacing(np.abs(r)).max()
    frozen = np.full(mt.num_tasks, -40.0)
    assert np.abs(outlier_residuals(CE, mt, scores, frozen)).max() < 1e-15


def test_gated_residuals_reject_bad_theta():
    rng = np.random.default_rng(2)
    mt = _mt(rng)
    scores = np.zeros((mt.num_samples, 1))
    with pytest.raises(ValueError):
        outlier_residuals(SQ, mt, scores, np.zeros(mt.num_tasks + 1))


def test_task_residuals_single_task_slice():
    rng = np.random.default_rng(3)
    mt = _mt(rng)
    idx = mt.task_indices(2)
    task_slice = mt.task_slice(2)
    scores = rng.normal(size=(len(idx), 1))
    assert np.array_equal(
        task_residuals(SQ, task_slice, scores),
        pseudo_residual(SQ, task_slice.targets, scores),
    )
    with pytest.raises(ValueError):
        task_residuals(SQ, mt, np.zeros((mt.num_samples, 1)))


def test_theta_gradient_zero_when_components_agree():
    rng = np.random.default_rng(4)
    mt = _mt(rng)
    scores = rng.normal(size=(mt.num_samples, 1))
    comp = rng.normal(size=(mt.num_samples, 1))
    grad = theta_gradient(SQ, mt, scores, comp, comp, rng.normal(size=mt.num_tasks))
    assert np.array_equal(grad, np.zeros(mt.num_tasks))


def test_theta_gradient_single_sample_value():
    # one sample, r = 1, sigma = 0.5, component difference = 2:
    # d(loss)/d(theta) = -1 * 0.25 * 2 = -0.5
    mt = MultiTaskDataset(
        features=np.array([[0.0], [0.0]]),
        targets=np.array([1.0, 0.0]),
        task_of=np.array([0, 1]),
        num_tasks=2,
    )
    current = np.array([[0.0], [0.0]])  # r = y - F = (1, 0)
    out = np.array([[2.0], [2.0]])
    non = np.array([[0.0], [0.0]])
    grad = theta_gradient(SQ, mt, current, out, non, np.zeros(2))
    assert grad[0] == -0.5
    assert grad[1] == 0.0


@pytest.mark.parametrize("classes,loss", [(1, SQ), (3, CE)])
def test_theta_gradient_matches_finite_differences(classes, loss):
    rng = np.random.default_rng(5)
    for _ in range(10):
        mt = _mt(rng, tasks=4, per_task=10, classes=classes)
        cfg = RmtgbConfig(m1=2, m2=3, m3=1, seed=int(rng.integers(2**31)))
        model = fit_rmtgb(mt, loss, cfg)
        theta = rng.normal(size=4)
        total = _total_at_theta(model, mt, theta)
        _, out, non, _ = _component_scores(model, mt)
        grad = theta_gradient(loss, mt, total, out, non, theta)
        fd = fd_theta_gradient(model, mt, theta)
        assert relative_error(grad, fd, floor=1e-3) < 1e-5


def test_all_zero_round_budget_gives_constant_model():
    rng = np.random.default_rng(6)
    mt = _mt(rng)
    model = fit_rmtgb(mt, SQ, RmtgbConfig(m1=0, m2=0, m3=0, seed=1))
    pred = model.predict_dataset(mt)
    assert np.array_equal(pred, np.zeros_like(pred))


def test_m2_zero_reduces_to_two_block_reference():
    rng = np.random.default_rng(7)
    for classes, loss in ((1, SQ), (2, CE)):
        mt = _mt(rng, tasks=3, per_task=14, classes=classes)
        m1, m3, eta = 4, 3, 1.0
        model = fit_rmtgb(mt, loss, RmtgbConfig(m1=m1, m2=0, m3=m3, seed=9))
        assert len(model.outlier.stumps) == 0
        assert len(model.non_outlier.stumps) == 0

        # direct two-block reference: a shared component fitted on the pooled
        # data, then a per-task component fitted on each slice; the final
        # prediction is the sum of the two component outputs
        k = 1 if classes == 1 else classes
        shared = np.zeros((mt.num_samples, k))
        for _ in range(m1):
            r = pseudo_residual(loss, mt.targets, shared)
            h = fit_stump(mt.features, r)
            shared += eta * predict_stump(h, mt.features)
        expected = np.empty_like(shared)
        for t in range(mt.num_tasks):
            idx = mt.task_indices(t)
            task_acc = np.zeros((idx.shape[0], k))
            for _ in range(m3):
                r = pseudo_residual(loss, mt.targets[idx], shared[idx] + task_acc)
                h = fit_stump(mt.features[idx], r)
                task_acc += eta * predict_stump(h, mt.features[idx])
            expected[idx] = shared[idx] + task_acc
        assert np.array_equal(model.predict_dataset(mt), expected)


def test_single_task_no_shared_reduces_to_fit_gb():
    rng = np.random.default_rng(8)
    mt = _mt(rng, tasks=1, per_task=40)
    model = fit_rmtgb(mt, SQ, RmtgbConfig(m1=0, m2=0, m3=12, seed=3))
    ens = fit_gb(mt.features, mt.targets, SQ, num_rounds=12, shrinkage=1.0)
    assert np.array_equal(model.predict(mt.features, 0), predict_gb(ens, mt.features))


def test_same_seed_same_model():
    rng = np.random.default_rng(9)
    mt = _mt(rng, tasks=3, per_task=15)
    cfg = RmtgbConfig(m1=3, m2=4, m3=2, seed=17)
    a = fit_rmtgb(mt, SQ, cfg)
    b = fit_rmtgb(mt, SQ, cfg)
    assert np.array_equal(a.theta, b.theta)
    assert np.array_equal(a.predict_dataset(mt), b.predict_dataset(mt))


def test_block1_training_loss_non_increasing():
    rng = np.random.default_rng(10)
    mt = _mt(rng, tasks=3, per_task=25)
    losses = []

    def logger(**kv):
        if kv.get("block") == 1:
            losses.append(kv["loss"])

    fit_rmtgb(mt, SQ, RmtgbConfig(m1=15, m2=0, m3=0, seed=0), round_logger=logger)
    assert len(losses) == 15
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_predict_trivia():
    rng = np.random.default_rng(11)
    mt = _mt(rng, tasks=2, per_task=10)
    model = fit_rmtgb(mt, SQ, RmtgbConfig(m1=0, m2=3, m3=0, seed=5))
    x = rng.normal(size=(6, 3))
    # when both gated components agree the gate has no effect
    agree = RmtgbModel(
        shared=model.shared,
        outlier=model.outlier,
        non_outlier=model.outlier,
        per_task=model.per_task,
        theta=np.array([4.0, -4.0]),
        loss=SQ,
        rounds=model.rounds,
    )
    assert np.allclose(
        predict_rmtgb(agree, x, 0), predict_rmtgb(agree, x, 1), atol=1e-12
    )
    # theta = 0 averages the two gated components
    half = RmtgbModel(
        shared=model.shared,
        outlier=model.outlier,
        non_outlier=model.non_outlier,
        per_task=model.per_task,
        theta=np.zeros(2),
        loss=SQ,
        rounds=model.rounds,
    )
    expected = (
        model.shared.predict(x)
        + 0.5 * model.non_outlier.predict(x)
        + 0.5 * model.outlier.predict(x)
        + model.per_task[0].predict(x)
    )
    assert np.allclose(predict_rmtgb(half, x, 0), expected, atol=1e-12)
    with pytest.raises(ValueError):
        predict_rmtgb(model, x, 2)


def test_small_task_with_finetuning_rejected():
    mt = MultiTaskDataset(
        features=np.array([[0.0], [1.0], [2.0]]),
        targets=np.array([0.0, 1.0, 2.0]),
        task_of=np.array([0, 0, 1]),
        num_tasks=2,
    )
    with pytest.raises(ValueError):
        fit_rmtgb(mt, SQ, RmtgbConfig(m1=0, m2=0, m3=1))
    # fine without block 3
    fit_rmtgb(mt, SQ, RmtgbConfig(m1=1, m2=1, m3=0))


def test_json_round_trip_predicts_identically():
    rng = np.random.default_rng(12)
    mt = _mt(rng, tasks=3, per_task=12, classes=2)
    model = fit_rmtgb(mt, CE, RmtgbConfig(m1=2, m2=2, m3=2, seed=4))
    obj = json.loads(json.dumps(rmtgb_to_dict(model)))
    assert obj["rounds"] == [2, 2, 2]
    back = rmtgb_from_dict(obj)
    assert np.array_equal(back.theta, model.theta)
    assert np.array_equal(back.predict_dataset(mt), model.predict_dataset(mt))
