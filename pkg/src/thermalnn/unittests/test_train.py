"""
Purpose: Unit tests for the train.py module
"""

from dataclasses import replace

import numpy as np
import pytest

from ..const import ADAM, NADAM, OPTIMIZERS, SGD_MOMENTUM
from ..logger import EpochLogger
from ..nn import ActivationKind, LayerSpec
from ..tnn import TopologyConfig, init_tnn_parameters, l2_penalty, score_profiles, tbptt_gradients
from ..train import (
    EarlyStopping,
    TrainConfig,
    clip_gradients,
    fit,
    global_norm,
    optimizer_step,
    repeated_fit,
)
from ..tnn_exceptions import ArgumentError, ContractError, NumericalError, TrainingError
from .helpers import small_folds, small_schema


@pytest.fixture
def setup():
    schema = small_schema()
    topology = TopologyConfig(
        pi_hidden=(LayerSpec(3, ActivationKind.TANH),),
        gamma_hidden=(LayerSpec(3, ActivationKind.TANH),),
    ).build(schema.m, schema.n, schema.o)
    config = TrainConfig(optimizer=ADAM, learning_rate=1e-3, tbptt_length=5, max_epochs=3, patience=2, seed=5)
    return topology, small_folds(schema), config


def test_clip_gradients():
    small = {"a": np.array([0.3, 0.4])}
    np.testing.assert_array_equal(clip_gradients(small, 1.0)["a"], small["a"])

    large = {"a": np.array([0.0, 2.4]), "b": np.array([[3.2]])}
    assert global_norm(large) == pytest.approx(4.0)
    clipped = clip_gradients(large, 1.0)
    np.testing.assert_allclose(clipped["a"], [0.0, 0.6])
    assert global_norm(clipped) == pytest.approx(1.0, abs=1e-12)


def test_global_norm_names_bad_block():
    with pytest.raises(NumericalError) as exception_info:
        global_norm({"ok": np.ones(2), "gamma.w_0": np.array([np.inf])})
    assert exception_info.value.block == "gamma.w_0"


@pytest.mark.parametrize("kind", OPTIMIZERS)
def test_zero_gradients_keep_parameters(kind):
    params = {"w": np.array([0.5, -1.5])}
    state = None
    for _ in range(3):
        params, state = optimizer_step(kind, state, params, {"w": np.zeros(2)}, 0.1)
    np.testing.assert_array_equal(params["w"], [0.5, -1.5])
    assert state.step == 3


def test_first_adam_step_moves_by_learning_rate():
    params = {"w": np.zeros(3)}
    optimizer_step(ADAM, None, params, {"w": np.array([0.2, -5.0, 1e-3])}, 0.01)
    np.testing.assert_allclose(params["w"], [-0.01, 0.01, -0.01], rtol=1e-4)


def test_first_nadam_step():
    params = {"w": np.zeros(2)}
    optimizer_step(NADAM, None, params, {"w": np.array([2.0, -0.5])}, 0.01)
    expected = 0.9 * 0.1 / (1.0 - 0.81) + 1.0
    np.testing.assert_allclose(params["w"], [-0.01 * expected, 0.01 * expected], rtol=1e-6)


def test_sgd_momentum_accumulates():
    params = {"w": np.array([1.0])}
    params, state = optimizer_step(SGD_MOMENTUM, None, params, {"w": np.array([2.0])}, 0.1)
    np.testing.assert_allclose(params["w"], [0.8])
    optimizer_step(SGD_MOMENTUM, state, params, {"w": np.array([2.0])}, 0.1)
    np.testing.assert_allclose(params["w"], [0.8 - 0.9 * 0.2 - 0.2])


def test_optimizer_step_errors():
    params = {"w": np.zeros(2)}
    with pytest.raises(ArgumentError):
        optimizer_step(ADAM, None, params, {"w": np.zeros(2)}, 0.0)
    with pytest.raises(ContractError):
        optimizer_step(ADAM, None, params, {"v": np.zeros(2)}, 0.1)
    _, state = optimizer_step(ADAM, None, params, {"w": np.zeros(2)}, 0.1)
    with pytest.raises(ContractError):
        optimizer_step(NADAM, state, params, {"w": np.zeros(2)}, 0.1)


def test_early_stopping_returns_best_snapshot():
    stopping = EarlyStopping(patience=1)
    params = np.array([1.0])
    assert not stopping.update(1, 5.0, params)
    params += 1.0
    assert stopping.update(2, 6.0, params)
    assert stopping.best_epoch == 1
    assert stopping.best_score == 5.0
    np.testing.assert_array_equal(stopping.snapshot, [1.0])


def test_train_config_validation():
    with pytest.raises(ArgumentError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ArgumentError):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(ArgumentError):
        TrainConfig(tbptt_length=1)
    assert TrainConfig(clip_threshold=None).clip_threshold is None


def test_fit_is_deterministic(setup):
    topology, folds, config = setup
    first_params, first = fit(topology, folds, config)
    second_params, second = fit(topology, folds, config)

    assert first == second
    for name, array in first_params.to_arrays().items():
        np.testing.assert_array_equal(array, second_params.to_arrays()[name])
    assert len(first.val_mses) == first.stopped_epoch
    assert first.best_val_mse == min(first.val_mses)
    assert first.val_mses[first.best_epoch - 1] == first.best_val_mse
    assert np.isfinite(first.test_mse)


def test_fit_writes_epoch_log(setup, tmp_path):
    topology, folds, config = setup
    path = tmp_path / "epochs.csv"
    epoch_logger = EpochLogger(path=str(path))
    _, report = fit(topology, folds, config, iteration=2, epoch_logger=epoch_logger)
    epoch_logger.close()

    lines = path.read_text().splitlines()
    assert lines[0].startswith("date,epoch")
    assert len(lines) == report.stopped_epoch + 1
    assert epoch_logger.rows == report.stopped_epoch


@pytest.mark.parametrize("kind", OPTIMIZERS)
def test_small_steps_decrease_window_loss(setup, kind):
    topology, folds, _ = setup
    params = init_tnn_parameters(topology, 3, theta_c_mean=-1.0)
    params.pi[0].weights[-1] *= 0.1
    params.pi[0].biases[-1][:] = [0.5, -0.5]
    arrays = params.to_arrays()
    window = folds.train[0].window(0, 6)
    losses, state = [], None
    for _ in range(21):
        loss, grads = tbptt_gradients(topology, params, window)
        losses.append(loss + l2_penalty(topology, params))
        _, state = optimizer_step(kind, state, arrays, grads, 1e-4)
    assert np.all(np.diff(losses) < 0.0), losses


def test_unclipped_epoch_on_one_window_is_gradient_descent(setup):
    topology, folds, _ = setup
    profile = folds.train[0]
    single = replace(folds, train=(profile,))
    config = TrainConfig(
        optimizer=SGD_MOMENTUM,
        learning_rate=1e-3,
        tbptt_length=len(profile),
        clip_threshold=None,
        max_epochs=1,
        patience=1,
        seed=5,
    )
    start = init_tnn_parameters(topology, 5, theta_c_mean=-1.0)
    loss, grads = tbptt_gradients(topology, start, profile)

    trained, report = fit(topology, single, config, params=start)
    assert report.train_losses == [loss]
    for name, array in start.to_arrays().items():
        np.testing.assert_allclose(trained.to_arrays()[name], array - 1e-3 * grads[name], rtol=1e-12, atol=1e-15)


def test_fit_stops_when_most_windows_diverge(setup):
    topology, folds, config = setup
    tight = TrainConfig(optimizer=ADAM, tbptt_length=5, max_epochs=2, divergence_bound=0.1)
    with pytest.raises(TrainingError):
        fit(topology, folds, tight)


def test_repeated_fit_with_one_seed_matches_fit(setup):
    topology, folds, config = setup
    _, report = fit(topology, folds, config)
    summary = repeated_fit(topology, folds, config, [config.seed], iterations=(1,))
    assert summary.mean_test_mse == summary.min_test_mse == summary.max_test_mse == report.test_mse
    assert summary.reports[(1, config.seed)] == report
    assert summary.best_run == (1, config.seed)


def test_repeated_fit_swaps_scored_folds(setup):
    topology, folds, config = setup
    summary = repeated_fit(topology, folds, config, [5, 6])
    assert sorted(summary.reports) == [(1, 5), (1, 6), (2, 5), (2, 6)]

    for seed in (5, 6):
        first, second = summary.reports[(1, seed)], summary.reports[(2, seed)]
        # same training profiles and start values, so the first epoch only differs in scoring
        assert first.train_losses[0] == second.train_losses[0]
        assert first.best_val_mse == pytest.approx(score_profiles(topology, summary.params[(1, seed)], folds.fold_1))
        assert first.test_mse == pytest.approx(score_profiles(topology, summary.params[(1, seed)], folds.fold_2))
        assert second.best_val_mse == pytest.approx(score_profiles(topology, summary.params[(2, seed)], folds.fold_2))
        assert second.test_mse == pytest.approx(score_profiles(topology, summary.params[(2, seed)], folds.fold_1))


def test_repeated_fit_averages_both_folds(setup):
    topology, folds, config = setup
    summary = repeated_fit(topology, folds, config, [5, 6])
    first, second = summary.fold_statistics(1), summary.fold_statistics(2)
    assert first["runs"] == second["runs"] == 2
    assert first["mean_test_mse"] == pytest.approx(np.mean([summary.reports[(1, seed)].test_mse for seed in (5, 6)]))
    assert summary.mean_test_mse == pytest.approx((first["mean_test_mse"] + second["mean_test_mse"]) / 2)
    assert summary.min_test_mse == min(first["min_test_mse"], second["min_test_mse"])
    assert summary.max_test_mse == max(first["max_test_mse"], second["max_test_mse"])

    rows = summary.fold_rows()
    assert [row["iteration"] for row in rows] == ["1", "2", "average"]
    assert rows[-1]["runs"] == 4
    assert rows[-1]["mean_test_mse"] == summary.mean_test_mse


def test_repeated_fit_records_failed_seeds(setup):
    topology, folds, _ = setup
    tight = TrainConfig(tbptt_length=5, max_epochs=2, divergence_bound=0.1)
    summary = repeated_fit(topology, folds, tight, [1, 2])
    assert summary.reports == {}
    assert sorted(summary.failures) == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert all(isinstance(error, TrainingError) for error in summary.failures.values())
    assert summary.mean_test_mse is None
    assert summary.best_run is None
    assert summary.fold_rows() == []


def test_repeated_fit_rejects_unknown_iteration(setup):
    topology, folds, config = setup
    with pytest.raises(ArgumentError):
        repeated_fit(topology, folds, config, [1], iterations=(3,))
