"""
Purpose: Unit tests for the tnn.py module
"""

import json

import numpy as np
import pytest

from ..data import make_schema
from ..nn import ActivationKind, LayerSpec
from ..tnn import (
    ConductancePairIndex,
    TnnModel,
    TnnParameters,
    TopologyConfig,
    cell_step,
    count_parameters,
    evaluate_thermal_parameters,
    init_tnn_parameters,
    l2_penalty,
    load_model,
    make_topology,
    rollout,
    save_model,
    score_profiles,
    tbptt_gradients,
)
from ..tnn_exceptions import ArgumentError, ContractError, DivergenceError, NumericalError
from .helpers import (
    constant_parameters,
    linear_topology,
    profile_from,
    random_profile,
    small_schema,
)


@pytest.fixture
def trained_like():
    """m=2, n=1, o=1 network with hidden layers and l2 terms, moved away from its initialization"""
    schema = small_schema()
    config = TopologyConfig(
        pi_hidden=(LayerSpec(3, ActivationKind.TANH, l2_rate=0.01),),
        gamma_hidden=(LayerSpec(3, ActivationKind.SIGMOID, l2_rate=0.02),),
        gamma_output_l2=0.005,
    )
    topology = config.build(schema.m, schema.n, schema.o)
    params = init_tnn_parameters(topology, 11, theta_c_mean=-0.5, theta_c_std=0.1)
    rng = np.random.default_rng(4)
    for array in params.to_arrays().values():
        array += 0.05 * rng.normal(size=array.shape)
    params.pi[0].weights[-1] *= 0.1
    params.pi[0].biases[-1][:] = [0.8, -0.9]
    return schema, topology, params


def test_pair_index_layout():
    index = ConductancePairIndex(6, 4)
    assert len(index) == 15
    assert index.pairs()[:6] == [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 2)]
    assert index.slot(3, 1) == index.slot(1, 3) == 6
    for slot in range(len(index)):
        assert index.slot(*index.pair(slot)) == slot
    assert not index.touches_state(index.slot(4, 5))
    with pytest.raises(ArgumentError):
        index.slot(2, 2)
    with pytest.raises(ArgumentError):
        index.pair(15)


def test_gamma_output_width_follows_pair_count():
    topology = TopologyConfig().build(4, 2, 3)
    assert topology.gamma_spec.output_width == 15
    pruned = TopologyConfig(pruned=frozenset({0, 14})).build(4, 2, 3)
    assert pruned.gamma_spec.output_width == 13
    dedicated = TopologyConfig(dedicated_branches=True).build(4, 2, 3)
    assert [spec.output_width for spec in dedicated.pi_specs] == [1, 1, 1, 1]


def test_kappa_from_theta_c():
    topology = linear_topology(2, 1, 1)
    params = constant_parameters(topology)
    params.theta_c[:] = [0.0, -1.0]
    kappa, _, _ = evaluate_thermal_parameters(topology, params, np.zeros(2), np.zeros(1), np.zeros(1))
    np.testing.assert_allclose(kappa, [1.0, 0.1])


def test_thermal_parameters_are_non_negative_and_masked():
    topology = linear_topology(2, 1, 1, pruned=(1,), loss_mask=(1,))
    params = constant_parameters(topology, pi=-0.7, gamma=-0.2)
    _, pi, gamma = evaluate_thermal_parameters(
        topology, params, np.full((4, 2), 0.3), np.ones((4, 1)), np.ones((4, 1))
    )
    np.testing.assert_allclose(pi, [[0.7, 0.0]] * 4)
    np.testing.assert_allclose(gamma, [[0.2, 0.0, 0.2]] * 4)
    assert np.all(gamma[:, 1] == 0.0)


def test_cell_step_examples():
    topology = linear_topology(1, 1, 0)
    step = cell_step(
        topology, 0.5, np.array([0.0]), np.array([1.0]), np.array([1.0]), np.array([0.0]), np.array([1.0])
    )
    np.testing.assert_allclose(step, [0.5])

    topology = linear_topology(2, 1, 0)
    state = np.array([0.4, 0.4])
    unchanged = cell_step(topology, 0.5, state, np.array([0.4]), np.ones(2), np.zeros(2), np.full(3, 7.0))
    np.testing.assert_array_equal(unchanged, state)
    still = cell_step(topology, 0.5, np.array([0.1, 0.9]), np.array([0.3]), np.ones(2), np.zeros(2), np.zeros(3))
    np.testing.assert_array_equal(still, [0.1, 0.9])

    with pytest.raises(NumericalError) as exception_info:
        cell_step(topology, 0.5, np.array([np.nan, 0.0]), np.array([0.3]), np.ones(2), np.zeros(2), np.zeros(3), step=7)
    assert exception_info.value.step == 7


def test_rollout_follows_first_order_lag():
    schema = make_schema(exogenous=(), ancillary=("coolant",), targets=("pm",), sample_time=0.5)
    topology = linear_topology(1, 1, 0)
    params = constant_parameters(topology, gamma=0.2)
    length = 40
    profile = profile_from(schema, np.zeros((length, 0)), np.ones(length), np.zeros(length))
    trajectory = rollout(topology, params, profile, [0.0])

    expected = 1.0 - (1.0 - 0.5 * 0.2) ** np.arange(length)
    np.testing.assert_allclose(trajectory[:, 0], expected, rtol=1e-12, atol=1e-14)
    assert np.all(np.diff(trajectory[:, 0]) > 0.0)


def test_rollout_isolated_nodes_stay_constant():
    schema = small_schema()
    topology = linear_topology(2, 1, 1, pruned=(0, 1, 2))
    assert topology.gamma_spec is None
    params = constant_parameters(topology)
    profile = random_profile(schema, 20, 3)
    trajectory = rollout(topology, params, profile, [0.2, 0.6])
    np.testing.assert_array_equal(trajectory, np.tile([0.2, 0.6], (20, 1)))


def test_rollout_conserves_weighted_heat_without_sources():
    schema = make_schema(exogenous=("i_s",), ancillary=(), targets=("pm", "winding", "yoke"))
    topology = linear_topology(3, 0, 1)
    params = constant_parameters(topology, gamma=0.05, theta_c=0.0)
    params.theta_c[:] = [0.0, -0.3, -0.6]
    profile = random_profile(schema, 30, 5)
    trajectory = rollout(topology, params, profile, [0.1, 0.5, 0.9])

    weighted = trajectory @ (1.0 / np.power(10.0, params.theta_c))
    np.testing.assert_allclose(weighted, weighted[0], rtol=1e-12)


def test_rollout_divergence_reports_step():
    schema = make_schema(exogenous=(), ancillary=("coolant",), targets=("pm",), sample_time=0.5)
    topology = linear_topology(1, 1, 0)
    params = constant_parameters(topology, gamma=10.0)
    profile = profile_from(schema, np.zeros((6, 0)), np.ones(6), np.zeros(6))
    with pytest.raises(DivergenceError) as exception_info:
        rollout(topology, params, profile, [0.0])
    assert exception_info.value.step == 2


def random_instance(m, n, o, kind, seed, dedicated_branches=False, pruned=(), loss_mask=(), pi_depth=1):
    """
    Schema, topology and parameters of an m/n/o network with the given hidden activation.
    The pi outputs stay near +-0.5, away from the kink of the absolute value.
    """
    schema = make_schema(
        exogenous=("i_s",)[:o], ancillary=("coolant", "ambient")[:n], targets=("t_1", "t_2", "t_3")[:m]
    )
    topology = TopologyConfig(
        pi_hidden=tuple(LayerSpec(3, kind, l2_rate=0.01) for _ in range(pi_depth)),
        gamma_hidden=(LayerSpec(3, kind, l2_rate=0.02),),
        gamma_output_l2=0.005,
        dedicated_branches=dedicated_branches,
        pruned=frozenset(pruned),
        loss_mask=frozenset(loss_mask),
    ).build(m, n, o)
    params = init_tnn_parameters(topology, seed, theta_c_mean=-1.5, theta_c_std=0.1)
    rng = np.random.default_rng(seed + 100)
    for array in params.to_arrays().values():
        array += 0.05 * rng.normal(size=array.shape)
    signs = np.where(np.arange(m) % 2 == 0, 0.5, -0.5)
    offset = 0
    for branch in params.pi:
        branch.weights[-1] *= 0.01
        width = len(branch.biases[-1])
        branch.biases[-1][:] = signs[offset : offset + width]
        offset += width
    return schema, topology, params


def assert_tbptt_matches_finite_differences(topology, params, window, initial_state=None, h=1e-6):
    def objective():
        loss, _ = tbptt_gradients(topology, params, window, initial_state=initial_state)
        return loss + l2_penalty(topology, params)

    _, grads = tbptt_gradients(topology, params, window, initial_state=initial_state)
    for name, array in params.to_arrays().items():
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + h
            upper = objective()
            array[index] = original - h
            lower = objective()
            array[index] = original
            numeric = (upper - lower) / (2 * h)
            assert grads[name][index] == pytest.approx(numeric, rel=1e-4, abs=1e-9), (name, index)


def test_tbptt_gradients_match_finite_differences(trained_like):
    schema, topology, params = trained_like
    window = random_profile(schema, 6, 8)
    assert_tbptt_matches_finite_differences(topology, params, window, initial_state=np.array([0.45, 0.55]))


@pytest.mark.parametrize("kind", list(ActivationKind))
@pytest.mark.parametrize("m, n, o", [(1, 0, 0), (1, 1, 1), (2, 0, 1), (2, 2, 0), (3, 1, 1), (3, 2, 1)])
def test_tbptt_gradients_over_shapes(m, n, o, kind):
    seed = 10 * m + 3 * n + o
    schema, topology, params = random_instance(m, n, o, kind, seed)
    assert count_parameters(topology) == sum(array.size for array in params.to_arrays().values())
    length = int(np.random.default_rng(seed).integers(2, 9))
    assert_tbptt_matches_finite_differences(topology, params, random_profile(schema, length, seed))


@pytest.mark.parametrize("dedicated_branches", [False, True])
@pytest.mark.parametrize("kind", list(ActivationKind))
def test_tbptt_gradients_with_pruning_and_loss_mask(kind, dedicated_branches):
    schema, topology, params = random_instance(
        2, 1, 1, kind, 21, dedicated_branches=dedicated_branches, pruned={1}, loss_mask={0}, pi_depth=2
    )
    assert len(topology.pi_specs) == (2 if dedicated_branches else 1)
    assert topology.gamma_spec.output_width == 2
    assert_tbptt_matches_finite_differences(topology, params, random_profile(schema, 7, 22))


def test_tbptt_perfect_prediction():
    schema = small_schema()
    topology = linear_topology(2, 1, 1)
    params = constant_parameters(topology, pi=0.01, gamma=0.02, theta_c=-1.0)
    profile = random_profile(schema, 10, 1)
    trajectory = rollout(topology, params, profile, profile.targets[0])

    loss, grads, final = tbptt_gradients(
        topology, params, profile, targets=trajectory, return_final_state=True
    )
    assert loss == 0.0
    assert all(not array.any() for array in grads.values())
    np.testing.assert_array_equal(final, trajectory[-1])
    with pytest.raises(ArgumentError):
        tbptt_gradients(topology, params, profile, max_length=5)


def test_parameter_count_matches_serialized_arrays(trained_like):
    _, topology, params = trained_like
    assert count_parameters(topology) == sum(array.size for array in params.to_arrays().values())


def test_initialization_is_deterministic(trained_like):
    _, topology, _ = trained_like
    first = init_tnn_parameters(topology, 3).to_arrays()
    second = init_tnn_parameters(topology, 3).to_arrays()
    other = init_tnn_parameters(topology, 4).to_arrays()
    assert all(np.array_equal(first[name], second[name]) for name in first)
    assert not np.array_equal(first["gamma.w_0"], other["gamma.w_0"])


def test_saved_model_reproduces_rollouts(trained_like, tmp_path):
    schema, topology, params = trained_like
    path = str(tmp_path / "model.json")
    save_model(TnnModel(schema, topology, params, {"seed": 11}), path)
    model = load_model(path)

    profile = random_profile(schema, 15, 2)
    np.testing.assert_array_equal(
        rollout(model.topology, model.params, profile, profile.targets[0]),
        rollout(topology, params, profile, profile.targets[0]),
    )
    assert model.metadata == {"seed": 11}
    assert model.node_names == ("pm", "winding", "coolant")

    with open(path, "r", encoding="utf-8") as handle:
        document = json.load(handle)
    document["format"] = "something-else"
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle)
    with pytest.raises(ContractError):
        load_model(path)


def test_parameters_from_arrays(trained_like):
    _, topology, params = trained_like
    restored = TnnParameters.from_arrays(topology, params.copy().to_arrays())
    assert set(restored.to_arrays()) == set(params.to_arrays())


def test_score_profiles_of_exact_model():
    schema = small_schema()
    topology = linear_topology(2, 1, 1)
    params = constant_parameters(topology, gamma=0.05, theta_c=-1.0)
    profile = random_profile(schema, 10, 1)
    trajectory = rollout(topology, params, profile, profile.targets[0])
    exact = profile_from(schema, profile.exogenous, profile.ancillary, trajectory)
    assert score_profiles(topology, params, [exact]) == pytest.approx(0.0, abs=1e-30)


def test_make_topology_replaces_output_width():
    topology = make_topology(
        2, 1, 1, pi_layers=(LayerSpec(4), LayerSpec(9)), gamma_layers=(LayerSpec(9, ActivationKind.BIASED_ELU),)
    )
    assert topology.pi_specs[0].output_width == 2
    assert topology.gamma_spec.output_width == 3
    assert topology.gamma_spec.layers[-1].activation is ActivationKind.BIASED_ELU
