"""
Purpose: Unit tests for the config.py module
"""

import pytest

from ..config import (
    build_analysis_config,
    build_fold_plan,
    build_plant_settings,
    build_schema,
    build_topology,
    build_train_config,
    fold_iteration,
    load_config,
    train_seeds,
)
from ..const import ADAM
from ..nn import ActivationKind
from ..tnn_exceptions import ConfigError

RUN_CONFIG = """
[schema]
exogenous = ["i_s", "motor_speed"]
ancillary = ["coolant"]
targets = ["node_1", "node_2", "node_3"]
sample_time = 0.5

[folds]
train = ["0", "1"]
fold_1 = ["2"]
fold_2 = ["3"]
generalization = ["4"]
iteration = 2

[topology]
pi_layers = [4, 6]
pi_activations = ["tanh", "sigmoid"]
gamma_layers = [5]
loss_mask = ["node_3"]

[train]
optimizer = "adam"
learning_rate = 0.005
seeds = [1, 2, 3]

[plant]
duration = 600.0
disconnect = [[1, 2]]
conductances = [{ pair = [0, 3], kind = "constant", coefficients = [6.0] }]

[analysis]
threshold = 0.05
per_target = ["node_2"]
max_units = 16

[analysis.acceptance]
max_mse_k2 = 5.0
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(RUN_CONFIG, encoding="utf-8")
    return str(path)


def test_sections_become_typed_objects(config_file):
    config = load_config(config_file, environ={})
    schema = build_schema(config)
    assert schema.targets == ("node_1", "node_2", "node_3")
    assert schema.divisors["motor_speed"] == 6000.0

    plan = build_fold_plan(config)
    assert plan.ids("fold-1") == ("2",)
    assert fold_iteration(config) == 2

    topology = build_topology(config, schema)
    pi_layers = topology.pi_specs[0].layers
    assert [layer.width for layer in pi_layers] == [4, 6, 3]
    assert pi_layers[1].activation is ActivationKind.SIGMOID
    assert pi_layers[-1].activation is ActivationKind.LINEAR
    assert topology.gamma_spec.layers[-1].activation is ActivationKind.BIASED_ELU
    assert topology.loss_mask == frozenset({2})

    train = build_train_config(config)
    assert train.optimizer == ADAM
    assert train.learning_rate == 0.005
    assert train_seeds(config) == [1, 2, 3]


def test_plant_overrides(config_file):
    settings = build_plant_settings(load_config(config_file, environ={}))
    index = settings.spec.pair_index
    assert settings.duration == 600.0
    assert settings.spec.conductances[index.slot(1, 2)].coefficients == (0.0,)
    assert settings.spec.conductances[index.slot(0, 3)].coefficients == (6.0,)


def test_analysis_section(config_file):
    config = load_config(config_file, environ={})
    analysis = build_analysis_config(config, build_schema(config))
    assert analysis.threshold == 0.05
    assert analysis.per_target == (1,)
    assert analysis.units == (1, 2, 4, 8, 16)
    assert analysis.acceptance.max_mse_k2 == 5.0
    assert analysis.acceptance.max_recovery_s is None


def test_environment_overrides(config_file):
    environ = {
        "TNN_TRAIN_LEARNING_RATE": "0.001",
        "TNN_ANALYSIS_ACCEPTANCE_MAX_RECOVERY_S": "120",
        "HOME": "/root",
    }
    config = load_config(config_file, environ=environ)
    assert build_train_config(config).learning_rate == 0.001
    assert config.location("train", "learning_rate") == "TNN_TRAIN_LEARNING_RATE"
    assert build_analysis_config(config).acceptance.max_recovery_s == 120.0


def test_flags_accept_only_booleans(config_file, tmp_path):
    config = load_config(config_file, environ={"TNN_TOPOLOGY_DEDICATED_BRANCHES": "true"})
    assert build_topology(config, build_schema(config)).dedicated_branches
    config = load_config(config_file, environ={"TNN_TRAIN_RESET_STATE": "false"})
    assert build_train_config(config).reset_state is False

    config = load_config(config_file, environ={"TNN_TOPOLOGY_DEDICATED_BRANCHES": "False"})
    with pytest.raises(ConfigError) as exception_info:
        build_topology(config, build_schema(config))
    assert "topology.dedicated_branches" in str(exception_info.value)

    path = tmp_path / "flags.toml"
    path.write_text('[train]\nreset_state = "no"\n', encoding="utf-8")
    with pytest.raises(ConfigError) as exception_info:
        build_train_config(load_config(str(path), environ={}))
    assert "train.reset_state" in str(exception_info.value)


def test_errors_name_key_and_origin(config_file, tmp_path):
    with pytest.raises(ConfigError) as exception_info:
        build_train_config(load_config(config_file, environ={"TNN_TRAIN_LEARNING_RATE": "-1"}))
    message = str(exception_info.value)
    assert "train.learning_rate" in message
    assert "TNN_TRAIN_LEARNING_RATE" in message

    with pytest.raises(ConfigError) as exception_info:
        load_config(config_file, environ={"TNN_TRAIN_LEARNIN_RATE": "1"})
    assert "train.learnin_rate" in str(exception_info.value)

    path = tmp_path / "bad.toml"
    path.write_text('[topology]\npi_activations = ["swish"]\n', encoding="utf-8")
    config = load_config(str(path), environ={})
    with pytest.raises(ConfigError) as exception_info:
        build_topology(config, build_schema(config))
    assert "topology.pi_activations" in str(exception_info.value)
    assert str(path) in str(exception_info.value)

    path.write_text("[folds]\niteration = 3\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        fold_iteration(load_config(str(path), environ={}))

    path.write_text("[traing]\nseed = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(path), environ={})


def test_defaults_without_file():
    config = load_config(None, environ={})
    schema = build_schema(config)
    assert schema.targets == ("pm", "stator_yoke", "stator_tooth", "stator_winding")
    assert build_train_config(config).learning_rate == 1e-2
    with pytest.raises(ConfigError):
        build_fold_plan(config)
