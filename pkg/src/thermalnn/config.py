"""
Purpose: Read the TOML run configuration and turn it into typed objects.

    Every key may be overridden by an environment variable TNN_<SECTION>_<KEY>, e.g.
    TNN_TRAIN_LEARNING_RATE=0.001 or TNN_ANALYSIS_ACCEPTANCE_MAX_MSE_K2=5. Override values are
    read as TOML values and fall back to plain strings.
"""

import copy
import os
from dataclasses import dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .analysis import AcceptanceCriteria, exponential_unit_grid
from .const import (
    CONFIG_SECTIONS,
    DEFAULT_LAYER_RANGE,
    DEFAULT_MAX_UNITS,
    DEFAULT_MEDIAN_SAMPLES,
    DEFAULT_MSE_CUTOFF,
    DEFAULT_OFFSETS,
    DEFAULT_SAMPLE_TIME,
    ENV_PREFIX,
    GROUND_TRUTH,
    INIT_MODES,
    RECOVERY_BAND,
    SECTION_ANALYSIS,
    SECTION_FOLDS,
    SECTION_PLANT,
    SECTION_SCHEMA,
    SECTION_TOPOLOGY,
    SECTION_TRAIN,
)
from .data import FoldPlan, make_schema
from .nn import ActivationKind, LayerSpec
from .plant import ConductanceFunction, LossFunction, default_plant_spec, disconnected_pair_spec
from .tnn import TopologyConfig
from .tnn_exceptions import ArgumentError, ConfigError, ThermalNNError
from .train import TrainConfig

ACCEPTANCE = "acceptance"

KNOWN_KEYS = {
    SECTION_SCHEMA: {
        "exogenous",
        "ancillary",
        "targets",
        "divisors",
        "sample_time",
        "profile_column",
    },
    SECTION_FOLDS: {"train", "fold_1", "fold_2", "generalization", "iteration"},
    SECTION_TOPOLOGY: {
        "pi_layers",
        "pi_activations",
        "pi_l2",
        "gamma_layers",
        "gamma_activations",
        "gamma_l2",
        "pi_output",
        "gamma_output",
        "pi_output_l2",
        "gamma_output_l2",
        "dedicated_branches",
        "pruned",
        "loss_mask",
        "theta_c_mean",
        "theta_c_std",
    },
    SECTION_TRAIN: {
        "optimizer",
        "learning_rate",
        "tbptt_length",
        "clip_threshold",
        "max_epochs",
        "patience",
        "seed",
        "seeds",
        "subsequence_length",
        "reset_state",
        "divergence_bound",
    },
    SECTION_PLANT: {
        "duration",
        "sample_time",
        "seed",
        "profile_count",
        "substeps",
        "capacitances",
        "conductances",
        "losses",
        "disconnect",
        "initial_state",
    },
    SECTION_ANALYSIS: {
        "mse_cutoff",
        "median_samples",
        "seed",
        "threshold",
        "offsets",
        "per_target",
        "band",
        "layer_range",
        "max_units",
        "units",
        "budget",
        "init_mode",
        "fixed_value",
        ACCEPTANCE,
    },
}
ACCEPTANCE_KEYS = {"max_mse_k2", "max_linf_k", "max_recovery_s"}


def _parse_value(text):
    try:
        return tomllib.loads("value = {}".format(text))["value"]
    except tomllib.TOMLDecodeError:
        return text


class Config(object):
    """
    The resolved configuration tree with the origin of every key, so errors can name the
    file or environment variable a bad value came from.
    """

    def __init__(self, tree=None, path=None, environ=None):
        self.path = path
        self.tree = copy.deepcopy(tree or {})
        self._origins = {}
        for section, values in self.tree.items():
            if section not in CONFIG_SECTIONS:
                raise ConfigError("unknown section", key=section, location=path)
            if not isinstance(values, dict):
                raise ConfigError("a section must be a table", key=section, location=path)
            for key in values:
                self._origins[(section, key)] = path
                if key not in KNOWN_KEYS[section]:
                    raise ConfigError("unknown key", key=self.key_name(section, key), location=path)
            for key in values.get(ACCEPTANCE, {}) if section == SECTION_ANALYSIS else ():
                self._origins[(ACCEPTANCE, key)] = path
                if key not in ACCEPTANCE_KEYS:
                    raise ConfigError("unknown key", key="analysis.acceptance.{}".format(key), location=path)
        self._apply_environment(os.environ if environ is None else environ)

    @staticmethod
    def key_name(section, key):
        return "{}.{}".format(section, key)

    def _apply_environment(self, environ):
        for name in sorted(environ):
            if not name.startswith(ENV_PREFIX):
                continue
            rest = name[len(ENV_PREFIX) :].lower()
            sections = [section for section in CONFIG_SECTIONS if rest.startswith(section + "_")]
            if not sections:
                continue
            section = max(sections, key=len)
            key = rest[len(section) + 1 :]
            value = _parse_value(environ[name])
            target = self.tree.setdefault(section, {})
            if section == SECTION_ANALYSIS and key.startswith(ACCEPTANCE + "_"):
                key = key[len(ACCEPTANCE) + 1 :]
                if key not in ACCEPTANCE_KEYS:
                    raise ConfigError("unknown key", key="analysis.acceptance.{}".format(key), location=name)
                target.setdefault(ACCEPTANCE, {})[key] = value
                self._origins[(ACCEPTANCE, key)] = name
                continue
            if key not in KNOWN_KEYS[section]:
                raise ConfigError("unknown key", key=self.key_name(section, key), location=name)
            target[key] = value
            self._origins[(section, key)] = name

    def location(self, section, key):
        return self._origins.get((section, key))

    def section(self, name):
        return self.tree.get(name, {})

    def has(self, section, key):
        return key in self.section(section)

    def get(self, section, key, default=None, cast=None):
        """Value of [section].key converted with cast; a failing conversion names the key"""
        if key not in self.section(section):
            return default
        value = self.section(section)[key]
        if cast is None:
            return value
        try:
            return cast(value)
        except (TypeError, ValueError) as error:
            raise self.error("invalid value {!r}: {}".format(value, error), section, key)

    def error(self, message, section, key):
        return ConfigError(message, key=self.key_name(section, key), location=self.location(section, key))

    def snapshot(self):
        return copy.deepcopy(self.tree)


def load_config(path=None, environ=None):
    """
    :param str path: TOML file, None for built-in defaults only
    :param dict environ: environment used for overrides, os.environ when None
    :return Config: the resolved configuration
    """
    tree = {}
    if path is not None:
        try:
            with open(path, "rb") as handle:
                tree = tomllib.load(handle)
        except tomllib.TOMLDecodeError as error:
            raise ConfigError("invalid TOML: {}".format(error), key="-", location=path)
    return Config(tree, path=path, environ=environ)


def _flag(value):
    if not isinstance(value, bool):
        raise TypeError("expected true or false")
    return value


def _string_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return [str(item) for item in value]


def _float_list(value):
    if isinstance(value, str):
        return [float(item) for item in value.split(",") if item.strip()]
    return [float(item) for item in value]


def _int_list(value):
    return [int(item) for item in _float_list(value)]


def _guard(config, section, key, function, *args, **kwargs):
    try:
        return function(*args, **kwargs)
    except ThermalNNError as error:
        if isinstance(error, ConfigError):
            raise
        raise config.error(str(error), section, key)


def build_schema(config):
    section = SECTION_SCHEMA
    kwargs = {}
    for key in ("exogenous", "ancillary", "targets"):
        if config.has(section, key):
            kwargs[key] = tuple(config.get(section, key, cast=_string_list))
    if config.has(section, "divisors"):
        divisors = config.get(section, "divisors")
        if not isinstance(divisors, dict):
            raise config.error("divisors must be a table of channel = divisor", section, "divisors")
        kwargs["divisors"] = {name: float(value) for name, value in divisors.items()}
    kwargs["sample_time"] = config.get(section, "sample_time", DEFAULT_SAMPLE_TIME, float)
    if config.has(section, "profile_column"):
        kwargs["profile_column"] = config.get(section, "profile_column", cast=str)
    return _guard(config, section, "targets", make_schema, **kwargs)


def build_fold_plan(config):
    section = SECTION_FOLDS
    if not config.section(section):
        raise ConfigError("a fold plan is required", key=section, location=config.path)
    sets = {
        key: config.get(section, key, [], _string_list)
        for key in ("train", "fold_1", "fold_2", "generalization")
    }
    return _guard(config, section, "generalization", FoldPlan.from_sets, **sets)


def fold_iteration(config):
    iteration = config.get(SECTION_FOLDS, "iteration", 1, int)
    if iteration not in (1, 2):
        raise config.error("iteration must be 1 or 2", SECTION_FOLDS, "iteration")
    return iteration


def _hidden_layers(config, prefix, default_width):
    section = SECTION_TOPOLOGY
    widths = config.get(section, prefix + "_layers", [default_width], _int_list)
    activations = config.get(section, prefix + "_activations", ["tanh"], _string_list)
    rates = config.get(section, prefix + "_l2", [0.0], _float_list)

    def pick(values, index):
        return values[min(index, len(values) - 1)]

    layers = []
    for index, width in enumerate(widths):
        layers.append(
            _guard(
                config,
                section,
                prefix + "_layers",
                LayerSpec,
                width,
                _guard(config, section, prefix + "_activations", _activation, pick(activations, index)),
                pick(rates, index),
            )
        )
    return tuple(layers)


def _activation(name):
    try:
        return ActivationKind(name)
    except ValueError:
        raise ArgumentError(
            "unknown activation {!r}, expected one of {}".format(
                name, ", ".join(kind.value for kind in ActivationKind)
            )
        )


def _node_indices(config, section, key, names):
    indices = []
    items = config.get(section, key, [])
    if isinstance(items, str):
        items = _string_list(items)
    for item in items:
        if isinstance(item, int):
            indices.append(item)
        elif item in names:
            indices.append(names.index(item))
        else:
            raise config.error("unknown target {!r}".format(item), section, key)
    return indices


def build_topology_config(config, schema):
    section = SECTION_TOPOLOGY
    defaults = TopologyConfig()
    return TopologyConfig(
        pi_hidden=_hidden_layers(config, "pi", 8),
        gamma_hidden=_hidden_layers(config, "gamma", 8),
        pi_output=_guard(config, section, "pi_output", _activation, config.get(section, "pi_output", defaults.pi_output)),
        gamma_output=_guard(
            config, section, "gamma_output", _activation, config.get(section, "gamma_output", defaults.gamma_output)
        ),
        pi_output_l2=config.get(section, "pi_output_l2", 0.0, float),
        gamma_output_l2=config.get(section, "gamma_output_l2", 0.0, float),
        dedicated_branches=config.get(section, "dedicated_branches", False, _flag),
        pruned=frozenset(config.get(section, "pruned", [], _int_list)),
        loss_mask=frozenset(_node_indices(config, section, "loss_mask", list(schema.targets))),
    )


def build_topology(config, schema):
    section = SECTION_TOPOLOGY
    return _guard(
        config,
        section,
        "pi_layers",
        build_topology_config(config, schema).build,
        schema.m,
        schema.n,
        schema.o,
    )


def theta_c_init(config):
    return (
        config.get(SECTION_TOPOLOGY, "theta_c_mean", -3.0, float),
        config.get(SECTION_TOPOLOGY, "theta_c_std", 0.1, float),
    )


def build_train_config(config):
    section = SECTION_TRAIN
    defaults = TrainConfig()
    kwargs = dict(
        optimizer=config.get(section, "optimizer", defaults.optimizer, str),
        learning_rate=config.get(section, "learning_rate", defaults.learning_rate, float),
        tbptt_length=config.get(section, "tbptt_length", defaults.tbptt_length, int),
        clip_threshold=config.get(section, "clip_threshold", defaults.clip_threshold, float) or None,
        max_epochs=config.get(section, "max_epochs", defaults.max_epochs, int),
        patience=config.get(section, "patience", defaults.patience, int),
        seed=config.get(section, "seed", defaults.seed, int),
        subsequence_length=config.get(section, "subsequence_length", None, int) or None,
        reset_state=config.get(section, "reset_state", defaults.reset_state, _flag),
        divergence_bound=config.get(section, "divergence_bound", defaults.divergence_bound, float),
    )
    for key in kwargs:
        if not config.has(section, key):
            continue
        try:
            TrainConfig(**{key: kwargs[key]})
        except ThermalNNError as error:
            raise config.error(str(error), section, key)
    return TrainConfig(**kwargs)


def train_seeds(config):
    if config.has(SECTION_TRAIN, "seeds"):
        return config.get(SECTION_TRAIN, "seeds", cast=_int_list)
    return [config.get(SECTION_TRAIN, "seed", 0, int)]


@dataclass(frozen=True)
class PlantSettings:
    spec: object
    duration: float = 7200.0
    sample_time: float = DEFAULT_SAMPLE_TIME
    seed: int = 0
    profile_count: int = 1


def _function(config, key, entry, cls):
    if not isinstance(entry, dict):
        raise config.error("entries must be tables", SECTION_PLANT, key)
    try:
        return cls(
            kind=entry.get("kind", "constant"),
            coefficients=tuple(entry.get("coefficients", (0.0,))),
            channel=entry.get("channel"),
        )
    except ThermalNNError as error:
        raise config.error(str(error), SECTION_PLANT, key)


def build_plant_settings(config):
    """The default plant with the overrides of the [plant] section"""
    section = SECTION_PLANT
    spec = default_plant_spec()
    changes = {}
    if config.has(section, "capacitances"):
        changes["capacitances"] = tuple(config.get(section, "capacitances", cast=_float_list))
    if config.has(section, "substeps"):
        changes["substeps"] = config.get(section, "substeps", cast=int)
    if config.has(section, "initial_state"):
        changes["initial_state"] = tuple(config.get(section, "initial_state", cast=_float_list))
    if config.has(section, "conductances"):
        conductances = list(spec.conductances)
        for entry in config.get(section, "conductances"):
            pair = entry.get("pair") if isinstance(entry, dict) else None
            if not pair or len(pair) != 2:
                raise config.error("each conductance needs a pair = [i, j]", section, "conductances")
            slot = _guard(config, section, "conductances", spec.pair_index.slot, *pair)
            conductances[slot] = _function(config, "conductances", entry, ConductanceFunction)
        changes["conductances"] = tuple(conductances)
    if config.has(section, "losses"):
        losses = list(spec.losses)
        for entry in config.get(section, "losses"):
            node = entry.get("node") if isinstance(entry, dict) else None
            if node is None or not 0 <= node < spec.m:
                raise config.error("each loss needs a node index", section, "losses")
            losses[node] = _function(config, "losses", entry, LossFunction)
        changes["losses"] = tuple(losses)

    if changes:
        spec = _guard(config, section, sorted(changes)[0], _replace_spec, spec, changes)
    for pair in config.get(section, "disconnect", []):
        spec = _guard(config, section, "disconnect", disconnected_pair_spec, spec, tuple(pair))

    settings = PlantSettings(
        spec=spec,
        duration=config.get(section, "duration", 7200.0, float),
        sample_time=config.get(section, "sample_time", DEFAULT_SAMPLE_TIME, float),
        seed=config.get(section, "seed", 0, int),
        profile_count=config.get(section, "profile_count", 1, int),
    )
    if settings.sample_time <= 0.0:
        raise config.error("sample time must be positive", section, "sample_time")
    if settings.duration < 2 * settings.sample_time:
        raise config.error("duration must cover at least two samples", section, "duration")
    if settings.profile_count < 1:
        raise config.error("at least one profile is required", section, "profile_count")
    return settings


def _replace_spec(spec, changes):
    return replace(spec, **changes)


@dataclass(frozen=True)
class AnalysisConfig:
    mse_cutoff: float = DEFAULT_MSE_CUTOFF
    median_samples: int = DEFAULT_MEDIAN_SAMPLES
    seed: int = 0
    threshold: float = None
    offsets: tuple = DEFAULT_OFFSETS
    per_target: tuple = None
    band: float = RECOVERY_BAND
    layer_range: tuple = DEFAULT_LAYER_RANGE
    units: tuple = ()
    budget: int = None
    init_mode: str = GROUND_TRUTH
    fixed_value: float = None
    acceptance: AcceptanceCriteria = field(default_factory=AcceptanceCriteria)


def build_analysis_config(config, schema=None):
    section = SECTION_ANALYSIS
    layer_range = tuple(config.get(section, "layer_range", list(DEFAULT_LAYER_RANGE), _int_list))
    if len(layer_range) != 2 or not 1 <= layer_range[0] <= layer_range[1]:
        raise config.error("layer_range must be [low, high] with 1 <= low <= high", section, "layer_range")
    if config.has(section, "units"):
        units = tuple(config.get(section, "units", cast=_int_list))
    else:
        units = tuple(exponential_unit_grid(config.get(section, "max_units", DEFAULT_MAX_UNITS, int)))
    init_mode = config.get(section, "init_mode", GROUND_TRUTH, str)
    if init_mode not in INIT_MODES:
        raise config.error("init_mode must be one of {}".format(", ".join(INIT_MODES)), section, "init_mode")
    per_target = None
    if config.has(section, "per_target"):
        names = list(schema.targets) if schema is not None else []
        per_target = tuple(_node_indices(config, section, "per_target", names))
    threshold = config.get(section, "threshold", None, float)
    if threshold is not None and threshold < 0.0:
        raise config.error("threshold must be non-negative", section, "threshold")
    budget = config.get(section, "budget", None, int)
    if budget is not None and budget < 1:
        raise config.error("budget must be at least 1", section, "budget")

    acceptance = config.section(section).get(ACCEPTANCE, {})
    criteria = {}
    for key in ACCEPTANCE_KEYS:
        if key in acceptance:
            try:
                criteria[key] = float(acceptance[key])
            except (TypeError, ValueError):
                raise ConfigError(
                    "invalid value {!r}".format(acceptance[key]),
                    key="analysis.acceptance.{}".format(key),
                    location=config.location(ACCEPTANCE, key),
                )

    return AnalysisConfig(
        mse_cutoff=config.get(section, "mse_cutoff", DEFAULT_MSE_CUTOFF, float),
        median_samples=config.get(section, "median_samples", DEFAULT_MEDIAN_SAMPLES, int),
        seed=config.get(section, "seed", 0, int),
        threshold=threshold,
        offsets=tuple(config.get(section, "offsets", list(DEFAULT_OFFSETS), _float_list)),
        per_target=per_target,
        band=config.get(section, "band", RECOVERY_BAND, float),
        layer_range=layer_range,
        units=units,
        budget=budget,
        init_mode=init_mode,
        fixed_value=config.get(section, "fixed_value", None, float),
        acceptance=AcceptanceCriteria(**criteria),
    )
