"""
Purpose: The thermal neural network cell, its rollout over a profile and its truncated
    backpropagation through time.

    Nodes 0..m-1 carry the estimated temperatures (the state), nodes m..m+n-1 the measured
    ancillary temperatures. One explicit Euler step reads

        s_i[k+1] = s_i + T_s * kappa_i * (pi_i + sum_{j != i} gamma_ij * (T_j - s_i))

    where T holds all m+n node temperatures, kappa = 10**theta_c, and pi and gamma are the
    absolute outputs of two networks fed with the state (through W_r) and phi = [ancillary, xi].
"""

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .const import (
    BIASED_ELU,
    DEFAULT_THETA_C_MEAN,
    DEFAULT_THETA_C_STD,
    DIVERGENCE_BOUND,
    JSON_DATA,
    JSON_FORMAT,
    JSON_FORMAT_VERSION,
    JSON_METADATA,
    JSON_PARAMETERS,
    JSON_SCHEMA,
    JSON_SHAPE,
    JSON_TOPOLOGY,
    LINEAR,
    MODEL_FORMAT,
    MODEL_FORMAT_VERSION,
    TANH,
)
from .data import ChannelSchema
from .nn import (
    LayerSpec,
    MlpParameters,
    MlpSpec,
    init_parameters,
    l2_penalty as mlp_l2_penalty,
    mlp_backward,
    mlp_forward,
)
from .tnn_exceptions import (
    ArgumentError,
    ContractError,
    DivergenceError,
    NumericalError,
    ShapeError,
)
from .utils import as_vector

logger = logging.getLogger(__name__)

LN_10 = np.log(10.0)


class ConductancePairIndex(object):
    """
    Flat addressing of the unordered node pairs {i, j}, i < j, in lexicographic order:
    (0,1), (0,2), ..., (0,N-1), (1,2), ...
    """

    def __init__(self, node_count, state_count=None):
        if node_count < 1:
            raise ArgumentError("a network needs at least one node")
        self.node_count = int(node_count)
        self.state_count = self.node_count if state_count is None else int(state_count)
        self.pair_count = self.node_count * (self.node_count - 1) // 2
        self._pairs = [
            (i, j) for i in range(self.node_count) for j in range(i + 1, self.node_count)
        ]

        # slot of (i, j) for every state node i, -1 on the diagonal
        self.state_slots = np.full((self.state_count, self.node_count), -1, dtype=np.int64)
        for i in range(self.state_count):
            for j in range(self.node_count):
                if i != j:
                    self.state_slots[i, j] = self.slot(i, j)
        self.off_diagonal = self.state_slots >= 0
        self.safe_slots = np.where(self.off_diagonal, self.state_slots, 0)

    def __len__(self):
        return self.pair_count

    def slot(self, i, j):
        if i == j:
            raise ArgumentError("a node has no conductance to itself ({})".format(i))
        if i > j:
            i, j = j, i
        if i < 0 or j >= self.node_count:
            raise ArgumentError("pair ({}, {}) is outside 0..{}".format(i, j, self.node_count - 1))
        n = self.node_count
        return i * n - i * (i + 1) // 2 + (j - i - 1)

    def pair(self, slot):
        if not 0 <= slot < self.pair_count:
            raise ArgumentError("slot {} is outside 0..{}".format(slot, self.pair_count - 1))
        return self._pairs[slot]

    def pairs(self):
        return list(self._pairs)

    def touches_state(self, slot):
        """False for ancillary-ancillary pairs, which never enter the update"""
        return self.pair(slot)[0] < self.state_count


@dataclass(frozen=True)
class TopologyConfig:
    """
    Architecture choices independent of the data dimensions. Hidden layers are LayerSpec
    tuples; the output layers get the given activations and l2 rates.
    """

    pi_hidden: tuple = (LayerSpec(8, TANH),)
    gamma_hidden: tuple = (LayerSpec(8, TANH),)
    pi_output: str = LINEAR
    gamma_output: str = BIASED_ELU
    pi_output_l2: float = 0.0
    gamma_output_l2: float = 0.0
    dedicated_branches: bool = False
    pruned: frozenset = frozenset()
    loss_mask: frozenset = frozenset()

    def build(self, m, n, o):
        """:return TnnTopology: the topology for m targets, n ancillary and o exogenous channels"""
        return make_topology(
            m,
            n,
            o,
            pi_layers=tuple(self.pi_hidden) + (LayerSpec(1, self.pi_output, self.pi_output_l2),),
            gamma_layers=tuple(self.gamma_hidden)
            + (LayerSpec(1, self.gamma_output, self.gamma_output_l2),),
            dedicated_branches=self.dedicated_branches,
            pruned=self.pruned,
            loss_mask=self.loss_mask,
        )


def make_topology(
    m, n, o, pi_layers, gamma_layers, dedicated_branches=False, pruned=(), loss_mask=()
):
    """
    Builds a topology; the width of the last entry of pi_layers and gamma_layers is replaced by
    the required output width. gamma_layers may be None when every slot is pruned.
    """
    index = ConductancePairIndex(m + n, m)
    pruned = frozenset(int(slot) for slot in pruned)
    active = len(index) - len(pruned)
    if active > 0 and gamma_layers is None:
        raise ArgumentError("gamma layers are required while {} slots are not pruned".format(active))

    def with_output(layers, width):
        layers = tuple(layers)
        last = layers[-1]
        return layers[:-1] + (LayerSpec(width, last.activation, last.l2_rate),)

    if dedicated_branches:
        pi_specs = tuple(MlpSpec(m, n + o, with_output(pi_layers, 1)) for _ in range(m))
    else:
        pi_specs = (MlpSpec(m, n + o, with_output(pi_layers, m)),)
    gamma_spec = MlpSpec(m, n + o, with_output(gamma_layers, active)) if active > 0 else None

    return TnnTopology(
        m=m,
        n=n,
        o=o,
        pi_specs=pi_specs,
        gamma_spec=gamma_spec,
        dedicated_branches=dedicated_branches,
        pruned=pruned,
        loss_mask=frozenset(int(node) for node in loss_mask),
    )


@dataclass(frozen=True)
class TnnTopology:
    """
    m state nodes, n ancillary nodes, o observables. pi_specs holds one network with m outputs,
    or m single-output networks when dedicated_branches is set. The gamma network has one
    output per pair slot that is not pruned; it is None when every slot is pruned.
    """

    m: int
    n: int
    o: int
    pi_specs: tuple
    gamma_spec: object
    dedicated_branches: bool = False
    pruned: frozenset = frozenset()
    loss_mask: frozenset = frozenset()
    pair_index: ConductancePairIndex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1 or self.n < 0 or self.o < 0:
            raise ArgumentError(
                "invalid dimensions m={}, n={}, o={}".format(self.m, self.n, self.o)
            )
        index = ConductancePairIndex(self.m + self.n, self.m)
        object.__setattr__(self, "pair_index", index)
        object.__setattr__(self, "pi_specs", tuple(self.pi_specs))
        object.__setattr__(self, "pruned", frozenset(self.pruned))
        object.__setattr__(self, "loss_mask", frozenset(self.loss_mask))

        for slot in self.pruned:
            if not 0 <= slot < len(index):
                raise ArgumentError("pruned slot {} is outside 0..{}".format(slot, len(index) - 1))
        for node in self.loss_mask:
            if not 0 <= node < self.m:
                raise ArgumentError("loss mask node {} is outside 0..{}".format(node, self.m - 1))

        expected_pi = [1] * self.m if self.dedicated_branches else [self.m]
        if [spec.output_width for spec in self.pi_specs] != expected_pi:
            raise ShapeError("pi networks must have output widths {}".format(expected_pi))
        specs = list(self.pi_specs)
        if self.gamma_spec is not None:
            if self.gamma_spec.output_width != len(self.active_slots):
                raise ShapeError(
                    "gamma network must have {} outputs, got {}".format(
                        len(self.active_slots), self.gamma_spec.output_width
                    )
                )
            specs.append(self.gamma_spec)
        elif len(self.active_slots):
            raise ShapeError("a gamma network is required while conductances are not all pruned")
        for spec in specs:
            if spec.state_width != self.m or spec.input_width != self.n + self.o:
                raise ShapeError(
                    "networks must take {} state and {} other inputs".format(self.m, self.n + self.o)
                )

    @cached_property
    def active_slots(self):
        return np.array(
            [slot for slot in range(len(self.pair_index)) if slot not in self.pruned],
            dtype=np.int64,
        )

    @cached_property
    def pi_mask(self):
        return np.array([0.0 if node in self.loss_mask else 1.0 for node in range(self.m)])

    def to_dict(self):
        return {
            "m": self.m,
            "n": self.n,
            "o": self.o,
            "pi_specs": [spec.to_dict() for spec in self.pi_specs],
            "gamma_spec": None if self.gamma_spec is None else self.gamma_spec.to_dict(),
            "dedicated_branches": self.dedicated_branches,
            "pruned": sorted(self.pruned),
            "loss_mask": sorted(self.loss_mask),
        }

    @classmethod
    def from_dict(cls, raw):
        gamma = raw.get("gamma_spec")
        return cls(
            m=raw["m"],
            n=raw["n"],
            o=raw["o"],
            pi_specs=tuple(MlpSpec.from_dict(spec) for spec in raw["pi_specs"]),
            gamma_spec=None if gamma is None else MlpSpec.from_dict(gamma),
            dedicated_branches=raw["dedicated_branches"],
            pruned=frozenset(raw.get("pruned", ())),
            loss_mask=frozenset(raw.get("loss_mask", ())),
        )


@dataclass(eq=False)
class TnnParameters:
    """pi: MlpParameters per pi network; gamma: MlpParameters or None; theta_c: log10 of kappa"""

    pi: tuple
    gamma: object
    theta_c: np.ndarray

    def to_arrays(self):
        """Named arrays, not copied"""
        arrays = {}
        for branch, params in enumerate(self.pi):
            arrays.update(params.to_arrays("pi_{}.".format(branch)))
        if self.gamma is not None:
            arrays.update(self.gamma.to_arrays("gamma."))
        arrays["theta_c"] = self.theta_c
        return arrays

    @classmethod
    def from_arrays(cls, topology, arrays):
        theta_c = np.asarray(arrays["theta_c"], dtype=np.float64)
        if theta_c.shape != (topology.m,):
            raise ShapeError("theta_c has shape {}, expected ({},)".format(theta_c.shape, topology.m))
        return cls(
            pi=tuple(
                MlpParameters.from_arrays(spec, arrays, "pi_{}.".format(branch))
                for branch, spec in enumerate(topology.pi_specs)
            ),
            gamma=None
            if topology.gamma_spec is None
            else MlpParameters.from_arrays(topology.gamma_spec, arrays, "gamma."),
            theta_c=theta_c,
        )

    @classmethod
    def zeros(cls, topology):
        return cls(
            pi=tuple(MlpParameters.zeros(spec) for spec in topology.pi_specs),
            gamma=None if topology.gamma_spec is None else MlpParameters.zeros(topology.gamma_spec),
            theta_c=np.zeros(topology.m),
        )

    def copy(self):
        return TnnParameters(
            pi=tuple(params.copy() for params in self.pi),
            gamma=None if self.gamma is None else self.gamma.copy(),
            theta_c=self.theta_c.copy(),
        )


@dataclass(eq=False)
class _ParameterCache:
    state: np.ndarray
    pi_raw: np.ndarray
    pi_caches: list
    gamma_raw: object
    gamma_cache: object


def _forward(topology, params, state, ancillary, exogenous):
    state = as_vector(state, topology.m, "state")
    ancillary = as_vector(ancillary, topology.n, "ancillary temperatures")
    exogenous = as_vector(exogenous, topology.o, "exogenous inputs")
    phi = np.concatenate([ancillary, exogenous], axis=-1)

    pi_caches, pi_outputs = [], []
    for spec, branch in zip(topology.pi_specs, params.pi):
        output, cache = mlp_forward(spec, branch, state, phi)
        pi_outputs.append(output)
        pi_caches.append(cache)
    pi_raw = np.concatenate(pi_outputs, axis=-1)
    pi = np.abs(pi_raw) * topology.pi_mask

    gamma = np.zeros(state.shape[:-1] + (len(topology.pair_index),))
    gamma_raw, gamma_cache = None, None
    if topology.gamma_spec is not None:
        gamma_raw, gamma_cache = mlp_forward(topology.gamma_spec, params.gamma, state, phi)
        gamma[..., topology.active_slots] = np.abs(gamma_raw)

    kappa = np.power(10.0, params.theta_c)
    return kappa, pi, gamma, _ParameterCache(state, pi_raw, pi_caches, gamma_raw, gamma_cache)


def evaluate_thermal_parameters(topology, params, state, ancillary, exogenous):
    """
    :param state: estimated temperatures (m,) or a batch (B, m)
    :param ancillary: measured boundary temperatures (n,) or (B, n)
    :param exogenous: observables (o,) or (B, o)
    :return tuple: (kappa (m,), pi, gamma over all pair slots), all non-negative
    """
    kappa, pi, gamma, _ = _forward(topology, params, state, ancillary, exogenous)
    return kappa, pi, gamma


def cell_step(topology, sample_time, state, ancillary, kappa, pi, gamma, step=None):
    """
    One explicit Euler step of the network.
    :param int step: index of the step, only used in error messages
    :return np.ndarray: the state of the next step
    """
    if not sample_time > 0.0:
        raise ArgumentError("sample time must be positive, got {}".format(sample_time))
    nodes = np.concatenate([state, ancillary])
    if not (
        np.all(np.isfinite(nodes))
        and np.all(np.isfinite(kappa))
        and np.all(np.isfinite(pi))
        and np.all(np.isfinite(gamma))
    ):
        raise NumericalError("non-finite input at step {}".format(step), step=step)
    index = topology.pair_index
    conductances = gamma[index.safe_slots] * index.off_diagonal
    flow = np.sum(conductances * (nodes[None, :] - state[:, None]), axis=1)
    return state + sample_time * kappa * (pi + flow)


def _check_profile(topology, profile):
    schema = profile.schema
    if (schema.m, schema.n, schema.o) != (topology.m, topology.n, topology.o):
        raise ShapeError(
            "profile has m={}, n={}, o={}; the topology needs m={}, n={}, o={}".format(
                schema.m, schema.n, schema.o, topology.m, topology.n, topology.o
            )
        )


def _check_bound(next_state, step, divergence_bound):
    if not np.all(np.abs(next_state) <= divergence_bound):
        raise DivergenceError(
            "estimate left the range +-{} at step {}".format(divergence_bound, step), step=step
        )


def rollout(topology, params, profile, initial_state, divergence_bound=DIVERGENCE_BOUND):
    """
    Runs the cell over a whole profile
    :param MeasurementProfile profile: inputs, sample time taken from its schema
    :param initial_state: estimate at k = 0
    :return np.ndarray: trajectory of shape (K, m), trajectory[0] being the initial state
    """
    _check_profile(topology, profile)
    sample_time = profile.schema.sample_time
    ancillary, exogenous = profile.ancillary, profile.exogenous
    trajectory = np.empty((len(profile), topology.m))
    trajectory[0] = as_vector(initial_state, topology.m, "initial state")
    for k in range(len(profile) - 1):
        kappa, pi, gamma = evaluate_thermal_parameters(
            topology, params, trajectory[k], ancillary[k], exogenous[k]
        )
        trajectory[k + 1] = cell_step(
            topology, sample_time, trajectory[k], ancillary[k], kappa, pi, gamma, step=k
        )
        _check_bound(trajectory[k + 1], k + 1, divergence_bound)
    return trajectory


def l2_penalty(topology, params):
    penalty = sum(mlp_l2_penalty(spec, branch) for spec, branch in zip(topology.pi_specs, params.pi))
    if topology.gamma_spec is not None:
        penalty += mlp_l2_penalty(topology.gamma_spec, params.gamma)
    return penalty


def _step_backward(topology, params, sample_time, d_next, nodes, kappa, pi, gamma, cache, grads):
    """
    Reverse of one cell step. Parameter gradients are added to grads.
    :return np.ndarray: cotangent of the state entering the step
    """
    index = topology.pair_index
    state = cache.state
    differences = nodes[None, :] - state[:, None]
    conductances = gamma[index.safe_slots] * index.off_diagonal
    flow = np.sum(conductances * differences, axis=1)

    scaled = sample_time * d_next * kappa
    d_kappa = sample_time * d_next * (pi + flow)
    grads["theta_c"] += d_kappa * kappa * LN_10

    d_state = d_next.copy()
    d_state -= scaled * conductances.sum(axis=1)
    d_state += (conductances[:, : topology.m]).T @ scaled

    d_conductances = (scaled[:, None] * differences)[index.off_diagonal]
    d_gamma = np.zeros(len(index))
    np.add.at(d_gamma, index.state_slots[index.off_diagonal], d_conductances)

    d_pi_raw = scaled * np.sign(cache.pi_raw) * topology.pi_mask
    offset = 0
    for branch, (spec, branch_params, branch_cache) in enumerate(
        zip(topology.pi_specs, params.pi, cache.pi_caches)
    ):
        width = spec.output_width
        branch_grads, d_branch_state, _ = mlp_backward(
            spec,
            branch_params,
            branch_cache,
            d_pi_raw[offset : offset + width],
            include_penalty=False,
        )
        offset += width
        for name, value in branch_grads.to_arrays("pi_{}.".format(branch)).items():
            grads[name] += value
        d_state += d_branch_state

    if topology.gamma_spec is not None:
        d_gamma_raw = d_gamma[topology.active_slots] * np.sign(cache.gamma_raw)
        gamma_grads, d_gamma_state, _ = mlp_backward(
            topology.gamma_spec, params.gamma, cache.gamma_cache, d_gamma_raw, include_penalty=False
        )
        for name, value in gamma_grads.to_arrays("gamma.").items():
            grads[name] += value
        d_state += d_gamma_state

    return d_state


def tbptt_gradients(
    topology,
    params,
    window,
    targets=None,
    initial_state=None,
    max_length=None,
    divergence_bound=DIVERGENCE_BOUND,
    return_final_state=False,
):
    """
    Loss and gradients of one truncated backpropagation window. The loss is the mean squared
    error over steps 1..K-1 and all targets; the returned gradients also hold the gradient of
    l2_penalty. The state entering the window is a constant.
    :param MeasurementProfile window: the samples of the window
    :param targets: ground truth (K, m), defaults to the window's target channels
    :param initial_state: estimate at the first sample, defaults to targets[0]
    :param int max_length: the configured truncation length
    :return tuple: (loss, gradient arrays by name[, last estimated state])
    """
    _check_profile(topology, window)
    length = len(window)
    if max_length is not None and length > max_length:
        raise ArgumentError("window of {} samples exceeds the limit of {}".format(length, max_length))
    targets = window.targets if targets is None else np.asarray(targets, dtype=np.float64)
    if targets.shape != (length, topology.m):
        raise ShapeError("targets have shape {}, expected {}".format(targets.shape, (length, topology.m)))
    initial_state = targets[0] if initial_state is None else initial_state

    sample_time = window.schema.sample_time
    ancillary, exogenous = window.ancillary, window.exogenous
    trajectory = np.empty((length, topology.m))
    trajectory[0] = as_vector(initial_state, topology.m, "initial state")
    steps = []
    for k in range(length - 1):
        kappa, pi, gamma, cache = _forward(
            topology, params, trajectory[k], ancillary[k], exogenous[k]
        )
        trajectory[k + 1] = cell_step(
            topology, sample_time, trajectory[k], ancillary[k], kappa, pi, gamma, step=k
        )
        _check_bound(trajectory[k + 1], k + 1, divergence_bound)
        steps.append((kappa, pi, gamma, cache))

    errors = trajectory[1:] - targets[1:]
    loss = float(np.mean(errors * errors))
    d_trajectory = 2.0 * errors / errors.size

    grads = {name: np.zeros_like(array) for name, array in params.to_arrays().items()}
    carried = np.zeros(topology.m)
    for k in reversed(range(length - 1)):
        kappa, pi, gamma, cache = steps[k]
        nodes = np.concatenate([trajectory[k], ancillary[k]])
        carried = _step_backward(
            topology,
            params,
            sample_time,
            d_trajectory[k] + carried,
            nodes,
            kappa,
            pi,
            gamma,
            cache,
            grads,
        )

    _add_penalty_gradients(topology, params, grads)
    if return_final_state:
        return loss, grads, trajectory[-1].copy()
    return loss, grads


def _add_penalty_gradients(topology, params, grads):
    networks = [
        ("pi_{}.".format(branch), spec, branch_params)
        for branch, (spec, branch_params) in enumerate(zip(topology.pi_specs, params.pi))
    ]
    if topology.gamma_spec is not None:
        networks.append(("gamma.", topology.gamma_spec, params.gamma))
    for prefix, spec, network in networks:
        for index, layer in enumerate(spec.layers):
            if layer.l2_rate:
                grads["{}w_{}".format(prefix, index)] += 2.0 * layer.l2_rate * network.weights[index]
        if network.w_r is not None and spec.layers[0].l2_rate:
            grads[prefix + "w_r"] += 2.0 * spec.layers[0].l2_rate * network.w_r


def count_parameters(topology):
    """Number of trainable scalars: every network weight and bias plus theta_c"""
    count = sum(spec.parameter_count for spec in topology.pi_specs)
    if topology.gamma_spec is not None:
        count += topology.gamma_spec.parameter_count
    return count + topology.m


def init_tnn_parameters(
    topology, seed, theta_c_mean=DEFAULT_THETA_C_MEAN, theta_c_std=DEFAULT_THETA_C_STD
):
    """Glorot-initialized networks and normally distributed theta_c; deterministic per seed"""
    rng = np.random.default_rng(seed)
    pi = tuple(init_parameters(spec, rng) for spec in topology.pi_specs)
    gamma = None if topology.gamma_spec is None else init_parameters(topology.gamma_spec, rng)
    theta_c = rng.normal(theta_c_mean, theta_c_std, size=topology.m)
    return TnnParameters(pi=pi, gamma=gamma, theta_c=theta_c)


@dataclass(eq=False)
class TnnModel:
    """Everything needed to run a trained network on new measurements"""

    schema: ChannelSchema
    topology: TnnTopology
    params: TnnParameters
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        schema, topology = self.schema, self.topology
        if (schema.m, schema.n, schema.o) != (topology.m, topology.n, topology.o):
            raise ShapeError("the channel schema does not fit the topology")

    @property
    def node_names(self):
        return self.schema.targets + self.schema.ancillary


def save_model(model, path):
    """Writes a self-describing JSON document of schema, topology and named arrays"""
    document = {
        JSON_FORMAT: MODEL_FORMAT,
        JSON_FORMAT_VERSION: MODEL_FORMAT_VERSION,
        JSON_SCHEMA: model.schema.to_dict(),
        JSON_TOPOLOGY: model.topology.to_dict(),
        JSON_PARAMETERS: {
            name: {JSON_SHAPE: list(array.shape), JSON_DATA: array.ravel().tolist()}
            for name, array in model.params.to_arrays().items()
        },
        JSON_METADATA: model.metadata,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=1)


def load_model(path):
    with open(path, "r", encoding="utf-8") as handle:
        document = json.load(handle)
    if document.get(JSON_FORMAT) != MODEL_FORMAT:
        raise ContractError("{} is not a thermalnn model file".format(path))
    if document.get(JSON_FORMAT_VERSION) != MODEL_FORMAT_VERSION:
        raise ContractError(
            "{} has model format version {}, expected {}".format(
                path, document.get(JSON_FORMAT_VERSION), MODEL_FORMAT_VERSION
            )
        )
    schema = ChannelSchema.from_dict(document[JSON_SCHEMA])
    topology = TnnTopology.from_dict(document[JSON_TOPOLOGY])
    arrays = {
        name: np.array(entry[JSON_DATA], dtype=np.float64).reshape(entry[JSON_SHAPE])
        for name, entry in document[JSON_PARAMETERS].items()
    }
    params = TnnParameters.from_arrays(topology, arrays)
    return TnnModel(schema, topology, params, document.get(JSON_METADATA) or {})


def score_profiles(topology, params, profiles, divergence_bound=DIVERGENCE_BOUND):
    """
    Normalized mean squared error of rollouts started from the ground truth, over steps
    1..K-1 of all profiles, weighted by sample count
    """
    total, count = 0.0, 0
    for profile in profiles:
        trajectory = rollout(topology, params, profile, profile.targets[0], divergence_bound)
        errors = trajectory[1:] - profile.targets[1:]
        total += float(np.sum(errors * errors))
        count += errors.size
    if count == 0:
        raise ArgumentError("no samples to score")
    return total / count
