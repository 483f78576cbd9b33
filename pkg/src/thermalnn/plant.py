"""
Purpose: Synthetic lumped-parameter thermal network used as ground truth.

    Every state node i obeys C_i d(theta_i)/dt = P_i + sum_j g_ij * (theta_j - theta_i), with
    ancillary nodes acting as ideal temperature sources. Conductances g and losses P are closed
    form primitives of the node temperatures and the observables, so the true thermal parameters
    of every generated sample are known exactly. All temperatures are normalized.
"""

import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from numba import njit

from .const import (
    AFFINE_SPEED,
    CONDUCTANCE_KINDS,
    CONSTANT,
    COOLANT,
    CSV_ENCODING,
    DEFAULT_SUBSTEPS,
    I_S,
    LOSS_KINDS,
    MEASUREMENTS_FILENAME,
    MOTOR_SPEED,
    PLANT_INSTABILITY_BOUND,
    POLY_STATE,
    PROFILE_ID_COLUMN,
    QUADRATIC_CURRENT,
    TRUTH_FILENAME,
)
from .data import MeasurementProfile, make_schema, write_profiles_csv
from .tnn import ConductancePairIndex
from .tnn_exceptions import ArgumentError, GenerationError

logger = logging.getLogger(__name__)

_CONDUCTANCE_CODES = {CONSTANT: 0, AFFINE_SPEED: 1, POLY_STATE: 2}
_LOSS_CODES = {CONSTANT: 0, QUADRATIC_CURRENT: 1}


@dataclass(frozen=True)
class ConductanceFunction:
    """
    constant: g = c0
    affine_speed: g = c0 + c1 * xi[channel]
    poly_state: g = c0 + c1 * t + c2 * t**2, t being the mean temperature of the pair
    Negative values are clipped to zero.
    """

    kind: str = CONSTANT
    coefficients: tuple = (0.0,)
    channel: str = None

    def __post_init__(self):
        if self.kind not in CONDUCTANCE_KINDS:
            raise ArgumentError("unknown conductance kind {!r}".format(self.kind))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.kind == AFFINE_SPEED and self.channel is None:
            raise ArgumentError("an affine conductance needs an observable channel")

    @property
    def padded(self):
        return (self.coefficients + (0.0, 0.0, 0.0))[:3]


@dataclass(frozen=True)
class LossFunction:
    """constant: P = c0; quadratic_current: P = c0 + c1 * xi[channel]**2"""

    kind: str = CONSTANT
    coefficients: tuple = (0.0,)
    channel: str = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ArgumentError("unknown loss kind {!r}".format(self.kind))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.kind == QUADRATIC_CURRENT and self.channel is None:
            raise ArgumentError("a current dependent loss needs an observable channel")

    @property
    def padded(self):
        return (self.coefficients + (0.0, 0.0))[:2]


@dataclass(frozen=True)
class ExcitationSpec:
    """
    Alternating segments of random duration in [dwell_min, dwell_max] seconds. A segment is a
    constant random level with probability 1 - walk_share, otherwise a random walk with the
    given step deviation per sample. Levels stay within [low, high].
    """

    low: float
    high: float
    dwell_min: float = 120.0
    dwell_max: float = 900.0
    walk_share: float = 0.3
    walk_std: float = 0.01

    def __post_init__(self):
        if self.high < self.low:
            raise ArgumentError("excitation range [{}, {}] is empty".format(self.low, self.high))
        if not 0.0 < self.dwell_min <= self.dwell_max:
            raise ArgumentError("dwell times must satisfy 0 < min <= max")

    def generate(self, count, sample_time, rng):
        values = np.empty(count)
        level = rng.uniform(self.low, self.high)
        position = 0
        while position < count:
            length = max(1, int(round(rng.uniform(self.dwell_min, self.dwell_max) / sample_time)))
            stop = min(count, position + length)
            if rng.uniform() < self.walk_share:
                steps = rng.normal(0.0, self.walk_std, size=stop - position)
                segment = np.clip(level + np.cumsum(steps), self.low, self.high)
            else:
                level = rng.uniform(self.low, self.high)
                segment = np.full(stop - position, level)
            values[position:stop] = segment
            level = segment[-1]
            position = stop
        return values


@dataclass(frozen=True)
class PlantSpec:
    """
    conductances: one ConductanceFunction per pair slot of ConductancePairIndex(m + n)
    losses: one LossFunction per state node
    excitation: ExcitationSpec for every ancillary and exogenous channel
    initial_state: normalized start temperatures; None starts every node at the mean ancillary
    temperature of the first sample
    """

    state_names: tuple
    ancillary_names: tuple
    exogenous_names: tuple
    capacitances: tuple
    conductances: tuple
    losses: tuple
    excitation: dict
    substeps: int = DEFAULT_SUBSTEPS
    initial_state: tuple = None
    divisors: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("state_names", "ancillary_names", "exogenous_names", "conductances", "losses"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "capacitances", tuple(float(c) for c in self.capacitances))

        if self.m < 1:
            raise ArgumentError("a plant needs at least one state node")
        if len(self.capacitances) != self.m or min(self.capacitances) <= 0.0:
            raise ArgumentError("every state node needs a positive capacitance")
        if len(self.conductances) != len(self.pair_index):
            raise ArgumentError(
                "{} conductances given for {} pairs".format(len(self.conductances), len(self.pair_index))
            )
        if len(self.losses) != self.m:
            raise ArgumentError("{} losses given for {} nodes".format(len(self.losses), self.m))
        if self.substeps < 1:
            raise ArgumentError("substeps must be at least 1, got {}".format(self.substeps))
        if self.initial_state is not None and len(self.initial_state) != self.m:
            raise ArgumentError("initial state must have {} entries".format(self.m))
        for function in self.conductances + self.losses:
            if function.channel is not None and function.channel not in self.exogenous_names:
                raise ArgumentError("unknown observable channel {!r}".format(function.channel))
        for name in self.ancillary_names + self.exogenous_names:
            if name not in self.excitation:
                raise ArgumentError("no excitation for channel {!r}".format(name))

    @property
    def m(self):
        return len(self.state_names)

    @property
    def n(self):
        return len(self.ancillary_names)

    @property
    def node_names(self):
        return self.state_names + self.ancillary_names

    @property
    def pair_index(self):
        return ConductancePairIndex(self.m + self.n, self.m)

    def schema(self, sample_time):
        return make_schema(
            exogenous=self.exogenous_names,
            ancillary=self.ancillary_names,
            targets=self.state_names,
            divisors=self.divisors,
            sample_time=sample_time,
        )

    def _channel_index(self, function):
        return -1 if function.channel is None else self.exogenous_names.index(function.channel)

    def kernel_arrays(self):
        """Plant description as plain arrays for the integration kernel"""
        index = self.pair_index
        pairs = np.array(index.pairs(), dtype=np.int64).reshape(-1, 2)
        return dict(
            capacitances=np.array(self.capacitances),
            pair_i=pairs[:, 0].copy(),
            pair_j=pairs[:, 1].copy(),
            cond_kind=np.array([_CONDUCTANCE_CODES[f.kind] for f in self.conductances], dtype=np.int64),
            cond_coef=np.array([f.padded for f in self.conductances]).reshape(-1, 3),
            cond_channel=np.array([self._channel_index(f) for f in self.conductances], dtype=np.int64),
            loss_kind=np.array([_LOSS_CODES[f.kind] for f in self.losses], dtype=np.int64),
            loss_coef=np.array([f.padded for f in self.losses]).reshape(-1, 2),
            loss_channel=np.array([self._channel_index(f) for f in self.losses], dtype=np.int64),
        )


def default_plant_spec():
    """
    Three state nodes and a coolant source: one speed dependent conductance per node pair
    family, constant ones elsewhere, nodes 1 and 3 not connected at all, and losses quadratic
    in the current.
    """
    names = ("node_1", "node_2", "node_3")
    index = ConductancePairIndex(4, 3)
    conductances = [ConductanceFunction(CONSTANT, (0.0,))] * len(index)
    conductances[index.slot(0, 1)] = ConductanceFunction(AFFINE_SPEED, (2.0, 3.0), MOTOR_SPEED)
    conductances[index.slot(0, 3)] = ConductanceFunction(CONSTANT, (4.0,))
    conductances[index.slot(1, 2)] = ConductanceFunction(CONSTANT, (3.0,))
    conductances[index.slot(1, 3)] = ConductanceFunction(AFFINE_SPEED, (5.0, 2.0), MOTOR_SPEED)
    conductances[index.slot(2, 3)] = ConductanceFunction(CONSTANT, (1.5,))
    return PlantSpec(
        state_names=names,
        ancillary_names=(COOLANT,),
        exogenous_names=(I_S, MOTOR_SPEED),
        capacitances=(600.0, 400.0, 300.0),
        conductances=tuple(conductances),
        losses=(
            LossFunction(QUADRATIC_CURRENT, (0.02, 0.8), I_S),
            LossFunction(QUADRATIC_CURRENT, (0.0, 0.5), I_S),
            LossFunction(QUADRATIC_CURRENT, (0.0, 0.3), I_S),
        ),
        excitation={
            COOLANT: ExcitationSpec(0.2, 0.7, dwell_min=600.0, dwell_max=1800.0, walk_std=0.002),
            I_S: ExcitationSpec(0.0, 2.5),
            MOTOR_SPEED: ExcitationSpec(0.0, 1.0),
        },
    )


def _slot_of(spec, pair):
    if isinstance(pair, (tuple, list)):
        return spec.pair_index.slot(*pair)
    spec.pair_index.pair(pair)
    return int(pair)


def disconnected_pair_spec(spec, pair):
    """:param pair: (i, j) node pair or pair slot whose conductance becomes zero"""
    conductances = list(spec.conductances)
    conductances[_slot_of(spec, pair)] = ConductanceFunction(CONSTANT, (0.0,))
    return replace(spec, conductances=tuple(conductances))


def reconnect_pair_spec(spec, base, pair):
    """Restores the conductance of pair from base"""
    slot = _slot_of(spec, pair)
    conductances = list(spec.conductances)
    conductances[slot] = base.conductances[slot]
    return replace(spec, conductances=tuple(conductances))


@njit(cache=True)
def _conductance(kind, coef, channel, t_i, t_j, xi):
    if kind == 0:
        g = coef[0]
    elif kind == 1:
        g = coef[0] + coef[1] * xi[channel]
    else:
        mean = 0.5 * (t_i + t_j)
        g = coef[0] + coef[1] * mean + coef[2] * mean * mean
    return max(g, 0.0)


@njit(cache=True)
def _loss(kind, coef, channel, xi):
    if kind == 0:
        return coef[0]
    return coef[0] + coef[1] * xi[channel] * xi[channel]


@njit(cache=True)
def _integrate(
    initial,
    ancillary,
    exogenous,
    capacitances,
    pair_i,
    pair_j,
    cond_kind,
    cond_coef,
    cond_channel,
    loss_kind,
    loss_coef,
    loss_channel,
    sample_time,
    substeps,
    bound,
):
    count = ancillary.shape[0]
    m = initial.shape[0]
    n = ancillary.shape[1]
    states = np.empty((count, m))
    states[0] = initial
    nodes = np.empty(m + n)
    derivative = np.empty(m)
    dt = sample_time / substeps
    for k in range(count - 1):
        x = states[k].copy()
        xi = exogenous[k]
        for _ in range(substeps):
            nodes[:m] = x
            nodes[m:] = ancillary[k]
            for i in range(m):
                derivative[i] = _loss(loss_kind[i], loss_coef[i], loss_channel[i], xi)
            for p in range(pair_i.shape[0]):
                i = pair_i[p]
                j = pair_j[p]
                if i >= m:
                    continue
                g = _conductance(cond_kind[p], cond_coef[p], cond_channel[p], nodes[i], nodes[j], xi)
                flow = g * (nodes[j] - nodes[i])
                derivative[i] += flow
                if j < m:
                    derivative[j] -= flow
            for i in range(m):
                x[i] += dt * derivative[i] / capacitances[i]
                if not abs(x[i]) <= bound:
                    return states, k + 1
        states[k + 1] = x
    return states, -1


def evaluate_truth(spec, states, ancillary, exogenous):
    """
    True conductances and losses at every sample
    :return tuple: (gamma of shape (K, pair count), losses of shape (K, m))
    """
    states = np.atleast_2d(states)
    ancillary = np.asarray(ancillary, dtype=np.float64).reshape(len(states), spec.n)
    exogenous = np.asarray(exogenous, dtype=np.float64).reshape(len(states), len(spec.exogenous_names))
    nodes = np.hstack([states, ancillary])

    gamma = np.zeros((len(states), len(spec.pair_index)))
    for slot, (i, j) in enumerate(spec.pair_index.pairs()):
        function = spec.conductances[slot]
        c = function.padded
        if function.kind == CONSTANT:
            values = np.full(len(states), c[0])
        elif function.kind == AFFINE_SPEED:
            values = c[0] + c[1] * exogenous[:, spec.exogenous_names.index(function.channel)]
        else:
            mean = 0.5 * (nodes[:, i] + nodes[:, j])
            values = c[0] + c[1] * mean + c[2] * mean * mean
        gamma[:, slot] = np.maximum(values, 0.0)

    losses = np.zeros((len(states), spec.m))
    for node, function in enumerate(spec.losses):
        c = function.padded
        if function.kind == CONSTANT:
            losses[:, node] = c[0]
        else:
            current = exogenous[:, spec.exogenous_names.index(function.channel)]
            losses[:, node] = c[0] + c[1] * current * current
    return gamma, losses


@dataclass(frozen=True)
class TruthTrajectory:
    gamma: np.ndarray
    losses: np.ndarray


@dataclass(frozen=True)
class SyntheticDataset:
    spec: PlantSpec
    profiles: tuple
    truth: dict
    sample_time: float
    seed: int

    @property
    def schema(self):
        return self.profiles[0].schema


def _instability_error(spec, state, ancillary, exogenous, sample_time, step):
    gamma, _ = evaluate_truth(spec, state, ancillary, exogenous)
    dt = sample_time / spec.substeps
    stiffness = []
    for slot, (i, j) in enumerate(spec.pair_index.pairs()):
        inverse = 1.0 / spec.capacitances[i] if i < spec.m else 0.0
        inverse += 1.0 / spec.capacitances[j] if j < spec.m else 0.0
        stiffness.append(dt * gamma[0, slot] * inverse)
    slot = int(np.argmax(stiffness))
    i, j = spec.pair_index.pair(slot)
    pair = (spec.node_names[i], spec.node_names[j])
    return GenerationError(
        "plant became unstable at step {}; pair {}-{} has dt*g/C = {:.3g}".format(
            step, pair[0], pair[1], stiffness[slot]
        ),
        pair=pair,
    )


def simulate_profile(spec, profile_id, sample_count, sample_time, rng):
    """Generates one profile with its true parameter trajectories"""
    ancillary = np.column_stack(
        [spec.excitation[name].generate(sample_count, sample_time, rng) for name in spec.ancillary_names]
    ) if spec.n else np.zeros((sample_count, 0))
    exogenous = np.column_stack(
        [spec.excitation[name].generate(sample_count, sample_time, rng) for name in spec.exogenous_names]
    ) if spec.exogenous_names else np.zeros((sample_count, 0))

    if spec.initial_state is not None:
        initial = np.array(spec.initial_state, dtype=np.float64)
    else:
        start = float(np.mean(ancillary[0])) if spec.n else 0.0
        initial = np.full(spec.m, start)

    arrays = spec.kernel_arrays()
    states, failed = _integrate(
        initial,
        ancillary,
        exogenous,
        arrays["capacitances"],
        arrays["pair_i"],
        arrays["pair_j"],
        arrays["cond_kind"],
        arrays["cond_coef"],
        arrays["cond_channel"],
        arrays["loss_kind"],
        arrays["loss_coef"],
        arrays["loss_channel"],
        float(sample_time),
        int(spec.substeps),
        PLANT_INSTABILITY_BOUND,
    )
    if failed >= 0:
        previous = failed - 1
        raise _instability_error(
            spec, states[previous], ancillary[previous], exogenous[previous], sample_time, failed
        )

    schema = spec.schema(sample_time)
    gamma, losses = evaluate_truth(spec, states, ancillary, exogenous)
    profile = MeasurementProfile(profile_id, np.hstack([exogenous, ancillary, states]), schema)
    return profile, TruthTrajectory(gamma, losses)


def simulate(spec, duration, sample_time, seed, profile_count=1):
    """
    Generates independent profiles of duration / sample_time + 1 samples each; profile p uses
    the p-th child of the seed.
    :return SyntheticDataset: profiles plus true parameter trajectories
    """
    if not sample_time > 0.0:
        raise ArgumentError("sample time must be positive, got {}".format(sample_time))
    if duration < 2 * sample_time:
        raise ArgumentError(
            "duration {} s is shorter than two samples of {} s".format(duration, sample_time)
        )
    if profile_count < 1:
        raise ArgumentError("at least one profile is required")
    sample_count = int(round(duration / sample_time)) + 1

    profiles, truth = [], {}
    for index, child in enumerate(np.random.SeedSequence(seed).spawn(profile_count)):
        profile, trajectory = simulate_profile(
            spec, str(index), sample_count, sample_time, np.random.default_rng(child)
        )
        profiles.append(profile)
        truth[profile.profile_id] = trajectory
        logger.info("simulated profile %s with %s samples", profile.profile_id, sample_count)
    return SyntheticDataset(spec, tuple(profiles), truth, sample_time, seed)


def truth_frame(dataset):
    """True conductances (g_<node>_<node>) and losses (P_<node>) per sample"""
    spec = dataset.spec
    gamma_columns = [
        "g_{}_{}".format(spec.node_names[i], spec.node_names[j]) for i, j in spec.pair_index.pairs()
    ]
    loss_columns = ["P_{}".format(name) for name in spec.state_names]
    frames = []
    for profile in dataset.profiles:
        trajectory = dataset.truth[profile.profile_id]
        frame = pd.DataFrame(
            np.hstack([trajectory.gamma, trajectory.losses]), columns=gamma_columns + loss_columns
        )
        frame.insert(0, "step", np.arange(len(frame)))
        frame.insert(0, PROFILE_ID_COLUMN, profile.profile_id)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def write_dataset(dataset, out_dir):
    """
    Writes measurements.csv and truth.csv into out_dir
    :return tuple: paths of both files
    """
    measurements = os.path.join(out_dir, MEASUREMENTS_FILENAME)
    truth = os.path.join(out_dir, TRUTH_FILENAME)
    write_profiles_csv(dataset.profiles, measurements)
    truth_frame(dataset).to_csv(truth, index=False, encoding=CSV_ENCODING)
    return measurements, truth
