"""
Purpose: Studies on trained networks: evaluation in Kelvin, the conductance median analysis
    and pruning, the detuned initial condition study and the model size grid search.
"""

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .const import (
    AMBIENT,
    DEFAULT_MEDIAN_SAMPLES,
    DEFAULT_MSE_CUTOFF,
    DIVERGENCE_BOUND,
    FIXED,
    GROUND_TRUTH,
    INIT_MODES,
    MEDIAN_INPUT_HIGH,
    MEDIAN_INPUT_LOW,
    RECOVERY_BAND,
    SIGMOID,
)
from .failure_mode import recording
from .nn import LayerSpec
from .tnn import (
    TnnModel,
    TopologyConfig,
    count_parameters,
    evaluate_thermal_parameters,
    make_topology,
    rollout,
)
from .tnn_exceptions import (
    ArgumentError,
    EmptySelectionError,
    NumericalError,
    SchemaError,
    ShapeError,
)
from .train import repeated_fit
from .utils import available_jobs

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """Errors in Kelvin of the profiles that did not diverge"""

    target_names: tuple
    per_target_mse: tuple
    mse: float
    linf: float
    parameter_count: int
    sample_count: int
    init_mode: str = GROUND_TRUTH
    seed: object = None
    fold: object = None
    failed_profiles: tuple = ()
    estimates: dict = field(default_factory=dict, repr=False, compare=False)

    def rows(self):
        """One row per target plus an aggregate row"""
        rows = [
            {"target": name, "mse_k2": mse, "linf_k": None}
            for name, mse in zip(self.target_names, self.per_target_mse)
        ]
        rows.append({"target": "all", "mse_k2": self.mse, "linf_k": self.linf})
        return rows


def score_trajectories(estimates, truths, divisors):
    """
    Kelvin errors of normalized trajectories, aggregated over all samples of all profiles
    :param list estimates: arrays (K, m)
    :param list truths: arrays (K, m)
    :param divisors: target divisors (m,)
    :return tuple: (per target MSE, mean of those, max absolute error, sample count)
    """
    divisors = np.asarray(divisors, dtype=np.float64)
    squared = np.zeros(len(divisors))
    linf, count = 0.0, 0
    for estimate, truth in zip(estimates, truths):
        errors = (np.asarray(estimate) - np.asarray(truth)) * divisors
        if errors.shape != np.shape(truth):
            raise ShapeError("estimate has shape {}, truth {}".format(errors.shape, np.shape(truth)))
        squared += np.sum(errors * errors, axis=0)
        linf = max(linf, float(np.max(np.abs(errors))))
        count += len(errors)
    if count == 0:
        nan = tuple(np.full(len(divisors), np.nan))
        return nan, float("nan"), float("nan"), 0
    per_target = squared / count
    return tuple(float(value) for value in per_target), float(np.mean(per_target)), linf, count


def initial_state(model, profile, init_mode, fixed_value=None):
    """Normalized start estimate for the given initialization mode"""
    schema = model.schema
    if init_mode == GROUND_TRUTH:
        return profile.targets[0]
    if init_mode == AMBIENT:
        if not schema.n:
            raise ArgumentError("ambient initialization needs an ancillary temperature")
        column = schema.ancillary.index(AMBIENT) if AMBIENT in schema.ancillary else 0
        physical = profile.ancillary[0, column] * schema.ancillary_divisors[column]
        return np.full(schema.m, physical) / schema.target_divisors
    if init_mode == FIXED:
        if fixed_value is None:
            raise ArgumentError("fixed initialization needs a temperature")
        return np.full(schema.m, float(fixed_value)) / schema.target_divisors
    raise ArgumentError("unknown initialization {!r}, expected one of {}".format(init_mode, INIT_MODES))


def evaluate(
    model,
    profiles,
    init_mode=GROUND_TRUTH,
    fixed_value=None,
    seed=None,
    fold=None,
    divergence_bound=DIVERGENCE_BOUND,
):
    """
    Rolls the model out over every profile and scores the estimates in Kelvin. Diverging
    profiles are listed in failed_profiles and left out of the scores.
    :param TnnModel model: the trained network
    :param list profiles: MeasurementProfile objects with the model's channels
    :param str init_mode: ground_truth, ambient or fixed (fixed_value in degC)
    """
    estimates, truths, failed = {}, [], []
    for profile in profiles:
        if profile.schema.channels != model.schema.channels:
            raise SchemaError("profile {} has other channels than the model".format(profile.profile_id))
        start = initial_state(model, profile, init_mode, fixed_value)
        try:
            trajectory = rollout(model.topology, model.params, profile, start, divergence_bound)
        except NumericalError as error:
            logger.warning("profile %s excluded: %s", profile.profile_id, error)
            failed.append(profile.profile_id)
            continue
        estimates[profile.profile_id] = trajectory
        truths.append(profile.targets)

    per_target, mse, linf, count = score_trajectories(
        list(estimates.values()), truths, model.schema.target_divisors
    )
    return EvalReport(
        target_names=model.schema.targets,
        per_target_mse=per_target,
        mse=mse,
        linf=linf,
        parameter_count=count_parameters(model.topology),
        sample_count=count,
        init_mode=init_mode,
        seed=seed,
        fold=fold,
        failed_profiles=tuple(failed),
        estimates=estimates,
    )


@dataclass
class ConductanceProfile:
    """Median conductance per pair slot over the selected models"""

    medians: np.ndarray
    mse_cutoff: float
    model_count: int
    threshold: float = None


def conductance_medians(
    models, scores, mse_cutoff=DEFAULT_MSE_CUTOFF, samples=DEFAULT_MEDIAN_SAMPLES, seed=0
):
    """
    Median of the per-model median conductance under uniform random inputs. Every model sees
    the same inputs, so the result does not depend on the model order.
    :param list models: TnnModel objects sharing one pair layout
    :param list scores: MSE in K^2 of every model; only models below mse_cutoff are used
    """
    selected = [model for model, score in zip(models, scores) if score < mse_cutoff]
    if not selected:
        raise EmptySelectionError("no model has an MSE below {} K^2".format(mse_cutoff))
    pair_count = len(selected[0].topology.pair_index)

    per_model = []
    for model in selected:
        topology = model.topology
        if len(topology.pair_index) != pair_count:
            raise ShapeError("models have different node counts")
        rng = np.random.default_rng(seed)
        state = rng.uniform(MEDIAN_INPUT_LOW, MEDIAN_INPUT_HIGH, size=(samples, topology.m))
        phi = rng.uniform(MEDIAN_INPUT_LOW, MEDIAN_INPUT_HIGH, size=(samples, topology.n + topology.o))
        _, _, gamma = evaluate_thermal_parameters(
            topology, model.params, state, phi[:, : topology.n], phi[:, topology.n :]
        )
        per_model.append(np.median(gamma, axis=0))

    return ConductanceProfile(
        medians=np.median(np.array(per_model), axis=0),
        mse_cutoff=mse_cutoff,
        model_count=len(selected),
    )


def prune(topology, profile, threshold):
    """
    Adds every pair whose median lies below threshold to the pruning mask. The returned
    topology is meant to be trained from scratch.
    """
    if not threshold >= 0.0:
        raise ArgumentError("pruning threshold must be non-negative, got {}".format(threshold))
    medians = np.asarray(profile.medians)
    if len(medians) != len(topology.pair_index):
        raise ShapeError("{} medians for {} pairs".format(len(medians), len(topology.pair_index)))
    pruned = set(topology.pruned) | {slot for slot, median in enumerate(medians) if median < threshold}

    index = topology.pair_index
    for node in range(topology.m):
        touching = [index.slot(node, other) for other in range(index.node_count) if other != node]
        if all(slot in pruned for slot in touching) and node in topology.loss_mask:
            logger.warning("node %s has no conductance and no losses left and is isolated", node)

    return make_topology(
        topology.m,
        topology.n,
        topology.o,
        pi_layers=topology.pi_specs[0].layers,
        gamma_layers=None if topology.gamma_spec is None else topology.gamma_spec.layers,
        dedicated_branches=topology.dedicated_branches,
        pruned=pruned,
        loss_mask=topology.loss_mask,
    )


def edge_weight_table(profile, labels, pruned=()):
    """Conductance medians as one row per node pair"""
    rows = []
    node_count = len(labels)
    slot = 0
    for i in range(node_count):
        for j in range(i + 1, node_count):
            rows.append(
                {
                    "node_a": labels[i],
                    "node_b": labels[j],
                    "slot": slot,
                    "median": float(profile.medians[slot]),
                    "pruned": slot in pruned,
                }
            )
            slot += 1
    return pd.DataFrame(rows, columns=["node_a", "node_b", "slot", "median", "pruned"])


@dataclass
class RecoveryTable:
    rows: list
    band: float
    estimates: dict = field(default_factory=dict, repr=False)

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=["offset_k", "target", "recovery_s"])

    @property
    def max_recovery(self):
        return max((row["recovery_s"] for row in self.rows), default=0.0)


def recovery_time(errors, sample_time, band=RECOVERY_BAND):
    """
    Time after which the absolute error stays inside the band for the rest of the profile
    :param errors: absolute errors in Kelvin of one target
    :return float: seconds, inf when the error is outside the band at the last sample
    """
    outside = np.flatnonzero(np.abs(errors) > band)
    if outside.size == 0:
        return 0.0
    if outside[-1] == len(errors) - 1:
        return float("inf")
    return float((outside[-1] + 1) * sample_time)


def detuned_init_study(model, profile, offsets, per_target=None, band=RECOVERY_BAND):
    """
    Starts the model from the ground truth shifted by each offset and measures the recovery
    into the error band.
    :param list offsets: start offsets in Kelvin
    :param list per_target: indices of the targets to offset, all targets when None
    """
    schema = model.schema
    targets = range(schema.m) if per_target is None else list(per_target)
    rows, estimates = [], {}
    for offset in offsets:
        shift = np.zeros(schema.m)
        shift[list(targets)] = float(offset)
        start = profile.targets[0] + shift / schema.target_divisors
        try:
            trajectory = rollout(model.topology, model.params, profile, start)
        except NumericalError as error:
            logger.warning("offset %s K diverged: %s", offset, error)
            for name in schema.targets:
                rows.append({"offset_k": float(offset), "target": name, "recovery_s": float("inf")})
            continue
        estimates[float(offset)] = trajectory
        errors = (trajectory - profile.targets) * schema.target_divisors
        for column, name in enumerate(schema.targets):
            rows.append(
                {
                    "offset_k": float(offset),
                    "target": name,
                    "recovery_s": recovery_time(errors[:, column], schema.sample_time, band),
                }
            )
    return RecoveryTable(rows, band, estimates)


def exponential_unit_grid(max_units):
    """Powers of two up to max_units"""
    if max_units < 1:
        raise ArgumentError("max units must be at least 1, got {}".format(max_units))
    units, value = [], 1
    while value <= max_units:
        units.append(value)
        value *= 2
    return units


def pareto_front(points):
    """
    Indices of the non-dominated (parameter count, MSE) points, ordered by parameter count
    :param list points: (count, mse) pairs
    """
    front = []
    for index, (count, mse) in enumerate(points):
        dominated = any(
            other_count <= count and other_mse <= mse and (other_count < count or other_mse < mse)
            for other_count, other_mse in points
        )
        if not dominated:
            front.append(index)
    return sorted(front, key=lambda index: (points[index][0], points[index][1], index))


@dataclass
class GridPoint:
    pi_layers: int
    pi_units: int
    gamma_layers: int
    gamma_units: int
    parameter_count: int
    mse: float
    linf: float
    best_seed: int
    cv_test_mse: float
    pareto: bool = False


@dataclass
class GridResult:
    points: list
    failures: dict

    def to_frame(self):
        return pd.DataFrame([point.__dict__ for point in self.points])

    @property
    def front(self):
        return [point for point in self.points if point.pareto]


def grid_candidates(layer_range, units):
    low, high = layer_range
    layers = range(int(low), int(high) + 1)
    return list(itertools.product(layers, units, layers, units))


def _run_candidate(arguments):
    candidate, base, folds, config, seeds, schema = arguments
    pi_layers, pi_units, gamma_layers, gamma_units = candidate
    try:
        topology = TopologyConfig(
            pi_hidden=tuple(
                LayerSpec(pi_units, layer.activation, layer.l2_rate)
                for layer in _repeat(base.pi_hidden, pi_layers)
            ),
            gamma_hidden=tuple(
                LayerSpec(gamma_units, layer.activation, layer.l2_rate)
                for layer in _repeat(base.gamma_hidden, gamma_layers)
            ),
            pi_output=base.pi_output,
            gamma_output=base.gamma_output,
            pi_output_l2=base.pi_output_l2,
            gamma_output_l2=base.gamma_output_l2,
            dedicated_branches=base.dedicated_branches,
        ).build(schema.m, schema.n, schema.o)
        fits = repeated_fit(topology, folds, config, seeds)
        best = fits.best_run
        if best is None:
            return candidate, None, "all seeds failed"
        report = evaluate(TnnModel(schema, topology, fits.params[best]), folds.generalization, seed=best[1])
        point = GridPoint(
            pi_layers,
            pi_units,
            gamma_layers,
            gamma_units,
            count_parameters(topology),
            report.mse,
            report.linf,
            best[1],
            fits.mean_test_mse,
        )
        return candidate, point, None
    except Exception as error:
        return candidate, None, error


def _repeat(layers, count):
    """count hidden layers, reusing the last configured layer when there are fewer"""
    layers = tuple(layers) or (LayerSpec(1, SIGMOID),)
    return [layers[min(index, len(layers) - 1)] for index in range(count)]


def grid_search(
    layer_range,
    units,
    config,
    folds,
    seeds,
    base=None,
    budget=None,
    seed=0,
    jobs=1,
    failure_mode=None,
):
    """
    Random search over hidden layer counts and widths of both networks.
    :param tuple layer_range: smallest and largest hidden layer count
    :param list units: widths per hidden layer
    :param TrainConfig config: fixed training settings
    :param TopologyConfig base: activations and l2 rates of the hidden and output layers
    :param int budget: number of candidates drawn without replacement, all when None
    :return GridResult: one point per finished candidate, Pareto members flagged
    """
    candidates = grid_candidates(layer_range, units)
    if not candidates:
        raise ArgumentError("the grid is empty")
    if budget is not None and budget < len(candidates):
        chosen = np.random.default_rng(seed).choice(len(candidates), size=budget, replace=False)
        candidates = [candidates[index] for index in sorted(chosen)]
    base = base or TopologyConfig()
    failure_mode = failure_mode or recording()
    schema = folds.train[0].schema
    tasks = [(candidate, base, folds, config, seeds, schema) for candidate in candidates]

    jobs = min(available_jobs(jobs), len(tasks))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(_run_candidate, tasks))
    else:
        results = [_run_candidate(task) for task in tasks]

    points, failures = [], {}
    for candidate, point, error in results:
        if point is None:
            if not isinstance(error, Exception):
                error = ArgumentError(error)
            failures[candidate] = failure_mode.handle(error, "candidate {}".format(candidate))
            continue
        if not np.isfinite(point.mse):
            failures[candidate] = failure_mode.handle(
                NumericalError("all generalization profiles diverged"), "candidate {}".format(candidate)
            )
            continue
        points.append(point)

    for index in pareto_front([(point.parameter_count, point.mse) for point in points]):
        points[index].pareto = True
    return GridResult(points, failures)


@dataclass(frozen=True)
class AcceptanceCriteria:
    """Limits checked by the studies; None disables a check"""

    max_mse_k2: float = None
    max_linf_k: float = None
    max_recovery_s: float = None

    def check_eval(self, report):
        violations = []
        if self.max_mse_k2 is not None and not report.mse <= self.max_mse_k2:
            violations.append("MSE {:.4g} K^2 exceeds {:.4g} K^2".format(report.mse, self.max_mse_k2))
        if self.max_linf_k is not None and not report.linf <= self.max_linf_k:
            violations.append("l-inf {:.4g} K exceeds {:.4g} K".format(report.linf, self.max_linf_k))
        if report.failed_profiles and (self.max_mse_k2 is not None or self.max_linf_k is not None):
            violations.append("profiles diverged: {}".format(", ".join(report.failed_profiles)))
        return violations

    def check_recovery(self, table):
        if self.max_recovery_s is None or table.max_recovery <= self.max_recovery_s:
            return []
        return ["recovery takes {:.4g} s, limit {:.4g} s".format(table.max_recovery, self.max_recovery_s)]

    def check_grid(self, result):
        if self.max_mse_k2 is None:
            return []
        if any(point.mse <= self.max_mse_k2 for point in result.points):
            return []
        return ["no grid candidate reaches {:.4g} K^2".format(self.max_mse_k2)]
