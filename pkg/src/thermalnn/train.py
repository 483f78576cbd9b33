"""
Purpose: Optimizers, gradient clipping and the training loop with early stopping on the
    validation fold.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .const import (
    ADAM,
    BETA_1,
    BETA_2,
    DEFAULT_CLIP_THRESHOLD,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_PATIENCE,
    DEFAULT_TBPTT_LENGTH,
    DIVERGENCE_BOUND,
    EPSILON,
    FOLD_ITERATIONS,
    MAX_DIVERGED_WINDOW_SHARE,
    MOMENTUM,
    NADAM,
    OPTIMIZERS,
    SGD_MOMENTUM,
)
from .data import split_subsequences
from .failure_mode import recording
from .tnn import init_tnn_parameters, score_profiles, tbptt_gradients
from .tnn_exceptions import ArgumentError, ContractError, NumericalError, TrainingError
from .utils import available_jobs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """
    optimizer: one of adam, nadam, sgd_momentum
    tbptt_length: samples per truncated backpropagation window
    clip_threshold: global gradient norm limit, None disables clipping
    subsequence_length: when set, training profiles are split into windows of this many samples
    reset_state: start every window from the ground truth instead of the carried estimate
    """

    optimizer: str = NADAM
    learning_rate: float = DEFAULT_LEARNING_RATE
    tbptt_length: int = DEFAULT_TBPTT_LENGTH
    clip_threshold: object = DEFAULT_CLIP_THRESHOLD
    max_epochs: int = DEFAULT_MAX_EPOCHS
    patience: int = DEFAULT_PATIENCE
    seed: int = 0
    subsequence_length: object = None
    reset_state: bool = False
    divergence_bound: float = DIVERGENCE_BOUND

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ArgumentError(
                "unknown optimizer {!r}, expected one of {}".format(self.optimizer, OPTIMIZERS)
            )
        if not self.learning_rate > 0.0:
            raise ArgumentError("learning rate must be positive, got {}".format(self.learning_rate))
        if self.tbptt_length < 2:
            raise ArgumentError("TBPTT length must be at least 2, got {}".format(self.tbptt_length))
        if self.clip_threshold is not None and not self.clip_threshold > 0.0:
            raise ArgumentError("clip threshold must be positive, got {}".format(self.clip_threshold))
        if self.max_epochs < 1:
            raise ArgumentError("max epochs must be at least 1, got {}".format(self.max_epochs))
        if self.patience < 1:
            raise ArgumentError("patience must be at least 1, got {}".format(self.patience))
        if self.subsequence_length is not None and self.subsequence_length < 2:
            raise ArgumentError(
                "subsequence length must be at least 2, got {}".format(self.subsequence_length)
            )


def global_norm(grads):
    """
    l2 norm over all gradient arrays
    :raises NumericalError: naming the first block with a non-finite entry
    """
    total = 0.0
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite gradient in {}".format(name), block=name)
        total += float(np.sum(grad * grad))
    return float(np.sqrt(total))


def clip_gradients(grads, threshold):
    """
    Rescales all gradients by threshold / norm when their global norm exceeds threshold.
    :param dict grads: gradient arrays by name
    :return dict: the clipped gradients (new arrays)
    """
    if not threshold > 0.0:
        raise ArgumentError("clip threshold must be positive, got {}".format(threshold))
    norm = global_norm(grads)
    scale = threshold / norm if norm > threshold else 1.0
    return {name: grad * scale for name, grad in grads.items()}


@dataclass(eq=False)
class OptimizerState:
    kind: str
    step: int = 0
    first: dict = field(default_factory=dict)
    second: dict = field(default_factory=dict)


def optimizer_step(kind, state, params, grads, learning_rate):
    """
    One in-place update of params.
    :param str kind: adam, nadam or sgd_momentum
    :param OptimizerState state: moments of earlier steps, None on the first call
    :param dict params: parameter arrays by name, updated in place
    :param dict grads: gradient arrays with the same names
    :return tuple: (params, state)
    """
    if not learning_rate > 0.0:
        raise ArgumentError("learning rate must be positive, got {}".format(learning_rate))
    if kind not in OPTIMIZERS:
        raise ArgumentError("unknown optimizer {!r}".format(kind))
    if grads.keys() != params.keys():
        raise ContractError("gradients do not match the parameter layout")
    if state is None:
        state = OptimizerState(
            kind,
            first={name: np.zeros_like(array) for name, array in params.items()},
            second={name: np.zeros_like(array) for name, array in params.items()},
        )
    elif state.kind != kind or state.first.keys() != params.keys():
        raise ContractError("optimizer state belongs to another optimizer or parameter layout")

    state.step += 1
    t = state.step
    for name, param in params.items():
        grad = grads[name]
        first = state.first[name]
        if kind == SGD_MOMENTUM:
            first *= MOMENTUM
            first -= learning_rate * grad
            param += first
            continue

        second = state.second[name]
        first *= BETA_1
        first += (1.0 - BETA_1) * grad
        second *= BETA_2
        second += (1.0 - BETA_2) * grad * grad
        second_hat = second / (1.0 - BETA_2**t)
        if kind == ADAM:
            first_hat = first / (1.0 - BETA_1**t)
        else:
            first_hat = BETA_1 * first / (1.0 - BETA_1 ** (t + 1)) + (1.0 - BETA_1) * grad / (
                1.0 - BETA_1**t
            )
        param -= learning_rate * first_hat / (np.sqrt(second_hat) + EPSILON)
    return params, state


class EarlyStopping(object):
    """Keeps the best snapshot and tells when the validation score stopped improving"""

    def __init__(self, patience):
        self.patience = patience
        self.best_score = np.inf
        self.best_epoch = None
        self.snapshot = None
        self._bad_epochs = 0

    def update(self, epoch, score, params):
        """:return bool: True when training should stop"""
        if self.snapshot is None or score < self.best_score:
            self.best_score = score
            self.best_epoch = epoch
            self.snapshot = params.copy()
            self._bad_epochs = 0
            return False
        self._bad_epochs += 1
        return self._bad_epochs >= self.patience


@dataclass
class TrainReport:
    train_losses: list
    val_mses: list
    grad_norms: list
    stopped_epoch: int
    best_epoch: int
    best_val_mse: float
    test_mse: float
    seed: int
    diverged_windows: list
    wall_clock: float = field(default=0.0, compare=False)


def _windows(profile, length):
    """Consecutive windows sharing their boundary sample"""
    stride = length - 1
    for start in range(0, len(profile) - 1, stride):
        yield start, profile.window(start, min(start + length, len(profile)))


def _score(topology, params, profiles, bound):
    try:
        return score_profiles(topology, params, profiles, bound)
    except NumericalError as error:
        logger.info("scoring diverged: %s", error)
        return np.inf


def fit(topology, folds, config, iteration=1, params=None, epoch_logger=None):
    """
    Trains with truncated backpropagation through time and early stopping.
    :param TnnTopology topology: the network
    :param FoldSets folds: data; iteration selects the validation and test fold
    :param TrainConfig config: hyperparameters
    :param TnnParameters params: start values, drawn from config.seed when None
    :param EpochLogger epoch_logger: receives one row per epoch
    :return tuple: (best TnnParameters, TrainReport)
    """
    started = time.perf_counter()
    validation, test = folds.iteration(iteration)
    profiles = list(folds.train)
    if config.subsequence_length:
        profiles = [
            piece for profile in profiles for piece in split_subsequences(profile, config.subsequence_length)
        ]
    if not profiles:
        raise ArgumentError("no training profiles")

    params = init_tnn_parameters(topology, config.seed) if params is None else params.copy()
    arrays = params.to_arrays()
    rng = np.random.default_rng([config.seed, 1])
    optimizer_state = None
    stopping = EarlyStopping(config.patience)
    train_losses, val_mses, grad_norms, diverged_counts = [], [], [], []

    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        if epoch_logger is not None:
            epoch_logger.log_epoch_start()
        losses, norms = [], []
        windows = diverged = 0
        for position in rng.permutation(len(profiles)):
            profile = profiles[position]
            carried = None
            for start, window in _windows(profile, config.tbptt_length):
                windows += 1
                initial = carried if carried is not None and not config.reset_state else None
                try:
                    loss, grads, carried = tbptt_gradients(
                        topology,
                        params,
                        window,
                        initial_state=initial,
                        max_length=config.tbptt_length,
                        divergence_bound=config.divergence_bound,
                        return_final_state=True,
                    )
                    norm = global_norm(grads)
                except NumericalError as error:
                    logger.info("window at %s of profile %s skipped: %s", start, profile.profile_id, error)
                    diverged += 1
                    carried = None
                    continue
                if config.clip_threshold is not None:
                    grads = clip_gradients(grads, config.clip_threshold)
                _, optimizer_state = optimizer_step(
                    config.optimizer, optimizer_state, arrays, grads, config.learning_rate
                )
                losses.append(loss)
                norms.append(norm)

        if diverged > MAX_DIVERGED_WINDOW_SHARE * windows:
            raise TrainingError(
                "{} of {} windows diverged in epoch {}; try a smaller learning rate than {}".format(
                    diverged, windows, epoch, config.learning_rate
                )
            )

        train_loss = float(np.mean(losses))
        val_mse = _score(topology, params, validation, config.divergence_bound)
        grad_norm = float(np.mean(norms))
        train_losses.append(train_loss)
        val_mses.append(val_mse)
        grad_norms.append(grad_norm)
        diverged_counts.append(diverged)
        if epoch_logger is not None:
            epoch_logger.log_epoch_end(epoch, train_loss, val_mse, grad_norm)
        logger.info(
            "seed %s epoch %s: train loss %.6g, validation mse %.6g", config.seed, epoch, train_loss, val_mse
        )
        if stopping.update(epoch, val_mse, params):
            break

    best = stopping.snapshot
    report = TrainReport(
        train_losses=train_losses,
        val_mses=val_mses,
        grad_norms=grad_norms,
        stopped_epoch=epoch,
        best_epoch=stopping.best_epoch,
        best_val_mse=stopping.best_score,
        test_mse=_score(topology, best, test, config.divergence_bound),
        seed=config.seed,
        diverged_windows=diverged_counts,
        wall_clock=time.perf_counter() - started,
    )
    return best, report


@dataclass
class RepeatedFitReport:
    """
    Results per (iteration, seed) run. The statistics cover the runs that finished; the
    fold-averaged mean is the mean of the per-iteration means.
    """

    params: dict
    reports: dict
    failures: dict

    @property
    def iterations(self):
        return sorted({iteration for iteration, _ in self.reports})

    def test_mses(self, iteration=None):
        return [
            self.reports[key].test_mse
            for key in sorted(self.reports)
            if iteration is None or key[0] == iteration
        ]

    def fold_statistics(self, iteration):
        """:return dict: runs, mean, min and max test MSE of one iteration"""
        mses = self.test_mses(iteration)
        if not mses:
            return {"runs": 0, "mean_test_mse": None, "min_test_mse": None, "max_test_mse": None}
        return {
            "runs": len(mses),
            "mean_test_mse": float(np.mean(mses)),
            "min_test_mse": float(np.min(mses)),
            "max_test_mse": float(np.max(mses)),
        }

    @property
    def mean_test_mse(self):
        if not self.reports:
            return None
        return float(np.mean([self.fold_statistics(iteration)["mean_test_mse"] for iteration in self.iterations]))

    @property
    def min_test_mse(self):
        return float(np.min(self.test_mses())) if self.reports else None

    @property
    def max_test_mse(self):
        return float(np.max(self.test_mses())) if self.reports else None

    @property
    def best_run(self):
        """:return tuple: (iteration, seed) with the lowest validation MSE"""
        if not self.reports:
            return None
        return min(self.reports, key=lambda key: (self.reports[key].best_val_mse, key))

    def fold_rows(self):
        """One row per iteration and a fold-averaged row"""
        rows = [dict(iteration=str(iteration), **self.fold_statistics(iteration)) for iteration in self.iterations]
        if rows:
            rows.append(
                {
                    "iteration": "average",
                    "runs": len(self.reports),
                    "mean_test_mse": self.mean_test_mse,
                    "min_test_mse": self.min_test_mse,
                    "max_test_mse": self.max_test_mse,
                }
            )
        return rows


def _fit_seed(arguments):
    topology, folds, config, iteration = arguments
    try:
        params, report = fit(topology, folds, config, iteration)
    except Exception as error:
        return (iteration, config.seed), None, None, error
    return (iteration, config.seed), params, report, None


def repeated_fit(topology, folds, config, seeds, iterations=FOLD_ITERATIONS, jobs=1, failure_mode=None):
    """
    Runs fit once per seed and cross-validation iteration. A failing run is handled by
    failure_mode (recorded with a warning by default) and never stops the other runs.
    :param list iterations: cross-validation iterations, both folds by default
    :param int jobs: worker processes; results are merged in (iteration, seed) order
    :return RepeatedFitReport: parameters, reports and failures keyed by (iteration, seed)
    """
    seeds = list(seeds)
    iterations = list(iterations)
    if not seeds:
        raise ArgumentError("at least one seed is required")
    for iteration in iterations:
        if iteration not in FOLD_ITERATIONS:
            raise ArgumentError("cross-validation iteration must be 1 or 2, got {}".format(iteration))
    if not iterations:
        raise ArgumentError("at least one cross-validation iteration is required")
    failure_mode = failure_mode or recording()
    tasks = [
        (topology, folds, replace(config, seed=int(seed)), iteration)
        for iteration in iterations
        for seed in seeds
    ]

    jobs = min(available_jobs(jobs), len(tasks))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(_fit_seed, tasks))
    else:
        results = [_fit_seed(task) for task in tasks]

    summary = RepeatedFitReport(params={}, reports={}, failures={})
    for key, params, report, error in results:
        if error is not None:
            summary.failures[key] = failure_mode.handle(error, "fold {} seed {}".format(*key))
            continue
        summary.params[key] = params
        summary.reports[key] = report
    return summary
