"""
Purpose: SVG figures of the studies.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(figure, path):
    figure.tight_layout()
    figure.savefig(path, format="svg")
    plt.close(figure)
    return path


def plot_trajectories(profile, estimate, path):
    """Measured and estimated temperatures per target, with the error below"""
    schema = profile.schema
    time = np.arange(len(profile)) * schema.sample_time / 3600.0
    truth = profile.targets * schema.target_divisors
    estimate = np.asarray(estimate) * schema.target_divisors

    figure, axes = plt.subplots(2, schema.m, figsize=(4 * schema.m, 5), sharex=True, squeeze=False)
    for column, name in enumerate(schema.targets):
        axes[0, column].plot(time, truth[:, column], label="measured", color="tab:green")
        axes[0, column].plot(time, estimate[:, column], label="estimated", color="tab:blue")
        axes[0, column].set_title(name)
        axes[1, column].plot(time, estimate[:, column] - truth[:, column], color="tab:red")
        axes[1, column].set_xlabel("time in h")
    axes[0, 0].set_ylabel("temperature in degC")
    axes[1, 0].set_ylabel("error in K")
    axes[0, 0].legend()
    return _save(figure, path)


def plot_recovery(profile, table, path):
    """Error trajectories of the detuned starts with the tolerance band"""
    schema = profile.schema
    time = np.arange(len(profile)) * schema.sample_time / 60.0
    figure, axes = plt.subplots(1, schema.m, figsize=(4 * schema.m, 3.5), squeeze=False)
    for column, name in enumerate(schema.targets):
        axis = axes[0, column]
        axis.axhspan(-table.band, table.band, color="tab:red", alpha=0.15)
        for offset, trajectory in sorted(table.estimates.items()):
            errors = (trajectory[:, column] - profile.targets[:, column]) * schema.target_divisors[column]
            axis.plot(time, errors, label="{:+g} K".format(offset))
        axis.set_title(name)
        axis.set_xlabel("time in min")
    axes[0, 0].set_ylabel("error in K")
    axes[0, 0].legend(fontsize="small")
    return _save(figure, path)


def plot_pareto(result, path):
    """Generalization MSE over model size, Pareto members highlighted"""
    figure, axis = plt.subplots(figsize=(5, 4))
    counts = [point.parameter_count for point in result.points]
    mses = [point.mse for point in result.points]
    axis.scatter(counts, mses, color="tab:gray", alpha=0.6, label="candidates")
    front = sorted(result.front, key=lambda point: point.parameter_count)
    axis.plot(
        [point.parameter_count for point in front],
        [point.mse for point in front],
        marker="o",
        color="tab:blue",
        label="Pareto front",
    )
    axis.set_xscale("log")
    axis.set_xlabel("model size in parameters")
    axis.set_ylabel("MSE in K^2")
    axis.legend()
    return _save(figure, path)
