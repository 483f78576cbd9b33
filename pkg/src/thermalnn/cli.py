"""
Purpose: Command line entry point.
Usages:
    thermalnn simulate --config run.toml --out data/
    thermalnn train --config run.toml --data data/ --out models/tnn.json --seeds 1,2,3
    thermalnn eval --config run.toml --data data/ --model models/tnn.json --out eval/
    thermalnn prune --config run.toml --data data/ --models models/*.json --threshold 0.05 --out prune/
    thermalnn init-study --config run.toml --data data/ --model models/tnn.json --out study/
    thermalnn grid --config run.toml --data data/ --budget 4 --out grid/
    thermalnn inspect --model models/tnn.json
"""

import argparse
import datetime
import json
import logging
import os
import shutil
import sys
import tempfile
from argparse import ArgumentTypeError
from dataclasses import asdict, dataclass, field, replace

import pandas as pd

from .__version__ import __version__
from .analysis import (
    conductance_medians,
    detuned_init_study,
    edge_weight_table,
    evaluate,
    grid_search,
    prune,
)
from .config import (
    build_analysis_config,
    build_fold_plan,
    build_plant_settings,
    build_schema,
    build_topology,
    build_topology_config,
    build_train_config,
    fold_iteration,
    load_config,
    theta_c_init,
    train_seeds,
)
from .const import (
    CSV_ENCODING,
    EXIT_ACCEPTANCE_FAILURE,
    EXIT_CONFIG_ERROR,
    EXIT_IO_ERROR,
    EXIT_OK,
    EXIT_TRAINING_FAILURE,
    FOLD_ITERATIONS,
    INIT_MODES,
    MANIFEST_FILENAME,
    MEASUREMENTS_FILENAME,
    ROLE_FOLD_1,
    ROLE_FOLD_2,
    ROLE_GENERALIZATION,
    ROLE_TRAIN,
    TRUTH_FILENAME,
)
from .data import ingest_csv, make_folds
from .logger import EpochLogger
from .plant import simulate, write_dataset
from .plotting import plot_pareto, plot_recovery, plot_trajectories
from .tnn import (
    TnnModel,
    count_parameters,
    init_tnn_parameters,
    load_model,
    make_topology,
    save_model,
)
from .tnn_exceptions import (
    ConfigError,
    DivergenceError,
    ParseError,
    PlanError,
    SchemaError,
    ThermalNNError,
    TrainingError,
)
from .train import fit, repeated_fit
from .utils import available_jobs, file_digest, parse_number_list

logger = logging.getLogger(__name__)

FORMAT_CSV = "csv"
FORMAT_JSON = "json"
SET_ALL = "all"
SET_CHOICES = (ROLE_GENERALIZATION, ROLE_FOLD_1, ROLE_FOLD_2, ROLE_TRAIN, SET_ALL)
PRUNING_FILENAME = "pruning.json"


class AcceptanceFailure(Exception):
    """An acceptance check of the study configuration failed"""


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: list
    version: str = __version__
    created: str = field(default_factory=lambda: datetime.datetime.now().isoformat())
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)


class StagedOutput(object):
    """
    Collects output files in a hidden directory next to the target directory and moves them
    into place only when the command succeeds.
    """

    def __init__(self, out_dir):
        self.out_dir = os.path.abspath(out_dir)
        self._stage = None
        self._names = []

    def __enter__(self):
        parent = os.path.dirname(self.out_dir)
        os.makedirs(parent, exist_ok=True)
        self._stage = tempfile.mkdtemp(prefix=".thermalnn-", dir=parent)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        if exc_type is None:
            os.makedirs(self.out_dir, exist_ok=True)
            for name in self._names:
                os.replace(os.path.join(self._stage, name), os.path.join(self.out_dir, name))
        shutil.rmtree(self._stage, ignore_errors=True)
        return False

    @property
    def stage(self):
        return self._stage

    def path(self, name):
        """Staging path of an output file"""
        if name not in self._names:
            self._names.append(name)
        return os.path.join(self._stage, name)

    def final(self, name):
        return os.path.join(self.out_dir, name)

    def write_manifest(self, manifest):
        manifest.outputs = {
            self.final(name): file_digest(self.path(name))
            for name in list(self._names)
            if name != MANIFEST_FILENAME
        }
        with open(self.path(MANIFEST_FILENAME), "w", encoding="utf-8") as handle:
            json.dump(asdict(manifest), handle, indent=1, default=str)


def readable(path, is_dir=False):
    if is_dir and not os.path.isdir(path):
        raise ArgumentTypeError("{} is not a valid directory".format(path))
    elif not is_dir and not os.path.exists(path):
        raise ArgumentTypeError("{} does not exist".format(path))
    if os.access(path, os.R_OK):
        return path
    raise ArgumentTypeError("{0} is not readable".format(path))


def readable_file(path):
    if os.path.isdir(path):
        raise ArgumentTypeError("{} is a directory".format(path))
    return readable(path)


def number_list(text):
    try:
        return parse_number_list(text)
    except ValueError:
        raise ArgumentTypeError("{} is not a comma separated list of numbers".format(text))


def seed_list(text):
    try:
        return parse_number_list(text, int)
    except ValueError:
        raise ArgumentTypeError("{} is not a comma separated list of integers".format(text))


def _measurements_path(path):
    return os.path.join(path, MEASUREMENTS_FILENAME) if os.path.isdir(path) else path


def _inputs(*paths):
    return {path: file_digest(path) for path in paths if path and os.path.isfile(path)}


def _write_table(frame, output, stem, output_format):
    name = "{}.{}".format(stem, output_format)
    if output_format == FORMAT_JSON:
        frame.to_json(output.path(name), orient="records", indent=1)
    else:
        frame.to_csv(output.path(name), index=False, encoding=CSV_ENCODING)
    return name


def _load_folds(config, schema, data_path):
    profiles = ingest_csv(_measurements_path(data_path), schema)
    return profiles, make_folds(profiles, build_fold_plan(config))


def _select(profiles, folds, name):
    if name == SET_ALL or folds is None:
        return list(profiles)
    return list(
        {
            ROLE_TRAIN: folds.train,
            ROLE_FOLD_1: folds.fold_1,
            ROLE_FOLD_2: folds.fold_2,
            ROLE_GENERALIZATION: folds.generalization,
        }[name]
    )


def _check(violations):
    for violation in violations:
        logger.error("acceptance check failed: %s", violation)
    if violations:
        raise AcceptanceFailure("; ".join(violations))


def cmd_simulate(args):
    config = load_config(args.config)
    settings = build_plant_settings(config)
    seed = settings.seed if args.seed is None else args.seed
    dataset = simulate(settings.spec, settings.duration, settings.sample_time, seed, settings.profile_count)
    with StagedOutput(args.out) as output:
        write_dataset(dataset, output.stage)
        output.path(MEASUREMENTS_FILENAME)
        output.path(TRUTH_FILENAME)
        output.write_manifest(
            RunManifest("simulate", config.snapshot(), [seed], inputs=_inputs(args.config))
        )
    print("wrote {} profiles to {}".format(len(dataset.profiles), output.out_dir))
    return EXIT_OK


def _pruned_topology(topology, path):
    with open(path, "r", encoding="utf-8") as handle:
        pruned = json.load(handle)["pruned"]
    return make_topology(
        topology.m,
        topology.n,
        topology.o,
        pi_layers=topology.pi_specs[0].layers,
        gamma_layers=None if topology.gamma_spec is None else topology.gamma_spec.layers,
        dedicated_branches=topology.dedicated_branches,
        pruned=set(topology.pruned) | set(pruned),
        loss_mask=topology.loss_mask,
    )


def cmd_train(args):
    config = load_config(args.config)
    schema = build_schema(config)
    topology = build_topology(config, schema)
    if args.pruning:
        topology = _pruned_topology(topology, args.pruning)
    train_config = build_train_config(config)
    seeds = args.seeds or ([args.seed] if args.seed is not None else train_seeds(config))
    iteration = fold_iteration(config)

    if args.dry_run:
        build_fold_plan(config)
        print("parameters: {}".format(count_parameters(topology)))
        return EXIT_OK

    _, folds = _load_folds(config, schema, args.data)
    theta_c_mean, theta_c_std = theta_c_init(config)
    out_dir, model_name = os.path.split(os.path.abspath(args.out))
    stem, extension = os.path.splitext(model_name)
    inputs = _inputs(args.config, _measurements_path(args.data), args.pruning)

    with StagedOutput(out_dir) as output:
        if len(seeds) == 1:
            seed = seeds[0]
            log_path = args.log or os.path.join(out_dir, "{}_epochs.csv".format(stem))
            os.makedirs(out_dir, exist_ok=True)
            epoch_logger = EpochLogger(path=log_path)
            try:
                params, report = fit(
                    topology,
                    folds,
                    _seeded(train_config, seed),
                    iteration,
                    params=init_tnn_parameters(topology, seed, theta_c_mean, theta_c_std),
                    epoch_logger=epoch_logger,
                )
            finally:
                epoch_logger.close()
            save_model(TnnModel(schema, topology, params, _metadata(report, iteration)), output.path(model_name))
            print(
                "seed {}: best epoch {}, validation mse {:.6g}, test mse {:.6g}".format(
                    seed, report.best_epoch, report.best_val_mse, report.test_mse
                )
            )
        else:
            summary = repeated_fit(topology, folds, train_config, seeds, jobs=available_jobs(args.jobs))
            rows = []
            for key in ((fold, seed) for fold in FOLD_ITERATIONS for seed in seeds):
                fold, seed = key
                if key not in summary.reports:
                    rows.append({"iteration": fold, "seed": seed, "status": str(summary.failures[key])})
                    continue
                report = summary.reports[key]
                if fold == iteration:
                    name = "{}_seed{}{}".format(stem, seed, extension)
                    model = TnnModel(schema, topology, summary.params[key], _metadata(report, fold))
                    save_model(model, output.path(name))
                rows.append(
                    {
                        "iteration": fold,
                        "seed": seed,
                        "status": "ok",
                        "best_epoch": report.best_epoch,
                        "val_mse": report.best_val_mse,
                        "test_mse": report.test_mse,
                    }
                )
            _write_table(pd.DataFrame(rows), output, "{}_seeds".format(stem), args.format)
            if not summary.reports:
                raise TrainingError("every seed failed")
            _write_table(pd.DataFrame(summary.fold_rows()), output, "{}_folds".format(stem), args.format)
            for row in summary.fold_rows():
                print(
                    "test mse of fold {} over {} runs: mean {:.6g}, min {:.6g}, max {:.6g}".format(
                        row["iteration"], row["runs"], row["mean_test_mse"], row["min_test_mse"], row["max_test_mse"]
                    )
                )
        output.write_manifest(RunManifest("train", config.snapshot(), list(seeds), inputs=inputs))
    return EXIT_OK


def _seeded(train_config, seed):
    return replace(train_config, seed=int(seed))


def _metadata(report, iteration):
    return {
        "seed": report.seed,
        "iteration": iteration,
        "best_epoch": report.best_epoch,
        "val_mse": report.best_val_mse,
        "test_mse": report.test_mse,
    }


def cmd_eval(args):
    config = load_config(args.config)
    analysis = build_analysis_config(config)
    model = load_model(args.model)
    profiles, folds = _profiles_for(config, model, args)
    init_mode = args.init_mode or analysis.init_mode
    fixed_value = args.fixed_value if args.fixed_value is not None else analysis.fixed_value
    report = evaluate(
        model, profiles, init_mode, fixed_value, seed=model.metadata.get("seed"), fold=args.set
    )
    with StagedOutput(args.out) as output:
        _write_table(pd.DataFrame(report.rows()), output, "eval", args.format)
        if args.plot:
            for profile in profiles:
                if profile.profile_id in report.estimates:
                    name = "trajectory_{}.svg".format(profile.profile_id.replace("/", "_"))
                    plot_trajectories(profile, report.estimates[profile.profile_id], output.path(name))
        output.write_manifest(
            RunManifest(
                "eval",
                config.snapshot(),
                [model.metadata.get("seed")],
                inputs=_inputs(args.config, _measurements_path(args.data), args.model),
            )
        )
    print("mse {:.4g} K^2, l-inf {:.4g} K".format(report.mse, report.linf))
    _check(analysis.acceptance.check_eval(report))
    return EXIT_OK


def _profiles_for(config, model, args):
    profiles = ingest_csv(_measurements_path(args.data), model.schema)
    if args.set == SET_ALL:
        return profiles, None
    folds = make_folds(profiles, build_fold_plan(config))
    return _select(profiles, folds, args.set), folds


def cmd_prune(args):
    config = load_config(args.config)
    analysis = build_analysis_config(config)
    threshold = args.threshold if args.threshold is not None else analysis.threshold
    if threshold is None:
        raise ConfigError("a pruning threshold is required", key="analysis.threshold", location=args.config)
    models = [load_model(path) for path in args.models]
    profiles, _ = _profiles_for(config, models[0], args)
    scores = [evaluate(model, profiles).mse for model in models]
    profile = conductance_medians(
        models, scores, analysis.mse_cutoff, analysis.median_samples, analysis.seed
    )
    profile.threshold = threshold
    topology = models[0].topology
    pruned = prune(topology, profile, threshold)

    with StagedOutput(args.out) as output:
        table = edge_weight_table(profile, models[0].node_names, pruned.pruned)
        _write_table(table, output, "conductances", args.format)
        with open(output.path(PRUNING_FILENAME), "w", encoding="utf-8") as handle:
            json.dump(
                {
                    "threshold": threshold,
                    "mse_cutoff": analysis.mse_cutoff,
                    "model_count": profile.model_count,
                    "pruned": sorted(pruned.pruned),
                    "medians": [float(value) for value in profile.medians],
                },
                handle,
                indent=1,
            )
        output.write_manifest(
            RunManifest(
                "prune",
                config.snapshot(),
                [analysis.seed],
                inputs=_inputs(args.config, _measurements_path(args.data), *args.models),
            )
        )
    print(
        "pruned {} of {} pairs; parameters {} -> {}".format(
            len(pruned.pruned),
            len(topology.pair_index),
            count_parameters(topology),
            count_parameters(pruned),
        )
    )
    return EXIT_OK


def cmd_init_study(args):
    config = load_config(args.config)
    model = load_model(args.model)
    analysis = build_analysis_config(config, model.schema)
    profiles, _ = _profiles_for(config, model, args)
    if args.profile is not None:
        profiles = [profile for profile in profiles if profile.profile_id == args.profile]
        if not profiles:
            raise ConfigError("unknown profile {}".format(args.profile), key="--profile", location="command line")
    profile = profiles[0]
    offsets = args.offsets or analysis.offsets
    table = detuned_init_study(model, profile, offsets, analysis.per_target, analysis.band)
    with StagedOutput(args.out) as output:
        _write_table(table.to_frame(), output, "recovery", args.format)
        if args.plot:
            plot_recovery(profile, table, output.path("recovery.svg"))
        output.write_manifest(
            RunManifest(
                "init-study",
                config.snapshot(),
                [model.metadata.get("seed")],
                inputs=_inputs(args.config, _measurements_path(args.data), args.model),
            )
        )
    print("longest recovery: {:.4g} s".format(table.max_recovery))
    _check(analysis.acceptance.check_recovery(table))
    return EXIT_OK


def cmd_grid(args):
    config = load_config(args.config)
    schema = build_schema(config)
    analysis = build_analysis_config(config, schema)
    train_config = build_train_config(config)
    base = build_topology_config(config, schema)
    seeds = args.seeds or train_seeds(config)
    budget = args.budget if args.budget is not None else analysis.budget
    _, folds = _load_folds(config, schema, args.data)
    result = grid_search(
        analysis.layer_range,
        analysis.units,
        train_config,
        folds,
        seeds,
        base=base,
        budget=budget,
        seed=analysis.seed,
        jobs=available_jobs(args.jobs),
    )
    with StagedOutput(args.out) as output:
        _write_table(result.to_frame(), output, "pareto", args.format)
        if args.plot and result.points:
            plot_pareto(result, output.path("pareto.svg"))
        output.write_manifest(
            RunManifest(
                "grid",
                config.snapshot(),
                list(seeds),
                inputs=_inputs(args.config, _measurements_path(args.data)),
            )
        )
    print("{} candidates finished, {} on the Pareto front".format(len(result.points), len(result.front)))
    _check(analysis.acceptance.check_grid(result))
    return EXIT_OK


def cmd_inspect(args):
    model = load_model(args.model)
    topology = model.topology
    print("targets: {}".format(", ".join(model.schema.targets)))
    print("ancillary: {}".format(", ".join(model.schema.ancillary)))
    print("exogenous: {}".format(", ".join(model.schema.exogenous)))
    for branch, spec in enumerate(topology.pi_specs):
        print("pi[{}]: {}".format(branch, _layers(spec)))
    print("gamma: {}".format("pruned" if topology.gamma_spec is None else _layers(topology.gamma_spec)))
    names = model.node_names
    rows = []
    for slot, (i, j) in enumerate(topology.pair_index.pairs()):
        state = "pruned" if slot in topology.pruned else "active"
        print("  slot {:3d}: {} - {} ({})".format(slot, names[i], names[j], state))
        rows.append({"slot": slot, "node_a": names[i], "node_b": names[j], "state": state})
    print("parameters: {}".format(count_parameters(topology)))
    for key, value in sorted(model.metadata.items()):
        print("{}: {}".format(key, value))

    if args.out:
        with StagedOutput(args.out) as output:
            _write_table(pd.DataFrame(rows), output, "pairs", args.format)
            seeds = [model.metadata["seed"]] if "seed" in model.metadata else []
            output.write_manifest(
                RunManifest("inspect", {"topology": topology.to_dict()}, seeds, inputs=_inputs(args.model))
            )
    return EXIT_OK


def _layers(spec):
    return " -> ".join("{}x{}".format(layer.width, layer.activation.value) for layer in spec.layers)


def create_parser():
    parser = argparse.ArgumentParser(prog="thermalnn", description="Thermal neural network toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--verbose", action="store_true", help="Log progress messages.")
    commands = parser.add_subparsers(dest="command", required=True)

    configured = argparse.ArgumentParser(add_help=False)
    configured.add_argument("--config", type=readable_file, default=None, help="TOML run configuration.")

    formatted = argparse.ArgumentParser(add_help=False)
    formatted.add_argument(
        "--format", choices=[FORMAT_CSV, FORMAT_JSON], default=FORMAT_CSV, help="Format of report tables."
    )
    common = [configured, formatted]

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", type=readable, required=True, help="Measurement CSV or its directory.")

    subset = argparse.ArgumentParser(add_help=False)
    subset.add_argument(
        "--set", choices=SET_CHOICES, default=ROLE_GENERALIZATION, help="Profiles to use."
    )

    jobs = argparse.ArgumentParser(add_help=False)
    jobs.add_argument("--jobs", type=int, default=None, help="Worker processes, default all cores.")

    plot = argparse.ArgumentParser(add_help=False)
    plot.add_argument("--plot", action="store_true", help="Also write SVG figures.")

    command = commands.add_parser("simulate", parents=[configured], help="Generate synthetic plant data.")
    command.add_argument("--out", required=True, help="Output directory.")
    command.add_argument("--seed", type=int, default=None, help="Overrides [plant].seed.")
    command.set_defaults(handler=cmd_simulate)

    command = commands.add_parser("train", parents=common + [data, jobs], help="Train a network.")
    command.add_argument("--out", required=True, help="Model file; seed suffixes are added for several seeds.")
    command.add_argument("--seed", type=int, default=None, help="Single training seed.")
    command.add_argument("--seeds", type=seed_list, default=None, help="Comma separated seeds.")
    command.add_argument("--pruning", type=readable_file, default=None, help="pruning.json of a prune run.")
    command.add_argument("--log", default=None, help="Epoch log CSV, next to the model by default.")
    command.add_argument("--dry-run", action="store_true", help="Validate and print the parameter count.")
    command.set_defaults(handler=cmd_train, data=None)
    _optional_data(command)

    command = commands.add_parser("eval", parents=common + [data, subset, plot], help="Score a model.")
    command.add_argument("--model", type=readable_file, required=True)
    command.add_argument("--out", required=True, help="Output directory.")
    command.add_argument("--init-mode", choices=INIT_MODES, default=None)
    command.add_argument("--fixed-value", type=float, default=None, help="Start temperature in degC.")
    command.set_defaults(handler=cmd_eval)

    command = commands.add_parser("prune", parents=common + [data, subset], help="Conductance medians and pruning.")
    command.add_argument("--models", type=readable_file, nargs="+", required=True)
    command.add_argument("--threshold", type=float, default=None)
    command.add_argument("--out", required=True, help="Output directory.")
    command.set_defaults(handler=cmd_prune)

    command = commands.add_parser(
        "init-study", parents=common + [data, subset, plot], help="Detuned initial condition study."
    )
    command.add_argument("--model", type=readable_file, required=True)
    command.add_argument("--profile", default=None, help="Profile id, first of the set by default.")
    command.add_argument("--offsets", type=number_list, default=None, help="Offsets in K, e.g. -30,30.")
    command.add_argument("--out", required=True, help="Output directory.")
    command.set_defaults(handler=cmd_init_study)

    command = commands.add_parser("grid", parents=common + [data, jobs, plot], help="Model size grid search.")
    command.add_argument("--budget", type=int, default=None, help="Number of sampled candidates.")
    command.add_argument("--seeds", type=seed_list, default=None)
    command.add_argument("--out", required=True, help="Output directory.")
    command.set_defaults(handler=cmd_grid)

    command = commands.add_parser("inspect", parents=[formatted], help="Describe a model file.")
    command.add_argument("--model", type=readable_file, required=True)
    command.add_argument("--out", default=None, help="Also write the pair table to this directory.")
    command.set_defaults(handler=cmd_inspect)
    return parser


def _optional_data(command):
    for action in command._actions:
        if action.dest == "data":
            action.required = False


def main(argv=None):
    parser = create_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "train" and not args.dry_run and args.data is None:
            parser.error("train needs --data unless --dry-run is given")
        return args.handler(args)
    except (ConfigError, SchemaError, PlanError, ParseError) as error:
        print("configuration error: {}".format(error), file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (TrainingError, DivergenceError) as error:
        print("training failed: {}".format(error), file=sys.stderr)
        return EXIT_TRAINING_FAILURE
    except AcceptanceFailure as error:
        print("acceptance check failed: {}".format(error), file=sys.stderr)
        return EXIT_ACCEPTANCE_FAILURE
    except OSError as error:
        print("i/o error: {}".format(error), file=sys.stderr)
        return EXIT_IO_ERROR
    except ThermalNNError as error:
        print("error: {}".format(error), file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
