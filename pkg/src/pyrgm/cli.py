# Why does this file exist, and why not put this in `__main__`?
#
# You might be tempted to import things from `__main__` later,
# but that will cause problems: the code will get executed twice:
#
# - When you run `python -m pyrgm` python will execute
#   `__main__.py` as a script. That means there won't be any
#   `pyrgm.__main__` in `sys.modules`.
# - When you import `__main__` it will get executed again (as a module) because
#   there's no `pyrgm.__main__` in `sys.modules`.

"""
Module that contains the command line application.

Every subcommand writes its artifacts under `--out` and prints a JSON summary on standard output.
Failures print a JSON object `{"error": ..., "type": ...}` on standard error and map to exit codes:

- 0: success
- 2: usage or configuration error
- 3: I/O or file format error
- 4: numeric or degenerate geometry error
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type

from pyrgm.config import (
    ESTIMATOR_NAMES,
    PROTOCOL_NAMES,
    RgmConfig,
    apply_overrides,
    config_to_dict,
    dump_config,
    load_config,
    override_keys,
    validate_config,
)
from pyrgm.errors import (
    ConfigError,
    DegenerateGeometryError,
    DegenerateSampleError,
    FormatError,
    NumericError,
    ParameterError,
)
from pyrgm.formats import (
    atomic_write,
    dumps_lines,
    read_cloud,
    write_cloud,
    write_json,
    write_matrix,
    write_pairs,
    write_rows,
)
from pyrgm.geom import apply_transform
from pyrgm.logger import get_logger, set_verbosity
from pyrgm.metrics import report_to_rows
from pyrgm.net.model import ForwardTrace, rgm_forward
from pyrgm.net.weights import RgmWeights
from pyrgm.serializer import serialize_result, serialize_settings
from pyrgm.solve.lap import soft_to_hard
from pyrgm.solve.register import register
from pyrgm.synth import MANIFEST_NAME, make_dataset, protocol_settings
from pyrgm.train import evaluate, train

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

EXIT_CODES: Tuple[Tuple[Tuple[Type[BaseException], ...], int], ...] = (
    ((ConfigError, ParameterError), EXIT_USAGE),
    ((FormatError, OSError), EXIT_IO),
    ((NumericError, DegenerateGeometryError, DegenerateSampleError, ArithmeticError), EXIT_NUMERIC),
)
"""Exception families and their exit codes, checked in order."""

WEIGHTS_NAME = "weights.bin"
TRAIN_LOG_NAME = "train_log.jsonl"
CONFIG_NAME = "config.toml"
RESULT_NAME = "result.json"
TRANSFORMED_NAME = "transformed.ply"
REPORT_NAME = "report.json"
METRICS_CSV_NAME = "metrics.csv"
CORRESPONDENCES_NAME = "correspondences.csv"


def _configured(opts: argparse.Namespace, overrides: Sequence[Tuple[str, Any]]) -> RgmConfig:
    config = load_config(opts.config)
    return apply_overrides(config, override_keys(overrides))


def _out_dir(opts: argparse.Namespace) -> Path:
    out_dir = Path(opts.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _load_pair(opts: argparse.Namespace, config: RgmConfig) -> Tuple[Any, Any, RgmWeights]:
    return read_cloud(opts.src), read_cloud(opts.dst), RgmWeights.load(opts.weights, config.network)


def run_synth(opts: argparse.Namespace) -> Dict[str, Any]:
    """
    Generate a dataset.

    Arguments:
        opts: The parsed arguments.

    Returns:
        The summary to print.
    """
    config = _configured(
        opts,
        [
            ("data.protocol", opts.protocol),
            ("data.pairs", opts.pairs),
            ("data.points", opts.points),
            ("data.seed", opts.seed),
            ("data.role", opts.role),
        ],
    )
    data = config.data
    out_dir = _out_dir(opts)
    manifest = make_dataset(data.protocol, data.pairs, data.points, data.seed, out_dir, data.role)
    return {
        "manifest": str(out_dir / MANIFEST_NAME),
        "protocol": manifest["protocol"],
        "pairs": manifest["pairs"],
        "points": manifest["points"],
        "seed": manifest["seed"],
        "settings": serialize_settings(protocol_settings(data.protocol, data.seed)),
    }


def run_train(opts: argparse.Namespace) -> Dict[str, Any]:
    """
    Train the network.

    Arguments:
        opts: The parsed arguments.

    Returns:
        The summary to print.
    """
    config = _configured(
        opts,
        [
            ("train.dataset", opts.dataset),
            ("train.epochs", opts.epochs),
            ("train.lr", opts.lr),
            ("train.seed", opts.seed),
        ],
    )
    out_dir = _out_dir(opts)
    weights, log = train(config, out_dir=out_dir)
    weights.save(out_dir / WEIGHTS_NAME)
    with atomic_write(out_dir / TRAIN_LOG_NAME) as stream:
        stream.write(dumps_lines(log))
    with atomic_write(out_dir / CONFIG_NAME) as stream:
        stream.write(dump_config(config))
    return {
        "weights": str(out_dir / WEIGHTS_NAME),
        "log": str(out_dir / TRAIN_LOG_NAME),
        "epochs": len(log),
        "final_loss": log[-1]["mean_loss"] if log else None,
    }


def run_register(opts: argparse.Namespace) -> Dict[str, Any]:
    """
    Register one pair of clouds.

    Everything is computed before the first file is written.

    Arguments:
        opts: The parsed arguments.

    Returns:
        The serialized registration result.
    """
    config = _configured(
        opts,
        [
            ("solver.estimator", opts.estimator),
            ("solver.iterations", opts.iters),
            ("solver.seed", opts.seed),
            ("solver.tau", opts.tau),
        ],
    )
    source, target, weights = _load_pair(opts, config)
    solver = config.solver
    result = register(
        source,
        target,
        weights,
        estimator=solver.estimator,
        iterations=solver.iterations,
        tau=solver.tau,
        ransac_iters=solver.ransac_iters,
        ransac_threshold=solver.ransac_threshold,
        seed=solver.seed,
    )
    serialized = serialize_result(result, with_pairs=True)
    transformed = apply_transform(result.transform, source)

    out_dir = _out_dir(opts)
    write_json(out_dir / RESULT_NAME, serialized)
    write_cloud(out_dir / TRANSFORMED_NAME, transformed)
    return serialized


def run_eval(opts: argparse.Namespace) -> Dict[str, Any]:
    """
    Evaluate weights on a dataset.

    Arguments:
        opts: The parsed arguments.

    Raises:
        ParameterError: When no weights are given outside oracle mode.

    Returns:
        The summary of the aggregated report.
    """
    config = _configured(
        opts,
        [
            ("solver.estimator", opts.estimator),
            ("solver.iterations", opts.iters),
            ("solver.seed", opts.seed),
            ("solver.tau", opts.tau),
        ],
    )
    weights = None
    if opts.weights:
        weights = RgmWeights.load(opts.weights, config.network)
    elif not opts.oracle:
        raise ParameterError("eval: --weights is required unless --oracle is given")
    report = evaluate(opts.dataset, weights, config.solver, config.eval, oracle=opts.oracle, workers=opts.workers)

    out_dir = _out_dir(opts)
    write_json(out_dir / REPORT_NAME, report)
    if opts.csv:
        write_rows(out_dir / METRICS_CSV_NAME, report_to_rows(report))
    return report["summary"]


def run_export(opts: argparse.Namespace) -> Dict[str, Any]:
    """
    Export correspondences and soft edge matrices for plotting.

    Arguments:
        opts: The parsed arguments.

    Returns:
        The list of written files.
    """
    config = _configured(opts, [("solver.tau", opts.tau)])
    source, target, weights = _load_pair(opts, config)
    trace = ForwardTrace()
    soft = rgm_forward(source, target, weights, trace).values
    shape = None if config.network.sinkhorn_slack else (len(source), len(target))
    matches = soft_to_hard(soft, config.solver.tau, shape)

    out_dir = _out_dir(opts)
    written = [CORRESPONDENCES_NAME]
    write_pairs(out_dir / CORRESPONDENCES_NAME, matches.pairs_with_scores(soft), header=("i", "j", "score"))
    for block, matrices in enumerate(zip(trace.edges_x, trace.edges_y, trace.correspondences)):
        for kind, matrix in zip(("edges_x", "edges_y", "correspondence"), matrices):
            name = f"block{block}_{kind}.csv"
            write_matrix(out_dir / name, matrix)
            written.append(name)
    return {"out": str(out_dir), "files": written, "correspondences": len(matches)}


def run_validate_config(opts: argparse.Namespace) -> Dict[str, Any]:
    """
    Validate a configuration file.

    Arguments:
        opts: The parsed arguments.

    Raises:
        ConfigError: When the file is invalid.

    Returns:
        The normalized configuration, loss preset resolved.
    """
    config, errors = validate_config(opts.config)
    if errors:
        raise ConfigError(errors)
    return config_to_dict(replace(config, loss=config.loss.resolved()))


COMMANDS: Dict[str, Callable[[argparse.Namespace], Dict[str, Any]]] = {
    "synth": run_synth,
    "train": run_train,
    "register": run_register,
    "eval": run_eval,
    "export": run_export,
    "validate-config": run_validate_config,
}
"""Subcommand handlers by name."""


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="Log INFO messages; twice for DEBUG.")
    common.add_argument("--config", default=None, help="A TOML configuration file. Flags take precedence.")
    common.add_argument("--out", default=".", help="The directory receiving every artifact.")
    return common


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--estimator", choices=ESTIMATOR_NAMES, default=None, help="The transform estimator.")
    parser.add_argument("--iters", type=int, default=None, help="The number of registration iterations.")
    parser.add_argument("--tau", type=float, default=None, help="The soft-to-hard confidence threshold.")
    parser.add_argument("--seed", type=int, default=None, help="The RANSAC seed.")


def get_parser() -> argparse.ArgumentParser:
    """Return the program argument parser."""
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="pyrgm", description="Deep graph matching point cloud registration.")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    synth = subparsers.add_parser("synth", parents=[common], help="Generate a synthetic dataset.")
    synth.add_argument("--protocol", "--mode", dest="protocol", choices=PROTOCOL_NAMES, default=None)
    synth.add_argument("--pairs", type=int, default=None, help="The number of samples.")
    synth.add_argument("--points", type=int, default=None, help="The number of points per shape.")
    synth.add_argument("--seed", type=int, default=None, help="The dataset seed.")
    synth.add_argument("--role", choices=("train", "test"), default=None, help="The shape split (unseen protocol).")

    train_parser = subparsers.add_parser("train", parents=[common], help="Train the network.")
    train_parser.add_argument("--dataset", default=None, help="The dataset manifest or directory.")
    train_parser.add_argument("--epochs", type=int, default=None)
    train_parser.add_argument("--lr", type=float, default=None)
    train_parser.add_argument("--seed", type=int, default=None, help="The sample order seed.")

    register_parser = subparsers.add_parser("register", parents=[common], help="Register a source onto a target.")
    export = subparsers.add_parser("export", parents=[common], help="Export correspondences and soft edges.")
    for pair_parser in (register_parser, export):
        pair_parser.add_argument("--src", required=True, help="The source cloud (PLY or XYZ).")
        pair_parser.add_argument("--dst", required=True, help="The target cloud (PLY or XYZ).")
        pair_parser.add_argument("--weights", required=True, help="The weights container.")
    _add_solver_flags(register_parser)
    export.add_argument("--tau", type=float, default=None, help="The soft-to-hard confidence threshold.")

    eval_parser = subparsers.add_parser("eval", parents=[common], help="Evaluate weights on a dataset.")
    eval_parser.add_argument("--dataset", required=True, help="The dataset manifest or directory.")
    eval_parser.add_argument("--weights", default=None, help="The weights container.")
    eval_parser.add_argument("--oracle", action="store_true", help="Score the ground truth instead of registering.")
    eval_parser.add_argument("--csv", action="store_true", help="Also write per-sample metrics as CSV.")
    eval_parser.add_argument("--workers", type=int, default=1, help="The number of evaluation threads.")
    _add_solver_flags(eval_parser)

    subparsers.add_parser("validate-config", parents=[common], help="Validate a configuration file.")
    return parser


def error_payload(error: BaseException) -> Dict[str, Any]:
    """
    Describe an error as a JSON-serializable dictionary.

    Arguments:
        error: The error.

    Returns:
        The error message and type, plus the validation messages of configuration errors.
    """
    payload: Dict[str, Any] = {"error": str(error), "type": error.__class__.__name__}
    if isinstance(error, ConfigError):
        payload["errors"] = error.errors
    if isinstance(error, NumericError) and error.diagnostics:
        payload["diagnostics"] = {key: repr(value) for key, value in error.diagnostics.items()}
    return payload


def exit_code(error: BaseException) -> Optional[int]:
    """
    Return the exit code of an error.

    Arguments:
        error: The error.

    Returns:
        The code, or `None` for unexpected errors.
    """
    for types, code in EXIT_CODES:
        if isinstance(error, types):
            return code
    return None


def main(args: Optional[List[str]] = None) -> int:
    """
    Run the main program.

    This function is executed when you type `pyrgm` or `python -m pyrgm`.

    Arguments:
        args: Arguments passed from the command line.

    Returns:
        An exit code.
    """
    parser = get_parser()
    try:
        opts: argparse.Namespace = parser.parse_args(args)  # type: ignore
    except SystemExit as error:
        return int(error.code or 0)

    set_verbosity(opts.verbose)
    try:
        output = COMMANDS[opts.command](opts)
    except Exception as error:  # noqa: W0703
        code = exit_code(error)
        if code is None:
            raise
        logger.debug("%s failed", opts.command, exc_info=True)
        print(json.dumps(error_payload(error), sort_keys=True), file=sys.stderr)
        return code

    print(json.dumps(output, sort_keys=True))
    return EXIT_OK
