"""
Training and evaluation.

Training runs one forward pass per sample (no test-time refinement), computes the focal loss against the
ground-truth correspondence, back-propagates and takes one SGD step. Evaluation runs the full registration loop on
every sample of a dataset and aggregates the metrics.
"""

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from pyrgm.config import EvalConfig, RgmConfig, SolverConfig
from pyrgm.diff.container import encode_weights
from pyrgm.diff.optim import SGD
from pyrgm.diff.tensor import Tape, backward
from pyrgm.errors import NumericError, ParameterError, PyrgmError
from pyrgm.formats import matrix_to_pairs
from pyrgm.logger import get_logger
from pyrgm.metrics import MetricReport, aggregate, score
from pyrgm.net.loss import focal_loss
from pyrgm.net.model import rgm_forward
from pyrgm.net.weights import RgmWeights
from pyrgm.serializer import serialize_epoch, serialize_report
from pyrgm.solve.register import register
from pyrgm.synth import RegistrationSample, iter_samples, load_manifest

logger = get_logger(__name__)

PathLike = Union[str, Path]

SAMPLE_ERRORS = (PyrgmError, ArithmeticError, ValueError, np.linalg.LinAlgError)
"""Failures recorded per sample during evaluation instead of aborting it."""


def checkpoint_name(epoch: int) -> str:
    """
    Return the file name of the checkpoint written after an epoch.

    Arguments:
        epoch: The epoch number, starting at 1.

    Returns:
        The file name.
    """
    return f"checkpoint_{epoch:04d}.bin"


def weights_digest(weights: RgmWeights) -> str:
    """
    Compute a digest of the weights values.

    Arguments:
        weights: The weights.

    Returns:
        The SHA-256 hexadecimal digest of the encoded container.
    """
    return hashlib.sha256(encode_weights(weights.to_arrays())).hexdigest()


def checkpoint_roundtrip(weights: RgmWeights, path: PathLike) -> RgmWeights:
    """
    Save weights, then load them back.

    Arguments:
        weights: The weights.
        path: The container path.

    Returns:
        The loaded weights.
    """
    weights.save(path)
    return RgmWeights.load(path, weights.network)


def _diagnostics(weights: RgmWeights, epoch: int, index: int, sample: RegistrationSample) -> Dict[str, Any]:
    norms = {name: float(np.linalg.norm(tensor.values)) for name, tensor in weights.params.items()}
    return {
        "epoch": epoch,
        "sample": index,
        "shape_id": sample.shape_id,
        "non_finite_parameters": sorted(name for name, norm in norms.items() if not np.isfinite(norm)),
        "largest_parameter_norm": max(norms.values()) if norms else 0.0,
    }


def train_step(
    weights: RgmWeights,
    optimizer: SGD,
    sample: RegistrationSample,
    alpha: float,
    gamma: float,
) -> float:
    """
    Run one forward pass, back-propagate the focal loss and update the weights.

    Arguments:
        weights: The weights, updated in place.
        optimizer: The optimizer owning the weights.
        sample: The training sample.
        alpha: The focal loss balance.
        gamma: The focal loss exponent.

    Raises:
        NumericError: When the loss is not finite; the weights are left untouched.

    Returns:
        The loss value.
    """
    with Tape() as tape:
        soft = rgm_forward(sample.source, sample.target, weights)
        loss = focal_loss(soft, sample.gt_correspondence, alpha, gamma)
    value = loss.item()
    if not np.isfinite(value):
        raise NumericError(f"non-finite loss {value}", {"loss": value})
    backward(loss, tape)
    optimizer.step()
    return value


def train(
    config: RgmConfig,
    dataset: Optional[PathLike] = None,
    out_dir: Optional[PathLike] = None,
) -> Tuple[RgmWeights, List[Dict[str, Any]]]:
    """
    Train the network on a dataset.

    Samples are visited in an order shuffled per epoch from the training seed, with one SGD step per sample.
    Training is a pure function of the configuration and the dataset.

    Arguments:
        config: The configuration. Weights are initialized from `network.seed`, the visiting order from `train.seed`.
        dataset: The dataset manifest or directory; defaults to `train.dataset`.
        out_dir: Where checkpoints are written every `train.checkpoint_interval` epochs; no checkpoint when `None`.

    Raises:
        ParameterError: When no dataset is given.
        NumericError: When a loss is not finite. Diagnostics are logged and attached to the error.

    Returns:
        The trained weights and the training log, one record per epoch.
    """
    dataset = dataset or config.train.dataset
    if not dataset:
        raise ParameterError("no training dataset: set train.dataset or pass --dataset")
    samples = list(iter_samples(load_manifest(dataset)))
    loss_config = config.loss.resolved()
    weights = RgmWeights.initialize(config.network, config.network.seed)
    optimizer = SGD(weights.parameters(), config.train.lr, config.train.momentum)
    rng = np.random.default_rng(config.train.seed)
    interval = config.train.checkpoint_interval
    log = []

    logger.info("training on %d samples for %d epochs", len(samples), config.train.epochs)
    for epoch in range(1, config.train.epochs + 1):
        start = time.perf_counter()
        losses = []
        for index in rng.permutation(len(samples)):
            sample = samples[index]
            try:
                losses.append(train_step(weights, optimizer, sample, loss_config.alpha, loss_config.gamma))
            except NumericError as error:
                error.diagnostics.update(_diagnostics(weights, epoch, int(index), sample))
                logger.error("numeric failure at epoch %d, sample %d: %s %s", epoch, index, error, error.diagnostics)
                raise

        checkpoint = None
        if out_dir is not None and interval and epoch % interval == 0:
            checkpoint = checkpoint_name(epoch)
            weights.save(Path(out_dir) / checkpoint)
        record = serialize_epoch(epoch, float(np.mean(losses)), time.perf_counter() - start, checkpoint)
        log.append(record)
        logger.info("epoch %d: mean loss %.6f", epoch, record["mean_loss"])
    return weights, log


def _oracle_report(sample: RegistrationSample, eval_config: EvalConfig) -> MetricReport:
    pairs = matrix_to_pairs(sample.gt_correspondence)
    return score(
        sample.gt_transform,
        sample.gt_transform,
        sample.source.points,
        sample.target.points,
        pairs,
        pairs,
        eval_config,
    )


def evaluate_sample(
    sample: RegistrationSample,
    weights: Optional[RgmWeights],
    solver: SolverConfig,
    eval_config: EvalConfig,
    oracle: bool = False,
) -> MetricReport:
    """
    Register and score one sample.

    Failures are recorded in the report instead of being raised.

    Arguments:
        sample: The sample.
        weights: The weights; unused in oracle mode.
        solver: The solver settings.
        eval_config: The metric thresholds.
        oracle: Score the ground truth itself instead of a registration.

    Returns:
        The report.
    """
    try:
        if oracle:
            return _oracle_report(sample, eval_config)
        if weights is None:
            raise ParameterError("weights are required outside oracle mode")
        result = register(
            sample.source,
            sample.target,
            weights,
            estimator=solver.estimator,
            iterations=solver.iterations,
            tau=solver.tau,
            ransac_iters=solver.ransac_iters,
            ransac_threshold=solver.ransac_threshold,
            seed=solver.seed,
        )
        report = score(
            result.transform,
            sample.gt_transform,
            sample.source.points,
            sample.target.points,
            matrix_to_pairs(sample.gt_correspondence),
            result.correspondences.pairs,
            eval_config,
        )
    except SAMPLE_ERRORS as error:
        logger.warning("sample %s failed: %s: %s", sample.shape_id, error.__class__.__name__, error)
        return MetricReport(error=f"{error.__class__.__name__}: {error}")
    report.degraded = result.degraded
    return report


def evaluate(
    dataset: PathLike,
    weights: Optional[RgmWeights],
    solver: Optional[SolverConfig] = None,
    eval_config: Optional[EvalConfig] = None,
    oracle: bool = False,
    workers: int = 1,
) -> Dict[str, Any]:
    """
    Evaluate weights on a dataset.

    Samples are independent and only read the weights, so they can be processed by a pool of threads;
    records keep the manifest order either way.

    Arguments:
        dataset: The dataset manifest or directory.
        weights: The trained weights; may be `None` in oracle mode.
        solver: The solver settings (estimator, iterations, threshold); defaults when `None`.
        eval_config: The metric thresholds; defaults when `None`.
        oracle: Score the ground-truth transforms and correspondences instead of registering.
        workers: The number of threads.

    Raises:
        ParameterError: When `workers < 1`.

    Returns:
        The aggregated report (see [`aggregate`][pyrgm.metrics.aggregate]), with the evaluation settings
        under `settings`.
    """
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, not {workers}")
    solver = solver or SolverConfig()
    eval_config = eval_config or EvalConfig()
    samples = list(iter_samples(load_manifest(dataset)))

    def run(sample: RegistrationSample) -> MetricReport:  # noqa: WPS430
        return evaluate_sample(sample, weights, solver, eval_config, oracle)

    if workers == 1:
        records = [run(sample) for sample in samples]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run, samples))

    report = aggregate(records)
    report["records"] = [serialize_report(record) for record in records]
    report["settings"] = {
        "estimator": solver.estimator,
        "iterations": solver.iterations,
        "tau": solver.tau,
        "seed": solver.seed,
        "oracle": oracle,
    }
    summary = report["summary"]
    logger.info(
        "evaluated %d samples: recall %.1f%%, %d failed",
        summary["samples"],
        summary["recall"],
        summary["failed"],
    )
    return report
