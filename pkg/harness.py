"""Training runs and scheduler-comparison sweeps.

This module provides:
- ExperimentRunner / run_experiment: one seed-deterministic training run
- step_schedule_from_ratio: the S1/S2 step-decay family
- run_sweep: step-ratio, HTD R, HTD U and schedule-comparison sweeps
- CSV serialization of per-epoch metrics and sweep tables

Repeat i of a sweep point uses seed base.seed + i and network seed
base.network.seed + i; the dataset seed is never perturbed.
"""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from config import (
    STEP_RATIO_TOLERANCE,
    ExperimentConfig,
    ProgressUnit,
    SweepConfig,
    SweepKind,
)
from datasets import Dataset, create_dataset_source
from errors import ConfigurationError, ExperimentError, HTDError, InfeasibleRatioError
from logger_config import get_logger
from optimizer import VelocityState, sgd_step
from prng import SHUFFLE_STREAM, SplitMix64, derive_seed
from schedulers import (
    Htd,
    ScheduleSpec,
    StepDecay,
    describe,
    evaluate,
    format_number,
    with_horizon,
)
from toy_model import evaluate_error, forward_loss, init_he

logger = get_logger()

METRICS_HEADER = ["epoch", "lr", "train_loss", "train_error", "test_error"]


@dataclass(frozen=True)
class MetricsRecord:
    """End-of-epoch outcome of a training run."""

    epoch: int
    lr: float
    train_loss: float
    train_error: float
    test_error: float


@dataclass(frozen=True)
class SweepRow:
    """Aggregated final test errors of one sweep value."""

    value: float
    label: str
    lower: Optional[float]
    upper: Optional[float]
    test_errors: tuple[float, ...]

    @property
    def mean_test_error(self) -> float:
        return float(np.mean(self.test_errors))

    @property
    def median_test_error(self) -> float:
        return float(np.median(self.test_errors))


class ExperimentRunner:
    """Orchestrates one training run.

    Workflow:
    1. Load and split the dataset
    2. Resolve the schedule horizon (epochs or iterations)
    3. He-initialize the network, zero the velocity
    4. Per epoch: reshuffle, step through mini-batches, record metrics
    """

    def __init__(self, cfg: ExperimentConfig):
        """Initialize runner with configuration.

        Args:
            cfg: Experiment configuration
        """
        self.cfg = cfg

    def _load_data(self) -> tuple[Dataset, Dataset]:
        source = create_dataset_source(self.cfg.dataset)
        train, test = source.load_split(self.cfg.seed, self.cfg.train_fraction)
        if self.cfg.batch_size > len(train):
            raise ConfigurationError(
                f"batch_size {self.cfg.batch_size} exceeds the {len(train)} training samples"
            )
        return train, test

    def _resolve_schedule(self, batches_per_epoch: int) -> tuple[ScheduleSpec, int]:
        if self.cfg.progress is ProgressUnit.ITERATION:
            horizon = self.cfg.epochs * batches_per_epoch
            return with_horizon(self.cfg.schedule, horizon), horizon
        return self.cfg.schedule, self.cfg.epochs

    def run(self) -> list[MetricsRecord]:
        """Train and return one MetricsRecord per epoch.

        Raises:
            ExperimentError: Wrapping any toolkit error with epoch/batch context
        """
        cfg = self.cfg
        try:
            train, test = self._load_data()
            net = init_he(cfg.network)
        except HTDError as e:
            raise ExperimentError(f"setup failed: {e}") from e

        batch_size = cfg.batch_size
        batches_per_epoch = math.ceil(len(train) / batch_size)
        schedule, horizon = self._resolve_schedule(batches_per_epoch)
        state = VelocityState.zeros(len(net.params))

        logger.info(
            f"Training {describe(schedule)} for {cfg.epochs} epochs "
            f"({len(train)} train / {len(test)} test samples, horizon {horizon} {cfg.progress.value}s)"
        )

        records = []
        for epoch in range(cfg.epochs):
            batch = None
            try:
                order = SplitMix64(derive_seed(cfg.seed, SHUFFLE_STREAM, epoch)).permutation(len(train))
                epoch_lr = None
                loss_sum = 0.0

                for batch in range(batches_per_epoch):
                    t = epoch if cfg.progress is ProgressUnit.EPOCH else epoch * batches_per_epoch + batch
                    lr = evaluate(schedule, t, horizon)
                    if epoch_lr is None:
                        epoch_lr = lr

                    indices = order[batch * batch_size:(batch + 1) * batch_size]
                    loss, grads = forward_loss(net, train.subset(indices))
                    params, state = sgd_step(net.params, grads, lr, cfg.optimizer, state)
                    net = net.with_params(params)
                    loss_sum += loss * len(indices)
                    logger.debug(f"epoch {epoch} batch {batch}: lr={lr:.6g} loss={loss:.6g}")

                batch = None
                record = MetricsRecord(
                    epoch=epoch,
                    lr=epoch_lr,
                    train_loss=loss_sum / len(train),
                    train_error=evaluate_error(net, train),
                    test_error=evaluate_error(net, test),
                )
            except HTDError as e:
                raise ExperimentError(str(e), epoch=epoch, batch=batch) from e

            logger.info(
                f"epoch {record.epoch:>4} lr={record.lr:.6g} loss={record.train_loss:.6g} "
                f"train_err={record.train_error:.4f} test_err={record.test_error:.4f}"
            )
            records.append(record)

        return records


def run_experiment(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """Run one training experiment; see ExperimentRunner."""
    return ExperimentRunner(cfg).run()


def step_schedule_from_ratio(ratio: float, epochs: int, high: float, low: float) -> StepDecay:
    """Step decay with `high` for S1 epochs then `low` for S2, S1/S2 = ratio, S1 + S2 = epochs.

    Raises:
        InfeasibleRatioError: If no positive integer split realizes the ratio
    """
    if not (math.isfinite(ratio) and ratio > 0):
        raise ConfigurationError(f"ratio must be positive, got {ratio}")
    if epochs < 2:
        raise InfeasibleRatioError(f"{epochs} epochs cannot be split into two positive stages")

    exact = epochs * ratio / (1.0 + ratio)
    candidates = sorted({min(max(math.floor(exact), 1), epochs - 1), min(max(math.ceil(exact), 1), epochs - 1)})
    for s1 in candidates:
        if abs(s1 / (epochs - s1) - ratio) <= STEP_RATIO_TOLERANCE:
            return StepDecay(((0, high), (s1, low)))

    nearest = [s1 / (epochs - s1) for s1 in candidates]
    raise InfeasibleRatioError(
        f"S1/S2 = {ratio:g} has no integer split of {epochs} epochs; nearest feasible ratios: "
        + ", ".join(f"{r:.6g} ({s1}/{epochs - s1})" for r, s1 in zip(nearest, candidates)),
        nearest=nearest,
    )


@dataclass(frozen=True)
class SweepPoint:
    """One sweep value resolved to a concrete schedule."""

    value: float
    schedule: ScheduleSpec
    lower: Optional[float] = None
    upper: Optional[float] = None


def sweep_points(cfg: SweepConfig) -> list[SweepPoint]:
    """Expand a sweep config into one schedule per value, in input order."""
    base = cfg.base
    points = []
    for value in cfg.values:
        if cfg.kind is SweepKind.STEP_RATIO:
            points.append(SweepPoint(value, step_schedule_from_ratio(value, base.epochs, cfg.high, cfg.low)))
        elif cfg.kind in (SweepKind.HTD_R, SweepKind.HTD_U):
            upper = cfg.upper if cfg.kind is SweepKind.HTD_R else value
            ratio = value if cfg.kind is SweepKind.HTD_R else cfg.ratio
            lower = -ratio * upper
            spec = Htd(lower, upper, cfg.lr_min, cfg.lr_max, base.epochs)
            points.append(SweepPoint(value, spec, lower, upper))
        else:
            spec = with_horizon(cfg.schedules[int(value)], base.epochs)
            if isinstance(spec, Htd):
                points.append(SweepPoint(value, spec, spec.lower, spec.upper))
            else:
                points.append(SweepPoint(value, spec))
    return points


def repeat_config(base: ExperimentConfig, schedule: ScheduleSpec, repeat: int) -> ExperimentConfig:
    """Config for repeat `repeat` of a sweep point."""
    return replace(
        base,
        schedule=schedule,
        seed=base.seed + repeat,
        network=replace(base.network, seed=base.network.seed + repeat),
    )


def _final_test_error(cfg: ExperimentConfig) -> float:
    return run_experiment(cfg)[-1].test_error


def run_sweep(cfg: SweepConfig, workers: int = 1) -> list[SweepRow]:
    """Run every (value, repeat) pair and aggregate final-epoch test errors.

    Args:
        cfg: Sweep configuration
        workers: Parallel worker processes; 1 runs in-process

    Returns:
        One SweepRow per value, in the order of cfg.values
    """
    points = sweep_points(cfg)
    configs = [repeat_config(cfg.base, p.schedule, r) for p in points for r in range(cfg.repeats)]
    logger.info(f"Sweep {cfg.kind.value}: {len(points)} values x {cfg.repeats} repeats")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(_final_test_error, configs))
    else:
        errors = []
        for index, experiment in enumerate(configs):
            point = points[index // cfg.repeats]
            logger.info(f"value {point.value:g} ({describe(point.schedule)}), repeat {index % cfg.repeats}")
            errors.append(_final_test_error(experiment))

    rows = []
    for i, point in enumerate(points):
        chunk = tuple(errors[i * cfg.repeats:(i + 1) * cfg.repeats])
        rows.append(SweepRow(point.value, describe(point.schedule), point.lower, point.upper, chunk))
    return rows


# CSV -------------------------------------------------------------------------

def metrics_to_csv(records: list[MetricsRecord]) -> str:
    """CSV with header epoch,lr,train_loss,train_error,test_error."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for r in records:
        writer.writerow([
            r.epoch,
            format_number(r.lr),
            format_number(r.train_loss),
            format_number(r.train_error),
            format_number(r.test_error),
        ])
    return buffer.getvalue()


def sweep_to_csv(rows: list[SweepRow]) -> str:
    """CSV with header value,L,U,mean_test_error,median_test_error,repeat_0,..."""
    repeats = max((len(row.test_errors) for row in rows), default=0)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["value", "L", "U", "mean_test_error", "median_test_error"]
        + [f"repeat_{i}" for i in range(repeats)]
    )
    for row in rows:
        writer.writerow(
            [
                format_number(row.value),
                "" if row.lower is None else format_number(row.lower),
                "" if row.upper is None else format_number(row.upper),
                format_number(row.mean_test_error),
                format_number(row.median_test_error),
            ]
            + [format_number(e) for e in row.test_errors]
        )
    return buffer.getvalue()


def write_text(text: str, path: Union[str, Path]) -> Path:
    """Write CSV text, creating parent directories."""
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(text)
    return out_path
