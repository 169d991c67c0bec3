"""Configuration module for HTD LR Scheduler.

This module contains:
- Enums for schedule kinds, progress units, sweep kinds and dataset sources
- OptimizerConfig, NetworkSpec and dataset dataclasses
- ExperimentConfig and SweepConfig for training runs and sweeps
- Strict JSON loading (unknown keys are rejected)
- Constants for defaults and numerical thresholds
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional, Union

from errors import ConfigurationError

if TYPE_CHECKING:
    from schedulers import ScheduleSpec


class ScheduleKind(str, Enum):
    """Supported learning-rate schedules."""

    STEP = "step"
    EXPONENTIAL = "exp"
    TWO_STAGE = "two_stage"
    COSINE = "cosine"
    HTD = "htd"
    CONSTANT = "constant"


class ProgressUnit(str, Enum):
    """Unit of the schedule's progress index t."""

    EPOCH = "epoch"
    ITERATION = "iteration"


class SweepKind(str, Enum):
    """Hyperparameter sweeps the harness knows how to expand."""

    STEP_RATIO = "step_ratio"
    HTD_R = "htd_R"
    HTD_U = "htd_U"
    SCHEDULES = "schedules"


class DatasetKind(str, Enum):
    """Where training data comes from."""

    BLOBS = "blobs"
    IDX = "idx"


class Activation(str, Enum):
    """Hidden-layer activations of the toy network."""

    RELU = "relu"


# Schedule defaults (lr_max equals the step-decay starting rate, lr_min is 0)
DEFAULT_LR_MAX = 0.1
DEFAULT_LR_MIN = 0.0
DEFAULT_STEP_LOW = 0.01
DEFAULT_HTD_UPPER = 3.0
DEFAULT_HTD_RATIO = 2.0

# Optimizer defaults
DEFAULT_MOMENTUM = 0.9
DEFAULT_WEIGHT_DECAY = 1e-4

# Harness defaults
DEFAULT_BATCH_SIZE = 32
DEFAULT_TRAIN_FRACTION = 0.8

# Output
CSV_SIGNIFICANT_DIGITS = 10

# Numerics
GRADIENT_CHECK_STEP = 1e-5
LOG_DOMAIN_THRESHOLD = 700.0  # exp() overflows just above 709
RATIO_IDENTITY_MAX_ABS_X = 20.0
STEP_RATIO_TOLERANCE = 1e-9
MAX_SEED = 2**64 - 1


def _check_seed(seed: Any, name: str = "seed") -> None:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        raise ConfigurationError(f"{name} must be an unsigned 64-bit integer, got {seed!r}")


def _check_positive_int(value: Any, name: str) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class OptimizerConfig:
    """SGD hyperparameters: momentum mu, coupled L2 weight decay, Nesterov flag."""

    momentum: float = DEFAULT_MOMENTUM
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    nesterov: bool = True

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not (math.isfinite(self.weight_decay) and self.weight_decay >= 0.0):
            raise ConfigurationError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(frozen=True)
class NetworkSpec:
    """Fully-connected classifier shape: (input, hidden..., output)."""

    layer_sizes: tuple[int, ...]
    activation: Activation = Activation.RELU
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(self.layer_sizes))
        object.__setattr__(self, "activation", Activation(self.activation))
        if len(self.layer_sizes) < 2:
            raise ConfigurationError("A network needs at least an input and an output layer")
        for size in self.layer_sizes:
            _check_positive_int(size, "layer size")
        if self.layer_sizes[-1] < 2:
            raise ConfigurationError("The output layer needs at least 2 classes")
        _check_seed(self.seed, "network seed")


@dataclass(frozen=True)
class BlobsConfig:
    """Gaussian blobs around centers on a sphere of radius 5 * spread."""

    n_per_class: int = 200
    n_classes: int = 3
    n_features: int = 8
    spread: float = 0.3
    seed: int = 0
    kind: DatasetKind = field(default=DatasetKind.BLOBS, init=False)

    def __post_init__(self):
        _check_positive_int(self.n_per_class, "n_per_class")
        _check_positive_int(self.n_classes, "n_classes")
        _check_positive_int(self.n_features, "n_features")
        if not (math.isfinite(self.spread) and self.spread > 0):
            raise ConfigurationError(f"spread must be positive, got {self.spread}")
        _check_seed(self.seed, "dataset seed")


@dataclass(frozen=True)
class IdxConfig:
    """IDX image/label files with their native train/test partition."""

    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    normalize: bool = False
    limit: Optional[int] = None
    n_classes: Optional[int] = None
    kind: DatasetKind = field(default=DatasetKind.IDX, init=False)

    def __post_init__(self):
        if self.limit is not None:
            _check_positive_int(self.limit, "limit")
        if self.n_classes is not None:
            _check_positive_int(self.n_classes, "n_classes")
            if self.n_classes < 2:
                raise ConfigurationError(f"n_classes must be at least 2, got {self.n_classes}")


DatasetConfig = Union[BlobsConfig, IdxConfig]


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete recipe for one training run."""

    schedule: "ScheduleSpec"
    optimizer: OptimizerConfig
    network: NetworkSpec
    dataset: DatasetConfig
    epochs: int
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = 0
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    progress: ProgressUnit = ProgressUnit.EPOCH

    def __post_init__(self):
        object.__setattr__(self, "progress", ProgressUnit(self.progress))
        _check_positive_int(self.epochs, "epochs")
        _check_positive_int(self.batch_size, "batch_size")
        _check_seed(self.seed)
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")

        horizon = getattr(self.schedule, "horizon", None)
        if self.progress is ProgressUnit.EPOCH and horizon is not None and horizon != self.epochs:
            raise ConfigurationError(
                f"Schedule horizon {horizon} does not match epochs {self.epochs}"
            )


@dataclass(frozen=True)
class SweepConfig:
    """A family of experiments derived from one base config.

    Attributes:
        base: Config every sweep point starts from
        kind: Which hyperparameter the values set
        values: S1/S2 ratios, R values, U values, or schedule indices
        repeats: Runs per value; repeat i uses seed base.seed + i
        upper: U held fixed by the htd_R sweep
        ratio: R held fixed by the htd_U sweep
        high: Step-ratio rate for the first S1 epochs
        low: Step-ratio rate for the last S2 epochs
        lr_min: HTD minimum rate
        lr_max: HTD maximum rate
        schedules: Candidate schedules compared by the schedules sweep
    """

    base: ExperimentConfig
    kind: SweepKind
    values: tuple[float, ...] = ()
    repeats: int = 1
    upper: float = DEFAULT_HTD_UPPER
    ratio: float = DEFAULT_HTD_RATIO
    high: float = DEFAULT_LR_MAX
    low: float = DEFAULT_STEP_LOW
    lr_min: float = DEFAULT_LR_MIN
    lr_max: float = DEFAULT_LR_MAX
    schedules: tuple["ScheduleSpec", ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", SweepKind(self.kind))
        object.__setattr__(self, "schedules", tuple(self.schedules))
        values = tuple(float(v) for v in self.values)
        if self.kind is SweepKind.SCHEDULES and not values:
            values = tuple(float(i) for i in range(len(self.schedules)))
        object.__setattr__(self, "values", values)

        _check_positive_int(self.repeats, "repeats")
        last = self.repeats - 1
        if self.base.seed + last > MAX_SEED or self.base.network.seed + last > MAX_SEED:
            raise ConfigurationError(
                f"{self.repeats} repeats would push seed {self.base.seed} or network seed "
                f"{self.base.network.seed} past 2**64 - 1"
            )
        if not values:
            raise ConfigurationError("A sweep needs at least one value")
        if self.kind is SweepKind.SCHEDULES:
            if not self.schedules:
                raise ConfigurationError("The schedules sweep needs a 'schedules' list")
            for value in values:
                if not value.is_integer() or not 0 <= value < len(self.schedules):
                    raise ConfigurationError(f"Schedule index {value} out of range")
        elif any(not (math.isfinite(v) and v > 0) for v in values):
            raise ConfigurationError(f"Sweep values must be positive, got {list(values)}")
        if self.upper <= 0 or self.ratio < 0:
            raise ConfigurationError("upper must be positive and ratio non-negative")


# JSON mapping ----------------------------------------------------------------

def _check_keys(data: Any, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where} must be a JSON object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigurationError(f"Unknown keys in {where}: {', '.join(unknown)}")
    missing = sorted(required - set(data))
    if missing:
        raise ConfigurationError(f"Missing keys in {where}: {', '.join(missing)}")


def _build(cls, data: dict, where: str):
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise ConfigurationError(f"{where}: {e}") from e
        raise ConfigurationError(f"Invalid {where}: {e}") from e


def dataset_config_from_dict(data: dict) -> DatasetConfig:
    """Build a BlobsConfig or IdxConfig from its JSON object."""
    if not isinstance(data, dict) or "source" not in data:
        raise ConfigurationError("dataset must be an object with a 'source' key")
    try:
        source = DatasetKind(data["source"])
    except ValueError:
        raise ConfigurationError(f"Unknown dataset source {data['source']!r}")

    fields = {k: v for k, v in data.items() if k != "source"}
    if source is DatasetKind.BLOBS:
        _check_keys(fields, {"n_per_class", "n_classes", "n_features", "spread", "seed"}, set(), "dataset")
        return _build(BlobsConfig, fields, "dataset")
    _check_keys(
        fields,
        {"train_images", "train_labels", "test_images", "test_labels", "normalize", "limit", "n_classes"},
        {"train_images", "train_labels", "test_images", "test_labels"},
        "dataset",
    )
    return _build(IdxConfig, fields, "dataset")


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    """Map a JSON document onto ExperimentConfig field-for-field.

    Args:
        data: Parsed JSON object

    Returns:
        Validated experiment configuration

    Raises:
        ConfigurationError: On unknown/missing keys or invalid values
    """
    from schedulers import schedule_from_dict

    _check_keys(
        data,
        {"schedule", "optimizer", "network", "dataset", "epochs", "batch_size", "seed",
         "train_fraction", "progress"},
        {"schedule", "network", "dataset", "epochs", "seed"},
        "experiment config",
    )

    epochs = data["epochs"]
    optimizer_data = data.get("optimizer", {})
    _check_keys(optimizer_data, {"momentum", "weight_decay", "nesterov"}, set(), "optimizer")
    network_data = data["network"]
    _check_keys(network_data, {"layer_sizes", "activation", "seed"}, {"layer_sizes"}, "network")

    # Epoch mode fills an omitted Cosine/Htd horizon here; iteration mode
    # leaves it to the harness, which knows the batch count.
    progress = data.get("progress", ProgressUnit.EPOCH.value)
    fallback_horizon = epochs if progress == ProgressUnit.EPOCH.value else 1
    schedule = schedule_from_dict(data["schedule"], horizon=fallback_horizon)

    try:
        return ExperimentConfig(
            schedule=schedule,
            optimizer=_build(OptimizerConfig, optimizer_data, "optimizer"),
            network=_build(NetworkSpec, network_data, "network"),
            dataset=dataset_config_from_dict(data["dataset"]),
            epochs=epochs,
            batch_size=data.get("batch_size", DEFAULT_BATCH_SIZE),
            seed=data["seed"],
            train_fraction=data.get("train_fraction", DEFAULT_TRAIN_FRACTION),
            progress=progress,
        )
    except ValueError as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"Invalid experiment config: {e}") from e


def experiment_config_to_dict(cfg: ExperimentConfig) -> dict:
    """Inverse of experiment_config_from_dict."""
    from schedulers import schedule_to_dict

    if isinstance(cfg.dataset, BlobsConfig):
        dataset = {
            "source": DatasetKind.BLOBS.value,
            "n_per_class": cfg.dataset.n_per_class,
            "n_classes": cfg.dataset.n_classes,
            "n_features": cfg.dataset.n_features,
            "spread": cfg.dataset.spread,
            "seed": cfg.dataset.seed,
        }
    else:
        dataset = {
            "source": DatasetKind.IDX.value,
            "train_images": cfg.dataset.train_images,
            "train_labels": cfg.dataset.train_labels,
            "test_images": cfg.dataset.test_images,
            "test_labels": cfg.dataset.test_labels,
            "normalize": cfg.dataset.normalize,
            "limit": cfg.dataset.limit,
            "n_classes": cfg.dataset.n_classes,
        }
    return {
        "schedule": schedule_to_dict(cfg.schedule),
        "optimizer": {
            "momentum": cfg.optimizer.momentum,
            "weight_decay": cfg.optimizer.weight_decay,
            "nesterov": cfg.optimizer.nesterov,
        },
        "network": {
            "layer_sizes": list(cfg.network.layer_sizes),
            "activation": cfg.network.activation.value,
            "seed": cfg.network.seed,
        },
        "dataset": dataset,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "train_fraction": cfg.train_fraction,
        "progress": cfg.progress.value,
    }


def sweep_config_from_dict(data: dict) -> SweepConfig:
    """Map a JSON sweep document onto SweepConfig."""
    from schedulers import schedule_from_dict

    _check_keys(
        data,
        {"base", "kind", "values", "repeats", "upper", "ratio", "high", "low", "lr_min",
         "lr_max", "schedules"},
        {"base", "kind"},
        "sweep config",
    )
    base = experiment_config_from_dict(data["base"])
    try:
        kind = SweepKind(data["kind"])
    except ValueError:
        known = ", ".join(k.value for k in SweepKind)
        raise ConfigurationError(f"Unknown sweep kind {data['kind']!r} (expected one of: {known})")

    horizon = base.epochs if base.progress is ProgressUnit.EPOCH else 1
    schedules = tuple(schedule_from_dict(s, horizon=horizon) for s in data.get("schedules", []))
    fields = {k: v for k, v in data.items() if k not in ("base", "kind", "schedules")}
    return _build(SweepConfig, {"base": base, "kind": kind, "schedules": schedules, **fields}, "sweep config")


def _read_json(path: Union[str, Path]) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON ({e})") from e


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """Load an ExperimentConfig from a JSON file."""
    return experiment_config_from_dict(_read_json(path))


def load_sweep_config(path: Union[str, Path]) -> SweepConfig:
    """Load a SweepConfig from a JSON file."""
    return sweep_config_from_dict(_read_json(path))
