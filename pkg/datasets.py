"""Datasets for the toy workload.

This module provides:
- Dataset: features/labels container with validation
- make_blobs: seeded Gaussian blobs for desk-scale experiments
- load_idx: IDX (MNIST / Fashion-MNIST) binary parser, optionally gzipped
- DatasetSource protocol with blobs and IDX implementations
- create_dataset_source factory used by the harness
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Union

import numpy as np

from config import BlobsConfig, DatasetConfig, IdxConfig
from errors import ConfigurationError, ContractViolationError, IDXParseError
from logger_config import get_logger
from prng import SPLIT_STREAM, SplitMix64, derive_seed

logger = get_logger()

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
_IMAGES_HEADER = struct.Struct(">IIII")
_LABELS_HEADER = struct.Struct(">II")

BLOB_RADIUS_FACTOR = 5.0


@dataclass
class Dataset:
    """Row-major feature matrix with integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ContractViolationError("features must be a 2-D (samples x features) matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ContractViolationError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if self.n_classes < 1:
            raise ContractViolationError("n_classes must be positive")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ContractViolationError(f"labels must lie in [0, {self.n_classes})")
        if not np.all(np.isfinite(self.features)):
            raise ContractViolationError("features contain non-finite values")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Rows selected by `indices`, in that order."""
        return Dataset(self.features[indices], self.labels[indices], self.n_classes)


def _blob_centers(rng: SplitMix64, n_classes: int, n_features: int, radius: float) -> np.ndarray:
    directions = rng.normals(n_classes * n_features).reshape(n_classes, n_features)
    if n_classes <= n_features:
        # Gram-Schmidt: orthogonal centers are pairwise radius*sqrt(2) apart
        for i in range(n_classes):
            for j in range(i):
                directions[i] -= np.dot(directions[i], directions[j]) * directions[j]
            directions[i] /= np.linalg.norm(directions[i])
    else:
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return radius * directions


def make_blobs(
    n_per_class: int,
    n_classes: int,
    n_features: int,
    spread: float,
    seed: int,
) -> Dataset:
    """Seeded Gaussian blobs.

    Centers sit on a sphere of radius 5 * spread (orthonormal directions when
    n_classes <= n_features); each sample is its center plus N(0, spread^2)
    noise. Rows are grouped by class in label order.
    """
    if min(n_per_class, n_classes, n_features) < 1 or spread <= 0:
        raise ConfigurationError("make_blobs needs positive counts and spread")

    rng = SplitMix64(seed)
    centers = _blob_centers(rng, n_classes, n_features, BLOB_RADIUS_FACTOR * spread)
    noise = rng.normals(n_classes * n_per_class * n_features)
    noise = noise.reshape(n_classes * n_per_class, n_features) * spread

    labels = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)
    features = centers[labels] + noise
    return Dataset(features, labels, n_classes)


def _read_bytes(path: Path) -> bytes:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def _parse_images(path: Path, data: bytes) -> np.ndarray:
    if len(data) < _IMAGES_HEADER.size:
        raise IDXParseError("truncated image header", str(path), len(data))
    magic, count, rows, cols = _IMAGES_HEADER.unpack_from(data, 0)
    if magic != IDX_IMAGES_MAGIC:
        raise IDXParseError(f"bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}", str(path), 0)

    expected = _IMAGES_HEADER.size + count * rows * cols
    if len(data) < expected:
        raise IDXParseError(
            f"truncated pixel data: header promises {count}x{rows}x{cols} bytes", str(path), len(data)
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=_IMAGES_HEADER.size)
    return pixels.reshape(count, rows * cols)


def _parse_labels(path: Path, data: bytes) -> np.ndarray:
    if len(data) < _LABELS_HEADER.size:
        raise IDXParseError("truncated label header", str(path), len(data))
    magic, count = _LABELS_HEADER.unpack_from(data, 0)
    if magic != IDX_LABELS_MAGIC:
        raise IDXParseError(f"bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}", str(path), 0)
    if len(data) < _LABELS_HEADER.size + count:
        raise IDXParseError(f"truncated label data: header promises {count} labels", str(path), len(data))
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=_LABELS_HEADER.size)


def dataset_stats(dataset: Dataset) -> tuple[float, float]:
    """Mean and standard deviation over every feature value (one channel)."""
    return float(dataset.features.mean()), float(dataset.features.std())


def normalize_dataset(dataset: Dataset, mean: float, std: float) -> Dataset:
    """Return (x - mean) / std; std of 0 leaves the scale untouched."""
    scale = std if std > 0 else 1.0
    return Dataset((dataset.features - mean) / scale, dataset.labels, dataset.n_classes)


def load_idx(
    images_path: Union[str, Path],
    labels_path: Union[str, Path],
    normalize: bool = False,
    limit: Optional[int] = None,
    n_classes: Optional[int] = None,
) -> Dataset:
    """Parse an IDX image file and its label file.

    Args:
        images_path: IDX3 images (magic 0x00000803), optionally .gz
        labels_path: IDX1 labels (magic 0x00000801), optionally .gz
        normalize: Standardize pixels by the dataset's own mean/std
        limit: Keep only the first `limit` samples
        n_classes: Number of classes; defaults to max(label) + 1, at least 10

    Returns:
        Dataset with pixels scaled to [0, 1] (before optional normalization)

    Raises:
        IDXParseError: On bad magic, truncation or an image/label count mismatch
    """
    images_path = Path(images_path)
    labels_path = Path(labels_path)
    pixels = _parse_images(images_path, _read_bytes(images_path))
    labels = _parse_labels(labels_path, _read_bytes(labels_path))

    if pixels.shape[0] != labels.shape[0]:
        # count field sits right after the magic in both files
        raise IDXParseError(
            f"label count {labels.shape[0]} does not match image count {pixels.shape[0]}",
            str(labels_path),
            4,
        )

    if limit is not None:
        pixels, labels = pixels[:limit], labels[:limit]

    classes = n_classes if n_classes is not None else max(int(labels.max(initial=0)) + 1, 10)
    dataset = Dataset(pixels.astype(np.float64) / 255.0, labels.astype(np.int64), classes)
    logger.info(f"Loaded {len(dataset)} samples with {dataset.n_features} features from {images_path}")

    if normalize:
        dataset = normalize_dataset(dataset, *dataset_stats(dataset))
    return dataset


def shuffled_split(dataset: Dataset, seed: int, train_fraction: float) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled train/test split."""
    order = SplitMix64(derive_seed(seed, SPLIT_STREAM)).permutation(len(dataset))
    n_train = int(round(train_fraction * len(dataset)))
    if n_train < 1 or n_train >= len(dataset):
        raise ConfigurationError(
            f"train_fraction {train_fraction} leaves an empty split of {len(dataset)} samples"
        )
    return dataset.subset(order[:n_train]), dataset.subset(order[n_train:])


class DatasetSource(Protocol):
    """Anything that can produce a (train, test) pair for the harness."""

    def load_split(self, seed: int, train_fraction: float) -> tuple[Dataset, Dataset]:
        ...


class BlobsSource:
    """Synthetic blobs, split by a seeded shuffle."""

    def __init__(self, cfg: BlobsConfig):
        self.cfg = cfg

    def load_split(self, seed: int, train_fraction: float) -> tuple[Dataset, Dataset]:
        data = make_blobs(
            self.cfg.n_per_class, self.cfg.n_classes, self.cfg.n_features, self.cfg.spread, self.cfg.seed
        )
        return shuffled_split(data, seed, train_fraction)


class IdxSource:
    """IDX files with their native partition; train_fraction is not used."""

    def __init__(self, cfg: IdxConfig):
        self.cfg = cfg

    def load_split(self, seed: int, train_fraction: float) -> tuple[Dataset, Dataset]:
        train = load_idx(
            self.cfg.train_images, self.cfg.train_labels, limit=self.cfg.limit, n_classes=self.cfg.n_classes
        )
        test = load_idx(
            self.cfg.test_images, self.cfg.test_labels, limit=self.cfg.limit, n_classes=self.cfg.n_classes
        )
        n_classes = max(train.n_classes, test.n_classes)
        train = Dataset(train.features, train.labels, n_classes)
        test = Dataset(test.features, test.labels, n_classes)

        if self.cfg.normalize:
            # test data is standardized with the training statistics
            mean, std = dataset_stats(train)
            train = normalize_dataset(train, mean, std)
            test = normalize_dataset(test, mean, std)
        return train, test


def create_dataset_source(cfg: DatasetConfig) -> DatasetSource:
    """Factory function to create the dataset source for a config.

    Raises:
        ConfigurationError: If the config type is not supported
    """
    if isinstance(cfg, BlobsConfig):
        return BlobsSource(cfg)
    if isinstance(cfg, IdxConfig):
        return IdxSource(cfg)
    raise ConfigurationError(f"Unsupported dataset config: {cfg!r}")
