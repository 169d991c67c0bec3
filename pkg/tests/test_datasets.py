"""Tests for datasets module."""

import gzip
import struct

import numpy as np
import pytest

from config import BlobsConfig, ExperimentConfig, IdxConfig, NetworkSpec, OptimizerConfig
from datasets import (
    BlobsSource,
    Dataset,
    IdxSource,
    create_dataset_source,
    load_idx,
    make_blobs,
    shuffled_split,
)
from errors import ConfigurationError, ContractViolationError, IDXParseError
from harness import run_experiment
from schedulers import Constant
from toy_model import evaluate_error, forward_loss, init_he


def _write_images(path, count, rows, cols, pixels, magic=0x00000803):
    path.write_bytes(struct.pack(">IIII", magic, count, rows, cols) + bytes(pixels))
    return path


def _write_labels(path, labels, magic=0x00000801, count=None):
    count = len(labels) if count is None else count
    path.write_bytes(struct.pack(">II", magic, count) + bytes(labels))
    return path


@pytest.fixture
def single_image(tmp_path):
    """One 2x2 image with pixels 0, 255, 128, 64 and label 7."""
    images = _write_images(tmp_path / "images.idx3", 1, 2, 2, [0, 255, 128, 64])
    labels = _write_labels(tmp_path / "labels.idx1", [7])
    return images, labels


def test_make_blobs_deterministic():
    """Same seed, identical datasets."""
    a = make_blobs(50, 3, 8, 0.3, seed=4)
    b = make_blobs(50, 3, 8, 0.3, seed=4)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.features, make_blobs(50, 3, 8, 0.3, seed=5).features)


def test_make_blobs_layout():
    """Rows are grouped by class and each class has n_per_class samples."""
    data = make_blobs(20, 4, 6, 0.5, seed=0)
    assert data.features.shape == (80, 6)
    assert data.n_classes == 4
    np.testing.assert_array_equal(data.labels, np.repeat(np.arange(4), 20))


def test_make_blobs_classes_are_separated():
    """Class means sit far apart compared to the spread."""
    data = make_blobs(200, 3, 8, 0.3, seed=1)
    means = [data.features[data.labels == c].mean(axis=0) for c in range(3)]
    for i in range(3):
        for j in range(i):
            assert np.linalg.norm(means[i] - means[j]) > 5 * 0.3


def test_make_blobs_rejects_bad_arguments():
    """Counts and spread must be positive."""
    with pytest.raises(ConfigurationError):
        make_blobs(0, 3, 8, 0.3, seed=0)
    with pytest.raises(ConfigurationError):
        make_blobs(10, 3, 8, 0.0, seed=0)


def test_load_idx_single_image(single_image):
    """Pixels are scaled to [0, 1] and labels kept."""
    data = load_idx(*single_image)
    np.testing.assert_allclose(data.features, [[0.0, 1.0, 128 / 255, 64 / 255]], rtol=0, atol=1e-15)
    np.testing.assert_array_equal(data.labels, [7])
    assert data.n_classes == 10


def test_load_idx_gzip(tmp_path):
    """Gzipped files are read transparently."""
    raw = struct.pack(">IIII", 0x803, 1, 2, 2) + bytes([0, 255, 128, 64])
    with gzip.open(tmp_path / "images.idx3.gz", "wb") as f:
        f.write(raw)
    with gzip.open(tmp_path / "labels.idx1.gz", "wb") as f:
        f.write(struct.pack(">II", 0x801, 1) + bytes([7]))
    data = load_idx(tmp_path / "images.idx3.gz", tmp_path / "labels.idx1.gz")
    assert data.features[0, 1] == 1.0
    assert data.labels[0] == 7


def test_load_idx_bad_magic(tmp_path, single_image):
    """A wrong magic number fails at offset 0."""
    images, _ = single_image
    labels = _write_labels(tmp_path / "bad.idx1", [7], magic=0x00000803)
    with pytest.raises(IDXParseError) as exc_info:
        load_idx(images, labels)
    assert exc_info.value.offset == 0
    assert "bad.idx1" in str(exc_info.value)


def test_load_idx_count_mismatch(tmp_path):
    """Two images against three labels is a count mismatch."""
    images = _write_images(tmp_path / "images.idx3", 2, 2, 2, [0] * 8)
    labels = _write_labels(tmp_path / "labels.idx1", [1, 2, 3])
    with pytest.raises(IDXParseError) as exc_info:
        load_idx(images, labels)
    assert exc_info.value.offset == 4
    assert "count" in str(exc_info.value)


def test_load_idx_truncated(tmp_path):
    """Missing pixel bytes are reported."""
    images = _write_images(tmp_path / "images.idx3", 2, 2, 2, [0] * 5)
    labels = _write_labels(tmp_path / "labels.idx1", [1, 2])
    with pytest.raises(IDXParseError):
        load_idx(images, labels)
    good_images = _write_images(tmp_path / "good.idx3", 1, 1, 1, [0])
    short = tmp_path / "short.idx1"
    short.write_bytes(b"\x00\x00")
    with pytest.raises(IDXParseError):
        load_idx(good_images, short)


def test_load_idx_limit_and_normalize(tmp_path):
    """limit keeps the first samples; normalize centers the pixels."""
    images = _write_images(tmp_path / "images.idx3", 3, 1, 2, [0, 10, 20, 30, 250, 255])
    labels = _write_labels(tmp_path / "labels.idx1", [0, 1, 2])
    limited = load_idx(images, labels, limit=2)
    assert len(limited) == 2
    normalized = load_idx(images, labels, normalize=True)
    assert abs(normalized.features.mean()) < 1e-12
    assert normalized.features.std() == pytest.approx(1.0)


def test_dataset_validation():
    """Labels and feature rows must line up."""
    with pytest.raises(ContractViolationError):
        Dataset(np.zeros((3, 2)), np.zeros(2), 2)
    with pytest.raises(ContractViolationError):
        Dataset(np.zeros((2, 2)), np.array([0, 5]), 2)


def test_shuffled_split_is_deterministic_partition():
    """The split is a seeded partition of the rows."""
    data = Dataset(np.arange(20, dtype=np.float64).reshape(10, 2), np.zeros(10), 1)
    train, test = shuffled_split(data, seed=3, train_fraction=0.8)
    assert (len(train), len(test)) == (8, 2)
    rows = sorted(train.features[:, 0].tolist() + test.features[:, 0].tolist())
    assert rows == list(np.arange(0, 20, 2, dtype=np.float64))
    again, _ = shuffled_split(data, seed=3, train_fraction=0.8)
    np.testing.assert_array_equal(train.features, again.features)


def test_shuffled_split_rejects_empty_side():
    """A fraction that empties one side is a configuration error."""
    data = Dataset(np.zeros((3, 1)), np.zeros(3), 1)
    with pytest.raises(ConfigurationError):
        shuffled_split(data, seed=0, train_fraction=0.9)


def test_dataset_sources(tmp_path, single_image):
    """The factory picks the source matching the config."""
    blobs = create_dataset_source(BlobsConfig(n_per_class=10))
    assert isinstance(blobs, BlobsSource)
    train, test = blobs.load_split(seed=0, train_fraction=0.8)
    assert (len(train), len(test)) == (24, 6)

    images, labels = single_image
    idx = create_dataset_source(IdxConfig(str(images), str(labels), str(images), str(labels)))
    assert isinstance(idx, IdxSource)
    idx_train, idx_test = idx.load_split(seed=0, train_fraction=0.8)
    assert len(idx_train) == len(idx_test) == 1
    with pytest.raises(ConfigurationError):
        create_dataset_source(object())


def test_two_class_idx_set(tmp_path):
    """n_classes=2 lets a binary IDX set train against a 2-output network."""
    images = _write_images(tmp_path / "images.idx3", 4, 2, 2, [0, 10, 20, 30, 250, 240, 230, 220] * 2)
    labels = _write_labels(tmp_path / "labels.idx1", [0, 1, 0, 1])
    cfg = IdxConfig(str(images), str(labels), str(images), str(labels), n_classes=2)

    train, test = create_dataset_source(cfg).load_split(seed=0, train_fraction=0.8)
    assert train.n_classes == test.n_classes == 2
    assert load_idx(images, labels).n_classes == 10

    net = init_he(NetworkSpec((4, 2), seed=0))
    loss, grads = forward_loss(net, train)
    assert loss > 0.0
    assert grads.shape == (10,)
    assert 0.0 <= evaluate_error(net, test) <= 1.0

    records = run_experiment(
        ExperimentConfig(
            schedule=Constant(0.1),
            optimizer=OptimizerConfig(),
            network=NetworkSpec((4, 2), seed=0),
            dataset=cfg,
            epochs=2,
            batch_size=2,
        )
    )
    assert len(records) == 2


def test_idx_config_rejects_single_class():
    """An IDX class count below 2 is a configuration error."""
    with pytest.raises(ConfigurationError):
        IdxConfig("a", "b", "c", "d", n_classes=1)
