"""Tests for toy_model module."""

import math

import numpy as np
import pytest

from config import GRADIENT_CHECK_STEP, NetworkSpec
from datasets import Dataset
from errors import ContractViolationError, NumericError
from optimizer import ParameterVector
from prng import SplitMix64
from toy_model import (
    ToyNetwork,
    _forward,
    evaluate_error,
    forward_loss,
    init_he,
    parameter_count,
    predict,
)

STEP = GRADIENT_CHECK_STEP


def _random_batch(seed: int, n: int, n_features: int, n_classes: int) -> Dataset:
    rng = SplitMix64(seed)
    features = rng.normals(n * n_features).reshape(n, n_features)
    labels = np.array([rng.randbelow(n_classes) for _ in range(n)], dtype=np.int64)
    return Dataset(features, labels, n_classes)


def _zero_network(sizes) -> ToyNetwork:
    spec = NetworkSpec(tuple(sizes))
    return ToyNetwork(spec, ParameterVector(np.zeros(parameter_count(spec))))


def test_parameter_count():
    """n_in * n_out + n_out summed over layers."""
    assert parameter_count(NetworkSpec((8, 3))) == 27
    assert parameter_count(NetworkSpec((4, 5, 3))) == 25 + 18


def test_parameter_length_checked():
    """A flat vector of the wrong length is rejected."""
    with pytest.raises(ContractViolationError):
        ToyNetwork(NetworkSpec((2, 2)), ParameterVector(np.zeros(5)))


def test_he_init_deterministic():
    """Same seed, bitwise-identical parameters."""
    spec = NetworkSpec((100, 50, 10), seed=3)
    np.testing.assert_array_equal(init_he(spec).params.values, init_he(spec).params.values)
    other = init_he(NetworkSpec((100, 50, 10), seed=4))
    assert not np.array_equal(init_he(spec).params.values, other.params.values)


def test_he_init_scale_and_zero_biases():
    """Weight std is close to sqrt(2 / fan_in) and biases start at 0."""
    net = init_he(NetworkSpec((100, 50), seed=11))
    (weights, biases), = net.unpack()
    assert weights.shape == (50, 100)
    expected = math.sqrt(2.0 / 100)
    assert abs(weights.std() - expected) < 0.1 * expected
    assert np.all(biases == 0.0)


def test_zero_network_loss_is_log_classes():
    """Uniform softmax gives ln(n_classes)."""
    net = _zero_network((5, 10))
    loss, _ = forward_loss(net, _random_batch(1, 16, 5, 10))
    assert loss == pytest.approx(math.log(10), rel=1e-12)


def test_saturated_loss_near_zero():
    """A +1000 logit on the true class drives the loss to ~0."""
    net = _zero_network((2, 3))
    (_, biases), = net.unpack()
    biases[1] = 1000.0
    batch = Dataset(np.array([[0.3, -0.2]]), np.array([1]), 3)
    loss, grads = forward_loss(net, batch)
    assert 0.0 <= loss < 1e-6
    assert np.all(np.isfinite(grads))


def test_loss_invariant_to_logit_shift():
    """Adding a constant to every output bias leaves the loss unchanged."""
    net = init_he(NetworkSpec((4, 6, 3), seed=5))
    batch = _random_batch(2, 10, 4, 3)
    shifted = net.params.values.copy()
    _, output_biases = ToyNetwork(net.spec, ParameterVector(shifted)).unpack()[-1]
    output_biases += 50.0
    loss, _ = forward_loss(net, batch)
    shifted_loss, _ = forward_loss(net.with_params(ParameterVector(shifted)), batch)
    assert shifted_loss == pytest.approx(loss, rel=1e-10)


def _has_kink(net: ToyNetwork, batch: Dataset) -> bool:
    _, _, pre_activations = _forward(net, batch.features)
    return any(np.min(np.abs(z)) < 1e-3 for z in pre_activations)


def _numeric_gradient(net: ToyNetwork, batch: Dataset) -> np.ndarray:
    base = net.params.values
    numeric = np.empty_like(base)
    for i in range(base.size):
        plus = base.copy()
        plus[i] += STEP
        minus = base.copy()
        minus[i] -= STEP
        loss_plus, _ = forward_loss(net.with_params(ParameterVector(plus)), batch)
        loss_minus, _ = forward_loss(net.with_params(ParameterVector(minus)), batch)
        numeric[i] = (loss_plus - loss_minus) / (2 * STEP)
    return numeric


@pytest.mark.parametrize("sizes", [(4, 5, 3), (10, 20, 5), (6, 8, 8, 4), (3, 2)])
def test_gradient_matches_finite_differences(sizes):
    """Backprop agrees with central differences on 20 random networks per shape."""
    checked = 0
    seed = 0
    while checked < 20 and seed < 400:
        net = init_he(NetworkSpec(sizes, seed=seed))
        batch = _random_batch(1000 + seed, 16, sizes[0], sizes[-1])
        seed += 1
        if _has_kink(net, batch):
            continue

        _, grads = forward_loss(net, batch)
        numeric = _numeric_gradient(net, batch)
        gap = np.abs(grads - numeric)
        relative = gap / np.maximum(np.abs(grads) + np.abs(numeric), 1e-300)
        assert np.all((gap < 1e-8) | (relative < 1e-4))
        checked += 1
    assert checked == 20


def test_predict_ties_go_to_lowest_class():
    """All-equal logits predict class 0."""
    net = _zero_network((3, 4))
    np.testing.assert_array_equal(predict(net, np.ones((5, 3))), np.zeros(5, dtype=np.int64))


def test_zero_network_error_on_balanced_classes():
    """Always predicting class 0 is wrong on 9 of 10 balanced classes."""
    net = _zero_network((2, 10))
    data = Dataset(np.zeros((10, 2)), np.arange(10), 10)
    assert evaluate_error(net, data) == pytest.approx(0.9)


def test_memorized_set_has_zero_error():
    """Biases that point at each label give error 0 on a one-hot input set."""
    spec = NetworkSpec((3, 3))
    params = np.concatenate([np.eye(3).ravel() * 10.0, np.zeros(3)])
    net = ToyNetwork(spec, ParameterVector(params))
    data = Dataset(np.eye(3), np.array([0, 1, 2]), 3)
    assert evaluate_error(net, data) == 0.0


def test_width_mismatch():
    """Feature width must equal the input layer."""
    net = _zero_network((4, 3))
    with pytest.raises(ContractViolationError):
        forward_loss(net, _random_batch(0, 5, 3, 3))


def test_too_many_classes():
    """Labels beyond the output layer are a contract violation."""
    net = _zero_network((4, 3))
    with pytest.raises(ContractViolationError):
        forward_loss(net, _random_batch(0, 5, 4, 5))


def test_overflowing_logits_raise_numeric_error():
    """Overflow in the forward pass surfaces as NumericError."""
    spec = NetworkSpec((2, 2))
    net = ToyNetwork(spec, ParameterVector(np.full(parameter_count(spec), 1e300)))
    batch = Dataset(np.array([[1e10, 1e10]]), np.array([0]), 2)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NumericError):
            forward_loss(net, batch)
