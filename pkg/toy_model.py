"""Fully-connected softmax classifier written against a flat parameter vector.

Parameter layout (fixed, layer-major): for each consecutive layer pair
(n_in, n_out), the weight matrix W of shape (n_out, n_in) in row-major order
(one row per output unit), followed by the bias vector b of length n_out.
Hidden layers use ReLU; the last layer emits logits.
"""

import math
from dataclasses import dataclass

import numpy as np

from config import NetworkSpec
from datasets import Dataset
from errors import ContractViolationError, NumericError
from logger_config import get_logger
from optimizer import ParameterVector
from prng import SplitMix64

logger = get_logger()


def parameter_count(spec: NetworkSpec) -> int:
    """Sum of n_in * n_out + n_out over consecutive layer pairs."""
    sizes = spec.layer_sizes
    return sum(n_in * n_out + n_out for n_in, n_out in zip(sizes, sizes[1:]))


@dataclass
class ToyNetwork:
    """A network shape plus its flat parameters."""

    spec: NetworkSpec
    params: ParameterVector

    def __post_init__(self):
        expected = parameter_count(self.spec)
        if len(self.params) != expected:
            raise ContractViolationError(
                f"Network {self.spec.layer_sizes} needs {expected} parameters, got {len(self.params)}"
            )

    def unpack(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into the flat parameter vector, in layer order."""
        return _unpack(self.spec, self.params.values)

    def with_params(self, params: ParameterVector) -> "ToyNetwork":
        return ToyNetwork(self.spec, params)


def _unpack(spec: NetworkSpec, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    layers = []
    offset = 0
    for n_in, n_out in zip(spec.layer_sizes, spec.layer_sizes[1:]):
        weights = flat[offset:offset + n_in * n_out].reshape(n_out, n_in)
        offset += n_in * n_out
        biases = flat[offset:offset + n_out]
        offset += n_out
        layers.append((weights, biases))
    return layers


def init_he(spec: NetworkSpec) -> ToyNetwork:
    """He initialization: W ~ N(0, 2 / fan_in), b = 0, drawn from SplitMix64(spec.seed)."""
    rng = SplitMix64(spec.seed)
    chunks = []
    for n_in, n_out in zip(spec.layer_sizes, spec.layer_sizes[1:]):
        chunks.append(rng.normals(n_in * n_out) * math.sqrt(2.0 / n_in))
        chunks.append(np.zeros(n_out, dtype=np.float64))
    return ToyNetwork(spec, ParameterVector(np.concatenate(chunks)))


def _check_batch(net: ToyNetwork, batch: Dataset) -> None:
    if len(batch) == 0:
        raise ContractViolationError("Batch is empty")
    if batch.n_features != net.spec.layer_sizes[0]:
        raise ContractViolationError(
            f"Batch has {batch.n_features} features, network expects {net.spec.layer_sizes[0]}"
        )
    if batch.n_classes > net.spec.layer_sizes[-1]:
        raise ContractViolationError(
            f"Dataset has {batch.n_classes} classes, network outputs {net.spec.layer_sizes[-1]}"
        )


def _forward(net: ToyNetwork, features: np.ndarray) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Return logits, layer inputs and hidden pre-activations."""
    layers = net.unpack()
    activations = features
    inputs = []
    pre_activations = []
    for index, (weights, biases) in enumerate(layers):
        inputs.append(activations)
        z = activations @ weights.T + biases
        if index < len(layers) - 1:
            pre_activations.append(z)
            activations = np.maximum(z, 0.0)
        else:
            activations = z

    if not np.all(np.isfinite(activations)):
        raise NumericError("Non-finite logits in forward pass")
    return activations, inputs, pre_activations


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward_loss(net: ToyNetwork, batch: Dataset) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient in the flat parameter layout.

    Raises:
        ContractViolationError: On an empty batch or a feature-width mismatch
        NumericError: If logits or gradients turn non-finite
    """
    _check_batch(net, batch)
    n = len(batch)
    logits, inputs, pre_activations = _forward(net, batch.features)

    log_probs = _log_softmax(logits)
    rows = np.arange(n)
    loss = float(-log_probs[rows, batch.labels].mean())

    delta = np.exp(log_probs)
    delta[rows, batch.labels] -= 1.0
    delta /= n

    layers = net.unpack()
    grads = np.empty_like(net.params.values)
    grad_layers = _unpack(net.spec, grads)
    for index in range(len(layers) - 1, -1, -1):
        weights, _ = layers[index]
        grad_w, grad_b = grad_layers[index]
        grad_w[...] = delta.T @ inputs[index]
        grad_b[...] = delta.sum(axis=0)
        if index > 0:
            delta = (delta @ weights) * (pre_activations[index - 1] > 0.0)

    if not np.all(np.isfinite(grads)):
        raise NumericError("Non-finite gradient in backward pass")
    return loss, grads


def predict(net: ToyNetwork, features: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties go to the lowest class index."""
    logits, _, _ = _forward(net, np.asarray(features, dtype=np.float64))
    return np.argmax(logits, axis=1)


def evaluate_error(net: ToyNetwork, data: Dataset) -> float:
    """Fraction of samples whose predicted class differs from the label."""
    _check_batch(net, data)
    return float(np.mean(predict(net, data.features) != data.labels))
