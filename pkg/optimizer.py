"""SGD with (Nesterov) momentum and coupled weight decay.

Update rule, with g' = g + weight_decay * theta:

    v     <- mu * v + g'
    theta <- theta - lr * (g' + mu * v)     # nesterov
    theta <- theta - lr * v                 # classical momentum

With mu = 0 and weight_decay = 0 both branches reduce to theta - lr * g.
"""

import math
from dataclasses import dataclass

import numpy as np

from config import OptimizerConfig
from errors import ContractViolationError, NumericError
from logger_config import get_logger

logger = get_logger()


@dataclass
class ParameterVector:
    """Flat float64 parameter vector theta."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ContractViolationError("Parameters must be a flat vector")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class VelocityState:
    """Momentum buffer, one entry per parameter."""

    velocity: np.ndarray

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=np.float64)

    @classmethod
    def zeros(cls, n: int) -> "VelocityState":
        return cls(np.zeros(n, dtype=np.float64))

    def __len__(self) -> int:
        return self.velocity.shape[0]


def _first_non_finite(values: np.ndarray) -> int:
    bad = np.flatnonzero(~np.isfinite(values))
    return int(bad[0]) if bad.size else -1


def sgd_step(
    params: ParameterVector,
    grads: np.ndarray,
    lr: float,
    cfg: OptimizerConfig,
    state: VelocityState,
) -> tuple[ParameterVector, VelocityState]:
    """Apply one SGD step.

    Args:
        params: Current parameters theta
        grads: Loss gradient, same length as params
        lr: Learning rate for this step; 0 leaves theta unchanged but still advances v
        cfg: Momentum, weight decay and Nesterov flag
        state: Momentum buffer from the previous step

    Returns:
        New (params, state); the inputs are not modified

    Raises:
        ContractViolationError: On length mismatch or a negative/non-finite lr
        NumericError: If a gradient entry is NaN or infinite
    """
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.values.shape or len(state) != len(params):
        raise ContractViolationError(
            f"Length mismatch: params {len(params)}, grads {grads.size}, velocity {len(state)}"
        )
    if not math.isfinite(lr) or lr < 0:
        raise ContractViolationError(f"Learning rate must be finite and >= 0, got {lr}")

    bad = _first_non_finite(grads)
    if bad >= 0:
        raise NumericError(f"Non-finite gradient {grads[bad]} at index {bad}", index=bad)

    effective = grads + cfg.weight_decay * params.values
    velocity = cfg.momentum * state.velocity + effective
    if cfg.nesterov:
        update = effective + cfg.momentum * velocity
    else:
        update = velocity
    values = params.values - lr * update

    bad = _first_non_finite(values)
    if bad >= 0:
        raise NumericError(f"Parameter diverged to {values[bad]} at index {bad}", index=bad)

    return ParameterVector(values), VelocityState(velocity)
