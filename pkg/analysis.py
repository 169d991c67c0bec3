"""Executable checks of the algebra behind HTD.

Covers the decreasing ratio r(x, delta) of the 1 - tanh x envelope, the
inflection point / ratio R geometry of HTD(L, U), and sup-norm proximity
between two schedules.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config import LOG_DOMAIN_THRESHOLD, RATIO_IDENTITY_MAX_ABS_X
from errors import ConfigurationError, ScheduleDomainError
from logger_config import get_logger
from schedulers import ScheduleSpec, bounds, evaluate_progress, format_number

logger = get_logger()


@dataclass(frozen=True)
class RatioQuery:
    """Position x of the tanh argument and displacement delta > 0."""

    x: float
    delta: float

    def __post_init__(self):
        if not math.isfinite(self.x):
            raise ConfigurationError(f"x must be finite, got {self.x}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ConfigurationError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class ProximityReport:
    """Sup-norm distance between two sampled schedules."""

    grid_points: int
    max_abs_diff: float
    relative_diff: float
    argmax_progress: float


def decreasing_ratio(q: RatioQuery) -> float:
    """r(x, delta) = (1 - tanh(x + delta)) / (1 - tanh x).

    Evaluated as (e^{2x} + 1) / (e^{2x + 2 delta} + 1); once the exponent
    would overflow the ratio is taken in the log domain, folding e^{-2 delta}
    out for x >= 0 so every softplus argument stays non-positive.
    """
    b = 2.0 * (q.x + q.delta)
    if b > LOG_DOMAIN_THRESHOLD:
        if q.x >= 0:
            log_r = (
                -2.0 * q.delta
                + np.logaddexp(-2.0 * q.x, 0.0)
                - np.logaddexp(-2.0 * (q.x + q.delta), 0.0)
            )
        else:
            log_r = np.logaddexp(2.0 * q.x, 0.0) - np.logaddexp(b, 0.0)
        return float(np.exp(log_r))
    return (math.exp(2.0 * q.x) + 1.0) / (math.exp(b) + 1.0)


def _expanded_ratio(x: float, delta: float) -> float:
    """r written as the product of the two exponential fractions of 1 - tanh."""
    y = x + delta
    left = 2.0 * math.exp(-y) / (math.exp(y) + math.exp(-y))
    right = (math.exp(x) + math.exp(-x)) / (2.0 * math.exp(-x))
    return left * right


def ratio_identity_check(q: RatioQuery) -> float:
    """Relative gap between the expanded and the closed form of r(x, delta).

    Raises:
        ScheduleDomainError: If |x| > 20 or the expanded form is not representable
    """
    if abs(q.x) > RATIO_IDENTITY_MAX_ABS_X:
        raise ScheduleDomainError(
            f"|x| = {abs(q.x)} exceeds {RATIO_IDENTITY_MAX_ABS_X}; the expanded form underflows"
        )
    try:
        expanded = _expanded_ratio(q.x, q.delta)
    except (OverflowError, ZeroDivisionError) as e:
        raise ScheduleDomainError(f"Expanded form of r({q.x}, {q.delta}) is not representable") from e

    closed = decreasing_ratio(q)
    if not math.isfinite(expanded) or expanded == 0.0 or closed == 0.0:
        raise ScheduleDomainError(f"r({q.x}, {q.delta}) underflows; the forms cannot be compared")
    return abs(expanded - closed) / closed


def inflection_fraction(lower: float, upper: float) -> float:
    """Progress s* = |L| / (|L| + U) where L(1 - s) + U s crosses zero."""
    _check_interval(lower, upper)
    return abs(lower) / (abs(lower) + upper)


def ratio_R(lower: float, upper: float) -> float:
    """R = |L| / |U|, training time before vs after the inflection point."""
    _check_interval(lower, upper)
    return abs(lower) / abs(upper)


def _check_interval(lower: float, upper: float) -> None:
    if not (math.isfinite(lower) and math.isfinite(upper) and lower <= 0 < upper):
        raise ConfigurationError(f"Expected L <= 0 < U, got L={lower}, U={upper}")


def decay_envelope(lower: float, upper: float, points: int) -> list[tuple[float, float]]:
    """Samples (x, 1 - tanh x) on [L, U]."""
    _check_interval(lower, upper)
    if points < 2:
        raise ConfigurationError("decay_envelope needs at least 2 points")
    xs = np.linspace(lower, upper, points)
    return [(float(x), float(1.0 - math.tanh(x))) for x in xs]


def sup_difference(
    a: ScheduleSpec,
    b: ScheduleSpec,
    grid_points: int,
    horizon: Optional[int] = None,
) -> ProximityReport:
    """Largest |a(s) - b(s)| over equispaced progress fractions s in [0, 1].

    Args:
        a: First schedule
        b: Second schedule
        grid_points: Number of grid points, at least 2
        horizon: Needed only if neither schedule carries its own horizon

    Returns:
        ProximityReport; ties resolve to the earliest grid point

    Raises:
        ConfigurationError: If (lr_min, lr_max, horizon) differ between a and b
    """
    if isinstance(grid_points, bool) or not isinstance(grid_points, int) or grid_points < 2:
        raise ConfigurationError(f"grid_points must be an integer >= 2, got {grid_points!r}")

    bounds_a, bounds_b = bounds(a), bounds(b)
    if bounds_a is not None and bounds_b is not None and bounds_a != bounds_b:
        raise ConfigurationError(
            f"Schedules are not comparable: (lr_min, lr_max, horizon) {bounds_a} vs {bounds_b}"
        )
    known = bounds_a or bounds_b
    if horizon is None and known is not None:
        horizon = known[2]

    fractions = np.linspace(0.0, 1.0, grid_points)
    values_a = np.array([evaluate_progress(a, float(s), horizon) for s in fractions])
    values_b = np.array([evaluate_progress(b, float(s), horizon) for s in fractions])
    gaps = np.abs(values_a - values_b)
    index = int(np.argmax(gaps))

    if known is not None:
        span = known[1] - known[0]
    else:
        span = float(max(values_a.max(), values_b.max()) - min(values_a.min(), values_b.min()))
    max_abs = float(gaps[index])
    report = ProximityReport(
        grid_points=grid_points,
        max_abs_diff=max_abs,
        relative_diff=max_abs / span if span > 0 else 0.0,
        argmax_progress=float(fractions[index]),
    )
    logger.debug(f"sup difference {report.max_abs_diff:.6g} at progress {report.argmax_progress:.4f}")
    return report


def proximity_to_csv(report: ProximityReport) -> str:
    """CSV with header grid_points,max_abs_diff,relative_diff,argmax_progress."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["grid_points", "max_abs_diff", "relative_diff", "argmax_progress"])
    writer.writerow([
        report.grid_points,
        format_number(report.max_abs_diff),
        format_number(report.relative_diff),
        format_number(report.argmax_progress),
    ])
    return buffer.getvalue()
