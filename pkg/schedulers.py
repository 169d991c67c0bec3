"""Closed-form learning-rate schedules.

Every schedule is a frozen dataclass and every evaluation is a pure function
of (spec, t, horizon), so specs can be shared freely between threads.

Progress is an integer index t in [0, T]. Step-decay milestones are 0-based:
a milestone (start, rate) applies from epoch `start` onward, so the classic
ResNet recipe "0.1 for 0 < e <= 81, 0.01 for 81 < e <= 122, 0.001 after" is
written as milestones (0, 0.1), (81, 0.01), (122, 0.001).
"""

import csv
import io
import math
import numbers
from dataclasses import dataclass, replace
from pathlib import Path
from typing import ClassVar, Optional, Union

from config import CSV_SIGNIFICANT_DIGITS, ScheduleKind
from errors import ConfigurationError, ScheduleDomainError


def format_number(value: float) -> str:
    """Format a float for CSV output with the project-wide precision."""
    return f"{value:.{CSV_SIGNIFICANT_DIGITS}g}"


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite, got {value}")


def _require_horizon(horizon: int, name: str = "horizon") -> None:
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {horizon!r}")


def _milestone_start(start) -> int:
    if isinstance(start, bool) or not isinstance(start, numbers.Real) or not float(start).is_integer():
        raise ConfigurationError(f"Milestone start must be a whole epoch, got {start!r}")
    return int(start)


@dataclass(frozen=True)
class StepDecay:
    """Piecewise-constant schedule; each milestone is (start_epoch, rate)."""

    milestones: tuple[tuple[int, float], ...]
    kind: ClassVar[ScheduleKind] = ScheduleKind.STEP

    def __post_init__(self):
        milestones = tuple((_milestone_start(start), float(rate)) for start, rate in self.milestones)
        object.__setattr__(self, "milestones", milestones)

        if not milestones:
            raise ConfigurationError("Step decay needs at least one milestone")
        if milestones[0][0] != 0:
            raise ConfigurationError(
                f"First milestone must start at epoch 0, got {milestones[0][0]}"
            )
        for (prev_start, _), (start, _) in zip(milestones, milestones[1:]):
            if start <= prev_start:
                raise ConfigurationError(
                    f"Milestones must be strictly increasing, got {prev_start} then {start}"
                )
        for start, rate in milestones:
            _require_finite("Milestone rate", rate)
            if rate <= 0:
                raise ConfigurationError(f"Milestone rate at epoch {start} must be positive")


@dataclass(frozen=True)
class ExponentialDecay:
    """lr0 * decay**t."""

    lr0: float
    decay: float
    kind: ClassVar[ScheduleKind] = ScheduleKind.EXPONENTIAL

    def __post_init__(self):
        _require_finite("lr0", self.lr0)
        if self.lr0 <= 0:
            raise ConfigurationError(f"lr0 must be positive, got {self.lr0}")
        if not 0.0 <= self.decay <= 1.0:
            raise ConfigurationError(f"lambda must lie in [0, 1], got {self.decay}")


@dataclass(frozen=True)
class TwoStageExponential:
    """Slow decay1 up to switch_epoch, fast decay2 afterwards."""

    lr0: float
    decay1: float
    decay2: float
    switch_epoch: int
    kind: ClassVar[ScheduleKind] = ScheduleKind.TWO_STAGE

    def __post_init__(self):
        _require_finite("lr0", self.lr0)
        if self.lr0 <= 0:
            raise ConfigurationError(f"lr0 must be positive, got {self.lr0}")
        for name, value in (("lambda1", self.decay1), ("lambda2", self.decay2)):
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
        _require_horizon(self.switch_epoch, "switch_epoch")


@dataclass(frozen=True)
class Cosine:
    """Half-cosine from lr_max down to lr_min over `horizon` steps."""

    lr_min: float
    lr_max: float
    horizon: int
    kind: ClassVar[ScheduleKind] = ScheduleKind.COSINE

    def __post_init__(self):
        _validate_range(self.lr_min, self.lr_max)
        _require_horizon(self.horizon)


@dataclass(frozen=True)
class Htd:
    """Hyperbolic-tangent decay over the tanh interval [lower, upper]."""

    lower: float
    upper: float
    lr_min: float
    lr_max: float
    horizon: int
    kind: ClassVar[ScheduleKind] = ScheduleKind.HTD

    def __post_init__(self):
        _require_finite("L", self.lower)
        _require_finite("U", self.upper)
        if not (self.lower <= 0 < self.upper):
            raise ConfigurationError(
                f"HTD needs L <= 0 < U, got L={self.lower}, U={self.upper}"
            )
        _validate_range(self.lr_min, self.lr_max)
        _require_horizon(self.horizon)


@dataclass(frozen=True)
class Constant:
    """A fixed learning rate."""

    rate: float
    kind: ClassVar[ScheduleKind] = ScheduleKind.CONSTANT

    def __post_init__(self):
        _require_finite("rate", self.rate)
        if self.rate <= 0:
            raise ConfigurationError(f"Constant rate must be positive, got {self.rate}")


ScheduleSpec = Union[StepDecay, ExponentialDecay, TwoStageExponential, Cosine, Htd, Constant]

SCHEDULE_TYPES: dict[ScheduleKind, type] = {
    ScheduleKind.STEP: StepDecay,
    ScheduleKind.EXPONENTIAL: ExponentialDecay,
    ScheduleKind.TWO_STAGE: TwoStageExponential,
    ScheduleKind.COSINE: Cosine,
    ScheduleKind.HTD: Htd,
    ScheduleKind.CONSTANT: Constant,
}


def _validate_range(lr_min: float, lr_max: float) -> None:
    _require_finite("lr_min", lr_min)
    _require_finite("lr_max", lr_max)
    if lr_min < 0:
        raise ConfigurationError(f"lr_min must be non-negative, got {lr_min}")
    if not lr_min < lr_max:
        raise ConfigurationError(f"lr_min must be below lr_max, got {lr_min} >= {lr_max}")


# The classic ResNet CIFAR recipe in 0-based milestones.
RESNET_STEP_DECAY = StepDecay(((0, 0.1), (81, 0.01), (122, 0.001)))


@dataclass(frozen=True)
class LearningRateCurve:
    """Sampled (t, rate) pairs over [0, horizon]."""

    horizon: int
    samples: tuple[tuple[int, float], ...]

    def __post_init__(self):
        _require_horizon(self.horizon)
        previous = -1
        for t, rate in self.samples:
            if t <= previous:
                raise ConfigurationError("Curve samples must be sorted by t without duplicates")
            if not 0 <= t <= self.horizon:
                raise ConfigurationError(f"Sample t={t} outside [0, {self.horizon}]")
            if not math.isfinite(rate) or rate < 0:
                raise ConfigurationError(f"Sample rate at t={t} must be finite and >= 0")
            previous = t

    @property
    def steps(self) -> list[int]:
        return [t for t, _ in self.samples]

    @property
    def rates(self) -> list[float]:
        return [rate for _, rate in self.samples]


def bounds(spec: ScheduleSpec) -> Optional[tuple[float, float, int]]:
    """Return (lr_min, lr_max, horizon) for Cosine/Htd, None for other kinds."""
    if isinstance(spec, (Cosine, Htd)):
        return spec.lr_min, spec.lr_max, spec.horizon
    return None


def with_horizon(spec: ScheduleSpec, horizon: int) -> ScheduleSpec:
    """Copy a Cosine/Htd spec onto a new horizon; other kinds are horizon-free."""
    if isinstance(spec, (Cosine, Htd)):
        return replace(spec, horizon=horizon)
    return spec


def _cosine_at(spec: Cosine, fraction: float) -> float:
    # Convex-combination form keeps both endpoints exact.
    weight = 0.5 * (1.0 + math.cos(math.pi * fraction))
    return spec.lr_min * (1.0 - weight) + spec.lr_max * weight


def _htd_at(spec: Htd, fraction: float) -> float:
    argument = spec.lower * (1.0 - fraction) + spec.upper * fraction
    return spec.lr_min + (spec.lr_max - spec.lr_min) / 2.0 * (1.0 - math.tanh(argument))


def _value_at(spec: ScheduleSpec, t: float) -> float:
    """Value of a horizon-free schedule at (possibly real-valued) progress t."""
    if isinstance(spec, Constant):
        return spec.rate
    if isinstance(spec, StepDecay):
        rate = spec.milestones[0][1]
        for start, milestone_rate in spec.milestones:
            if start > t:
                break
            rate = milestone_rate
        return rate
    if isinstance(spec, ExponentialDecay):
        return spec.lr0 * spec.decay**t
    if isinstance(spec, TwoStageExponential):
        if t <= spec.switch_epoch:
            return spec.lr0 * spec.decay1**t
        return spec.lr0 * spec.decay1**spec.switch_epoch * spec.decay2 ** (t - spec.switch_epoch)
    raise ConfigurationError(f"Unsupported schedule spec: {spec!r}")


def evaluate(spec: ScheduleSpec, t: int, horizon: int) -> float:
    """Learning rate of `spec` at integer progress t of a run of length `horizon`.

    Args:
        spec: Schedule to evaluate
        t: Progress index, 0 <= t <= horizon
        horizon: Total number of epochs (or iterations) T

    Returns:
        Learning rate at t

    Raises:
        ConfigurationError: If horizon is invalid or disagrees with a Cosine/Htd spec
        ScheduleDomainError: If t lies outside [0, horizon]
    """
    _require_horizon(horizon)
    if isinstance(t, bool) or not isinstance(t, int):
        raise ScheduleDomainError(f"Progress t must be an integer, got {t!r}")
    if t < 0 or t > horizon:
        raise ScheduleDomainError(f"Progress t={t} outside [0, {horizon}]")

    if isinstance(spec, (Cosine, Htd)):
        if spec.horizon != horizon:
            raise ConfigurationError(
                f"{describe(spec)} was configured for horizon {spec.horizon}, "
                f"evaluated with horizon {horizon}"
            )
        fraction = t / horizon
        return _cosine_at(spec, fraction) if isinstance(spec, Cosine) else _htd_at(spec, fraction)

    return _value_at(spec, t)


def evaluate_progress(spec: ScheduleSpec, fraction: float, horizon: Optional[int] = None) -> float:
    """Learning rate at a real-valued progress fraction in [0, 1].

    Cosine and Htd substitute the fraction directly for t/T. Other kinds map
    it to t = fraction * horizon, so they need a horizon.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ScheduleDomainError(f"Progress fraction {fraction} outside [0, 1]")
    if isinstance(spec, Cosine):
        return _cosine_at(spec, fraction)
    if isinstance(spec, Htd):
        return _htd_at(spec, fraction)
    if horizon is None:
        raise ConfigurationError(f"{describe(spec)} needs a horizon to map progress fractions")
    _require_horizon(horizon)
    return _value_at(spec, fraction * horizon)


def curve(spec: ScheduleSpec, horizon: int) -> LearningRateCurve:
    """Sample a schedule at every integer t in [0, horizon]."""
    _require_horizon(horizon)
    samples = tuple((t, evaluate(spec, t, horizon)) for t in range(horizon + 1))
    return LearningRateCurve(horizon=horizon, samples=samples)


def final_rate(spec: ScheduleSpec, horizon: int) -> float:
    """Rate at t = horizon, the end point plotted for HTD curves."""
    return evaluate(spec, horizon, horizon)


def step_decay_for_horizon(horizon: int, high: float = 0.1) -> StepDecay:
    """The 81/122-of-200 step recipe rescaled to another horizon.

    Drops by 10x at round(81/200 * T) and round(122/200 * T); on very short
    horizons a colliding drop is pushed one epoch later.
    """
    _require_horizon(horizon)
    milestones = [(0, high)]
    for numerator, rate in ((81, high / 10.0), (122, high / 100.0)):
        start = max((numerator * horizon + 100) // 200, milestones[-1][0] + 1)
        milestones.append((start, rate))
    return StepDecay(tuple(milestones))


def describe(spec: ScheduleSpec) -> str:
    """Short label such as HTD(-6,3) or cosine."""
    if isinstance(spec, Htd):
        return f"HTD({spec.lower:g},{spec.upper:g})"
    if isinstance(spec, Cosine):
        return "cosine"
    if isinstance(spec, StepDecay):
        return "step(" + ",".join(str(start) for start, _ in spec.milestones[1:]) + ")"
    if isinstance(spec, ExponentialDecay):
        return f"exp({spec.decay:g})"
    if isinstance(spec, TwoStageExponential):
        return f"two_stage({spec.decay1:g},{spec.decay2:g}@{spec.switch_epoch})"
    return f"constant({spec.rate:g})"


# JSON / CLI mapping --------------------------------------------------------

_FIELDS: dict[ScheduleKind, dict[str, str]] = {
    ScheduleKind.STEP: {"milestones": "milestones"},
    ScheduleKind.EXPONENTIAL: {"lr0": "lr0", "lambda": "decay"},
    ScheduleKind.TWO_STAGE: {
        "lr0": "lr0",
        "lambda1": "decay1",
        "lambda2": "decay2",
        "switch_epoch": "switch_epoch",
    },
    ScheduleKind.COSINE: {"lr_min": "lr_min", "lr_max": "lr_max", "horizon": "horizon"},
    ScheduleKind.HTD: {
        "L": "lower",
        "U": "upper",
        "lr_min": "lr_min",
        "lr_max": "lr_max",
        "horizon": "horizon",
    },
    ScheduleKind.CONSTANT: {"rate": "rate"},
}

_KIND_ALIASES = {
    "step": ScheduleKind.STEP,
    "exp": ScheduleKind.EXPONENTIAL,
    "exponential": ScheduleKind.EXPONENTIAL,
    "two_stage": ScheduleKind.TWO_STAGE,
    "two-stage": ScheduleKind.TWO_STAGE,
    "cosine": ScheduleKind.COSINE,
    "htd": ScheduleKind.HTD,
    "constant": ScheduleKind.CONSTANT,
}


def parse_kind(text: str) -> ScheduleKind:
    """Resolve a schedule kind name, accepting a few aliases."""
    try:
        return _KIND_ALIASES[text.strip().lower()]
    except KeyError:
        known = ", ".join(sorted(_KIND_ALIASES))
        raise ConfigurationError(f"Unknown schedule kind {text!r} (expected one of: {known})")


def _build(kind: ScheduleKind, values: dict) -> ScheduleSpec:
    try:
        return SCHEDULE_TYPES[kind](**values)
    except TypeError as e:
        raise ConfigurationError(f"Invalid {kind.value} schedule: {e}") from e


def schedule_from_dict(data: dict, horizon: Optional[int] = None) -> ScheduleSpec:
    """Build a schedule from its JSON object.

    Args:
        data: Mapping with "kind" plus the variant's fields
        horizon: Fallback horizon for Cosine/Htd objects that omit "horizon"

    Raises:
        ConfigurationError: On unknown kinds, unknown keys or missing keys
    """
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigurationError("Schedule must be an object with a 'kind' key")
    kind = parse_kind(str(data["kind"]))
    fields = _FIELDS[kind]

    unknown = sorted(set(data) - set(fields) - {"kind"})
    if unknown:
        raise ConfigurationError(f"Unknown keys for {kind.value} schedule: {', '.join(unknown)}")

    values = {}
    for key, attribute in fields.items():
        if key in data:
            values[attribute] = data[key]
        elif key == "horizon" and horizon is not None:
            values[attribute] = horizon
        else:
            raise ConfigurationError(f"Missing key '{key}' for {kind.value} schedule")

    if kind is ScheduleKind.STEP:
        try:
            values["milestones"] = tuple(
                (_milestone_start(start), float(rate)) for start, rate in data["milestones"]
            )
        except (TypeError, ValueError) as e:
            raise ConfigurationError("milestones must be a list of [start_epoch, rate] pairs") from e
    return _build(kind, values)


def schedule_to_dict(spec: ScheduleSpec) -> dict:
    """Inverse of schedule_from_dict."""
    data: dict = {"kind": spec.kind.value}
    for key, attribute in _FIELDS[spec.kind].items():
        value = getattr(spec, attribute)
        data[key] = [list(m) for m in value] if key == "milestones" else value
    return data


def parse_schedule_arg(text: str, horizon: Optional[int] = None) -> ScheduleSpec:
    """Parse the `<kind>:<comma-separated params>` mini-grammar.

    Forms:
        step:0=0.1,81=0.01,122=0.001
        exp:LR0,LAMBDA
        two_stage:LR0,LAMBDA1,LAMBDA2,SWITCH
        cosine:LR_MIN,LR_MAX[,T]
        htd:L,U,LR_MIN,LR_MAX[,T]
        constant:RATE

    A missing T is taken from `horizon`.
    """
    kind_text, sep, params_text = text.partition(":")
    if not sep or not params_text:
        raise ConfigurationError(f"Schedule argument {text!r} must look like <kind>:<params>")
    kind = parse_kind(kind_text)
    params = [p.strip() for p in params_text.split(",") if p.strip()]

    try:
        if kind is ScheduleKind.STEP:
            milestones = []
            for item in params:
                start, eq, rate = item.partition("=")
                if not eq:
                    raise ConfigurationError(f"Step milestone {item!r} must look like START=RATE")
                milestones.append((int(start), float(rate)))
            return StepDecay(tuple(milestones))

        values = [float(p) for p in params]
    except ValueError as e:
        raise ConfigurationError(f"Malformed schedule argument {text!r}: {e}") from e

    expected = {
        ScheduleKind.EXPONENTIAL: (2, 2),
        ScheduleKind.TWO_STAGE: (4, 4),
        ScheduleKind.COSINE: (2, 3),
        ScheduleKind.HTD: (4, 5),
        ScheduleKind.CONSTANT: (1, 1),
    }[kind]
    if not expected[0] <= len(values) <= expected[1]:
        raise ConfigurationError(
            f"{kind.value} takes {expected[0]}"
            + (f"-{expected[1]}" if expected[1] != expected[0] else "")
            + f" parameters, got {len(values)} in {text!r}"
        )

    if kind is ScheduleKind.EXPONENTIAL:
        return ExponentialDecay(lr0=values[0], decay=values[1])
    if kind is ScheduleKind.TWO_STAGE:
        return TwoStageExponential(values[0], values[1], values[2], _as_int(values[3], text))
    if kind is ScheduleKind.CONSTANT:
        return Constant(rate=values[0])

    if len(values) == expected[1]:
        resolved_horizon = _as_int(values[-1], text)
        values = values[:-1]
    elif horizon is not None:
        resolved_horizon = horizon
    else:
        raise ConfigurationError(f"{kind.value} schedule {text!r} needs a horizon (pass --epochs)")

    if kind is ScheduleKind.COSINE:
        return Cosine(lr_min=values[0], lr_max=values[1], horizon=resolved_horizon)
    return Htd(values[0], values[1], values[2], values[3], resolved_horizon)


def _as_int(value: float, text: str) -> int:
    if not value.is_integer():
        raise ConfigurationError(f"Expected an integer in {text!r}, got {value}")
    return int(value)


# CSV -------------------------------------------------------------------------

def curve_to_csv(lr_curve: LearningRateCurve) -> str:
    """Serialize a curve as CSV with header `t,lr`."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["t", "lr"])
    for t, rate in lr_curve.samples:
        writer.writerow([t, format_number(rate)])
    return buffer.getvalue()


def write_curve_csv(lr_curve: LearningRateCurve, path: Union[str, Path]) -> Path:
    """Write curve_to_csv output to `path`."""
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(curve_to_csv(lr_curve))
    return out_path
