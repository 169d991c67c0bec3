"""Exception hierarchy for the HTD scheduler toolkit.

Every error raised by the library derives from HTDError so the CLI can map
library failures to exit code 1 without swallowing programming errors.
"""

from typing import Optional, Sequence


class HTDError(Exception):
    """Base exception for all toolkit errors."""
    pass


class ConfigurationError(HTDError, ValueError):
    """Raised when a schedule, network or experiment configuration is invalid."""
    pass


class ScheduleDomainError(HTDError, ValueError):
    """Raised when a query lies outside the domain of a schedule or formula."""
    pass


class ContractViolationError(HTDError, ValueError):
    """Raised when inputs disagree in length, width or shape."""
    pass


class NumericError(HTDError, ArithmeticError):
    """Raised when a non-finite value shows up in a computation.

    Attributes:
        index: Flat index of the first offending value, when known
    """

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class IDXParseError(HTDError, ValueError):
    """Raised when an IDX file is malformed.

    Attributes:
        path: File being parsed
        offset: Byte offset at which parsing failed
    """

    def __init__(self, message: str, path: str, offset: int):
        super().__init__(f"{path}: {message} (at byte offset {offset})")
        self.path = path
        self.offset = offset


class InfeasibleRatioError(ConfigurationError):
    """Raised when a step ratio S1/S2 has no integer realization.

    Attributes:
        nearest: Closest feasible ratios below and above the request
    """

    def __init__(self, message: str, nearest: Sequence[float] = ()):
        super().__init__(message)
        self.nearest = tuple(nearest)


class ExperimentError(HTDError):
    """Raised when a training run fails; carries where it failed.

    Attributes:
        epoch: Epoch index at failure (None before training starts)
        batch: Batch index within the epoch (None outside the batch loop)
    """

    def __init__(self, message: str, epoch: Optional[int] = None, batch: Optional[int] = None):
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if batch is not None:
            where.append(f"batch {batch}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.epoch = epoch
        self.batch = batch
