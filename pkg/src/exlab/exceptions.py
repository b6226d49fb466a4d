"""Exception hierarchy shared across the package."""


class ExlabError(Exception):
    """Base class for every error raised by exlab."""


class DimensionError(ExlabError, ValueError):
    """Array shapes or widths do not agree."""


class ConsistencyError(ExlabError, RuntimeError):
    """An object was used out of sync with the state it was derived from."""


class ParameterError(ExlabError, ValueError):
    """An argument is outside its valid domain."""


class PairingError(ParameterError):
    """A contrastive loss was given rows without the required positives."""


class NumericError(ExlabError, ArithmeticError):
    """A NaN or infinity appeared where finite values are required."""

    def __init__(self, message, *, step=None, seed=None):
        self.reason = message
        details = []
        if step is not None:
            details.append(f"step={step}")
        if seed is not None:
            details.append(f"seed={seed}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.step = step
        self.seed = seed


class CheckpointFormatError(ExlabError, ValueError):
    """A checkpoint file is truncated, has a bad header or an unknown version."""


class AccessDenied(ExlabError, PermissionError):
    """A query was refused until the attached proof-of-work puzzle is solved."""

    def __init__(self, puzzle, message="proof-of-work required"):
        super().__init__(message)
        self.puzzle = puzzle


class BudgetExhausted(ExlabError, RuntimeError):
    """A search or query loop ran out of its allotted attempts."""
