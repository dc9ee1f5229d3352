"""
Exception hierarchy shared by every rewardmap module.
All errors are ValueErrors so callers that only know the builtin still catch them.
"""

from typing import Any, List, Optional


class RewardMapError(ValueError):
    """Root of all rewardmap errors"""


class ParseError(RewardMapError):
    """Metro Data document could not be parsed"""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        field: Optional[str] = None,
    ):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column}")
        if field is not None:
            location.append(f"field '{field}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.line = line
        self.column = column
        self.field = field


class ValidationError(RewardMapError):
    """A network or route violates its invariants"""


class DomainError(RewardMapError):
    """An oracle was asked about a stop or line that does not exist"""


class GenerationError(RewardMapError):
    """A network spec or question quota cannot be satisfied"""


class BalancingError(RewardMapError):
    """Yes/no answers cannot be balanced by resampling"""


class EmptySplitError(RewardMapError):
    """A dataset split came out empty; the partial split is attached"""

    def __init__(self, message: str, train: List[Any], test: List[Any]):
        super().__init__(message)
        self.train = train
        self.test = test


class UsageError(RewardMapError):
    """An operation was called outside its preconditions"""


class AlignmentError(RewardMapError):
    """Training logs do not share a step grid"""


class NonFiniteGradientError(RewardMapError):
    """A policy update produced a NaN or infinite gradient"""

    def __init__(self, message: str, dump_path: Optional[str] = None):
        if dump_path:
            message = f"{message} (diagnostics written to {dump_path})"
        super().__init__(message)
        self.dump_path = dump_path
