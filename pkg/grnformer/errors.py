"""Error types and CLI error handling for grnformer.

Every failure raised by the library is a ``GrnFormerError`` subclass tagged
with an ``ErrorType``. The CLI converts them into an ``ErrorResponse`` and an
exit code (0 ok, 1 usage, 2 data).
"""

import functools
import logging
import sys
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Dict, Iterable, Optional, Union

logger = logging.getLogger(__name__)


class ErrorType(str, Enum):
    """Types of errors that can occur in the pipeline."""
    SHAPE = "shape"
    CONTRACT = "contract"
    DATA = "data"
    PARSE = "parse"
    NUMERIC = "numeric"
    DEGENERATE_DATA = "degenerate_data"
    ALIGNMENT = "alignment"
    VOCABULARY = "vocabulary"
    LOOKUP = "lookup"
    UNDEFINED_CORRELATION = "undefined_correlation"
    CONFIG = "config"
    USAGE = "usage"


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class GrnFormerError(Exception):
    """Base exception for grnformer errors."""

    error_type: ErrorType = ErrorType.CONTRACT

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}


class ShapeError(GrnFormerError):
    """Operand shapes are incompatible."""
    error_type = ErrorType.SHAPE

    def __init__(self, message: str, *shapes: Iterable[int]):
        super().__init__(message, {"shapes": [tuple(s) for s in shapes]})
        self.shapes = [tuple(s) for s in shapes]


class ContractError(GrnFormerError):
    """A precondition of an operation was violated by the caller."""
    error_type = ErrorType.CONTRACT


class DataError(GrnFormerError):
    """Input data is missing, inconsistent or unusable."""
    error_type = ErrorType.DATA


class ParseError(DataError):
    """A text file could not be parsed."""
    error_type = ErrorType.PARSE

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line_number is not None:
                location += f":{line_number}"
            location += ": "
        super().__init__(f"{location}{message}", {"path": path, "line_number": line_number})
        self.path = path
        self.line_number = line_number


class NumericError(GrnFormerError):
    """A computation produced a non-finite or otherwise invalid number."""
    error_type = ErrorType.NUMERIC


class DegenerateDataError(DataError):
    """Samples carry no usable variation (e.g. all values equal)."""
    error_type = ErrorType.DEGENERATE_DATA


class AlignmentError(GrnFormerError):
    """Two embedding sets are not aligned gene-for-gene."""
    error_type = ErrorType.ALIGNMENT

    def __init__(self, message: str, offending: Iterable[Any] = ()):
        offending = list(offending)
        super().__init__(f"{message}: {offending}", {"offending": offending})
        self.offending = offending


class VocabularyError(DataError):
    """A gene identifier is not part of the vocabulary."""
    error_type = ErrorType.VOCABULARY


class UnknownCellError(DataError, KeyError):
    """A cell identifier could not be resolved."""
    error_type = ErrorType.LOOKUP

    def __str__(self) -> str:
        return Exception.__str__(self)


class UndefinedCorrelationError(GrnFormerError):
    """Pearson correlation is undefined for constant input."""
    error_type = ErrorType.UNDEFINED_CORRELATION


class ConfigError(GrnFormerError):
    """A configuration document is invalid or infeasible."""
    error_type = ErrorType.CONFIG


class UsageError(GrnFormerError):
    """The command line was malformed."""
    error_type = ErrorType.USAGE


@dataclass
class ErrorResponse:
    """Structured error report printed by the CLI."""
    error_type: str
    message: str
    exit_code: int = EXIT_DATA
    suggested_action: str = ""
    timestamp: datetime = field(default_factory=datetime.now)
    original_error: Optional[str] = None

    def __post_init__(self):
        if not self.message or not self.message.strip():
            raise ValueError("message is required and cannot be empty")
        valid_types = [e.value for e in ErrorType]
        if self.error_type not in valid_types:
            raise ValueError(f"error_type must be one of: {', '.join(valid_types)}")

    def to_string(self) -> str:
        result = f"Error ({self.error_type}): {self.message}"
        if self.suggested_action:
            result += f"\nSuggested action: {self.suggested_action}"
        return result

    def to_dict(self) -> dict:
        return {
            "error_type": self.error_type,
            "message": self.message,
            "exit_code": self.exit_code,
            "suggested_action": self.suggested_action,
            "timestamp": self.timestamp.isoformat(),
            "original_error": self.original_error,
        }


def exit_code_for(exc: BaseException) -> int:
    """Map an exception onto the CLI exit-code contract."""
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    return EXIT_DATA


_SUGGESTIONS = {
    ErrorType.USAGE: "Run with --help to list subcommands and flags.",
    ErrorType.CONFIG: "Check the run config for unknown keys or out-of-range values.",
    ErrorType.PARSE: "Check the file at the reported line.",
    ErrorType.DATA: "Check that the input files referenced by the manifest exist.",
}


def create_error_response(exc: BaseException) -> ErrorResponse:
    """Build an ErrorResponse from any exception."""
    if isinstance(exc, GrnFormerError):
        error_type = exc.error_type
    elif isinstance(exc, FileNotFoundError):
        error_type = ErrorType.DATA
    else:
        error_type = ErrorType.NUMERIC if isinstance(exc, ArithmeticError) else ErrorType.DATA
    message = str(exc) or exc.__class__.__name__
    if isinstance(exc, FileNotFoundError) and exc.filename and str(exc.filename) not in message:
        message = f"{message}: {exc.filename}"
    return ErrorResponse(
        error_type=error_type.value,
        message=message,
        exit_code=exit_code_for(exc),
        suggested_action=_SUGGESTIONS.get(error_type, ""),
        original_error=repr(exc),
    )


def cli_error_wrapper(func: Callable[..., int]) -> Callable[..., int]:
    """Decorator turning exceptions from a CLI handler into exit codes.

    The handler's own return value is passed through on success; any
    exception is reported on stderr as an ErrorResponse.
    """
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> int:
        try:
            return func(*args, **kwargs)
        except Exception as e:
            response = create_error_response(e)
            if not isinstance(e, GrnFormerError):
                logger.debug("unhandled error in %s", func.__name__, exc_info=True)
            print(response.to_string(), file=sys.stderr)
            return response.exit_code
    return wrapper


def require(condition: bool, message: str, error: Union[type, None] = None) -> None:
    """Raise ``error`` (ContractError by default) unless ``condition`` holds."""
    if not condition:
        raise (error or ContractError)(message)


__all__ = [
    "ErrorType",
    "GrnFormerError",
    "ShapeError",
    "ContractError",
    "DataError",
    "ParseError",
    "NumericError",
    "DegenerateDataError",
    "AlignmentError",
    "VocabularyError",
    "UnknownCellError",
    "UndefinedCorrelationError",
    "ConfigError",
    "UsageError",
    "ErrorResponse",
    "create_error_response",
    "exit_code_for",
    "cli_error_wrapper",
    "require",
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_DATA",
]
