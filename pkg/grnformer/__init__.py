"""grnformer - multi-scale gene regulatory networks fused into a masked-expression transformer."""

from grnformer.errors import (
    ErrorType,
    ErrorResponse,
    GrnFormerError,
    create_error_response,
    cli_error_wrapper,
    exit_code_for,
)

from grnformer.stage_logging import (
    StageLogger,
    get_stage_logger,
    set_stage_logger,
    reset_stage_logger,
    log_stage,
)

__version__ = "0.1.0"

__all__ = [
    # Error handling
    "ErrorType",
    "ErrorResponse",
    "GrnFormerError",
    "create_error_response",
    "cli_error_wrapper",
    "exit_code_for",
    # Logging
    "StageLogger",
    "get_stage_logger",
    "set_stage_logger",
    "reset_stage_logger",
    "log_stage",
]
