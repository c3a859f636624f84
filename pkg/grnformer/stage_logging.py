"""Audit log of pipeline stage invocations.

Each CLI subcommand and pipeline stage decorated with ``log_stage`` leaves a
``StageLog`` record (parameters, output summary, success, duration). The CLI
dumps the records of a run to ``run_log.json``.
"""

import functools
import inspect
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from threading import Lock
from typing import Any, Callable, Dict, List, Optional, TypeVar

import numpy as np

T = TypeVar("T")

logger = logging.getLogger(__name__)


@dataclass
class StageLog:
    """One recorded stage invocation."""
    stage: str
    params: Dict[str, Any] = field(default_factory=dict)
    output: str = ""
    success: bool = True
    duration_s: float = 0.0
    timestamp: datetime = field(default_factory=datetime.now)

    def __post_init__(self):
        if not self.stage or not self.stage.strip():
            raise ValueError("stage is required and cannot be empty")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": self.stage,
            "params": self.params,
            "output": self.output,
            "success": self.success,
            "duration_s": self.duration_s,
            "timestamp": self.timestamp.isoformat(),
        }


class StageLogger:
    """Thread-safe, bounded store of StageLog entries."""

    def __init__(self, max_entries: int = 10000):
        self._logs: List[StageLog] = []
        self._lock = Lock()
        self._max_entries = max_entries

    def log(
        self,
        stage: str,
        params: Dict[str, Any],
        output: str,
        success: bool,
        duration_s: float = 0.0,
    ) -> StageLog:
        entry = StageLog(stage=stage, params=params, output=output, success=success, duration_s=duration_s)
        with self._lock:
            self._logs.append(entry)
            if len(self._logs) > self._max_entries:
                self._logs = self._logs[-self._max_entries:]
        return entry

    def get_logs(self, stage: Optional[str] = None, success_only: Optional[bool] = None) -> List[StageLog]:
        """Entries in invocation order, optionally filtered."""
        with self._lock:
            logs = list(self._logs)
        if stage is not None:
            logs = [entry for entry in logs if entry.stage == stage]
        if success_only is not None:
            logs = [entry for entry in logs if entry.success == success_only]
        return logs

    def clear(self) -> int:
        with self._lock:
            count = len(self._logs)
            self._logs = []
            return count

    def count(self) -> int:
        with self._lock:
            return len(self._logs)

    def dump(self, path: Path) -> None:
        """Write every entry as a JSON array."""
        with self._lock:
            payload = [entry.to_dict() for entry in self._logs]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2), encoding="utf-8")


_global_logger: Optional[StageLogger] = None
_logger_lock = Lock()


def get_stage_logger() -> StageLogger:
    global _global_logger
    with _logger_lock:
        if _global_logger is None:
            _global_logger = StageLogger()
        return _global_logger


def set_stage_logger(stage_logger: StageLogger) -> None:
    global _global_logger
    with _logger_lock:
        _global_logger = stage_logger


def reset_stage_logger() -> None:
    global _global_logger
    with _logger_lock:
        _global_logger = StageLogger()


def log_stage(stage: Optional[str] = None, stage_logger: Optional[StageLogger] = None) -> Callable:
    """Decorator recording every call of a pipeline stage.

    Args:
        stage: name to record (defaults to the function name)
        stage_logger: explicit logger (defaults to the global one)
    """
    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        param_names = list(inspect.signature(func).parameters.keys())

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> T:
            target = stage_logger or get_stage_logger()
            name = stage or func.__name__
            params: Dict[str, Any] = {}
            for i, arg in enumerate(args):
                key = param_names[i] if i < len(param_names) else f"arg_{i}"
                params[key] = _serialize_param(arg)
            for key, value in kwargs.items():
                params[key] = _serialize_param(value)

            success = True
            output = ""
            started = time.perf_counter()
            try:
                result = func(*args, **kwargs)
                output = _summarize(result)
                return result
            except Exception as e:
                success = False
                output = f"Error: {e}"
                raise
            finally:
                elapsed = time.perf_counter() - started
                target.log(name, params, output[:1000], success, elapsed)
                logger.debug("stage %s finished in %.3fs (success=%s)", name, elapsed, success)

        return wrapper
    return decorator


def _summarize(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, np.ndarray):
        return f"ndarray{value.shape}"
    return str(value)


def _serialize_param(value: Any) -> Any:
    """Reduce a parameter to something JSON can hold."""
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    if isinstance(value, np.ndarray):
        return f"ndarray{value.shape}"
    if isinstance(value, (list, tuple)):
        if len(value) > 20:
            return f"{type(value).__name__}[{len(value)}]"
        return [_serialize_param(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _serialize_param(v) for k, v in value.items()}
    if hasattr(value, "model_dump"):
        return value.model_dump()
    return type(value).__name__


__all__ = [
    "StageLog",
    "StageLogger",
    "get_stage_logger",
    "set_stage_logger",
    "reset_stage_logger",
    "log_stage",
]
