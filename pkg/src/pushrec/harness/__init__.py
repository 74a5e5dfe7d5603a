"""Training, evaluation, and playground orchestration."""

from .config import RunConfig
from .logs import (METRICS_VERSION, REPORT_VERSION, TRAJECTORY_VERSION,
                   JsonlWriter, LogFormatError, read_jsonl)

__all__ = ["RunConfig", "JsonlWriter", "LogFormatError", "read_jsonl",
           "METRICS_VERSION", "REPORT_VERSION", "TRAJECTORY_VERSION"]
