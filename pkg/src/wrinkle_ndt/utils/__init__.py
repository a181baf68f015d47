"""Utility functions."""

from wrinkle_ndt.utils.log_handler import MemoryLogHandler, capture_warnings, setup_logging
from wrinkle_ndt.utils.naming import format_layup, parse_layup

__all__ = [
    "MemoryLogHandler",
    "capture_warnings",
    "setup_logging",
    "format_layup",
    "parse_layup",
]
