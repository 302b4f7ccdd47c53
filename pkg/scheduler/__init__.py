"""
给药排程模块
"""

from .patterns import (
    Pattern,
    parse_pattern,
    expand_pattern,
    capacity,
    duration,
    dose_intensity,
)

__all__ = [
    "Pattern",
    "parse_pattern",
    "expand_pattern",
    "capacity",
    "duration",
    "dose_intensity",
]
