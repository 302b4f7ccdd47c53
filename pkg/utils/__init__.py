"""
工具模块
"""

from .logger import (
    get_logger,
    setup_logging,
    print_info,
    print_success,
    print_warning,
    print_error,
    print_table,
)

__all__ = [
    "get_logger",
    "setup_logging",
    "print_info",
    "print_success",
    "print_warning",
    "print_error",
    "print_table",
]
