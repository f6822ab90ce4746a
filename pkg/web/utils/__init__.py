"""
JIT transpilation toolkit - web utility modules.

Helpers used by app.py for data discovery and clock handling.
"""

from .data_loader import (
    PROJECT_ROOT,
    list_presets,
    list_scenarios,
    list_reports,
    report_path,
)
from .time_utils import parse_clock, format_clock

__all__ = [
    'PROJECT_ROOT',
    'list_presets',
    'list_scenarios',
    'list_reports',
    'report_path',
    'parse_clock',
    'format_clock',
]
