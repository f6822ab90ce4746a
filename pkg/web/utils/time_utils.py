"""
Device-clock parsing and formatting.

The simulated device clock counts minutes from the start of an experiment.
Requests may give it as plain minutes ("600") or as [D:]HH:MM ("10:00", "1:02:30").
Values past settings.MAX_CLOCK_MIN are refused.
"""

import math

from execution import settings


def parse_clock(text, horizon=None):
    """
    Parse a clock value to minutes.

    Returns:
        float: minutes, or None if the format is invalid, negative, not finite
        or later than `horizon` (default settings.MAX_CLOCK_MIN)
    """
    if text is None:
        return None
    text = str(text).strip()
    if not text:
        return None
    try:
        if ':' not in text:
            minutes = float(text)
        else:
            parts = [int(p) for p in text.split(':')]
            if len(parts) == 2:
                hours, mins = parts
                days = 0
            elif len(parts) == 3:
                days, hours, mins = parts
            else:
                return None
            if mins >= 60 or (len(parts) == 3 and hours >= 24):
                return None
            minutes = float(days * 1440 + hours * 60 + mins)
    except ValueError:
        return None
    horizon = settings.MAX_CLOCK_MIN if horizon is None else horizon
    if not math.isfinite(minutes) or not 0 <= minutes <= horizon:
        return None
    return minutes


def format_clock(minutes):
    """Minutes -> "Dd HH:MM" (days omitted on day 0)."""
    if minutes is None:
        return ""
    total = int(round(minutes))
    days, rest = divmod(total, 1440)
    hours, mins = divmod(rest, 60)
    clock = f"{hours:02d}:{mins:02d}"
    return f"{days}d {clock}" if days else clock
