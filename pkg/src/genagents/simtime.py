"""Simulation clock: integer minutes since the start of day 1."""

from __future__ import annotations

import re

MINUTES_PER_DAY = 1440

_CLOCK = re.compile(r"^\s*(\d{1,2}):(\d{2})\s*$")


def parse_clock(text: str) -> int:
    """``"07:30"`` -> 450. Accepts 24:00 as end of day."""
    match = _CLOCK.match(text)
    if not match:
        raise ValueError(f"not a HH:MM time: {text!r}")
    hours, minutes = int(match.group(1)), int(match.group(2))
    if minutes >= 60 or hours > 24 or (hours == 24 and minutes):
        raise ValueError(f"not a HH:MM time: {text!r}")
    return hours * 60 + minutes


def clock(minute: int) -> str:
    """Time of day for an absolute minute; day starts render as 00:00."""
    of_day = minute % MINUTES_PER_DAY
    return f"{of_day // 60:02d}:{of_day % 60:02d}"


def day_of(minute: int) -> int:
    return minute // MINUTES_PER_DAY + 1


def day_start(day: int) -> int:
    return (day - 1) * MINUTES_PER_DAY


def stamp(minute: int) -> str:
    return f"day {day_of(minute)} {clock(minute)}"


def hours_between(earlier: int, later: int) -> float:
    return (later - earlier) / 60.0
