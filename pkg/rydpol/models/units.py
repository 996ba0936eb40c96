# rydpol/models/units.py
"""
Parsing of unit-tagged physical quantities and grid expressions.

Frequencies: bare numbers are rad/s; "<x> <prefix>Hz" is converted with 2*pi;
"<x> <prefix>rad/s" is taken as is. A leading "2π×" / "2pi*" tag is accepted
as notation, and turns a bare number into a value in Hz.
"""
import math
import re
from typing import List, Union

import numpy as np

from rydpol.exceptions import DomainError

_PREFIXES = {"": 1.0, "k": 1e3, "M": 1e6, "G": 1e9, "T": 1e12}

_FREQUENCY = re.compile(
    r"""^\s*
    (?P<sign>[-+])?\s*
    (?P<twopi>2\s*(?:π|pi)\s*[×x*·]\s*)?
    (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*
    (?P<prefix>[kMGT]?)
    (?P<unit>Hz|rad/s)?
    \s*$""",
    re.VERBOSE,
)

Quantity = Union[str, int, float]


def parse_frequency(value: Quantity) -> float:
    """Return an angular frequency in rad/s."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise DomainError(f"Cannot interpret {value!r} as a frequency")
    match = _FREQUENCY.match(value)
    if match is None:
        raise DomainError(f"Cannot interpret '{value}' as a frequency")
    number = float(match.group("number")) * _PREFIXES[match.group("prefix")]
    if match.group("sign") == "-":
        number = -number
    unit = match.group("unit")
    if unit == "Hz" or (unit is None and match.group("twopi")):
        return 2 * math.pi * number
    if unit is None and match.group("prefix"):
        raise DomainError(f"'{value}' has a prefix but no unit")
    return number


def parse_angle_grid(expression: Union[str, float, List[float]]) -> List[float]:
    """Angles in degrees: "start:stop:step" (inclusive), a comma list, or a single value."""
    if isinstance(expression, (int, float)):
        return [float(expression)]
    if isinstance(expression, list):
        return [float(v) for v in expression]
    text = expression.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainError(f"Angle grid '{expression}' must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise DomainError(f"Angle grid step must be positive, got {step}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise DomainError(f"Angle grid '{expression}' is empty")
        return [start + n * step for n in range(count)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise DomainError(f"Cannot interpret '{expression}' as an angle grid")


def parse_detuning_grid(expression: Union[str, float, List[Quantity]]) -> List[float]:
    """Detunings in rad/s: "start:stop:count" (inclusive, evenly spaced), a comma list, or a single value."""
    if isinstance(expression, (int, float)):
        return [float(expression)]
    if isinstance(expression, list):
        return [parse_frequency(v) for v in expression]
    text = expression.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainError(f"Detuning grid '{expression}' must be start:stop:count")
        start, stop = parse_frequency(parts[0]), parse_frequency(parts[1])
        try:
            count = int(parts[2])
        except ValueError:
            raise DomainError(f"Detuning grid count must be an integer, got '{parts[2]}'")
        if count < 1:
            raise DomainError("Detuning grid needs at least one point")
        if count == 1:
            return [start]
        return [float(v) for v in np.linspace(start, stop, count)]
    return [parse_frequency(p) for p in text.split(",") if p.strip()]
