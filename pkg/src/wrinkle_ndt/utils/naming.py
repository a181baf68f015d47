"""
Laminate stacking-notation utilities.

Converts between ply-angle sequences and the compact bracket notation used
on drawings and in configs, e.g. ``[0/90]_2s``, ``[0]_30`` or
``[0/90/±45/0]_3s``.
"""

import re
from functools import lru_cache

from wrinkle_ndt.core.errors import ConfigError

_PLUS_MINUS = ("±", "+-")
_MINUS_PLUS = ("∓", "-+")

# [body] followed by an optional subscript: repeat count and/or "s"
_NOTATION = re.compile(r"^\[(?P<body>[^\[\]]+)\](?:_?\{?(?P<repeat>\d*)(?P<sym>s?)\}?)?$")

# A single item inside the brackets, with an optional own repeat (e.g. 0_2)
_ITEM = re.compile(r"^(?P<sign>±|∓|\+-|-\+)?(?P<angle>[+-]?\d+(?:\.\d+)?)(?:_(?P<count>\d+))?$")


def _expand_item(item: str, notation: str) -> list[float]:
    match = _ITEM.match(item.strip())
    if not match:
        raise ConfigError(f"cannot parse ply {item!r} in layup {notation!r}")
    angle = float(match.group("angle"))
    count = int(match.group("count") or 1)
    sign = match.group("sign")
    if sign in _PLUS_MINUS:
        group = [abs(angle), -abs(angle)]
    elif sign in _MINUS_PLUS:
        group = [-abs(angle), abs(angle)]
    else:
        group = [angle]
    return group * count


@lru_cache(maxsize=256)
def parse_layup(notation: str) -> tuple[float, ...]:
    """
    Expand stacking notation into ply angles (degrees), bottom to top.

    Examples:
        [0/90]_2s     -> 0, 90, 0, 90, 90, 0, 90, 0
        [0]_30        -> thirty 0 plies
        [±45]s        -> 45, -45, -45, 45
        0/90/90/0     -> 0, 90, 90, 0 (brackets optional without a subscript)

    Raises:
        ConfigError: on malformed notation
    """
    text = notation.strip().replace(" ", "")
    # "+/-" would otherwise be split as a ply separator
    text = text.replace("+/-", "±").replace("-/+", "∓")
    if not text:
        raise ConfigError("empty layup notation")
    if not text.startswith("["):
        text = f"[{text}]"

    match = _NOTATION.match(text)
    if not match:
        raise ConfigError(f"cannot parse layup notation {notation!r}")

    base: list[float] = []
    for item in match.group("body").split("/"):
        base.extend(_expand_item(item, notation))

    repeat = int(match.group("repeat") or 1)
    if repeat < 1:
        raise ConfigError(f"repeat count must be >= 1 in {notation!r}")
    angles = base * repeat
    if match.group("sym"):
        angles = angles + angles[::-1]
    return tuple(angles)


def _angle_label(angle: float) -> str:
    return f"{angle:g}"


def _body(angles: list[float]) -> str:
    """Join angles with '/', collapsing +a/-a pairs into ±a."""
    parts = []
    i = 0
    while i < len(angles):
        a = angles[i]
        if i + 1 < len(angles) and a > 0 and angles[i + 1] == -a:
            parts.append(f"±{_angle_label(a)}")
            i += 2
        else:
            parts.append(_angle_label(a))
            i += 1
    return "/".join(parts)


def _smallest_period(angles: list[float]) -> int:
    n = len(angles)
    for period in range(1, n + 1):
        if n % period == 0 and angles == angles[:period] * (n // period):
            return period
    return n


def _compact(angles: list[float], symmetric: bool) -> str:
    period = _smallest_period(angles)
    repeat = len(angles) // period
    subscript = (str(repeat) if repeat > 1 else "") + ("s" if symmetric else "")
    body = f"[{_body(angles[:period])}]"
    return f"{body}_{subscript}" if subscript else body


def format_layup(angles: tuple[float, ...] | list[float]) -> str:
    """Shortest bracket notation for a ply sequence; inverse of parse_layup."""
    angles = [float(a) for a in angles]
    if not angles:
        raise ConfigError("cannot format an empty layup")
    candidates = [_compact(angles, symmetric=False)]
    n = len(angles)
    if n % 2 == 0 and angles == angles[::-1]:
        candidates.append(_compact(angles[: n // 2], symmetric=True))
    return min(candidates, key=len)
