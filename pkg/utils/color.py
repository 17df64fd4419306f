"""
Color utilities: "#RRGGBB" parsing and WCAG 2.x contrast ratio.
"""

import re
from typing import Tuple

RGB = Tuple[int, int, int]

# Neutral colors assumed when a layout file declares none
DEFAULT_FG: RGB = (0, 0, 0)
DEFAULT_BG: RGB = (255, 255, 255)

MAX_CONTRAST = 21.0

HEX_RE = re.compile(r"^#([0-9a-fA-F]{2})([0-9a-fA-F]{2})([0-9a-fA-F]{2})$")


def hex_to_rgb(value: str) -> RGB:
    """
    Parse "#RRGGBB" into an RGB triple.

    Raises:
        ValueError: If the string is not a six-digit hex color
    """
    match = HEX_RE.match(value.strip())
    if not match:
        raise ValueError(f"not a #RRGGBB color: {value!r}")
    return tuple(int(group, 16) for group in match.groups())  # type: ignore[return-value]


def rgb_to_hex(rgb: RGB) -> str:
    return "#{:02X}{:02X}{:02X}".format(*rgb)


def _srgb_to_linear(channel: int) -> float:
    s = channel / 255.0
    return s / 12.92 if s <= 0.04045 else ((s + 0.055) / 1.055) ** 2.4


def relative_luminance(rgb: RGB) -> float:
    r, g, b = rgb
    return (
        0.2126 * _srgb_to_linear(r)
        + 0.7152 * _srgb_to_linear(g)
        + 0.0722 * _srgb_to_linear(b)
    )


def contrast_ratio(fg: RGB, bg: RGB) -> float:
    """
    WCAG contrast ratio between two colors, in [1, 21].

    Symmetric in its arguments.
    """
    l1 = relative_luminance(fg)
    l2 = relative_luminance(bg)
    return (max(l1, l2) + 0.05) / (min(l1, l2) + 0.05)


def contrast_score(fg: RGB, bg: RGB) -> float:
    """Contrast ratio scaled into [0, 1]: identical colors 0, black on white 1."""
    ratio = contrast_ratio(fg, bg)
    return min(1.0, max(0.0, (ratio - 1.0) / (MAX_CONTRAST - 1.0)))
