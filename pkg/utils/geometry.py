"""
Rectangle helpers shared by the graph builder and the corpus oracle.

Rectangles are (x1, y1, x2, y2) tuples of integer pixels with x1 <= x2 and
y1 <= y2.
"""

from typing import Iterable, Tuple

Rect = Tuple[int, int, int, int]


def overlaps(a: Rect, b: Rect) -> bool:
    """True when the interiors of two rectangles intersect."""
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def gap(a: Rect, b: Rect) -> int:
    """
    Minimal clearance between two rectangles.

    The horizontal clearance is the empty space between the facing vertical
    edges (0 when the x-projections touch or overlap), likewise vertically.
    The gap is the larger of the two, which is the Chebyshev distance between
    the boxes: 0 for touching or overlapping boxes.

    Args:
        a: First rectangle
        b: Second rectangle

    Returns:
        Gap in pixels, never negative
    """
    dx = max(0, b[0] - a[2], a[0] - b[2])
    dy = max(0, b[1] - a[3], a[1] - b[3])
    return max(dx, dy)


def union(rects: Iterable[Rect]) -> Rect:
    """Bounding box of a non-empty collection of rectangles."""
    rects = list(rects)
    return (
        min(r[0] for r in rects),
        min(r[1] for r in rects),
        max(r[2] for r in rects),
        max(r[3] for r in rects),
    )
