"""
Feature Encoder for the Low Vision GUI Checker.

Builds the per-component attribute vector: nine accessibility attributes
and two inherent attributes (bounds, clickable) scaled into [0, 1], plus
the four reserved label bits that store the annotated issue class.
"""

import csv
import io
import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np

from config import config
from utils.color import DEFAULT_BG, DEFAULT_FG, RGB, contrast_ratio, contrast_score
from utils.errors import InvalidClass
from utils.logging_config import setup_logger

if TYPE_CHECKING:
    from graph_builder import ComponentNode, GuiGraph

# Configure logger
logger = setup_logger(__name__, logging.INFO)

FEATURE_NAMES = (
    "text_size",
    "component_size",
    "text_resizable",
    "auxiliary_technology",
    "text_alternative",
    "intuitive",
    "focusable",
    "focused",
    "selected",
    "x1",
    "y1",
    "x2",
    "y2",
    "clickable",
)
N_FEATURES = len(FEATURE_NAMES)

ACCESSIBILITY_COLUMNS = tuple(range(0, 9))
INHERENT_COLUMNS = tuple(range(9, 14))

MASKS = ("none", "accessibility", "inherent")

ReservedBits = Tuple[int, int, int, int]


class IssueClass(IntEnum):
    """The five node classes, in five-tuple order."""

    SMALL_SIZE = 0
    NARROW_INTERVAL = 1
    LOW_COLOR_CONTRAST = 2
    UNCLEAR_ALERT = 3
    ACCESSIBLE = 4

    @property
    def label(self) -> str:
        return ISSUE_NAMES[self]


ISSUE_NAMES = {
    IssueClass.SMALL_SIZE: "small size",
    IssueClass.NARROW_INTERVAL: "narrow interval",
    IssueClass.LOW_COLOR_CONTRAST: "low color contrast",
    IssueClass.UNCLEAR_ALERT: "unclear alert information",
    IssueClass.ACCESSIBLE: "accessible",
}

N_CLASSES = len(IssueClass)


@dataclass(frozen=True)
class FeatureVector:
    """Raw (unscaled) attributes of one component-node."""

    text_size: float
    component_size: Tuple[int, int]
    text_resizable: int
    auxiliary_technology: int
    text_alternative: int
    colors: Tuple[RGB, RGB]
    focusable: int
    focused: int
    selected: int
    bounds: Tuple[int, int, int, int]
    clickable: int
    reserved: Optional[ReservedBits] = None

    @property
    def intuitive(self) -> float:
        """WCAG contrast ratio of the (foreground, background) pair."""
        return contrast_ratio(*self.colors)

    def as_row(
        self,
        size_scale: Optional[float] = None,
        device: Optional[Tuple[int, int]] = None,
    ) -> np.ndarray:
        """
        Scale the vector into the 14 model columns.

        Text and component sizes are divided by size_scale, x coordinates by
        the device width and y coordinates by the device height, all clamped
        to [0, 1]. The contrast ratio maps 1 -> 0 and 21 -> 1.

        Args:
            size_scale: Divisor for sizes (config SIZE_SCALE)
            device: (width, height) divisors for coordinates (config device)

        Returns:
            Length-14 float64 array
        """
        size_scale = size_scale or config.SIZE_SCALE
        width, height = device or config.device

        def scaled(value: float, divisor: float) -> float:
            return min(1.0, max(0.0, value / divisor))

        x1, y1, x2, y2 = self.bounds
        return np.array(
            [
                scaled(self.text_size, size_scale),
                scaled(min(self.component_size), size_scale),
                self.text_resizable,
                self.auxiliary_technology,
                self.text_alternative,
                contrast_score(*self.colors),
                self.focusable,
                self.focused,
                self.selected,
                scaled(x1, width),
                scaled(y1, height),
                scaled(x2, width),
                scaled(y2, height),
                self.clickable,
            ],
            dtype=np.float64,
        )


def encode_labels(annotation: Optional[int]) -> Optional[ReservedBits]:
    """
    Map an issue class onto the four reserved bits.

    Classes 0-3 set exactly their own bit, class 4 (accessible) sets none,
    and a missing annotation yields the null marker None.

    Raises:
        InvalidClass: For an index outside 0-4
    """
    if annotation is None:
        return None
    if isinstance(annotation, bool) or int(annotation) != annotation:
        raise InvalidClass(f"class index must be an integer, got {annotation!r}")
    index = int(annotation)
    if not 0 <= index < N_CLASSES:
        raise InvalidClass(f"class index {index} is outside 0-{N_CLASSES - 1}")
    bits = [0, 0, 0, 0]
    if index < 4:
        bits[index] = 1
    return tuple(bits)  # type: ignore[return-value]


def decode_labels(bits: Optional[ReservedBits]) -> Optional[int]:
    """
    Inverse of encode_labels.

    Raises:
        InvalidClass: If more than one bit is set or the pattern is not binary
    """
    if bits is None:
        return None
    if len(bits) != 4 or any(b not in (0, 1) for b in bits):
        raise InvalidClass(f"reserved bits must be four 0/1 values, got {bits!r}")
    if sum(bits) == 0:
        return int(IssueClass.ACCESSIBLE)
    if sum(bits) > 1:
        raise InvalidClass(f"reserved bits {bits!r} set more than one issue")
    return bits.index(1)


def encode_component(node: "ComponentNode") -> FeatureVector:
    """
    Build the raw feature vector of a component-node.

    Sizes come from the bounds, the text size is the box height for text
    components, and "intuitive" comes from the declared (or default)
    foreground and background colors.

    Args:
        node: Component-node with its originating view

    Returns:
        Unscaled FeatureVector
    """
    raw = node.raw
    x1, y1, x2, y2 = node.bounds
    width, height = x2 - x1, y2 - y1
    fg = raw.declared_fg_color or DEFAULT_FG
    bg = raw.declared_bg_color or DEFAULT_BG

    return FeatureVector(
        text_size=float(height) if node.kind == "text" else 0.0,
        component_size=(width, height),
        text_resizable=int(raw.text_resizable),
        auxiliary_technology=int(raw.auxiliary_technology),
        text_alternative=int(raw.text_alternative),
        colors=(fg, bg),
        focusable=int(raw.focusable),
        focused=int(raw.focused),
        selected=int(raw.selected),
        bounds=(x1, y1, x2, y2),
        clickable=int(raw.clickable),
        reserved=node.reserved,
    )


def feature_matrix(
    graph: "GuiGraph",
    mask: str = "none",
    threshold: Optional[int] = None,
    size_scale: Optional[float] = None,
    device: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """
    Stack component feature rows into the padded N x 14 matrix X.

    Rows are indexed by node id; container rows and padded rows stay zero.

    Args:
        graph: GUI-graph whose components are encoded
        mask: "none", "accessibility" (zero columns 0-8) or "inherent"
            (zero columns 9-13), for attribute ablations
        threshold: Row count N (defaults to config PADDING_THRESHOLD)
        size_scale: See FeatureVector.as_row
        device: See FeatureVector.as_row

    Returns:
        N x 14 float64 matrix
    """
    if mask not in MASKS:
        raise ValueError(f"unknown attribute mask {mask!r}, expected one of {MASKS}")
    n = threshold or config.PADDING_THRESHOLD

    features = np.zeros((n, N_FEATURES), dtype=np.float64)
    for node in graph.components:
        features[node.node_id] = encode_component(node).as_row(size_scale, device)

    if mask == "accessibility":
        features[:, ACCESSIBILITY_COLUMNS] = 0.0
    elif mask == "inherent":
        features[:, INHERENT_COLUMNS] = 0.0
    return features


def features_csv(features: np.ndarray, labels: np.ndarray, n_real: int) -> str:
    """
    Render real rows of a feature matrix as CSV.

    Columns: node_id, the 14 scaled features with six decimals, label index
    (-1 for containers and unlabeled components).
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["node_id", *FEATURE_NAMES, "label"])
    for node_id in range(n_real):
        writer.writerow(
            [node_id, *(f"{v:.6f}" for v in features[node_id]), int(labels[node_id])]
        )
    return buffer.getvalue()
