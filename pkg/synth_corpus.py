"""
Synthetic Corpus for the Low Vision GUI Checker.

Generates labeled layouts by placing components on a per-group grid and
injecting the four issue classes. Ground-truth labels always come from the
oracle rules evaluated on the serialized XML, so every label can be
recomputed from the layout file alone.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import config
from feature_encoder import IssueClass
from layout_parser import (
    LayoutTree,
    RawView,
    filter_visible,
    parse_layout,
    serialize_layout,
)
from utils.color import DEFAULT_BG, DEFAULT_FG, RGB, contrast_ratio
from utils.errors import EmptyCorpus, InfeasibleSpec, UnknownComponent
from utils.geometry import Rect, gap, overlaps
from utils.logging_config import setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)

LAYOUT_FILE = "layout.xml"
LABELS_FILE = "labels.json"
MANIFEST_FILE = "manifest.json"

KIND_CLASSES = {
    "button": "android.widget.Button",
    "text": "android.widget.TextView",
    "image": "android.widget.ImageView",
    "list": "android.widget.ListView",
    "search": "android.widget.SearchView",
}
KINDS = tuple(KIND_CLASSES)
NAV_KINDS = ("image", "button")

ROOT_CLASS = "android.widget.FrameLayout"
GROUP_CLASS = "android.widget.LinearLayout"

CELL_MARGIN = 8
NAV_HEIGHT = 192
NAV_ITEMS = (3, 5)
MIN_SIDE = 8
SIZE_GUARD = 4
MAX_COLUMNS = 4
COLOR_ATTEMPTS = 200


@dataclass(frozen=True)
class CorpusSpec:
    """
    What to generate.

    issue_rates holds the target frequency of classes 0-3; the remainder is
    the accessible class. nav_correlation, when set, adds a bottom
    navigation bar whose items copy the first item's issue with that
    probability.
    """

    n_guis: int = 100
    components_per_gui: Tuple[int, int] = (3, 30)
    groups_per_gui: Tuple[int, int] = (1, 5)
    issue_rates: Tuple[float, float, float, float] = (0.15, 0.15, 0.15, 0.1)
    seed: int = 7
    device: Tuple[int, int] = (1440, 2560)
    nav_correlation: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "components_per_gui", tuple(self.components_per_gui))
        object.__setattr__(self, "groups_per_gui", tuple(self.groups_per_gui))
        object.__setattr__(self, "issue_rates", tuple(float(r) for r in self.issue_rates))
        object.__setattr__(self, "device", tuple(self.device))

        if self.n_guis < 1:
            raise ValueError("n_guis must be at least 1")
        lo, hi = self.components_per_gui
        if not 1 <= lo <= hi <= 37:
            raise ValueError(f"components_per_gui must satisfy 1 <= lo <= hi <= 37, got {(lo, hi)}")
        g_lo, g_hi = self.groups_per_gui
        if not 1 <= g_lo <= g_hi:
            raise ValueError(f"groups_per_gui must satisfy 1 <= lo <= hi, got {(g_lo, g_hi)}")
        if len(self.issue_rates) != 4 or any(r < 0 for r in self.issue_rates):
            raise ValueError("issue_rates must be four non-negative probabilities")
        if sum(self.issue_rates) > 1.0 + 1e-9:
            raise ValueError(f"issue_rates sum to {sum(self.issue_rates)}, more than 1")
        if self.nav_correlation is not None and not 0.0 <= self.nav_correlation <= 1.0:
            raise ValueError("nav_correlation must lie in [0, 1]")

    @property
    def accessible_rate(self) -> float:
        return max(0.0, 1.0 - sum(self.issue_rates))


@dataclass(frozen=True)
class OracleParams:
    size_floor: int
    interval_floor: int
    contrast_floor: float

    @classmethod
    def from_config(cls) -> "OracleParams":
        return cls(config.SIZE_FLOOR, config.INTERVAL_FLOOR, config.CONTRAST_FLOOR)


@dataclass(frozen=True)
class OracleRule:
    """One labeling predicate; rules are tried in priority order."""

    class_index: IssueClass
    description: str
    predicate: Callable[[RawView, Sequence[RawView], OracleParams], bool]


def _is_low_contrast(view: RawView, others: Sequence[RawView], params: OracleParams) -> bool:
    fg = view.declared_fg_color or DEFAULT_FG
    bg = view.declared_bg_color or DEFAULT_BG
    return contrast_ratio(fg, bg) < params.contrast_floor


def _is_small(view: RawView, others: Sequence[RawView], params: OracleParams) -> bool:
    return min(view.width, view.height) < params.size_floor


def _is_crowded(view: RawView, others: Sequence[RawView], params: OracleParams) -> bool:
    return any(
        not overlaps(view.bounds, other.bounds)
        and gap(view.bounds, other.bounds) < params.interval_floor
        for other in others
    )


def _is_unclear_alert(view: RawView, others: Sequence[RawView], params: OracleParams) -> bool:
    return view.kind == "text" and view.alert


ORACLE_RULES: Tuple[OracleRule, ...] = (
    OracleRule(
        IssueClass.LOW_COLOR_CONTRAST,
        "contrast ratio below contrast_floor",
        _is_low_contrast,
    ),
    OracleRule(
        IssueClass.SMALL_SIZE,
        "smaller side below size_floor",
        _is_small,
    ),
    OracleRule(
        IssueClass.NARROW_INTERVAL,
        "another non-overlapping component closer than interval_floor",
        _is_crowded,
    ),
    OracleRule(
        IssueClass.UNCLEAR_ALERT,
        "text component carrying the alert marker",
        _is_unclear_alert,
    ),
)


@dataclass(frozen=True)
class SyntheticGui:
    """One generated screen: layout XML and resource_id -> class labels."""

    name: str
    layout_xml: bytes
    labels: Dict[str, int] = field(default_factory=dict)


def _label_view(view: RawView, components: Sequence[RawView], params: OracleParams) -> int:
    others = [c for c in components if c is not view]
    for rule in ORACLE_RULES:
        if rule.predicate(view, others, params):
            return int(rule.class_index)
    return int(IssueClass.ACCESSIBLE)


def _oracle_components(layout_xml: bytes) -> List[RawView]:
    tree = filter_visible(parse_layout(layout_xml))
    return [view for view in tree.iter_views() if view.kind is not None]


def oracle_labels(layout_xml: bytes, params: Optional[OracleParams] = None) -> Dict[str, int]:
    """
    Label every component of a layout by the oracle rules.

    Args:
        layout_xml: Serialized layout
        params: Rule thresholds (defaults to config)

    Returns:
        Map of resource_id to class index
    """
    params = params or OracleParams.from_config()
    components = _oracle_components(layout_xml)
    return {
        view.resource_id: _label_view(view, components, params)
        for view in components
        if view.resource_id
    }


def oracle_label(
    layout_xml: bytes, resource_id: str, params: Optional[OracleParams] = None
) -> int:
    """
    Re-derive the label of one component from the serialized XML alone.

    Rules apply in the order low contrast, small size, narrow interval,
    unclear alert; the first that fires decides. No rule means accessible.

    Raises:
        UnknownComponent: If no component carries resource_id
    """
    params = params or OracleParams.from_config()
    components = _oracle_components(layout_xml)
    for view in components:
        if view.resource_id == resource_id:
            return _label_view(view, components, params)
    raise UnknownComponent(f"no component with resource-id {resource_id!r}")


class _GuiBuilder:
    """Places and colors the components of one synthetic GUI."""

    def __init__(self, spec: CorpusSpec, index: int, params: OracleParams) -> None:
        self.spec = spec
        self.index = index
        self.params = params
        self.rng = np.random.default_rng([spec.seed, index])
        self.counter = 0
        self.margin = max(CELL_MARGIN, params.interval_floor)
        # disjoint side bands: small < floor < compact (pairs only) < regular
        floor = params.size_floor
        self.small_sides = (MIN_SIDE, max(MIN_SIDE + 1, floor - SIZE_GUARD))
        compact_lo = floor + 2 * SIZE_GUARD
        self.compact_sides = (compact_lo, max(compact_lo + 1, 2 * floor))
        self.regular_side = self.compact_sides[1] + 4 * SIZE_GUARD

    def slot_probabilities(self) -> np.ndarray:
        """
        Per-slot intent probabilities.

        A narrow-interval slot holds a pair of components, so its slot rate
        is lowered until the per-component rate matches issue_rates.
        """
        rates = list(self.spec.issue_rates) + [self.spec.accessible_rate]
        pair = rates[1] / (2.0 - rates[1])
        q = np.array([r * (1.0 + pair) for r in rates])
        q[IssueClass.NARROW_INTERVAL] = pair
        return q / q.sum()

    def plan_slots(self, n_components: int) -> List[int]:
        q = self.slot_probabilities()
        slots: List[int] = []
        remaining = n_components
        while remaining > 0:
            intent = int(self.rng.choice(len(q), p=q))
            if intent == IssueClass.NARROW_INTERVAL and remaining < 2:
                intent = int(IssueClass.ACCESSIBLE)
            slots.append(intent)
            remaining -= 2 if intent == IssueClass.NARROW_INTERVAL else 1
        return slots

    def colors(self, low: bool) -> Tuple[RGB, RGB]:
        floor = self.params.contrast_floor
        for _ in range(COLOR_ATTEMPTS):
            if low:
                bg = tuple(int(c) for c in self.rng.integers(40, 216, size=3))
                shift = self.rng.integers(-40, 41, size=3)
                fg = tuple(int(c) for c in np.clip(np.array(bg) + shift, 0, 255))
                if contrast_ratio(fg, bg) < floor:
                    return fg, bg
            else:
                dark = tuple(int(c) for c in self.rng.integers(0, 70, size=3))
                light = tuple(int(c) for c in self.rng.integers(200, 256, size=3))
                fg, bg = (dark, light) if self.rng.random() < 0.7 else (light, dark)
                if contrast_ratio(fg, bg) >= floor:
                    return fg, bg
        if low:
            return (128, 128, 128), (128, 128, 128)
        return DEFAULT_FG, DEFAULT_BG

    def component(
        self, kind: str, bounds: Rect, intent: int, name: Optional[str] = None
    ) -> RawView:
        self.counter += 1
        alert = intent == IssueClass.UNCLEAR_ALERT
        fg, bg = self.colors(low=intent == IssueClass.LOW_COLOR_CONTRAST)
        clickable = kind in ("button", "image", "search")
        text = None
        if kind in ("button", "text"):
            text = "Error!" if alert else f"{kind} {self.counter}"
        return RawView(
            view_class=KIND_CLASSES[kind],
            bounds=bounds,
            resource_id=f"synth:id/{name or kind}_{self.counter}",
            text=text,
            clickable=clickable,
            focusable=clickable or bool(self.rng.random() < 0.2),
            selected=bool(self.rng.random() < 0.1),
            declared_fg_color=fg,
            declared_bg_color=bg,
            text_resizable=bool(self.rng.random() < 0.5),
            auxiliary_technology=bool(self.rng.random() < 0.5),
            text_alternative=not alert,
            alert=alert,
        )

    def span(self, avail: int, small: bool) -> int:
        if small:
            return int(self.rng.integers(*self.small_sides))
        return int(self.rng.integers(max(self.regular_side, avail // 2), avail + 1))

    def inner(self, cell: Rect) -> Tuple[int, int, int, int]:
        """Origin and size of a cell's area inside its margin."""
        return (
            cell[0] + self.margin,
            cell[1] + self.margin,
            cell[2] - cell[0] - 2 * self.margin,
            cell[3] - cell[1] - 2 * self.margin,
        )

    def box(self, cell: Rect, small: bool) -> Rect:
        ix, iy, aw, ah = self.inner(cell)
        w, h = self.span(aw, small), self.span(ah, small)
        x = ix + int(self.rng.integers(0, aw - w + 1))
        y = iy + int(self.rng.integers(0, ah - h + 1))
        return (x, y, x + w, y + h)

    def pair(self, cell: Rect) -> List[RawView]:
        """Two compact top-aligned boxes side by side, closer than interval_floor."""
        ix, iy, aw, ah = self.inner(cell)
        spacing = int(self.rng.integers(0, max(1, self.params.interval_floor)))
        half = (aw - spacing) // 2
        views = []
        x = ix
        for _ in range(2):
            lo, hi = self.compact_sides
            w = int(self.rng.integers(lo, min(hi, half + 1)))
            h = int(self.rng.integers(lo, hi))
            kind = KINDS[int(self.rng.integers(len(KINDS)))]
            views.append(self.component(kind, (x, iy, x + w, iy + h), IssueClass.NARROW_INTERVAL))
            x += w + spacing
        return views

    def fill_cell(self, cell: Rect, intent: int) -> List[RawView]:
        if intent == IssueClass.NARROW_INTERVAL:
            return self.pair(cell)
        bounds = self.box(cell, small=intent == IssueClass.SMALL_SIZE)
        if intent == IssueClass.UNCLEAR_ALERT:
            kind = "text"
        else:
            kind = KINDS[int(self.rng.integers(len(KINDS)))]
        return [self.component(kind, bounds, intent)]

    def grid(self, band: Rect, n_slots: int) -> List[Rect]:
        pair_w = 2 * self.compact_sides[1] + self.params.interval_floor
        min_w = 2 * self.margin + max(self.regular_side, pair_w)
        min_h = 2 * self.margin + self.regular_side
        bw, bh = band[2] - band[0], band[3] - band[1]
        max_cols, max_rows = bw // min_w, bh // min_h
        if max_cols < 1 or max_rows < 1:
            raise InfeasibleSpec(f"a {bw}x{bh} px group cannot hold one component")

        lo_cols = math.ceil(n_slots / max_rows)
        hi_cols = min(max_cols, n_slots, max(MAX_COLUMNS, lo_cols))
        if lo_cols > hi_cols:
            raise InfeasibleSpec(
                f"{n_slots} components do not fit a {bw}x{bh} px group without overlap"
            )
        cols = int(self.rng.integers(lo_cols, hi_cols + 1))
        rows = math.ceil(n_slots / cols)
        cw, ch = bw // cols, bh // rows
        cells = [
            (band[0] + c * cw, band[1] + r * ch, band[0] + (c + 1) * cw, band[1] + (r + 1) * ch)
            for r in range(rows)
            for c in range(cols)
        ]
        return cells[:n_slots]

    def nav_intents(self, n_items: int) -> List[int]:
        small, _, low, _ = self.spec.issue_rates
        choices = (
            int(IssueClass.SMALL_SIZE),
            int(IssueClass.LOW_COLOR_CONTRAST),
            int(IssueClass.ACCESSIBLE),
        )
        p = np.array([small, low, max(0.0, 1.0 - small - low)])
        p = p / p.sum()

        def draw() -> int:
            return choices[int(self.rng.choice(len(choices), p=p))]

        first = draw()
        return [first] + [
            first if self.rng.random() < self.spec.nav_correlation else draw()
            for _ in range(n_items - 1)
        ]

    def nav_bar(self, band: Rect) -> RawView:
        n_items = int(self.rng.integers(NAV_ITEMS[0], NAV_ITEMS[1] + 1))
        cw = (band[2] - band[0]) // n_items
        if cw - 2 * self.margin < self.regular_side:
            raise InfeasibleSpec(f"{n_items} navigation items do not fit the device width")

        items = []
        for k, intent in enumerate(self.nav_intents(n_items)):
            cell = (band[0] + k * cw, band[1], band[0] + (k + 1) * cw, band[3])
            bounds = self.box(cell, small=intent == IssueClass.SMALL_SIZE)
            items.append(self.component(NAV_KINDS[k % 2], bounds, intent, name="nav"))
        return RawView(
            view_class=GROUP_CLASS,
            bounds=band,
            resource_id="synth:id/nav_bar",
            children=tuple(items),
        )

    def build(self) -> LayoutTree:
        spec = self.spec
        width, height = spec.device
        nav = spec.nav_correlation is not None
        content_height = height - (NAV_HEIGHT if nav else 0)
        if content_height <= 0:
            raise InfeasibleSpec(f"device height {height} leaves no room for content")

        n_groups = int(self.rng.integers(spec.groups_per_gui[0], spec.groups_per_gui[1] + 1))
        n_components = int(
            self.rng.integers(spec.components_per_gui[0], spec.components_per_gui[1] + 1)
        )
        # containers and the navigation bar count against the padding threshold
        budget = config.PADDING_THRESHOLD - n_groups - (1 + NAV_ITEMS[1] if nav else 0)
        if budget < 1:
            raise InfeasibleSpec(
                f"{n_groups} groups leave no room under the "
                f"{config.PADDING_THRESHOLD}-node threshold"
            )
        slots = self.plan_slots(min(n_components, budget))

        n_groups = min(n_groups, len(slots))
        cuts = []
        if n_groups > 1:
            picked = self.rng.choice(np.arange(1, len(slots)), n_groups - 1, replace=False)
            cuts = sorted(int(c) for c in picked)
        edges = [0, *cuts, len(slots)]

        band_height = content_height // n_groups
        groups = []
        for g in range(n_groups):
            chunk = slots[edges[g]:edges[g + 1]]
            band = (0, g * band_height, width, (g + 1) * band_height)
            children: List[RawView] = []
            for cell, intent in zip(self.grid(band, len(chunk)), chunk):
                children.extend(self.fill_cell(cell, intent))
            groups.append(RawView(view_class=GROUP_CLASS, bounds=band, children=tuple(children)))

        if nav:
            groups.append(self.nav_bar((0, content_height, width, height)))

        root = RawView(
            view_class=ROOT_CLASS,
            bounds=(0, 0, width, height),
            children=tuple(groups),
        )
        return LayoutTree(root=root, source_path=f"gui_{self.index:05d}")


def generate(spec: CorpusSpec, params: Optional[OracleParams] = None) -> List[SyntheticGui]:
    """
    Generate a labeled synthetic corpus.

    GUI i draws from its own generator seeded with (spec.seed, i), so any
    subset of indices can be produced independently and reproducibly.

    Args:
        spec: What to generate
        params: Oracle thresholds (defaults to config)

    Returns:
        One SyntheticGui per requested screen

    Raises:
        InfeasibleSpec: If components cannot be placed without overlap on
            the device
    """
    params = params or OracleParams.from_config()
    corpus = []
    for index in range(spec.n_guis):
        tree = _GuiBuilder(spec, index, params).build()
        layout_xml = serialize_layout(tree)
        corpus.append(
            SyntheticGui(
                name=tree.source_path,
                layout_xml=layout_xml,
                labels=oracle_labels(layout_xml, params),
            )
        )
    logger.info(f"Generated {len(corpus)} synthetic GUIs (seed {spec.seed})")
    return corpus


def split(
    corpus: Sequence[SyntheticGui],
    ratios: Tuple[float, float, float] = (0.8, 0.2, 0.0),
    seed: int = 7,
) -> Tuple[List[SyntheticGui], List[SyntheticGui], List[SyntheticGui]]:
    """
    GUI-level split into train, validation and test corpora.

    Membership depends only on the seed; each part keeps corpus order.

    Raises:
        EmptyCorpus: If the corpus is empty
        ValueError: If ratios are negative or do not sum to 1
    """
    if not corpus:
        raise EmptyCorpus("cannot split an empty corpus")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three non-negative values summing to 1, got {ratios}")

    n = len(corpus)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * ratios[0]))
    n_val = min(n - n_train, int(round(n * ratios[1])))
    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    train, val, test = ([corpus[i] for i in sorted(part)] for part in parts)
    return train, val, test


def write_corpus(
    corpus: Sequence[SyntheticGui],
    directory: Union[str, Path],
    spec: Optional[CorpusSpec] = None,
) -> Path:
    """
    Write one directory per GUI (layout.xml, labels.json) and a manifest.

    Returns:
        The corpus directory
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for gui in corpus:
        gui_dir = directory / gui.name
        gui_dir.mkdir(exist_ok=True)
        (gui_dir / LAYOUT_FILE).write_bytes(gui.layout_xml)
        (gui_dir / LABELS_FILE).write_text(
            json.dumps(gui.labels, indent=2, sort_keys=True), encoding="utf-8"
        )

    manifest = {
        "spec": asdict(spec) if spec else None,
        "seed": spec.seed if spec else None,
        "guis": [gui.name for gui in corpus],
    }
    (directory / MANIFEST_FILE).write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    logger.info(f"Wrote {len(corpus)} GUIs to {directory}")
    return directory


def load_corpus(directory: Union[str, Path]) -> List[SyntheticGui]:
    """
    Read a corpus written by write_corpus.

    GUIs listed in the manifest are read in manifest order; without a
    manifest every subdirectory holding a layout.xml is read, sorted by name.

    Raises:
        EmptyCorpus: If no GUI is found
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if manifest_path.exists():
        names = json.loads(manifest_path.read_text(encoding="utf-8")).get("guis", [])
    else:
        names = sorted(p.parent.name for p in directory.glob(f"*/{LAYOUT_FILE}"))

    corpus = []
    for name in names:
        gui_dir = directory / name
        labels_path = gui_dir / LABELS_FILE
        labels = {}
        if labels_path.exists():
            labels = json.loads(labels_path.read_text(encoding="utf-8"))
        corpus.append(
            SyntheticGui(
                name=name,
                layout_xml=(gui_dir / LAYOUT_FILE).read_bytes(),
                labels={k: int(v) for k, v in labels.items()},
            )
        )
    if not corpus:
        raise EmptyCorpus(f"no GUIs under {directory}")
    logger.info(f"Loaded {len(corpus)} GUIs from {directory}")
    return corpus
