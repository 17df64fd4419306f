"""
Layout Parser for the Low Vision GUI Checker.

This module turns a uiautomator-style layout dump into a LayoutTree and
strips the views low vision users never see: list/drawer/pager scaffolding,
zero-area views and stacked views that share the same bounds.
"""

import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from lxml import etree

from config import config
from utils.color import RGB, hex_to_rgb, rgb_to_hex
from utils.errors import BadBounds, MalformedXml, MissingRoot
from utils.geometry import Rect, union
from utils.logging_config import setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)

BOUNDS_RE = re.compile(r"^\[(\d+),(\d+)\]\[(\d+),(\d+)\]$")

# View-class suffix -> component kind
COMPONENT_KINDS: Dict[str, str] = {
    "button": "button",
    "textview": "text",
    "imageview": "image",
    "listview": "list",
    "searchview": "search",
}

# Attributes mapped onto RawView fields; everything else is passed through
_BOOL_ATTRS = {
    "clickable": "clickable",
    "focusable": "focusable",
    "focused": "focused",
    "selected": "selected",
    "text-resizable": "text_resizable",
    "auxiliary-technology": "auxiliary_technology",
    "text-alternative": "text_alternative",
    "alert": "alert",
}
_KNOWN_ATTRS = set(_BOOL_ATTRS) | {
    "class",
    "resource-id",
    "bounds",
    "text",
    "fg-color",
    "bg-color",
}


@dataclass(frozen=True)
class RawView:
    """One <node> of a layout dump."""

    view_class: str
    bounds: Rect
    resource_id: Optional[str] = None
    text: Optional[str] = None
    clickable: bool = False
    focusable: bool = False
    focused: bool = False
    selected: bool = False
    declared_fg_color: Optional[RGB] = None
    declared_bg_color: Optional[RGB] = None
    text_resizable: bool = False
    auxiliary_technology: bool = False
    text_alternative: bool = False
    alert: bool = False
    extra: Dict[str, str] = field(default_factory=dict)
    children: Tuple["RawView", ...] = ()

    @property
    def width(self) -> int:
        return self.bounds[2] - self.bounds[0]

    @property
    def height(self) -> int:
        return self.bounds[3] - self.bounds[1]

    @property
    def simple_class(self) -> str:
        """Class name without its package, e.g. "TextView"."""
        return self.view_class.rsplit(".", 1)[-1]

    @property
    def kind(self) -> Optional[str]:
        """Component kind for the five visible component classes, else None."""
        return component_kind(self.view_class)

    def iter_views(self) -> Iterator["RawView"]:
        """Pre-order (document order) walk of this view and its descendants."""
        yield self
        for child in self.children:
            yield from child.iter_views()


@dataclass(frozen=True)
class LayoutTree:
    """A parsed layout file with exactly one root view."""

    root: RawView
    source_path: str = "<memory>"

    def iter_views(self) -> Iterator[RawView]:
        return self.root.iter_views()

    def view_count(self) -> int:
        return sum(1 for _ in self.iter_views())


def component_kind(view_class: str) -> Optional[str]:
    """
    Map a view class to one of the five component kinds.

    Matching is on the simple class name suffix, case-insensitive, so
    "androidx.appcompat.widget.AppCompatButton" is a button.

    Args:
        view_class: Fully qualified or simple view class name

    Returns:
        "button", "text", "image", "list", "search" or None
    """
    simple = view_class.rsplit(".", 1)[-1].lower()
    for suffix, kind in COMPONENT_KINDS.items():
        if simple.endswith(suffix):
            return kind
    return None


def parse_bounds(value: str) -> Rect:
    """
    Parse the "[x1,y1][x2,y2]" bounds wire format.

    Raises:
        BadBounds: On grammar failure or an inverted rectangle
    """
    match = BOUNDS_RE.match(value.strip())
    if not match:
        raise BadBounds(f"bounds {value!r} do not match [x1,y1][x2,y2]")
    x1, y1, x2, y2 = (int(g) for g in match.groups())
    if x1 > x2 or y1 > y2:
        raise BadBounds(f"bounds {value!r} are inverted")
    return (x1, y1, x2, y2)


def format_bounds(rect: Rect) -> str:
    return "[{},{}][{},{}]".format(*rect)


def _parse_bool(name: str, value: Optional[str]) -> bool:
    if value is None:
        return False
    if value == "true":
        return True
    if value == "false":
        return False
    raise MalformedXml(f"attribute '{name}' must be 'true' or 'false', got {value!r}")


def _parse_color(name: str, value: Optional[str]) -> Optional[RGB]:
    if value is None:
        return None
    try:
        return hex_to_rgb(value)
    except ValueError as e:
        raise MalformedXml(f"attribute '{name}': {e}") from e


def _element_to_view(element: etree._Element) -> RawView:
    attrs = dict(element.attrib)
    if "bounds" not in attrs:
        raise BadBounds(f"<{element.tag}> at line {element.sourceline} has no bounds")

    flags = {
        field_name: _parse_bool(attr, attrs.get(attr))
        for attr, field_name in _BOOL_ATTRS.items()
    }
    children = tuple(
        _element_to_view(child)
        for child in element
        if isinstance(child.tag, str) and child.tag == "node"
    )
    return RawView(
        view_class=attrs.get("class", ""),
        bounds=parse_bounds(attrs["bounds"]),
        resource_id=attrs.get("resource-id"),
        text=attrs.get("text"),
        declared_fg_color=_parse_color("fg-color", attrs.get("fg-color")),
        declared_bg_color=_parse_color("bg-color", attrs.get("bg-color")),
        extra={k: v for k, v in attrs.items() if k not in _KNOWN_ATTRS},
        children=children,
        **flags,
    )


def parse_layout(xml_bytes: bytes, source_path: str = "<memory>") -> LayoutTree:
    """
    Parse a layout dump into a LayoutTree.

    The document root is either a <node> or a uiautomator <hierarchy>
    wrapper. A wrapper with a single <node> child yields that node as root;
    a wrapper with several yields a synthetic "hierarchy" root spanning them.

    Args:
        xml_bytes: Raw file contents
        source_path: Where the bytes came from, kept for reports

    Returns:
        Parsed LayoutTree, children in document order

    Raises:
        MalformedXml: If the document is not well-formed or an attribute
            value is invalid
        BadBounds: If a bounds attribute is missing or malformed
        MissingRoot: If there is no <node> element
    """
    parser = etree.XMLParser(resolve_entities=False, no_network=True)
    try:
        document = etree.fromstring(xml_bytes, parser)
    except etree.XMLSyntaxError as e:
        raise MalformedXml(f"{source_path}: {e}") from e

    if document is None:
        raise MissingRoot(f"{source_path}: empty document")

    if document.tag == "node":
        root = _element_to_view(document)
    else:
        nodes = [child for child in document if child.tag == "node"]
        if not nodes:
            raise MissingRoot(f"{source_path}: no <node> element under <{document.tag}>")
        views = tuple(_element_to_view(n) for n in nodes)
        if len(views) == 1:
            root = views[0]
        else:
            root = RawView(
                view_class="hierarchy",
                bounds=union(v.bounds for v in views),
                extra={k: v for k, v in document.attrib.items()},
                children=views,
            )

    tree = LayoutTree(root=root, source_path=source_path)
    logger.debug(f"Parsed {source_path}: {tree.view_count()} views")
    return tree


def read_layout(path: Union[str, Path]) -> LayoutTree:
    """Read and parse a layout file from disk."""
    path = Path(path)
    return parse_layout(path.read_bytes(), source_path=str(path))


def _is_invisible(view: RawView, invisible: Sequence[str]) -> bool:
    if view.width == 0 or view.height == 0:
        return True
    simple = view.simple_class.lower()
    return any(simple.endswith(name.lower()) for name in invisible)


def _merge_overlay(group: List[RawView]) -> RawView:
    """
    Merge views stacked on identical bounds into one component.

    Booleans are OR-ed, text and resource id take the topmost non-empty
    value, colors the topmost declared value. The class is the topmost
    component class if any member is a component, else the topmost class.
    """
    topmost_first = list(reversed(group))

    def first(attr: str):
        for view in topmost_first:
            value = getattr(view, attr)
            if value not in (None, ""):
                return value
        return getattr(group[0], attr)

    component_classes = [v.view_class for v in topmost_first if v.kind is not None]
    view_class = component_classes[0] if component_classes else topmost_first[0].view_class

    extra: Dict[str, str] = {}
    for view in group:
        extra.update(view.extra)

    children: List[RawView] = []
    for view in group:
        children.extend(view.children)

    merged = replace(
        group[0],
        view_class=view_class,
        resource_id=first("resource_id"),
        text=first("text"),
        declared_fg_color=first("declared_fg_color"),
        declared_bg_color=first("declared_bg_color"),
        extra=extra,
        children=tuple(_collapse(children)),
        **{name: any(getattr(v, name) for v in group) for name in _BOOL_ATTRS.values()},
    )
    logger.debug(
        f"Collapsed {len(group)} overlaid views at {format_bounds(group[0].bounds)} "
        f"into {merged.simple_class}"
    )
    return merged


def _collapse(views: List[RawView]) -> List[RawView]:
    groups: Dict[Rect, List[RawView]] = {}
    for view in views:
        groups.setdefault(view.bounds, []).append(view)
    return [
        group[0] if len(group) == 1 else _merge_overlay(group)
        for group in groups.values()
    ]


def _absorb_nested(view: RawView) -> RawView:
    """
    Fold component children that cover exactly their component parent.

    A Button wrapping a same-size ImageView is one target on screen. The
    parent is the bottom of the stack, so the child wins text, id and colors.
    """
    if view.kind is None:
        return view
    nested = [c for c in view.children if c.kind is not None and c.bounds == view.bounds]
    if not nested:
        return view
    rest = tuple(c for c in view.children if not any(c is n for n in nested))
    merged = _merge_overlay([replace(view, children=rest), *nested])
    return _absorb_nested(merged)


def _filter_children(view: RawView, invisible: Sequence[str]) -> List[RawView]:
    kept: List[RawView] = []
    for child in view.children:
        filtered_child = _absorb_nested(
            replace(child, children=tuple(_filter_children(child, invisible)))
        )
        if _is_invisible(child, invisible):
            # re-parent the survivors, keeping their relative order
            kept.extend(filtered_child.children)
        else:
            kept.append(filtered_child)
    return _collapse(kept)


def filter_visible(
    tree: LayoutTree, invisible_classes: Optional[Sequence[str]] = None
) -> LayoutTree:
    """
    Remove views that are invisible to low vision users.

    Views whose class name ends with one of the invisible classes
    (case-insensitive) and zero-area views are removed; their children move
    up to the removed view's parent in order. Sibling views with identical
    bounds collapse into one, and so does a component nested in a component
    of the same bounds. The root is never removed.

    Args:
        tree: Parsed layout tree
        invisible_classes: Class-name suffixes to drop (defaults to config)

    Returns:
        New filtered LayoutTree
    """
    invisible = (
        invisible_classes
        if invisible_classes is not None
        else config.INVISIBLE_CLASSES
    )
    root = _absorb_nested(
        replace(tree.root, children=tuple(_filter_children(tree.root, invisible)))
    )
    filtered = LayoutTree(root=root, source_path=tree.source_path)

    removed = tree.view_count() - filtered.view_count()
    if removed:
        logger.debug(f"Filtered {removed} invisible views from {tree.source_path}")
    return filtered


def _view_to_element(view: RawView) -> etree._Element:
    attrs: Dict[str, str] = dict(view.extra)
    attrs["class"] = view.view_class
    attrs["bounds"] = format_bounds(view.bounds)
    if view.resource_id is not None:
        attrs["resource-id"] = view.resource_id
    if view.text is not None:
        attrs["text"] = view.text
    for attr in ("clickable", "focusable", "focused", "selected"):
        attrs[attr] = "true" if getattr(view, attr) else "false"
    for attr in ("text-resizable", "auxiliary-technology", "text-alternative", "alert"):
        if getattr(view, _BOOL_ATTRS[attr]):
            attrs[attr] = "true"
    if view.declared_fg_color is not None:
        attrs["fg-color"] = rgb_to_hex(view.declared_fg_color)
    if view.declared_bg_color is not None:
        attrs["bg-color"] = rgb_to_hex(view.declared_bg_color)

    element = etree.Element("node")
    for key in sorted(attrs):
        element.set(key, attrs[key])
    for child in view.children:
        element.append(_view_to_element(child))
    return element


def serialize_layout(tree: LayoutTree) -> bytes:
    """
    Canonical XML for a tree: two-space indent, attributes sorted.

    Args:
        tree: Tree to serialize

    Returns:
        UTF-8 XML document
    """
    element = _view_to_element(tree.root)
    etree.indent(element, space="  ")
    return etree.tostring(
        element, pretty_print=True, xml_declaration=True, encoding="UTF-8"
    )
