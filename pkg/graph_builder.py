"""
Graph Builder for the Low Vision GUI Checker.

This module converts a filtered LayoutTree into a GUI-graph:

1. Component-nodes (buttons, texts, images, lists, search views) and one
   attribute-free container-node per main branch of the layout
2. Edges between neighbouring components, between each container and its
   members, and a cycle through the containers
3. Out-degree edge weights, min-max normalized per graph
4. The padded adjacency, renormalized adjacency, feature and label tensors
"""

import json
import logging
from collections import Counter, deque
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import config
from feature_encoder import decode_labels, encode_labels, feature_matrix
from layout_parser import LayoutTree, RawView
from utils.errors import EmptyGui, TooManyNodes
from utils.geometry import Rect, gap, union
from utils.logging_config import setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)

COMPONENT_COMPONENT = "component-component"
CONTAINER_COMPONENT = "container-component"
CONTAINER_CONTAINER = "container-container"

EDGE_CLASSES = (COMPONENT_COMPONENT, CONTAINER_COMPONENT, CONTAINER_CONTAINER)


@dataclass(frozen=True)
class ComponentNode:
    """A visible component carrying a feature vector."""

    node_id: int
    resource_id: str
    kind: str
    bounds: Rect
    group_id: int
    raw: RawView
    depth: int = 0
    reserved: Optional[Tuple[int, int, int, int]] = None

    @property
    def label(self) -> Optional[int]:
        return decode_labels(self.reserved)


@dataclass(frozen=True)
class ContainerNode:
    """Structural node for one node group; carries no attributes."""

    node_id: int
    group_id: int
    member_ids: Tuple[int, ...]
    bounds: Rect


@dataclass(frozen=True)
class NodeGroup:
    """Components flattened under one main branch, in level order."""

    group_id: int
    container_id: int
    members: Tuple[ComponentNode, ...]

    @property
    def member_ids(self) -> Tuple[int, ...]:
        return tuple(m.node_id for m in self.members)


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    weight: float
    edge_class: str

    @property
    def pair(self) -> Tuple[int, int]:
        return (min(self.src, self.dst), max(self.src, self.dst))


@dataclass(frozen=True)
class GuiGraph:
    """Component-nodes, container-nodes, node groups and weighted edges."""

    components: Tuple[ComponentNode, ...]
    containers: Tuple[ContainerNode, ...]
    groups: Tuple[NodeGroup, ...]
    edges: Tuple[Edge, ...]
    source_path: str = "<memory>"

    @property
    def n_real(self) -> int:
        return len(self.components) + len(self.containers)

    def component(self, node_id: int) -> ComponentNode:
        return self.components[node_id]


@dataclass(frozen=True)
class GraphTensors:
    """Padded matrices fed to the GCN."""

    adjacency: np.ndarray
    renormalized: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    real_mask: np.ndarray
    component_mask: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_real(self) -> int:
        return int(self.real_mask.sum())

    @property
    def label_mask(self) -> np.ndarray:
        """Rows that enter the loss: labeled real components."""
        return self.component_mask & (self.labels >= 0)


def _level_order(branch: RawView) -> List[Tuple[RawView, int]]:
    """Component views of a branch in level order, with their tree depth."""
    found: List[Tuple[RawView, int]] = []
    queue = deque([(branch, 0)])
    while queue:
        view, depth = queue.popleft()
        if view.kind is not None:
            found.append((view, depth))
        for child in view.children:
            queue.append((child, depth + 1))
    return found


def _resource_id(view: RawView) -> str:
    if view.resource_id:
        return view.resource_id
    x1, y1, x2, y2 = view.bounds
    return f"{view.simple_class}[{x1},{y1}][{x2},{y2}]"


def identify_nodes(
    tree: LayoutTree, annotations: Optional[Mapping[str, int]] = None
) -> Tuple[Tuple[ComponentNode, ...], Tuple[ContainerNode, ...], Tuple[NodeGroup, ...]]:
    """
    Identify component-nodes, container-nodes and node groups.

    Each main branch (child of the root) holding at least one component
    forms a node group with one container-node; everything below the
    branch is flattened into that group. A root that is itself a component
    puts the whole tree into a single group with a synthetic container.

    Component ids follow document order; container ids follow, ordered top
    to bottom, then left to right, then by document order.

    Args:
        tree: Filtered layout tree
        annotations: Optional resource_id -> class index map stored in the
            reserved bits

    Returns:
        Tuple of (components, containers, groups)

    Raises:
        EmptyGui: If the tree holds no component
    """
    annotations = annotations or {}
    root = tree.root
    branches = [root] if root.kind is not None else list(root.children)

    doc_order: Dict[int, int] = {}
    for view in tree.iter_views():
        if view.kind is not None:
            doc_order[id(view)] = len(doc_order)

    if not doc_order:
        raise EmptyGui(f"{tree.source_path}: no component-nodes")

    branch_members = [
        members for members in (_level_order(b) for b in branches) if members
    ]

    def position(members: List[Tuple[RawView, int]]) -> Tuple[int, int, int]:
        box = union(v.bounds for v, _ in members)
        return (box[1], box[0], min(doc_order[id(v)] for v, _ in members))

    branch_members.sort(key=position)

    n_components = len(doc_order)
    components: Dict[int, ComponentNode] = {}
    containers: List[ContainerNode] = []
    groups: List[NodeGroup] = []

    for group_id, members in enumerate(branch_members):
        group_nodes = []
        for view, depth in members:
            node_id = doc_order[id(view)]
            resource_id = _resource_id(view)
            node = ComponentNode(
                node_id=node_id,
                resource_id=resource_id,
                kind=view.kind,
                bounds=view.bounds,
                group_id=group_id,
                raw=view,
                depth=depth,
                reserved=encode_labels(annotations.get(resource_id)),
            )
            components[node_id] = node
            group_nodes.append(node)

        container_id = n_components + group_id
        containers.append(
            ContainerNode(
                node_id=container_id,
                group_id=group_id,
                member_ids=tuple(n.node_id for n in group_nodes),
                bounds=union(n.bounds for n in group_nodes),
            )
        )
        groups.append(
            NodeGroup(group_id=group_id, container_id=container_id, members=tuple(group_nodes))
        )

    ordered = tuple(components[i] for i in range(n_components))
    logger.debug(
        f"{tree.source_path}: {len(ordered)} components in {len(groups)} groups"
    )
    return ordered, tuple(containers), tuple(groups)


def component_edges(group: NodeGroup, adjacency_gap: Optional[int] = None) -> List[Edge]:
    """
    Edges between components of one node group.

    Two components are joined when they are consecutive in the group's
    level-order sequence and sit on the same or adjacent tree levels, or
    when the gap between their boxes is strictly below adjacency_gap. Each
    pair is drawn once, directed from the earlier to the later component in
    level order.

    Args:
        group: Node group
        adjacency_gap: Pixel gap threshold (defaults to config ADJACENCY_GAP)

    Returns:
        Unweighted component-component edges
    """
    limit = config.ADJACENCY_GAP if adjacency_gap is None else adjacency_gap
    members = group.members
    drawn: Dict[Tuple[int, int], Edge] = {}

    def draw(a: ComponentNode, b: ComponentNode) -> None:
        key = (min(a.node_id, b.node_id), max(a.node_id, b.node_id))
        if key not in drawn:
            drawn[key] = Edge(a.node_id, b.node_id, 1.0, COMPONENT_COMPONENT)

    for a, b in zip(members, members[1:]):
        if abs(a.depth - b.depth) <= 1:
            draw(a, b)

    for i, a in enumerate(members):
        for b in members[i + 1:]:
            if gap(a.bounds, b.bounds) < limit:
                draw(a, b)

    return list(drawn.values())


def container_component_edges(group: NodeGroup) -> List[Edge]:
    """One edge from the group's container to every member component."""
    return [
        Edge(group.container_id, member.node_id, 1.0, CONTAINER_COMPONENT)
        for member in group.members
    ]


def container_chain_edges(containers: Sequence[ContainerNode]) -> List[Edge]:
    """
    Chain the ordered containers and close the cycle, all with weight 1.

    One container gets no edge; two containers get a single edge because
    the closing edge repeats the same pair.
    """
    ids = [c.node_id for c in containers]
    if len(ids) < 2:
        return []
    edges = [Edge(a, b, 1.0, CONTAINER_CONTAINER) for a, b in zip(ids, ids[1:])]
    if len(ids) > 2:
        edges.append(Edge(ids[-1], ids[0], 1.0, CONTAINER_CONTAINER))
    return edges


def assign_weights(graph: GuiGraph) -> GuiGraph:
    """
    Weight every edge by the out-degree of its destination node.

    Out-degrees are counted on the directed edge list as drawn, plus the
    self-loop the renormalization adds, so every raw weight is at least 1.
    Raw weights of component-component and container-component edges are
    divided by the largest one in the graph, landing in (0, 1] (all equal
    -> 1); container-container edges keep weight 1. No edge is normalized
    away, so every component keeps at least its container edge.

    Args:
        graph: Graph with all edges drawn

    Returns:
        Graph with normalized weights
    """
    out_degree = Counter(edge.src for edge in graph.edges)
    raw = {
        i: float(out_degree[edge.dst] + 1)
        for i, edge in enumerate(graph.edges)
        if edge.edge_class != CONTAINER_CONTAINER
    }

    high = max(raw.values(), default=1.0)
    weighted = []
    for i, edge in enumerate(graph.edges):
        if edge.edge_class == CONTAINER_CONTAINER:
            weight = 1.0
        else:
            weight = raw[i] / high
        weighted.append(replace(edge, weight=weight))

    return replace(graph, edges=tuple(weighted))


def build_gui_graph(
    tree: LayoutTree,
    annotations: Optional[Mapping[str, int]] = None,
    adjacency_gap: Optional[int] = None,
) -> GuiGraph:
    """
    Run node identification, edge drawing and weighting for one GUI.

    Args:
        tree: Filtered layout tree
        annotations: Optional resource_id -> class index labels
        adjacency_gap: Pixel gap threshold for component edges

    Returns:
        Weighted GuiGraph
    """
    components, containers, groups = identify_nodes(tree, annotations)

    edges: List[Edge] = []
    for group in groups:
        edges.extend(component_edges(group, adjacency_gap))
        edges.extend(container_component_edges(group))
    edges.extend(container_chain_edges(containers))

    graph = GuiGraph(
        components=components,
        containers=containers,
        groups=groups,
        edges=tuple(edges),
        source_path=tree.source_path,
    )
    graph = assign_weights(graph)
    logger.debug(
        f"Built GUI-graph for {tree.source_path}: {graph.n_real} nodes, "
        f"{len(graph.edges)} edges"
    )
    return graph


def adjacency_matrix(graph: GuiGraph, threshold: Optional[int] = None) -> np.ndarray:
    """Weighted symmetric adjacency, zero-padded to threshold x threshold."""
    n = threshold or config.PADDING_THRESHOLD
    if graph.n_real > n:
        raise TooManyNodes(graph.n_real, n)
    adjacency = np.zeros((n, n), dtype=np.float64)
    for edge in graph.edges:
        adjacency[edge.src, edge.dst] = edge.weight
        adjacency[edge.dst, edge.src] = edge.weight
    return adjacency


def renormalize(adjacency: np.ndarray) -> np.ndarray:
    """
    Renormalized adjacency D^-1/2 (A + I) D^-1/2.

    Padded (isolated) rows end up as a bare self-loop of weight 1. Degrees
    are summed over the leading block that holds every nonzero entry, so
    trailing padding never changes the real block bit for bit.
    """
    n = adjacency.shape[0]
    nonzero = np.flatnonzero(np.abs(adjacency).sum(axis=0))
    m = int(nonzero[-1]) + 1 if nonzero.size else 0

    renormalized = np.eye(n)
    if m:
        a_tilde = adjacency[:m, :m] + np.eye(m)
        d_inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
        renormalized[:m, :m] = a_tilde * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]
    return renormalized


def to_tensors(
    graph: GuiGraph,
    threshold: Optional[int] = None,
    mask: str = "none",
) -> GraphTensors:
    """
    Materialize the padded tensors of a GUI-graph.

    Args:
        graph: Weighted GUI-graph
        threshold: Padding size N (defaults to config PADDING_THRESHOLD)
        mask: Attribute-group mask passed to feature_matrix

    Returns:
        GraphTensors with N x N adjacency and renormalized adjacency, N x 14
        features, length-N labels (-1 where unlabeled) and masks

    Raises:
        TooManyNodes: If the graph has more than N real nodes
    """
    n = threshold or config.PADDING_THRESHOLD
    if graph.n_real > n:
        raise TooManyNodes(graph.n_real, n)

    adjacency = adjacency_matrix(graph, n)
    labels = np.full(n, -1, dtype=np.int64)
    for node in graph.components:
        label = node.label
        if label is not None:
            labels[node.node_id] = label

    real_mask = np.zeros(n, dtype=bool)
    real_mask[: graph.n_real] = True
    component_mask = np.zeros(n, dtype=bool)
    component_mask[: len(graph.components)] = True

    return GraphTensors(
        adjacency=adjacency,
        renormalized=renormalize(adjacency),
        features=feature_matrix(graph, mask=mask, threshold=n),
        labels=labels,
        real_mask=real_mask,
        component_mask=component_mask,
    )


def graph_to_json(graph: GuiGraph) -> str:
    """Deterministic JSON description of a graph for --dump-graph."""
    nodes = [
        {"id": c.node_id, "kind": c.kind, "group": c.group_id, "resource_id": c.resource_id}
        for c in graph.components
    ] + [
        {"id": c.node_id, "kind": "container", "group": c.group_id}
        for c in graph.containers
    ]
    edges = sorted(
        (
            {
                "src": e.src,
                "dst": e.dst,
                "weight": round(e.weight, 6),
                "class": e.edge_class,
            }
            for e in graph.edges
        ),
        key=lambda e: (e["src"], e["dst"]),
    )
    return json.dumps(
        {"source": graph.source_path, "nodes": nodes, "edges": edges},
        indent=2,
        sort_keys=True,
    )
