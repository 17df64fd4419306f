import json
from collections import deque

import numpy as np
import pytest

from graph_builder import (
    COMPONENT_COMPONENT,
    CONTAINER_COMPONENT,
    CONTAINER_CONTAINER,
    adjacency_matrix,
    build_gui_graph,
    graph_to_json,
    renormalize,
    to_tensors,
)
from layout_parser import filter_visible, parse_layout
from synth_corpus import CorpusSpec, generate
from utils.errors import EmptyGui, TooManyNodes


def _edge_map(graph):
    return {(e.src, e.dst): e for e in graph.edges}


def _layout(*children: str, root: str = "android.widget.FrameLayout") -> bytes:
    body = "".join(children)
    return f'<node class="{root}" bounds="[0,0][1440,2560]">{body}</node>'.encode()


def test_running_example_nodes(nav_graph):
    ids = [c.resource_id for c in nav_graph.components]
    assert ids == [
        "app:id/title",
        "app:id/compose",
        "app:id/avatar",
        "app:id/nav_home",
        "app:id/nav_search",
    ]
    assert [c.node_id for c in nav_graph.containers] == [5, 6]
    assert nav_graph.containers[0].member_ids == (0, 1, 2)
    assert nav_graph.containers[1].member_ids == (3, 4)
    assert nav_graph.n_real == 7


def test_running_example_edges(nav_graph):
    edges = _edge_map(nav_graph)
    assert set(edges) == {
        (0, 1), (1, 2), (3, 4),
        (5, 0), (5, 1), (5, 2), (6, 3), (6, 4),
        (5, 6),
    }
    assert edges[(0, 1)].edge_class == COMPONENT_COMPONENT
    assert edges[(6, 3)].edge_class == CONTAINER_COMPONENT
    assert edges[(5, 6)].edge_class == CONTAINER_CONTAINER


def test_running_example_weights_follow_destination_out_degree(nav_graph):
    edges = _edge_map(nav_graph)
    # destinations 1, 0 and 3 have out-degree 1; 2 and 4 have none
    for pair in [(0, 1), (5, 0), (5, 1), (6, 3)]:
        assert edges[pair].weight == 1.0
    for pair in [(1, 2), (5, 2), (3, 4), (6, 4)]:
        assert edges[pair].weight == 0.5
    assert edges[(5, 6)].weight == 1.0


def test_every_component_keeps_a_weighted_edge(nav_graph):
    adjacency = adjacency_matrix(nav_graph)
    for node in nav_graph.components:
        assert adjacency[node.node_id].any()


def test_adjacency_is_symmetric_with_zero_diagonal(nav_graph):
    adjacency = adjacency_matrix(nav_graph)
    assert adjacency.shape == (37, 37)
    assert np.array_equal(adjacency, adjacency.T)
    assert not np.diag(adjacency).any()
    assert not adjacency[7:].any()


def test_boxes_closer_than_gap_are_joined_across_levels():
    xml = _layout(
        '<node class="android.widget.LinearLayout" bounds="[0,0][1440,1000]">'
        '<node class="android.widget.Button" resource-id="a" bounds="[0,0][100,100]"/>'
        '<node class="android.widget.LinearLayout" bounds="[0,300][1440,900]">'
        '<node class="android.widget.LinearLayout" bounds="[0,300][1440,900]">'
        '<node class="android.widget.Button" resource-id="b" bounds="[500,500][600,600]"/>'
        '<node class="android.widget.Button" resource-id="c" bounds="[0,103][100,200]"/>'
        "</node></node></node>"
    )
    graph = build_gui_graph(filter_visible(parse_layout(xml)))
    pairs = {e.pair for e in graph.edges if e.edge_class == COMPONENT_COMPONENT}
    # a (depth 1) and b (depth 3) are consecutive but two levels apart
    assert (0, 1) not in pairs
    assert (1, 2) in pairs
    assert (0, 2) in pairs


def test_root_component_forms_one_group():
    xml = b'<node class="android.widget.Button" resource-id="ok" bounds="[0,0][200,100]"/>'
    graph = build_gui_graph(filter_visible(parse_layout(xml)))
    assert len(graph.components) == 1
    assert [c.node_id for c in graph.containers] == [1]
    assert [(e.src, e.dst, e.weight) for e in graph.edges] == [(1, 0, 1.0)]


def test_three_containers_form_a_cycle():
    branches = [
        f'<node class="android.widget.LinearLayout" bounds="[0,{y}][1440,{y + 400}]">'
        f'<node class="android.widget.TextView" resource-id="t{y}" bounds="[40,{y + 40}][400,{y + 120}]"/>'
        "</node>"
        for y in (1600, 0, 800)
    ]
    graph = build_gui_graph(filter_visible(parse_layout(_layout(*branches))))
    chain = [(e.src, e.dst) for e in graph.edges if e.edge_class == CONTAINER_CONTAINER]
    assert chain == [(3, 4), (4, 5), (5, 3)]
    # containers are ordered top to bottom, not in document order
    tops = [graph.containers[i].bounds[1] for i in range(3)]
    assert tops == sorted(tops)


def test_resource_id_falls_back_to_class_and_bounds():
    xml = _layout('<node class="android.widget.ImageView" bounds="[10,20][30,40]"/>')
    graph = build_gui_graph(filter_visible(parse_layout(xml)))
    assert graph.components[0].resource_id == "ImageView[10,20][30,40]"


def test_layout_without_components_is_empty():
    xml = _layout('<node class="android.widget.LinearLayout" bounds="[0,0][100,100]"/>')
    with pytest.raises(EmptyGui):
        build_gui_graph(filter_visible(parse_layout(xml)))


def test_too_many_nodes(nav_graph):
    with pytest.raises(TooManyNodes) as excinfo:
        to_tensors(nav_graph, threshold=6)
    assert excinfo.value.n_real == 7
    assert excinfo.value.threshold == 6


def test_tensors_carry_labels_and_masks(nav_tree):
    graph = build_gui_graph(nav_tree, {"app:id/title": 2, "app:id/nav_home": 0})
    tensors = to_tensors(graph)
    assert tensors.labels[:7].tolist() == [2, -1, -1, 0, -1, -1, -1]
    assert tensors.real_mask.sum() == 7
    assert tensors.component_mask.sum() == 5
    assert tensors.label_mask.nonzero()[0].tolist() == [0, 3]
    assert tensors.features.shape == (37, 14)
    assert not tensors.features[5:].any()


def test_renormalize_path_graph():
    adjacency = np.zeros((5, 5))
    adjacency[0, 1] = adjacency[1, 0] = 1.0
    adjacency[1, 2] = adjacency[2, 1] = 1.0
    expected = np.array(
        [
            [1 / 2, 1 / np.sqrt(6), 0],
            [1 / np.sqrt(6), 1 / 3, 1 / np.sqrt(6)],
            [0, 1 / np.sqrt(6), 1 / 2],
        ]
    )
    result = renormalize(adjacency)
    assert np.allclose(result[:3, :3], expected, atol=1e-15)
    assert np.array_equal(result[3:, 3:], np.eye(2))
    assert not result[:3, 3:].any()


def test_renormalized_block_ignores_padding(nav_graph):
    small = to_tensors(nav_graph, threshold=7).renormalized
    padded = to_tensors(nav_graph, threshold=37).renormalized
    assert np.array_equal(padded[:7, :7], small)
    assert np.allclose(padded, padded.T, rtol=0, atol=1e-15)


def test_graph_json_is_deterministic(nav_tree):
    first = graph_to_json(build_gui_graph(nav_tree))
    assert first == graph_to_json(build_gui_graph(nav_tree))
    payload = json.loads(first)
    assert len(payload["nodes"]) == 7
    assert len(payload["edges"]) == 9


def _expected_component_pairs(tree, graph, limit=5):
    """Re-derive component edges straight from the tree."""
    ids = {c.resource_id: c.node_id for c in graph.components}
    pairs = set()
    for branch in tree.root.children:
        ordered = []
        queue = deque([(branch, 0)])
        while queue:
            view, depth = queue.popleft()
            if view.kind is not None:
                ordered.append((ids[view.resource_id], view.bounds, depth))
            queue.extend((child, depth + 1) for child in view.children)
        for (a, _, da), (b, _, db) in zip(ordered, ordered[1:]):
            if abs(da - db) <= 1:
                pairs.add((min(a, b), max(a, b)))
        for i, (a, ra, _) in enumerate(ordered):
            for b, rb, _ in ordered[i + 1:]:
                dx = max(0, rb[0] - ra[2], ra[0] - rb[2])
                dy = max(0, rb[1] - ra[3], ra[1] - rb[3])
                if max(dx, dy) < limit:
                    pairs.add((min(a, b), max(a, b)))
    return pairs


def _check_against_brute_force(corpus):
    for gui in corpus:
        tree = filter_visible(parse_layout(gui.layout_xml))
        graph = build_gui_graph(tree)
        drawn = [e.pair for e in graph.edges if e.edge_class == COMPONENT_COMPONENT]
        assert len(drawn) == len(set(drawn))
        assert set(drawn) == _expected_component_pairs(tree, graph)

        n_containers = len(graph.containers)
        chain = [e for e in graph.edges if e.edge_class == CONTAINER_CONTAINER]
        assert len(chain) == (n_containers if n_containers > 2 else n_containers - 1)
        assert all(e.weight == 1.0 for e in chain)
        assert all(0.0 < e.weight <= 1.0 for e in graph.edges)
        adjacency = adjacency_matrix(graph, threshold=max(graph.n_real, 37))
        assert all(adjacency[c.node_id].any() for c in graph.components)


def test_edges_match_brute_force_on_generated_guis():
    _check_against_brute_force(generate(CorpusSpec(n_guis=30, seed=11)))


@pytest.mark.slow
def test_edges_match_brute_force_on_many_generated_guis():
    _check_against_brute_force(
        generate(CorpusSpec(n_guis=200, seed=12, nav_correlation=0.5))
    )
