"""Tests for the filtered backward traversal, lineage and output formats."""

from collections import defaultdict

import numpy as np
import pytest

from conftest import golden_lines
from core.analytics import (
    LINEAGE_EDGES,
    SCANS_PER_LEVEL,
    SCANS_PER_LEVEL_FILTERED,
    TraversalQuery,
    TraversalRow,
    bfs,
    format_assoc,
    format_csv,
    format_result,
    lineage_inputs,
    node_kind_filter,
)
from core.d4m_codec import KvEntry, TableId, encode_graph
from core.errors import StartNotFoundError
from core.graph_gen import GenConfig, generate, graph_depth, sink_nodes
from core.kv_store import open_store
from core.prov_model import EdgeType, NodeKind, ProvEdge, ProvGraph, ProvNode, validate_graph


def oracle_rows(graph, starts, depth, edge_filter=None):
    """Level-synchronous adjacency walk over the in-memory graph."""
    into = defaultdict(list)
    for edge in graph.edges.values():
        if edge_filter is None or edge.etype in edge_filter:
            into[edge.out_node].append(edge.in_node)
    rows = {(0, s, "") for s in starts}
    visited = set(starts)
    frontier = set(starts)
    for level in range(1, depth + 1):
        found = set()
        for node in frontier:
            for ancestor in into[node]:
                rows.add((level, ancestor, node))
                found.add(ancestor)
        frontier = found - visited
        visited |= frontier
    return rows


def row_set(result):
    return {(r.depth, r.node_id, "") if r.depth == 0 else (r.depth, r.in_node, r.out_node)
            for r in result.rows}


def load(graph):
    store = open_store(None)
    store.put_batches(encode_graph(graph))
    return store


def test_example_query_rows(example_store):
    result = bfs(example_store, TraversalQuery(frozenset({"EN6", "EN7"}), 3))
    assert result.rows == [
        TraversalRow(0, node_id="EN6"),
        TraversalRow(0, node_id="EN7"),
        TraversalRow(1, "AC2", "EN6"),
        TraversalRow(1, "AC2", "EN7"),
        TraversalRow(2, "AC1", "AC2"),
        TraversalRow(2, "EN5", "AC2"),
        TraversalRow(3, "AC0", "AC1"),
        TraversalRow(3, "EN3", "AC1"),
        TraversalRow(3, "EN4", "EN5"),
    ]
    assert result.levels == 3
    assert result.scans_performed == 1 + 3 * SCANS_PER_LEVEL


def test_example_query_associative_display(example_store):
    result = bfs(example_store, TraversalQuery(frozenset({"EN6", "EN7"}), 3))
    assert format_assoc(result) == golden_lines("lineage_assoc.txt")


def test_listing_format(example_store):
    lines = format_result(bfs(example_store, TraversalQuery(frozenset({"EN6", "EN7"}), 3)))
    assert lines[0] == "(depthID|0,EN6,)     1,"
    assert lines[3] == "(depthID|1,inNode|AC2,)     outNode|EN7,"
    assert len(lines) == 9


def test_csv_format(example_store):
    lines = format_csv(bfs(example_store, TraversalQuery(frozenset({"EN6"}), 1)))
    assert lines == ["depth,in_node,out_node", "0,EN6,", "1,AC2,EN6"]


def test_depth_zero(example_store):
    result = bfs(example_store, TraversalQuery(frozenset({"EN6"}), 0))
    assert result.rows == [TraversalRow(0, node_id="EN6")]
    assert result.scans_performed == 1


def test_traversal_stops_at_graph_depth(example_store, example_graph):
    result = bfs(example_store, TraversalQuery(frozenset({"EN6", "EN7"}), 50))
    assert result.levels == graph_depth(example_graph, ["EN6", "EN7"]) == 4
    assert max(r.depth for r in result.rows) == 4
    # Four levels with edges plus the empty lookup that ends the walk.
    assert result.scans_performed == 1 + 4 * SCANS_PER_LEVEL + 1


def test_missing_start(example_store):
    result = bfs(example_store, TraversalQuery(frozenset({"EN99"}), 3))
    assert result.start_not_found
    assert result.rows == []
    partial = bfs(example_store, TraversalQuery(frozenset({"EN99", "EN6"}), 1))
    assert partial.missing_starts == ["EN99"]
    assert row_set(partial) == {(0, "EN6", ""), (1, "AC2", "EN6")}


def test_edge_filter(example_store):
    result = bfs(example_store, TraversalQuery(frozenset({"EN6"}), 3, frozenset({EdgeType.GENERATION})))
    assert row_set(result) == {(0, "EN6", ""), (1, "AC2", "EN6")}


def test_node_filter_limits_expansion(example_store):
    query = TraversalQuery(frozenset({"EN6"}), 3, node_filter=node_kind_filter([NodeKind.ENTITY]))
    result = bfs(example_store, query)
    # AC2 is reported but, being an activity, never expanded.
    assert row_set(result) == {(0, "EN6", ""), (1, "AC2", "EN6")}
    assert result.scans_performed == 1 + 3


def test_visited_nodes_still_get_rows(example_store):
    result = bfs(example_store, TraversalQuery(frozenset({"AC2", "EN5"}), 1))
    assert row_set(result) == {
        (0, "AC2", ""), (0, "EN5", ""),
        (1, "AC1", "AC2"), (1, "EN5", "AC2"), (1, "EN4", "EN5"),
    }


def test_cycle_terminates():
    store = open_store(None)
    store.put_batch(TableId.NODE, [KvEntry("EN0", ":type|PROV_ENTITY"), KvEntry("EN1", ":type|PROV_ENTITY")])
    for edge_id, in_node, out_node in (("wdf-0", "EN0", "EN1"), ("wdf-1", "EN1", "EN0")):
        store.put_batch(TableId.EDGE, [KvEntry(edge_id, ":inNode|" + in_node),
                                       KvEntry(edge_id, ":outNode|" + out_node),
                                       KvEntry(edge_id, ":type|PROV_DERIVATION")])
        store.put_batch(TableId.EDGE_T, [KvEntry(":outNode|" + out_node, edge_id)])
    result = bfs(store, TraversalQuery(frozenset({"EN0"}), 10))
    assert row_set(result) == {(0, "EN0", ""), (1, "EN1", "EN0"), (2, "EN0", "EN1")}
    assert result.levels == 2


def test_lineage_inputs(example_store):
    assert lineage_inputs(example_store, "EN6", 3) == {"EN4", "EN5"}
    assert lineage_inputs(example_store, "EN6", 10) == {"EN2", "EN3", "EN4", "EN5"}
    assert lineage_inputs(example_store, "EN0", 5) == set()
    assert EdgeType.COMMUNICATION not in LINEAGE_EDGES


def test_lineage_of_missing_node(example_store):
    with pytest.raises(StartNotFoundError, match="start not found: EN42"):
        lineage_inputs(example_store, "EN42", 3)


@pytest.mark.parametrize("kwargs", [dict(start_nodes=frozenset(), depth=1),
                                    dict(start_nodes=frozenset({"EN0"}), depth=-1)])
def test_bad_query(kwargs):
    with pytest.raises(ValueError):
        TraversalQuery(**kwargs)


ORACLE_CASES = [
    ([10, 100, 1000][i % 3], [1, 4, 8][(i // 3) % 3], i % 11, 1000 + i)
    for i in range(100)
]


@pytest.mark.parametrize("num_nodes,max_edges,depth,seed", ORACLE_CASES)
def test_matches_adjacency_oracle(num_nodes, max_edges, depth, seed):
    graph = generate(GenConfig(num_nodes, max_edges, seed))
    store = load(graph)
    rng = np.random.Generator(np.random.PCG64(seed))
    ids = list(graph.nodes)
    starts = {sink_nodes(graph)[-1], ids[int(rng.integers(len(ids)))]}

    result = bfs(store, TraversalQuery(frozenset(starts), depth))
    assert row_set(result) == oracle_rows(graph, starts, depth)

    edge_filter = frozenset({EdgeType.GENERATION, EdgeType.USAGE})
    filtered = bfs(store, TraversalQuery(frozenset(starts), depth, edge_filter))
    assert row_set(filtered) == oracle_rows(graph, starts, depth, edge_filter)


def layered_graph(depth, seed, width=6):
    """
    Alternating entity and activity layers; every node below the top layer
    has one or two ancestors, all in the layer directly above it.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    graph = ProvGraph()
    numbers = {EdgeType.USAGE: 0, EdgeType.GENERATION: 0}
    previous = []
    for level in range(depth + 1):
        kind, prefix = (NodeKind.ENTITY, "EN") if level % 2 == 0 else (NodeKind.ACTIVITY, "AC")
        layer = [f"{prefix}{level}x{i}" for i in range(int(rng.integers(1, width, endpoint=True)))]
        etype = EdgeType.USAGE if kind is NodeKind.ACTIVITY else EdgeType.GENERATION
        for node_id in layer:
            graph.add_node(ProvNode(node_id, kind))
            if not previous:
                continue
            count = min(len(previous), int(rng.integers(1, 2, endpoint=True)))
            for ancestor in rng.choice(previous, size=count, replace=False):
                graph.add_edge(ProvEdge(etype.edge_id(numbers[etype]), etype, str(ancestor), node_id))
                numbers[etype] += 1
        previous = layer
    return graph, previous[0]


@pytest.mark.parametrize("depth", [5, 8, 13, 20])
def test_scans_per_hop_on_deep_graphs(depth):
    graph, start = layered_graph(depth, seed=depth)
    assert validate_graph(graph)
    assert 5 <= graph_depth(graph, [start]) == depth <= 20
    store = load(graph)

    result = bfs(store, TraversalQuery(frozenset({start}), 64))
    assert result.levels == depth
    # Start lookup, two scans per level, and the empty lookup above the top layer.
    assert result.scans_performed == 1 + SCANS_PER_LEVEL * depth + 1

    every_kind = node_kind_filter([NodeKind.ENTITY, NodeKind.ACTIVITY])
    filtered = bfs(store, TraversalQuery(frozenset({start}), 64, node_filter=every_kind))
    assert filtered.rows == result.rows
    assert filtered.scans_performed == 1 + SCANS_PER_LEVEL_FILTERED * depth + 1

    # Stopping early costs the same per hop, without the trailing lookup.
    shallow = bfs(store, TraversalQuery(frozenset({start}), 3))
    assert shallow.scans_performed == 1 + SCANS_PER_LEVEL * 3


@pytest.mark.parametrize("seed", range(12))
def test_scans_grow_linearly_with_depth(seed):
    graph = generate(GenConfig(2000, 2, seed))
    start = sink_nodes(graph)[-1]
    depth = graph_depth(graph, [start])
    store = load(graph)
    result = bfs(store, TraversalQuery(frozenset({start}), 64))
    assert result.levels == depth
    # One start lookup, two scans per level with edges, at most one empty lookup.
    assert result.scans_performed in (1 + SCANS_PER_LEVEL * depth, 2 + SCANS_PER_LEVEL * depth)


def test_shallower_query_is_a_prefix():
    graph = generate(GenConfig(800, 4, seed=21))
    store = load(graph)
    start = frozenset({sink_nodes(graph)[-1]})
    deep = bfs(store, TraversalQuery(start, 8)).rows
    for depth in range(8):
        shallow = bfs(store, TraversalQuery(start, depth)).rows
        assert shallow == [row for row in deep if row.depth <= depth]
