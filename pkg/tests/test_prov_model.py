"""Tests for node kinds, edge rules and graph validation."""

import pytest

from core.errors import ModelError, UnknownNodeError
from core.prov_model import (
    ENDPOINT_KINDS,
    EdgeType,
    NodeKind,
    ProvEdge,
    ProvGraph,
    ProvNode,
    component_count,
    topological_order,
    validate_edge,
    validate_graph,
)


KINDS = {"AC0": NodeKind.ACTIVITY, "EN0": NodeKind.ENTITY, "AG0": NodeKind.AGENT, "AG1": NodeKind.AGENT}


def test_every_relation_has_endpoint_kinds():
    assert set(ENDPOINT_KINDS) == set(EdgeType)
    assert ENDPOINT_KINDS[EdgeType.GENERATION] == (NodeKind.ACTIVITY, NodeKind.ENTITY)
    assert ENDPOINT_KINDS[EdgeType.DELEGATION] == (NodeKind.AGENT, NodeKind.AGENT)


def test_edge_type_lookups():
    assert EdgeType.from_prefix("aobo") is EdgeType.DELEGATION
    assert EdgeType.from_render("PROV_USAGE") is EdgeType.USAGE
    assert EdgeType.GENERATION.edge_id(3) == "wgb-3"
    with pytest.raises(ModelError):
        EdgeType.from_render("PROV_INVALIDATION")
    with pytest.raises(ModelError):
        NodeKind.from_render("PROV_THING")


@pytest.mark.parametrize("etype,in_node,out_node", [
    (EdgeType.GENERATION, "AC0", "EN0"),
    (EdgeType.USAGE, "EN0", "AC0"),
    (EdgeType.ASSOCIATION, "AG0", "AC0"),
    (EdgeType.ATTRIBUTION, "AG0", "EN0"),
    (EdgeType.DELEGATION, "AG0", "AG1"),
])
def test_permitted_edges_pass(etype, in_node, out_node):
    verdict = validate_edge(ProvEdge(etype.edge_id(0), etype, in_node, out_node), KINDS)
    assert verdict
    assert verdict.ok


def test_reversed_generation_is_rejected():
    verdict = validate_edge(ProvEdge("wgb-0", EdgeType.GENERATION, "EN0", "AC0"), KINDS)
    assert not verdict
    assert verdict.message == "Generation requires Activity→Entity"
    assert verdict.ids == ("wgb-0", "EN0", "AC0")


def test_self_loop_is_rejected():
    kinds = {"EN0": NodeKind.ENTITY}
    verdict = validate_edge(ProvEdge("wdf-0", EdgeType.DERIVATION, "EN0", "EN0"), kinds)
    assert not verdict
    assert "self-loop" in verdict.message


def test_unknown_endpoint_raises():
    with pytest.raises(UnknownNodeError) as excinfo:
        validate_edge(ProvEdge("used-0", EdgeType.USAGE, "EN9", "AC0"), KINDS)
    assert excinfo.value.node_id == "EN9"


@pytest.mark.parametrize("node_id", ["", "EN|1", "a:b", "tab\there", "AC\u00e90"])
def test_bad_node_ids(node_id):
    with pytest.raises(ModelError):
        ProvNode(node_id, NodeKind.ENTITY)


def test_node_attributes():
    node = ProvNode("EN0", NodeKind.ENTITY, (("path", "/tmp/a.c"), ("size", "10")))
    assert node.attribute_map() == {"type": "PROV_ENTITY", "path": "/tmp/a.c", "size": "10"}
    with pytest.raises(ModelError):
        ProvNode("EN0", NodeKind.ENTITY, (("type", "x"),))
    with pytest.raises(ModelError):
        ProvNode("EN0", NodeKind.ENTITY, (("path", "a"), ("path", "b")))
    with pytest.raises(ModelError, match="not ASCII"):
        ProvNode("EN0", NodeKind.ENTITY, (("path", "/tmp/caf\u00e9.c"),))


def test_edge_id_must_match_type():
    with pytest.raises(ModelError):
        ProvEdge("used-0", EdgeType.GENERATION, "AC0", "EN0")
    with pytest.raises(ModelError):
        ProvEdge("wgb-x", EdgeType.GENERATION, "AC0", "EN0")


def test_example_graph_is_valid(example_graph):
    assert validate_graph(example_graph)
    assert component_count(example_graph) == 22
    order = topological_order(example_graph)
    position = {node_id: i for i, node_id in enumerate(order)}
    for edge in example_graph.edges.values():
        assert position[edge.out_node] < position[edge.in_node]


def test_cycle_is_rejected():
    graph = ProvGraph()
    graph.add_node(ProvNode("EN0", NodeKind.ENTITY))
    graph.add_node(ProvNode("EN1", NodeKind.ENTITY))
    graph.add_edge(ProvEdge("wdf-0", EdgeType.DERIVATION, "EN0", "EN1"))
    graph.add_edge(ProvEdge("wdf-1", EdgeType.DERIVATION, "EN1", "EN0"))
    assert topological_order(graph) is None
    verdict = validate_graph(graph)
    assert not verdict
    assert verdict.message == "graph contains a cycle"


def test_dangling_edge_is_reported():
    graph = ProvGraph()
    graph.add_node(ProvNode("AC0", NodeKind.ACTIVITY))
    graph.add_edge(ProvEdge("wgb-0", EdgeType.GENERATION, "AC0", "EN5"))
    verdict = validate_graph(graph)
    assert not verdict
    assert "EN5" in verdict.ids


def test_duplicate_ids_rejected(example_graph):
    with pytest.raises(ModelError):
        example_graph.add_node(ProvNode("EN0", NodeKind.ENTITY))
    with pytest.raises(ModelError):
        example_graph.add_edge(ProvEdge("wgb-0", EdgeType.GENERATION, "AC1", "EN1"))
