"""
Graph Generator Module
Deterministic random provenance graphs for the ingest and query benchmarks.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Set, Tuple

import numpy as np

from core.errors import ModelError, UnknownNodeError
from core.prov_model import ENDPOINT_KINDS, EdgeType, NodeKind, ProvEdge, ProvGraph, ProvNode


KIND_ORDER = (NodeKind.ENTITY, NodeKind.ACTIVITY, NodeKind.AGENT)
ID_PREFIX = {NodeKind.ENTITY: "EN", NodeKind.ACTIVITY: "AC", NodeKind.AGENT: "AG"}

# Relations a new node can take as descendant, keyed by its kind.
RELATIONS_INTO: Dict[NodeKind, List[EdgeType]] = {
    kind: [etype for etype, (_, out_kind) in ENDPOINT_KINDS.items() if out_kind is kind]
    for kind in KIND_ORDER
}


@dataclass(frozen=True)
class GenConfig:
    """Inputs of the generator: size knobs plus seed and kind mix."""
    num_nodes: int
    max_edges_per_node: int = 4
    seed: int = 0
    kind_weights: Tuple[float, float, float] = (6.0, 3.0, 1.0)

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ModelError("num_nodes must be >= 1")
        if self.max_edges_per_node < 1:
            raise ModelError("max_edges_per_node must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ModelError("seed must be a 64-bit unsigned integer")
        if len(self.kind_weights) != 3 or min(self.kind_weights) < 0 or sum(self.kind_weights) <= 0:
            raise ModelError("kind_weights must be three non-negative weights, not all zero")


def generate(config: GenConfig) -> ProvGraph:
    """
    Generate a valid, acyclic provenance graph.

    Nodes are created in order; each new node receives up to
    ``max_edges_per_node`` edges whose ancestor is a uniformly drawn earlier
    node of the kind the relation requires. All draws come from one PCG64
    stream seeded with ``config.seed``, taken in bulk so that the output is a
    pure function of the config.

    Args:
        config: Generator inputs

    Returns:
        The generated graph
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    weights = np.asarray(config.kind_weights, dtype=float)
    n = config.num_nodes

    kinds = rng.choice(len(KIND_ORDER), size=n, p=weights / weights.sum())
    edge_counts = rng.integers(0, config.max_edges_per_node, size=n, endpoint=True)
    edge_counts[0] = 0
    total = int(edge_counts.sum())
    type_draws = rng.random(total)
    partner_draws = rng.random(total)

    graph = ProvGraph()
    pools: Dict[NodeKind, List[str]] = {kind: [] for kind in KIND_ORDER}
    edge_numbers = {etype: 0 for etype in EdgeType}
    seen: Set[Tuple[EdgeType, str, str]] = set()
    cursor = 0

    for i in range(n):
        kind = KIND_ORDER[int(kinds[i])]
        node_id = f"{ID_PREFIX[kind]}{len(pools[kind])}"
        relations = RELATIONS_INTO[kind]

        for _ in range(int(edge_counts[i])):
            etype = relations[int(type_draws[cursor] * len(relations))]
            pool = pools[ENDPOINT_KINDS[etype][0]]
            pick = partner_draws[cursor]
            cursor += 1
            if not pool:
                continue
            ancestor = pool[int(pick * len(pool))]
            key = (etype, ancestor, node_id)
            if key in seen:
                continue
            seen.add(key)
            graph.edges[etype.edge_id(edge_numbers[etype])] = ProvEdge(
                etype.edge_id(edge_numbers[etype]), etype, ancestor, node_id
            )
            edge_numbers[etype] += 1

        graph.nodes[node_id] = ProvNode(node_id, kind)
        pools[kind].append(node_id)

    return graph


def graph_depth(graph: ProvGraph, start: Iterable[str]) -> int:
    """
    Depth of the backward traversal from ``start``.

    The traversal walks out_node → in_node level by level with a visited
    set; the depth is the last level at which any edge is found.

    Args:
        graph: Graph to walk
        start: Starting node ids

    Returns:
        Hop count, 0 if no start node has an incoming edge

    Raises:
        UnknownNodeError: if a start id is not in the graph
    """
    frontier = set()
    for node_id in start:
        if node_id not in graph.nodes:
            raise UnknownNodeError(node_id)
        frontier.add(node_id)

    index = graph.ancestors_index()
    visited = set(frontier)
    depth = 0
    level = 0
    while frontier:
        level += 1
        discovered = set()
        found_edge = False
        for node_id in frontier:
            for edge in index.get(node_id, ()):
                found_edge = True
                discovered.add(edge.in_node)
        if found_edge:
            depth = level
        frontier = discovered - visited
        visited |= frontier
    return depth


def sink_nodes(graph: ProvGraph) -> List[str]:
    """
    Nodes without descendants, in generation order.

    A backward traversal from all of them visits every node of the graph,
    which makes them the start set of full-graph queries. The newest node of
    a generated graph is always the last one.
    """
    if not graph.nodes:
        raise ModelError("empty graph has no sink")
    ancestors = {edge.in_node for edge in graph.edges.values()}
    return [node_id for node_id in graph.nodes if node_id not in ancestors]
