"""
Provenance Model Module
PROV-DM subset used by the store: node kinds, relation types, nodes, edges
and graphs, with the validity rules every other module relies on.
"""

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from core.errors import ModelError, UnknownNodeError


FORBIDDEN_ID_CHARS = ("\t", "\n", "|", ":")


class NodeKind(Enum):
    """Types of provenance nodes."""
    ENTITY = "PROV_ENTITY"
    ACTIVITY = "PROV_ACTIVITY"
    AGENT = "PROV_AGENT"

    @property
    def render(self) -> str:
        return self.value

    @classmethod
    def from_render(cls, text: str) -> "NodeKind":
        try:
            return cls(text)
        except ValueError:
            raise ModelError(f"unknown node kind: {text!r}") from None


class EdgeType(Enum):
    """Types of provenance relations, as (rendering, id prefix)."""
    GENERATION = ("PROV_GENERATION", "wgb")
    USAGE = ("PROV_USAGE", "used")
    COMMUNICATION = ("PROV_COMMUNICATION", "wib")
    DERIVATION = ("PROV_DERIVATION", "wdf")
    ASSOCIATION = ("PROV_ASSOCIATION", "waw")
    ATTRIBUTION = ("PROV_ATTRIBUTION", "wat")
    DELEGATION = ("PROV_DELEGATION", "aobo")

    @property
    def render(self) -> str:
        return self.value[0]

    @property
    def prefix(self) -> str:
        return self.value[1]

    @classmethod
    def from_render(cls, text: str) -> "EdgeType":
        for etype in cls:
            if etype.render == text:
                return etype
        raise ModelError(f"unknown edge type: {text!r}")

    @classmethod
    def from_prefix(cls, prefix: str) -> "EdgeType":
        for etype in cls:
            if etype.prefix == prefix:
                return etype
        raise ModelError(f"unknown edge id prefix: {prefix!r}")

    def edge_id(self, number: int) -> str:
        """Build the identifier of the ``number``-th edge of this type."""
        return f"{self.prefix}-{number}"


# (in_node kind, out_node kind) per relation; in_node is the ancestor/cause.
ENDPOINT_KINDS: Dict[EdgeType, Tuple[NodeKind, NodeKind]] = {
    EdgeType.GENERATION: (NodeKind.ACTIVITY, NodeKind.ENTITY),
    EdgeType.USAGE: (NodeKind.ENTITY, NodeKind.ACTIVITY),
    EdgeType.COMMUNICATION: (NodeKind.ACTIVITY, NodeKind.ACTIVITY),
    EdgeType.DERIVATION: (NodeKind.ENTITY, NodeKind.ENTITY),
    EdgeType.ASSOCIATION: (NodeKind.AGENT, NodeKind.ACTIVITY),
    EdgeType.ATTRIBUTION: (NodeKind.AGENT, NodeKind.ENTITY),
    EdgeType.DELEGATION: (NodeKind.AGENT, NodeKind.AGENT),
}

_EDGE_ID = re.compile(r"^([a-z]+)-(\d+)$")


def check_node_id(node_id: str) -> None:
    """Raise ModelError unless ``node_id`` is usable as a store row key."""
    if not node_id:
        raise ModelError("node id must be non-empty")
    if not node_id.isascii():
        raise ModelError(f"node id {node_id!r} is not ASCII")
    for ch in FORBIDDEN_ID_CHARS:
        if ch in node_id:
            raise ModelError(f"node id {node_id!r} contains forbidden character {ch!r}")


@dataclass(frozen=True)
class ProvNode:
    """A provenance vertex with its ordered attributes."""
    id: str
    kind: NodeKind
    attributes: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        check_node_id(self.id)
        if not isinstance(self.kind, NodeKind):
            raise ModelError(f"node {self.id}: kind must be a NodeKind")
        object.__setattr__(self, "attributes", tuple(tuple(a) for a in self.attributes))
        seen = set()
        for name, value in self.attributes:
            if not name or name == "type":
                raise ModelError(f"node {self.id}: invalid attribute name {name!r}")
            if name in seen:
                raise ModelError(f"node {self.id}: duplicate attribute {name!r}")
            for text in (name, value):
                if "\t" in text or "\n" in text:
                    raise ModelError(f"node {self.id}: attribute contains tab or newline")
                if not text.isascii():
                    raise ModelError(f"node {self.id}: attribute {name!r} is not ASCII")
            if "|" in name or ":" in name:
                raise ModelError(f"node {self.id}: attribute name {name!r} contains a separator")
            seen.add(name)

    def attribute_map(self) -> Dict[str, str]:
        """Attributes as a dict, including ``type``."""
        attrs = {"type": self.kind.render}
        attrs.update(self.attributes)
        return attrs


@dataclass(frozen=True)
class ProvEdge:
    """A directed relation from ancestor ``in_node`` to descendant ``out_node``."""
    id: str
    etype: EdgeType
    in_node: str
    out_node: str

    def __post_init__(self):
        match = _EDGE_ID.match(self.id)
        if not match or match.group(1) != self.etype.prefix:
            raise ModelError(
                f"edge id {self.id!r} must be '{self.etype.prefix}-<n>' for {self.etype.render}"
            )
        check_node_id(self.in_node)
        check_node_id(self.out_node)


@dataclass
class Verdict:
    """Outcome of a validation: ok, or the first violation found."""
    ok: bool
    message: str = ""
    ids: Tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok

    @classmethod
    def passed(cls) -> "Verdict":
        return cls(True)

    @classmethod
    def violation(cls, message: str, *ids: str) -> "Verdict":
        return cls(False, message, ids)


@dataclass
class ProvGraph:
    """Nodes and edges keyed by id, kept in insertion order."""
    nodes: Dict[str, ProvNode] = field(default_factory=dict)
    edges: Dict[str, ProvEdge] = field(default_factory=dict)

    def add_node(self, node: ProvNode) -> ProvNode:
        if node.id in self.nodes:
            raise ModelError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        return node

    def add_edge(self, edge: ProvEdge) -> ProvEdge:
        if edge.id in self.edges:
            raise ModelError(f"duplicate edge id {edge.id}")
        self.edges[edge.id] = edge
        return edge

    def kind_of(self) -> Dict[str, NodeKind]:
        return {node_id: node.kind for node_id, node in self.nodes.items()}

    def components(self) -> Iterator[object]:
        """All nodes then all edges, in insertion order."""
        yield from self.nodes.values()
        yield from self.edges.values()

    def ancestors_index(self) -> Dict[str, List[ProvEdge]]:
        """Map each node id to the edges pointing at it (edges whose out_node it is)."""
        index: Dict[str, List[ProvEdge]] = {}
        for edge in self.edges.values():
            index.setdefault(edge.out_node, []).append(edge)
        return index


def validate_edge(edge: ProvEdge, kind_of: Mapping[str, NodeKind]) -> Verdict:
    """
    Check an edge against the endpoint-kind table.

    Args:
        edge: Edge to check
        kind_of: Node id to kind mapping

    Returns:
        Verdict, ok iff the endpoint kinds are permitted and the edge is no self-loop

    Raises:
        UnknownNodeError: if an endpoint is not in ``kind_of``
    """
    for node_id in (edge.in_node, edge.out_node):
        if node_id not in kind_of:
            raise UnknownNodeError(node_id)

    if edge.in_node == edge.out_node:
        return Verdict.violation(f"{edge.id}: self-loop on {edge.in_node}", edge.id, edge.in_node)

    want_in, want_out = ENDPOINT_KINDS[edge.etype]
    got_in, got_out = kind_of[edge.in_node], kind_of[edge.out_node]
    if (got_in, got_out) != (want_in, want_out):
        name = edge.etype.name.capitalize()
        return Verdict.violation(
            f"{name} requires {want_in.name.capitalize()}→{want_out.name.capitalize()}",
            edge.id, edge.in_node, edge.out_node,
        )
    return Verdict.passed()


def component_count(graph: ProvGraph) -> int:
    """Number of graph components (nodes plus edges)."""
    return len(graph.nodes) + len(graph.edges)


def topological_order(graph: ProvGraph) -> Optional[List[str]]:
    """
    Kahn ordering over the descendant-to-ancestor orientation.

    Returns:
        Node ids, descendants first, or None if the graph has a cycle
    """
    indegree = {node_id: 0 for node_id in graph.nodes}
    successors: Dict[str, List[str]] = {}
    for edge in graph.edges.values():
        successors.setdefault(edge.out_node, []).append(edge.in_node)
        indegree[edge.in_node] += 1

    ready = deque(node_id for node_id, degree in indegree.items() if degree == 0)
    order = []
    while ready:
        node_id = ready.popleft()
        order.append(node_id)
        for succ in successors.get(node_id, ()):
            indegree[succ] -= 1
            if indegree[succ] == 0:
                ready.append(succ)

    return order if len(order) == len(indegree) else None


def validate_graph(graph: ProvGraph) -> Verdict:
    """Check endpoint resolution, every edge rule, and acyclicity."""
    kinds = graph.kind_of()
    for edge in graph.edges.values():
        for node_id in (edge.in_node, edge.out_node):
            if node_id not in kinds:
                return Verdict.violation(f"{edge.id}: endpoint {node_id} not in graph", edge.id, node_id)
        verdict = validate_edge(edge, kinds)
        if not verdict:
            return verdict

    if topological_order(graph) is None:
        return Verdict.violation("graph contains a cycle")
    return Verdict.passed()
