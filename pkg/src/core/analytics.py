"""
Analytics Module
Filtered breadth-first backward traversal over the stored provenance graph:
which ancestors (and which input files) produced a given node.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Set

from core.d4m_codec import IN_NODE_COL, OUT_NODE_COL, TYPE_COL, KvEntry, TableId
from core.errors import StartNotFoundError
from core.kv_store import StoreHandle
from core.prov_model import EdgeType, NodeKind


# Store scans per level: transpose lookup + edge rows, plus node rows with a node filter.
SCANS_PER_LEVEL = 2
SCANS_PER_LEVEL_FILTERED = 3

LINEAGE_EDGES = frozenset({EdgeType.GENERATION, EdgeType.USAGE, EdgeType.DERIVATION})

logger = logging.getLogger("provd4m.analytics")

NodeFilter = Callable[[Dict[str, str]], bool]


@dataclass
class TraversalQuery:
    """Start nodes, hop count and optional edge/node filters."""
    start_nodes: FrozenSet[str]
    depth: int
    edge_filter: Optional[FrozenSet[EdgeType]] = None
    node_filter: Optional[NodeFilter] = None

    def __post_init__(self):
        self.start_nodes = frozenset(self.start_nodes)
        if not self.start_nodes:
            raise ValueError("start set must be non-empty")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.edge_filter is not None:
            self.edge_filter = frozenset(self.edge_filter)


@dataclass(frozen=True, order=True)
class TraversalRow:
    """
    One output row. Depth-0 rows carry only ``node_id``; deeper rows carry
    the ancestor ``in_node`` and descendant ``out_node`` of a found edge.
    """
    depth: int
    in_node: str = ""
    out_node: str = ""
    node_id: str = ""

    @property
    def in_label(self) -> str:
        return f"inNode|{self.in_node}" if self.depth else ""

    @property
    def out_label(self) -> str:
        return f"outNode|{self.out_node}" if self.depth else ""

    def sort_key(self):
        return (self.depth, self.node_id) if self.depth == 0 else (self.depth, self.in_node, self.out_node)


@dataclass
class TraversalResult:
    rows: List[TraversalRow] = field(default_factory=list)
    scans_performed: int = 0
    levels: int = 0
    missing_starts: List[str] = field(default_factory=list)

    @property
    def start_not_found(self) -> bool:
        return bool(self.missing_starts)

    def discovered(self) -> Set[str]:
        """Ancestor node ids named by rows at depth >= 1."""
        return {row.in_node for row in self.rows if row.depth}


def _node_attributes(entries: Iterable[KvEntry]) -> Dict[str, Dict[str, str]]:
    attrs: Dict[str, Dict[str, str]] = {}
    for entry in entries:
        name, _, value = entry.col[1:].partition("|")
        attrs.setdefault(entry.row, {})[name] = value
    return attrs


def bfs(store: StoreHandle, query: TraversalQuery) -> TraversalResult:
    """
    Walk from the start nodes toward their ancestors, one level per hop.

    Each level looks up ``:outNode|<x>`` for the whole frontier in the
    transpose table, reads the matching edge rows, drops edges whose type is
    outside the edge filter, and emits one row per (in_node, out_node). A node
    joins the frontier at most once; with a node filter, nodes it rejects
    still appear in their rows but are not expanded.

    Args:
        store: Store holding the node, edge and transpose tables
        query: Traversal parameters

    Returns:
        Rows ordered by depth then lexically, and the number of store scans
    """
    scans_before = store.scans
    result = TraversalResult()

    starts = sorted(query.start_nodes)
    present = {entry.row for entry in store.scan_rows(TableId.NODE, starts)}
    result.missing_starts = [node_id for node_id in starts if node_id not in present]
    if result.missing_starts:
        logger.warning(f"start not found: {', '.join(result.missing_starts)}")

    rows = [TraversalRow(0, node_id=node_id) for node_id in starts if node_id in present]
    visited = set(present)
    frontier = sorted(present)

    for level in range(1, query.depth + 1):
        if not frontier:
            break
        edge_ids = {entry.col for entry in store.scan_rows(
            TableId.EDGE_T, [OUT_NODE_COL + node_id for node_id in frontier])}
        if not edge_ids:
            break
        result.levels = level

        edges: Dict[str, Dict[str, str]] = {}
        for entry in store.scan_rows(TableId.EDGE, edge_ids):
            fields = edges.setdefault(entry.row, {})
            if entry.col.startswith(IN_NODE_COL):
                fields["in"] = entry.col[len(IN_NODE_COL):]
            elif entry.col.startswith(OUT_NODE_COL):
                fields["out"] = entry.col[len(OUT_NODE_COL):]
            elif entry.col.startswith(TYPE_COL):
                fields["type"] = entry.col[len(TYPE_COL):]

        level_rows = set()
        discovered = set()
        for fields in edges.values():
            if query.edge_filter is not None:
                if EdgeType.from_render(fields["type"]) not in query.edge_filter:
                    continue
            level_rows.add(TraversalRow(level, fields["in"], fields["out"]))
            discovered.add(fields["in"])
        rows.extend(sorted(level_rows, key=TraversalRow.sort_key))

        new_nodes = sorted(discovered - visited)
        visited.update(new_nodes)
        if query.node_filter is not None and new_nodes:
            attrs = _node_attributes(store.scan_rows(TableId.NODE, new_nodes))
            new_nodes = [n for n in new_nodes if query.node_filter(attrs.get(n, {}))]
        frontier = new_nodes

    result.rows = rows
    result.scans_performed = store.scans - scans_before
    return result


def lineage_inputs(store: StoreHandle, output_node: str, max_depth: int) -> Set[str]:
    """
    Entity ancestors of ``output_node`` over generation, usage and derivation edges.

    Raises:
        StartNotFoundError: if ``output_node`` is not stored
    """
    result = bfs(store, TraversalQuery(frozenset([output_node]), max_depth, LINEAGE_EDGES))
    if result.start_not_found:
        raise StartNotFoundError(output_node)
    candidates = result.discovered() - {output_node}
    if not candidates:
        return set()
    attrs = _node_attributes(store.scan_rows(TableId.NODE, candidates))
    entity = NodeKind.ENTITY.render
    return {node_id for node_id in candidates if attrs.get(node_id, {}).get("type") == entity}


def node_kind_filter(kinds: Iterable[NodeKind]) -> NodeFilter:
    """Node filter admitting only the given kinds to the frontier."""
    wanted = {kind.render for kind in kinds}
    return lambda attrs: attrs.get("type") in wanted


def format_result(result: TraversalResult) -> List[str]:
    """One line per row: ``(depthID|0,<id>,)     1,`` or ``(depthID|d,inNode|a,)     outNode|b,``."""
    lines = []
    for row in result.rows:
        if row.depth == 0:
            lines.append(f"(depthID|0,{row.node_id},)     1,")
        else:
            lines.append(f"(depthID|{row.depth},{row.in_label},)     {row.out_label},")
    return lines


def format_assoc(result: TraversalResult) -> List[str]:
    """
    Associative-array display: rows keyed by (depth, inNode), keeping the
    lexically smallest outNode when several edges share a key.
    """
    collapsed: Dict[tuple, TraversalRow] = {}
    for row in result.rows:
        key = (row.depth, row.node_id if row.depth == 0 else row.in_node)
        if key not in collapsed or row.out_node < collapsed[key].out_node:
            collapsed[key] = row
    return format_result(TraversalResult(sorted(collapsed.values(), key=TraversalRow.sort_key)))


def format_csv(result: TraversalResult) -> List[str]:
    """``depth,in_node,out_node`` lines, header first; depth-0 rows put the id in in_node."""
    lines = ["depth,in_node,out_node"]
    for row in result.rows:
        if row.depth == 0:
            lines.append(f"0,{row.node_id},")
        else:
            lines.append(f"{row.depth},{row.in_node},{row.out_node}")
    return lines
