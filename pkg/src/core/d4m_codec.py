"""
D4M Codec Module
Exploded-schema encoding of provenance components as (row, column, value)
entries, and the tab-separated batch file format.
"""

from enum import Enum
from typing import BinaryIO, Dict, Iterable, Iterator, List, NamedTuple, Sequence, Tuple

from core.errors import CodecError, EntryInvariantError, ModelError, TsvParseError
from core.prov_model import EdgeType, NodeKind, ProvEdge, ProvGraph, ProvNode


ONE = "1"
TYPE_COL = ":type|"
IN_NODE_COL = ":inNode|"
IN_TYPE_COL = ":inType|"
OUT_NODE_COL = ":outNode|"
OUT_TYPE_COL = ":outType|"


class TableId(Enum):
    """Logical tables of the schema, valued by their table names."""
    NODE = "nodeTable"
    EDGE = "edgeTable"
    EDGE_T = "edgeTableT"

    @property
    def batch_suffix(self) -> str:
        return _BATCH_SUFFIX[self]


_BATCH_SUFFIX = {TableId.NODE: "node", TableId.EDGE: "edge", TableId.EDGE_T: "edgeT"}


class KvEntry(NamedTuple):
    """One sorted-store triple."""
    row: str
    col: str
    val: str = ONE


def check_entry(entry: KvEntry) -> KvEntry:
    """Raise EntryInvariantError unless the entry can be stored and written."""
    if not entry.row or not entry.col:
        raise EntryInvariantError(f"empty row or column in {entry!r}")
    for text in entry:
        if "\t" in text or "\n" in text:
            raise EntryInvariantError(f"tab or newline inside {entry!r}")
        if not text.isascii():
            raise EntryInvariantError(f"non-ASCII text inside {entry!r}")
    return entry


def batch_file_name(seq: int, table: TableId) -> str:
    """File name of one table's part of batch ``seq``."""
    return f"batch-{seq:06d}-{table.batch_suffix}.tsv"


def encode_node(node: ProvNode) -> List[KvEntry]:
    """Type entry first, then one entry per attribute in attribute order."""
    entries = [KvEntry(node.id, TYPE_COL + node.kind.render)]
    for name, value in node.attributes:
        entries.append(KvEntry(node.id, f":{name}|{value}"))
    return entries


def encode_edge(edge: ProvEdge) -> Tuple[List[KvEntry], List[KvEntry]]:
    """
    Encode an edge for the edge table and its transpose.

    Args:
        edge: Edge to encode

    Returns:
        (edge entries in column order, transposed entries in the same order)
    """
    render = edge.etype.render
    entries = [
        KvEntry(edge.id, IN_NODE_COL + edge.in_node),
        KvEntry(edge.id, f"{IN_TYPE_COL}{render}|{edge.in_node}"),
        KvEntry(edge.id, OUT_NODE_COL + edge.out_node),
        KvEntry(edge.id, f"{OUT_TYPE_COL}{render}|{edge.out_node}"),
        KvEntry(edge.id, TYPE_COL + render),
    ]
    return entries, [transpose(e) for e in entries]


def transpose(entry: KvEntry) -> KvEntry:
    return KvEntry(entry.col, entry.row, entry.val)


def encode_components(components: Iterable[object]) -> Dict[TableId, List[KvEntry]]:
    """Encode a mixed stream of nodes and edges into per-table entry lists."""
    tables: Dict[TableId, List[KvEntry]] = {table: [] for table in TableId}
    for component in components:
        if isinstance(component, ProvNode):
            tables[TableId.NODE].extend(encode_node(component))
        elif isinstance(component, ProvEdge):
            edge_entries, transpose_entries = encode_edge(component)
            tables[TableId.EDGE].extend(edge_entries)
            tables[TableId.EDGE_T].extend(transpose_entries)
        else:
            raise CodecError(f"not a graph component: {component!r}")
    return tables


def encode_graph(graph: ProvGraph) -> Dict[TableId, List[KvEntry]]:
    return encode_components(graph.components())


def _split_col(col: str) -> Tuple[str, str]:
    if not col.startswith(":") or "|" not in col:
        raise CodecError(f"malformed column {col!r}")
    name, _, value = col[1:].partition("|")
    return name, value


def _single_row(entries: Sequence[KvEntry]) -> str:
    if not entries:
        raise CodecError("empty entry set")
    row = entries[0].row
    for entry in entries:
        if entry.row != row:
            raise CodecError(f"mixed rows {row!r} and {entry.row!r}")
    return row


def decode_node_entries(entries: Sequence[KvEntry]) -> ProvNode:
    """
    Rebuild a node from its entries.

    Raises:
        CodecError: empty set, mixed rows, malformed column, or a missing,
            repeated or unknown type column
    """
    row = _single_row(entries)
    kind = None
    attributes = []
    for entry in entries:
        name, value = _split_col(entry.col)
        if name == "type":
            if kind is not None:
                raise CodecError(f"node {row}: more than one type column")
            try:
                kind = NodeKind.from_render(value)
            except ModelError as e:
                raise CodecError(f"node {row}: {e}") from None
        else:
            attributes.append((name, value))
    if kind is None:
        raise CodecError(f"node {row}: missing type column")
    try:
        return ProvNode(row, kind, tuple(attributes))
    except ModelError as e:
        raise CodecError(str(e)) from None


def decode_edge_entries(entries: Sequence[KvEntry]) -> ProvEdge:
    """
    Rebuild an edge from its edge-table entries.

    :inType and :outType columns are optional but must agree with :type
    and with the endpoints when present.

    Raises:
        CodecError: missing required column or inconsistent type columns
    """
    row = _single_row(entries)
    fields: Dict[str, str] = {}
    typed: List[Tuple[str, str]] = []
    for entry in entries:
        name, value = _split_col(entry.col)
        if name in ("inType", "outType"):
            typed.append((name, value))
        elif name in ("inNode", "outNode", "type"):
            if name in fields and fields[name] != value:
                raise CodecError(f"edge {row}: conflicting {name} columns")
            fields[name] = value

    for required in ("inNode", "outNode", "type"):
        if required not in fields:
            raise CodecError(f"edge {row}: missing :{required} column")

    try:
        etype = EdgeType.from_render(fields["type"])
    except ModelError as e:
        raise CodecError(f"edge {row}: {e}") from None

    for name, value in typed:
        render, _, node_id = value.partition("|")
        endpoint = fields["inNode"] if name == "inType" else fields["outNode"]
        if render != etype.render or node_id != endpoint:
            raise CodecError(f"edge {row}: :{name}|{value} inconsistent with type/endpoints")

    try:
        return ProvEdge(row, etype, fields["inNode"], fields["outNode"])
    except ModelError as e:
        raise CodecError(str(e)) from None


def format_entry(entry: KvEntry) -> bytes:
    return f"{entry.row}\t{entry.col}\t{entry.val}\n".encode("ascii")


def write_tsv(entries: Iterable[KvEntry], sink: BinaryIO) -> int:
    """
    Write entries as ``row<TAB>col<TAB>val<LF>`` lines, in input order.

    Args:
        entries: Entries to write
        sink: Binary file-like object

    Returns:
        Number of bytes written
    """
    written = 0
    chunk: List[bytes] = []
    for entry in entries:
        check_entry(entry)
        chunk.append(format_entry(entry))
        if len(chunk) >= 4096:
            data = b"".join(chunk)
            sink.write(data)
            written += len(data)
            chunk = []
    if chunk:
        data = b"".join(chunk)
        sink.write(data)
        written += len(data)
    return written


def parse_tsv(source: BinaryIO) -> Iterator[KvEntry]:
    """
    Yield entries of a TSV batch in file order.

    Raises:
        TsvParseError: a line without exactly three fields
        EntryInvariantError: a line with an empty row or column
    """
    for line_no, raw in enumerate(source, start=1):
        try:
            line = raw.decode("ascii")
        except UnicodeDecodeError:
            raise TsvParseError(line_no, "non-ASCII bytes") from None
        if line.endswith("\n"):
            line = line[:-1]
        fields = line.split("\t")
        if len(fields) != 3:
            raise TsvParseError(line_no, f"expected 3 fields, got {len(fields)}")
        if not fields[0] or not fields[1]:
            raise EntryInvariantError(f"line {line_no}: empty row or column")
        yield KvEntry(fields[0], fields[1], fields[2])
