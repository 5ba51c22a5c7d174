"""
Errors Module
Exception hierarchy shared by the provenance store modules.
"""

from typing import Optional


class ProvenanceError(Exception):
    """Base class for every error raised by the provenance store."""


class ModelError(ProvenanceError, ValueError):
    """Invalid node, edge or graph construction."""


class UnknownNodeError(ProvenanceError, KeyError):
    """A node id was referenced that the graph (or kind map) does not hold."""

    def __init__(self, node_id: str):
        super().__init__(node_id)
        self.node_id = node_id

    def __str__(self) -> str:
        return f"unknown node id: {self.node_id}"


class StartNotFoundError(ProvenanceError, LookupError):
    """A traversal start node is absent from the store."""

    def __init__(self, node_id: str):
        super().__init__(f"start not found: {node_id}")
        self.node_id = node_id


class CodecError(ProvenanceError, ValueError):
    """Entries could not be encoded or decoded."""


class EntryInvariantError(CodecError):
    """A key-value entry breaks the field invariants."""


class TsvParseError(CodecError):
    """A TSV batch line could not be parsed."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class StoreError(ProvenanceError, RuntimeError):
    """Base class for key-value store failures."""


class CorruptSnapshotError(StoreError):
    """A persisted snapshot is truncated or does not match its manifest."""


class StoreClosedError(StoreError):
    """The store no longer accepts writes."""


class PersistenceError(StoreError):
    """The store has no persistence path."""


class MalformedEventError(ProvenanceError, ValueError):
    """An event record cannot be translated into graph components."""


class WireFormatError(ProvenanceError, ValueError):
    """A curator wire line is malformed."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class PipelineError(ProvenanceError, RuntimeError):
    """A pipeline stage failed; ``report`` holds the progress made so far."""

    def __init__(self, message: str, report: Optional[object] = None):
        super().__init__(message)
        self.report = report
