"""
Key-Value Store Module
Embedded sorted key-value store holding the node, edge and transpose tables,
with batched writes, row/prefix scans and snapshot persistence.
"""

import bisect
import hashlib
import io
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import yaml

from core.d4m_codec import KvEntry, TableId, check_entry, parse_tsv, write_tsv
from core.errors import (
    CodecError,
    CorruptSnapshotError,
    PersistenceError,
    StoreClosedError,
)


FORMAT_VERSION = 1
MANIFEST_NAME = "MANIFEST"
APPLIED_HISTORY = 4096

logger = logging.getLogger("provd4m.store")


class TableStats(NamedTuple):
    entries: int
    rows: int


@dataclass
class IngestStats:
    """Counters of one or more ingested batches."""
    entries_written: int = 0
    batches: int = 0
    wall_time: float = 0.0
    components: int = 0
    table_entries: Dict[TableId, int] = field(default_factory=dict)

    @property
    def components_per_sec(self) -> float:
        return self.components / self.wall_time if self.wall_time > 0 else 0.0

    def add(self, other: "IngestStats") -> "IngestStats":
        self.entries_written += other.entries_written
        self.batches += other.batches
        self.wall_time += other.wall_time
        self.components += other.components
        for table, count in other.table_entries.items():
            self.table_entries[table] = self.table_entries.get(table, 0) + count
        return self

    csv_header = "entries_written,batches,components,seconds,components_per_sec"

    def csv_row(self) -> str:
        return (f"{self.entries_written},{self.batches},{self.components},"
                f"{self.wall_time:.6f},{self.components_per_sec:.2f}")


class _Table:
    """Cells keyed by (row, col); the sorted key list is rebuilt lazily after writes."""

    def __init__(self):
        self.cells: Dict[Tuple[str, str], str] = {}
        self._keys: List[Tuple[str, str]] = []
        self._pending: List[Tuple[str, str]] = []

    def put(self, entries: Iterable[KvEntry]) -> None:
        cells = self.cells
        for row, col, val in entries:
            key = (row, col)
            if key not in cells:
                self._pending.append(key)
            cells[key] = val

    def keys(self) -> List[Tuple[str, str]]:
        if self._pending:
            self._keys.extend(self._pending)
            self._keys.sort()
            self._pending = []
        return self._keys

    def scan_row(self, row: str) -> List[KvEntry]:
        keys = self.keys()
        i = bisect.bisect_left(keys, (row, ""))
        out = []
        while i < len(keys) and keys[i][0] == row:
            key = keys[i]
            out.append(KvEntry(key[0], key[1], self.cells[key]))
            i += 1
        return out

    def scan_prefix(self, prefix: str) -> List[KvEntry]:
        keys = self.keys()
        i = bisect.bisect_left(keys, (prefix, ""))
        out = []
        while i < len(keys) and keys[i][0].startswith(prefix):
            key = keys[i]
            out.append(KvEntry(key[0], key[1], self.cells[key]))
            i += 1
        return out

    def stats(self) -> TableStats:
        keys = self.keys()
        rows = 0
        last = None
        for row, _ in keys:
            if row != last:
                rows += 1
                last = row
        return TableStats(len(keys), rows)


class StoreHandle:
    """
    One store instance: three sorted tables plus an optional snapshot directory.

    A single writer mutates the store; readers may scan concurrently. Every
    operation holds the store lock, so a batch is visible all at once.
    """

    def __init__(self, root_path: Optional[Path] = None, applied_history: int = APPLIED_HISTORY):
        self.root_path = root_path
        self.tables: Dict[TableId, _Table] = {table: _Table() for table in TableId}
        # Digests of recently applied batches, oldest first.
        self.applied_batches: Dict[str, None] = {}
        self.applied_history = max(0, applied_history)
        self.scans = 0
        self.closed = False
        self._lock = threading.RLock()

    # Writes

    def put_batches(self, batches: Mapping[TableId, Sequence[KvEntry]]) -> Dict[TableId, int]:
        """
        Apply entry batches to several tables atomically.

        Raises:
            StoreClosedError: if the store was closed; nothing is applied
            EntryInvariantError: if any entry is invalid; nothing is applied
        """
        for entries in batches.values():
            for entry in entries:
                check_entry(entry)
        with self._lock:
            if self.closed:
                raise StoreClosedError("write queue closed, batch rejected")
            for table, entries in batches.items():
                self.tables[table].put(entries)
        return {table: len(entries) for table, entries in batches.items()}

    def put_batch(self, table: TableId, entries: Sequence[KvEntry]) -> int:
        return self.put_batches({table: entries})[table]

    def mark_applied(self, digest: str) -> None:
        """Remember a batch digest, forgetting the oldest beyond ``applied_history``."""
        with self._lock:
            self.applied_batches.pop(digest, None)
            self.applied_batches[digest] = None
            while len(self.applied_batches) > self.applied_history:
                del self.applied_batches[next(iter(self.applied_batches))]

    def is_applied(self, digest: str) -> bool:
        with self._lock:
            return digest in self.applied_batches

    def close(self) -> None:
        with self._lock:
            self.closed = True

    # Reads

    def scan_row(self, table: TableId, row: str) -> List[KvEntry]:
        with self._lock:
            self.scans += 1
            return self.tables[table].scan_row(row)

    def scan_rows(self, table: TableId, rows: Iterable[str]) -> List[KvEntry]:
        """Entries of several rows in (row, col) order, counted as one scan."""
        with self._lock:
            self.scans += 1
            out: List[KvEntry] = []
            for row in sorted(set(rows)):
                out.extend(self.tables[table].scan_row(row))
            return out

    def scan_prefix(self, table: TableId, row_prefix: str) -> List[KvEntry]:
        with self._lock:
            self.scans += 1
            return self.tables[table].scan_prefix(row_prefix)

    def table_stats(self, table: TableId) -> TableStats:
        with self._lock:
            return self.tables[table].stats()

    def dump(self, table: TableId) -> bytes:
        """Canonical TSV bytes of a table in key order."""
        with self._lock:
            t = self.tables[table]
            sink = io.BytesIO()
            write_tsv((KvEntry(row, col, t.cells[(row, col)]) for row, col in t.keys()), sink)
            return sink.getvalue()

    # Persistence

    def flush(self) -> Path:
        """
        Write a durable snapshot of every table.

        Table files are staged as ``<table>.tsv.new``; renaming MANIFEST.new
        over MANIFEST is the commit point, after which the staged files are
        moved into place.

        Returns:
            Path of the committed MANIFEST

        Raises:
            PersistenceError: if the store has no root path
        """
        if self.root_path is None:
            raise PersistenceError("no persistence path")

        root = self.root_path
        root.mkdir(parents=True, exist_ok=True)
        staged = []
        try:
            with self._lock:
                manifest = {"format_version": FORMAT_VERSION, "tables": {},
                            "applied_batches": list(self.applied_batches)}
                for table in TableId:
                    data = self.dump(table)
                    new_path = root / f"{table.value}.tsv.new"
                    _write_durable(new_path, data)
                    staged.append((new_path, root / f"{table.value}.tsv"))
                    manifest["tables"][table.value] = {
                        "entries": len(self.tables[table].cells),
                        "sha256": hashlib.sha256(data).hexdigest(),
                    }
            manifest_new = root / (MANIFEST_NAME + ".new")
            _write_durable(manifest_new, yaml.safe_dump(manifest, sort_keys=True).encode("ascii"))
            os.replace(manifest_new, root / MANIFEST_NAME)
        except OSError:
            for new_path, _ in staged:
                if new_path.exists():
                    new_path.unlink()
            raise
        _sync_directory(root)

        for new_path, final_path in staged:
            os.replace(new_path, final_path)
        _sync_directory(root)
        logger.debug(f"Snapshot written to {root}")
        return root / MANIFEST_NAME


def _write_durable(path: Path, data: bytes) -> None:
    with open(path, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())


def _sync_directory(path: Path) -> None:
    """Make renames inside ``path`` durable."""
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def _load_manifest(root: Path) -> dict:
    try:
        manifest = yaml.safe_load((root / MANIFEST_NAME).read_bytes().decode("ascii"))
    except (yaml.YAMLError, UnicodeDecodeError) as e:
        raise CorruptSnapshotError(f"unreadable MANIFEST in {root}: {e}") from None
    if not isinstance(manifest, dict) or manifest.get("format_version") != FORMAT_VERSION:
        raise CorruptSnapshotError(f"unsupported MANIFEST in {root}")
    if not isinstance(manifest.get("tables") or {}, dict) \
            or not isinstance(manifest.get("applied_batches") or [], list):
        raise CorruptSnapshotError(f"malformed MANIFEST in {root}")
    return manifest


def open_store(root_path: Union[str, Path, None] = None,
               applied_history: int = APPLIED_HISTORY) -> StoreHandle:
    """
    Open a store, loading the committed snapshot under ``root_path`` if any.

    Args:
        root_path: Snapshot directory; empty or None for an in-memory store
        applied_history: Applied-batch digests kept for idempotent ingest

    Returns:
        The store handle

    Raises:
        CorruptSnapshotError: if a table file does not match the MANIFEST
    """
    if not root_path:
        return StoreHandle(None, applied_history)

    root = Path(root_path)
    store = StoreHandle(root, applied_history)
    stale_manifest = root / (MANIFEST_NAME + ".new")
    if stale_manifest.exists():
        stale_manifest.unlink()
    if not (root / MANIFEST_NAME).exists():
        return store

    manifest = _load_manifest(root)
    tables = manifest.get("tables") or {}
    loaded: Dict[TableId, List[KvEntry]] = {}
    for table in TableId:
        meta = tables.get(table.value)
        if not isinstance(meta, dict):
            raise CorruptSnapshotError(f"MANIFEST lacks table {table.value}")
        path = root / f"{table.value}.tsv"
        new_path = root / f"{table.value}.tsv.new"
        if new_path.exists():
            if hashlib.sha256(new_path.read_bytes()).hexdigest() == meta.get("sha256"):
                os.replace(new_path, path)
            else:
                new_path.unlink()
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise CorruptSnapshotError(f"missing table file {path}") from None
        if hashlib.sha256(data).hexdigest() != meta.get("sha256"):
            raise CorruptSnapshotError(f"checksum mismatch for {path}")
        try:
            entries = list(parse_tsv(io.BytesIO(data)))
        except CodecError as e:
            raise CorruptSnapshotError(f"{path}: {e}") from None
        if len(entries) != meta.get("entries"):
            raise CorruptSnapshotError(f"entry count mismatch for {path}")
        loaded[table] = entries

    for table, entries in loaded.items():
        store.tables[table].put(entries)
    for digest in manifest.get("applied_batches") or []:
        store.mark_applied(str(digest))
    logger.debug(f"Opened store at {root}")
    return store
