"""
Ingest Pipeline Module
Translates collector events into provenance components, spools them as TSV
batches and loads the batches into the store while measuring throughput.
"""

import hashlib
import io
import logging
import re
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.d4m_codec import KvEntry, TableId, batch_file_name, encode_edge, encode_node, parse_tsv, write_tsv
from core.errors import CodecError, MalformedEventError, ModelError, PipelineError
from core.kv_store import IngestStats, StoreHandle
from core.prov_model import EdgeType, NodeKind, ProvEdge, ProvNode
from utils.logger import PerformanceLogger
from utils.threaded_loader import ThreadedLoader


logger = logging.getLogger("provd4m.pipeline")


class EventType(Enum):
    """Collector event kinds handled by the translator."""
    BOOT = "boot"
    CREDFORK = "credfork"
    EXEC = "exec"
    FPERM = "fperm"
    SETID = "setid"


FPERM_MODES = ("r", "w", "-")

# Occurrences recorded while compiling a kernel for 38 minutes.
KERNEL_BUILD_MIX = {
    EventType.BOOT: 1,
    EventType.CREDFORK: 336505,
    EventType.EXEC: 47475,
    EventType.FPERM: 3851401,
    EventType.SETID: 47691,
}


@dataclass(frozen=True)
class EventRecord:
    """One collector event awaiting translation."""
    event_id: int
    etype: EventType
    subject: str
    object: str = ""
    timestamp: int = 0
    mode: str = "-"
    source_id: str = "local"


@dataclass
class TranslationState:
    """Nodes already emitted (with their kind) and the next edge number per type."""
    known_nodes: Dict[str, NodeKind] = field(default_factory=dict)
    edge_counters: Dict[EdgeType, int] = field(default_factory=lambda: {t: 0 for t in EdgeType})


# event kind -> (subject kind, object kind, relation, subject is the ancestor)
_TRANSLATION = {
    EventType.CREDFORK: (NodeKind.ACTIVITY, NodeKind.ACTIVITY, EdgeType.COMMUNICATION, True),
    EventType.EXEC: (NodeKind.ACTIVITY, NodeKind.ACTIVITY, EdgeType.COMMUNICATION, True),
    EventType.SETID: (NodeKind.ACTIVITY, NodeKind.AGENT, EdgeType.ASSOCIATION, False),
}


def translate_event(event: EventRecord, state: TranslationState) -> List[object]:
    """
    Translate one event into new nodes (at most two) and at most one edge.

    boot emits the kernel activity; credfork and exec a Communication edge
    parent→child; fperm a Usage edge file→process when reading and a
    Generation edge process→file when writing; setid an Association edge
    agent→process. Endpoints not yet in ``state`` are emitted first.

    Args:
        event: Event to translate
        state: Translator state, updated only when translation succeeds

    Returns:
        Newly emitted components, nodes before the edge

    Raises:
        MalformedEventError: if the event cannot be translated
    """
    if event.etype is EventType.BOOT:
        if event.object:
            raise MalformedEventError(f"event {event.event_id}: boot event carries an object")
        nodes = [(event.subject, NodeKind.ACTIVITY)]
        relation = None
    else:
        if not event.object:
            raise MalformedEventError(f"event {event.event_id}: {event.etype.value} event without object")
        if event.etype is EventType.FPERM:
            if event.mode == "r":
                relation = (EdgeType.USAGE, event.object, event.subject)
            elif event.mode == "w":
                relation = (EdgeType.GENERATION, event.subject, event.object)
            else:
                raise MalformedEventError(f"event {event.event_id}: fperm needs mode r or w")
            nodes = [(event.subject, NodeKind.ACTIVITY), (event.object, NodeKind.ENTITY)]
        else:
            subject_kind, object_kind, etype, subject_first = _TRANSLATION[event.etype]
            nodes = [(event.subject, subject_kind), (event.object, object_kind)]
            if subject_first:
                relation = (etype, event.subject, event.object)
            else:
                relation = (etype, event.object, event.subject)
        if event.subject == event.object:
            raise MalformedEventError(f"event {event.event_id}: subject and object are both {event.subject}")

    new_nodes = []
    for node_id, kind in nodes:
        known = state.known_nodes.get(node_id)
        if known is None:
            if all(n.id != node_id for n in new_nodes):
                try:
                    new_nodes.append(ProvNode(node_id, kind))
                except ModelError as e:
                    raise MalformedEventError(f"event {event.event_id}: {e}") from None
        elif known is not kind:
            raise MalformedEventError(
                f"event {event.event_id}: {node_id} is a {known.render}, not a {kind.render}"
            )

    out: List[object] = list(new_nodes)
    for node in new_nodes:
        state.known_nodes[node.id] = node.kind
    if relation is not None:
        etype, in_node, out_node = relation
        number = state.edge_counters[etype]
        state.edge_counters[etype] = number + 1
        out.append(ProvEdge(etype.edge_id(number), etype, in_node, out_node))
    return out


def event_mix(scale: int = 1000) -> Dict[EventType, int]:
    """Kernel-build event counts divided by ``scale`` (half-up, at least one each)."""
    if scale < 1:
        raise ValueError("scale must be >= 1")
    return {kind: max(1, (count * 2 + scale) // (2 * scale)) for kind, count in KERNEL_BUILD_MIX.items()}


def synthetic_events(scale: int = 1000, seed: int = 0, source_id: str = "local",
                     read_ratio: float = 0.6, new_file_ratio: float = 0.25,
                     agent_pool: int = 16) -> List[EventRecord]:
    """
    Build a seeded event stream with the kernel-build proportions.

    The first event is a boot of AC0; the rest are shuffled. Processes are
    ``AC<n>``, files ``EN<n>`` and user ids ``AG<n>``.

    Args:
        scale: Divisor applied to the recorded occurrences
        seed: PCG64 seed
        source_id: Source stamped on every event
        read_ratio: Share of fperm events that read
        new_file_ratio: Share of fperm events touching a new file
        agent_pool: Number of distinct user ids

    Returns:
        Events ordered by strictly increasing event_id
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    mix = event_mix(scale)
    kinds = [EventType.BOOT]
    rest = []
    for kind, count in mix.items():
        rest.extend([kind] * (count - 1 if kind is EventType.BOOT else count))
    kinds.extend(rest[int(i)] for i in rng.permutation(len(rest)))

    processes = ["AC0"]
    files: List[str] = []
    events = []
    for i, kind in enumerate(kinds):
        subject = processes[int(rng.integers(len(processes)))]
        obj = ""
        mode = "-"
        if kind is EventType.BOOT:
            subject = "AC0"
        elif kind is EventType.CREDFORK:
            obj = f"AC{len(processes)}"
            processes.append(obj)
        elif kind is EventType.EXEC:
            if len(processes) < 2 or rng.random() < 0.5:
                obj = f"AC{len(processes)}"
                processes.append(obj)
            else:
                obj = subject
                while obj == subject:
                    obj = processes[int(rng.integers(len(processes)))]
        elif kind is EventType.FPERM:
            if not files or rng.random() < new_file_ratio:
                files.append(f"EN{len(files)}")
                obj = files[-1]
            else:
                obj = files[int(rng.integers(len(files)))]
            mode = "r" if rng.random() < read_ratio else "w"
        else:
            obj = f"AG{int(rng.integers(agent_pool))}"
        events.append(EventRecord(i + 1, kind, subject, obj, i * 532, mode, source_id))
    return events


@dataclass
class PipelineConfig:
    """Batching and hand-off settings of the pipeline."""
    batch_size: int = 1024
    spool_dir: Optional[Path] = None
    report_interval: int = 100000
    queue_depth: int = 8
    keep_spool: bool = True
    strict: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.spool_dir is not None:
            self.spool_dir = Path(self.spool_dir)

    @classmethod
    def from_config(cls, config, **overrides) -> "PipelineConfig":
        """Build from the ``pipeline`` section of a Config, then apply overrides."""
        section = dict(config.get_section('pipeline'))
        section.update({k: v for k, v in overrides.items() if v is not None})
        return cls(
            batch_size=int(section.get('batch_size', 1024)),
            spool_dir=section.get('spool_dir') or None,
            report_interval=int(section.get('report_interval', 100000)),
            queue_depth=int(section.get('queue_depth', 8)),
            keep_spool=bool(section.get('keep_spool', True)),
            strict=bool(section.get('strict', True)),
        )


@dataclass
class BatchDescriptor:
    """A completed batch: its three TSV files and what they hold."""
    seq: int
    paths: Dict[TableId, Path]
    entry_counts: Dict[TableId, int] = field(default_factory=dict)
    components: int = 0

    @property
    def total_entries(self) -> int:
        return sum(self.entry_counts.values())


_BATCH_NAME = re.compile(r"^batch-(\d+)-node\.tsv$")


def discover_batches(input_dir: Path) -> List[BatchDescriptor]:
    """Batches found in a spool directory, by sequence number."""
    found = []
    for path in sorted(Path(input_dir).iterdir()):
        match = _BATCH_NAME.match(path.name)
        if match:
            seq = int(match.group(1))
            found.append(BatchDescriptor(seq, {t: path.parent / batch_file_name(seq, t) for t in TableId}))
    return sorted(found, key=lambda d: d.seq)


class Spooler:
    """Encodes components into per-batch node/edge/edgeT TSV files."""

    def __init__(self, spool_dir: Path, batch_size: int):
        """
        Initialize the spooler.

        Args:
            spool_dir: Directory receiving the batch files
            batch_size: Node plus edge entries that complete a batch
        """
        self.spool_dir = Path(spool_dir)
        self.spool_dir.mkdir(parents=True, exist_ok=True)
        self.batch_size = batch_size
        existing = discover_batches(self.spool_dir)
        self.next_seq = existing[-1].seq + 1 if existing else 0
        self.entries_encoded = {table: 0 for table in TableId}
        self.components_spooled = 0
        self._reset()

    def _reset(self):
        self._pending = {table: [] for table in TableId}
        self._count = 0
        self._components = 0

    def spool(self, components: Iterable[object]) -> List[BatchDescriptor]:
        """
        Encode components, completing a batch whenever it reaches batch_size.

        Returns:
            Descriptors of the batches completed by this call
        """
        done = []
        pending = self._pending
        for component in components:
            if isinstance(component, ProvNode):
                entries = encode_node(component)
                pending[TableId.NODE].extend(entries)
                self._count += len(entries)
            else:
                edge_entries, transpose_entries = encode_edge(component)
                pending[TableId.EDGE].extend(edge_entries)
                pending[TableId.EDGE_T].extend(transpose_entries)
                self._count += len(edge_entries)
            self._components += 1
            if self._count >= self.batch_size:
                done.append(self._complete())
                pending = self._pending
        return done

    def close(self) -> Optional[BatchDescriptor]:
        """Complete the partial batch, if anything is pending."""
        if self._components == 0:
            return None
        return self._complete()

    def _complete(self) -> BatchDescriptor:
        seq = self.next_seq
        descriptor = BatchDescriptor(seq, {}, {}, self._components)
        try:
            for table in TableId:
                path = self.spool_dir / batch_file_name(seq, table)
                descriptor.paths[table] = path
                with open(path, "wb") as sink:
                    write_tsv(self._pending[table], sink)
                descriptor.entry_counts[table] = len(self._pending[table])
        except (OSError, CodecError, UnicodeError):
            for path in descriptor.paths.values():
                if path.exists():
                    path.unlink()
            raise

        for table, count in descriptor.entry_counts.items():
            self.entries_encoded[table] += count
        self.components_spooled += self._components
        self.next_seq += 1
        self._reset()
        logger.debug(f"Spooled batch {seq}: {descriptor.total_entries} entries")
        return descriptor


def read_batch(descriptor: BatchDescriptor) -> Tuple[Dict[TableId, List[KvEntry]], str]:
    """
    Parse the three files of a batch.

    Returns:
        (entries per table, sha256 digest of the batch content)

    Raises:
        TsvParseError, EntryInvariantError: if any file fails to parse
    """
    digest = hashlib.sha256()
    parsed = {}
    for table in TableId:
        data = descriptor.paths[table].read_bytes()
        digest.update(table.value.encode("ascii") + b"\0" + data + b"\0")
        parsed[table] = list(parse_tsv(io.BytesIO(data)))
    return parsed, digest.hexdigest()


def ingest_batch(store: StoreHandle, descriptor: BatchDescriptor,
                 chunk_size: Optional[int] = None, skip_applied: bool = False) -> IngestStats:
    """
    Parse a batch and apply it to the node, edge and transpose tables.

    Nothing is written when any file fails to parse. Components are counted
    as distinct node rows plus distinct edge rows.

    Args:
        store: Target store
        descriptor: Batch to load
        chunk_size: Entries per store write; None writes each table at once
        skip_applied: Leave the store untouched if a batch with the same
            content digest was applied before (reported as zero batches),
            and otherwise record this batch's digest in the store

    Returns:
        Ingest statistics for this batch
    """
    start = time.perf_counter()
    parsed, digest = read_batch(descriptor)
    if skip_applied and store.is_applied(digest):
        logger.info(f"Batch {descriptor.seq} already applied, skipped")
        return IngestStats(0, 0, time.perf_counter() - start, 0)
    components = len({e.row for e in parsed[TableId.NODE]}) + len({e.row for e in parsed[TableId.EDGE]})

    if chunk_size:
        longest = max(len(entries) for entries in parsed.values())
        for offset in range(0, longest, chunk_size):
            store.put_batches({t: e[offset:offset + chunk_size] for t, e in parsed.items()})
    else:
        store.put_batches(parsed)
    if skip_applied:
        store.mark_applied(digest)

    descriptor.entry_counts = {table: len(entries) for table, entries in parsed.items()}
    written = sum(descriptor.entry_counts.values())
    return IngestStats(written, 1, time.perf_counter() - start, components, dict(descriptor.entry_counts))


@dataclass
class PipelineReport:
    """Counters of one pipeline run."""
    events_in: int = 0
    events_translated: int = 0
    events_rejected: int = 0
    components: int = 0
    batches: int = 0
    entries_encoded: Dict[TableId, int] = field(default_factory=lambda: {t: 0 for t in TableId})
    entries_stored: Dict[TableId, int] = field(default_factory=lambda: {t: 0 for t in TableId})
    seconds: float = 0.0
    error: Optional[str] = None

    @property
    def components_per_sec(self) -> float:
        return self.components / self.seconds if self.seconds > 0 else 0.0

    csv_header = "events,components,batches,seconds,components_per_sec"

    def csv_row(self) -> str:
        return (f"{self.events_in},{self.components},{self.batches},"
                f"{self.seconds:.6f},{self.components_per_sec:.2f}")

    def summary(self) -> str:
        line = (f"events={self.events_in} translated={self.events_translated} "
                f"rejected={self.events_rejected} components={self.components} "
                f"batches={self.batches} seconds={self.seconds:.3f} "
                f"rate={self.components_per_sec:.1f} components/s")
        if self.error:
            line += f" error={self.error}"
        return line


class IngestPipeline:
    """
    Translate → spool → load, with the loader on its own thread.

    Completed batches cross a bounded queue to the loader thread, the only
    writer of the store; spooling blocks while that queue is full.
    """

    def __init__(self, store: StoreHandle, config: PipelineConfig = None,
                 perf_logger: PerformanceLogger = None):
        self.store = store
        self.config = config or PipelineConfig()
        self.perf_logger = perf_logger or PerformanceLogger(logger)
        self.state = TranslationState()

    def run(self, event_source: Iterable[EventRecord]) -> PipelineReport:
        """Run the whole pipeline over an event stream."""
        report = PipelineReport()
        return self._drive(self._translate(event_source, report), report)

    def run_components(self, components: Iterable[object]) -> PipelineReport:
        """Spool and load already-built components (e.g. a generated graph)."""
        report = PipelineReport()
        return self._drive((list(components),), report)

    def _translate(self, events: Iterable[EventRecord], report: PipelineReport) -> Iterator[List[object]]:
        interval = self.config.report_interval
        for event in events:
            report.events_in += 1
            try:
                components = translate_event(event, self.state)
            except MalformedEventError as e:
                if self.config.strict:
                    raise
                report.events_rejected += 1
                logger.warning(f"Rejected event from {event.source_id}: {e}")
                continue
            report.events_translated += 1
            if interval and report.events_in % interval == 0:
                logger.info(f"Pipeline progress: {report.events_in} events")
            yield components

    def _load(self, descriptor: BatchDescriptor) -> IngestStats:
        stats = ingest_batch(self.store, descriptor)
        if not self.config.keep_spool:
            for path in descriptor.paths.values():
                path.unlink()
        return stats

    def _drive(self, chunks: Iterable[Sequence[object]], report: PipelineReport) -> PipelineReport:
        temp_dir = None
        spool_dir = self.config.spool_dir
        if spool_dir is None:
            temp_dir = tempfile.mkdtemp(prefix="provd4m-spool-")
            spool_dir = Path(temp_dir)

        spooler = Spooler(spool_dir, self.config.batch_size)
        loader = ThreadedLoader(self._load, self.config.queue_depth, logger)
        self.perf_logger.start_timer("pipeline")
        loader.start()
        failure = None
        try:
            for chunk in chunks:
                for descriptor in spooler.spool(chunk):
                    loader.submit(descriptor)
            tail = spooler.close()
            if tail is not None:
                loader.submit(tail)
        except Exception as e:
            failure = e

        try:
            results = loader.stop()
        except Exception as e:
            results = loader.results
            failure = failure or e
        report.seconds = self.perf_logger.stop_timer("pipeline")

        report.entries_encoded = dict(spooler.entries_encoded)
        for stats in results:
            report.batches += stats.batches
            report.components += stats.components
            for table, count in stats.table_entries.items():
                report.entries_stored[table] += count

        if temp_dir is not None:
            shutil.rmtree(temp_dir, ignore_errors=True)

        if failure is not None:
            report.error = str(failure)
            logger.error(f"Pipeline stopped: {failure}")
            raise PipelineError(str(failure), report) from failure

        logger.info(f"Pipeline finished: {report.summary()}")
        return report


def run_pipeline(event_source: Iterable[EventRecord], store: StoreHandle,
                 config: PipelineConfig = None) -> PipelineReport:
    """
    Translate, spool and load an event stream into ``store``.

    Raises:
        PipelineError: when a stage fails; ``error.report`` has the partial counts
    """
    return IngestPipeline(store, config).run(event_source)
