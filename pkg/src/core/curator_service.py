"""
Curator Service Module
Line-oriented TCP front-end: collectors stream events, the service merges them
into one bounded queue consumed by the ingest pipeline.
"""

import logging
import queue
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Set, Tuple, Union

from core.errors import PipelineError, WireFormatError
from core.ingest_pipeline import (
    FPERM_MODES,
    EventRecord,
    EventType,
    IngestPipeline,
    PipelineReport,
)


WIRE_FIELDS = 7

logger = logging.getLogger("provd4m.curator")


def parse_wire_line(line: str, line_no: int) -> EventRecord:
    """
    Parse ``source<TAB>event_id<TAB>etype<TAB>subject<TAB>object<TAB>timestamp<TAB>mode``.

    Raises:
        WireFormatError: wrong field count, unknown event type, bad number or mode
    """
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != WIRE_FIELDS:
        raise WireFormatError(line_no, f"expected {WIRE_FIELDS} fields")
    source_id, event_id, etype, subject, obj, timestamp, mode = fields
    try:
        kind = EventType(etype)
    except ValueError:
        raise WireFormatError(line_no, f"unknown event type {etype!r}") from None
    if mode not in FPERM_MODES:
        raise WireFormatError(line_no, f"bad mode {mode!r}")
    try:
        return EventRecord(int(event_id), kind, subject, obj, int(timestamp), mode, source_id)
    except ValueError:
        raise WireFormatError(line_no, "event_id and timestamp must be integers") from None


def decode_wire_line(raw: bytes, line_no: int) -> str:
    """Decode one received line; wire lines are ASCII."""
    try:
        return raw.decode("ascii")
    except UnicodeDecodeError:
        raise WireFormatError(line_no, "non-ASCII bytes") from None


def format_wire_line(event: EventRecord) -> str:
    return (f"{event.source_id}\t{event.event_id}\t{event.etype.value}\t{event.subject}\t"
            f"{event.object}\t{event.timestamp}\t{event.mode}\n")


def write_events(events: Iterable[EventRecord], path: Union[str, Path]) -> int:
    """Write events to a file in the wire format; returns the event count."""
    count = 0
    with open(path, "w", encoding="ascii") as f:
        for event in events:
            f.write(format_wire_line(event))
            count += 1
    return count


def read_events(path: Union[str, Path]) -> Iterator[EventRecord]:
    """Yield events of a wire-format file; malformed lines raise WireFormatError."""
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            line = decode_wire_line(raw, line_no)
            if line.strip():
                yield parse_wire_line(line, line_no)


def parse_address(address: str) -> Tuple[str, int]:
    """Split ``host:port``; raises ValueError when malformed."""
    host, sep, port = address.rpartition(":")
    if not sep or not host or not port.isdigit() or not 0 <= int(port) <= 65535:
        raise ValueError(f"bad listen address {address!r}, expected host:port")
    return host, int(port)


_STOP = object()


def _shutdown_read(sock: socket.socket) -> None:
    try:
        sock.shutdown(socket.SHUT_RD)
    except OSError:
        pass


class _EventHandler(socketserver.StreamRequestHandler):
    """One connection: parse lines, NAK the bad ones, enqueue the good ones."""

    def setup(self):
        super().setup()
        self.server.service.track(self.connection)

    def finish(self):
        try:
            super().finish()
        finally:
            self.server.service.untrack(self.connection)

    def _reply(self, text: str):
        self.wfile.write(text.encode("ascii", errors="replace") + b"\n")

    def handle(self):
        service: "CuratorService" = self.server.service
        accepted = 0
        naks = 0
        consecutive = 0
        peer = f"{self.client_address[0]}:{self.client_address[1]}"
        for line_no, raw in enumerate(self.rfile, start=1):
            if service.failed.is_set():
                logger.warning(f"Closing {peer}: ingest stopped")
                self._reply(f"NAK {line_no} ingest stopped")
                break
            try:
                event = parse_wire_line(decode_wire_line(raw, line_no), line_no)
                service.enqueue(event, line_no)
            except WireFormatError as e:
                naks += 1
                consecutive += 1
                logger.warning(f"NAK from {peer}: {e}")
                self._reply(f"NAK {e.line_no} {e.reason}")
                if consecutive > service.max_consecutive_naks:
                    logger.warning(f"Closing {peer}: {consecutive} consecutive malformed lines")
                    break
                continue
            consecutive = 0
            accepted += 1
        else:
            self._reply(f"DONE {accepted} {naks}")
        service.record_connection(accepted, naks)


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = False
    block_on_close = True


class CuratorService:
    """
    Accept loop plus a single pipeline consumer.

    Each connection handler feeds ``event_queue``; the consumer thread runs
    the ingest pipeline over that queue until ``stop`` is called. Event ids
    must increase per source across all connections.
    """

    def __init__(self, listen_address: Tuple[str, int], pipeline: IngestPipeline,
                 queue_size: int = 10000, max_consecutive_naks: int = 100):
        """
        Initialize the service.

        Args:
            listen_address: (host, port); port 0 picks a free port
            pipeline: Pipeline that consumes the merged events
            queue_size: Capacity of the merged event queue
            max_consecutive_naks: Malformed lines in a row before a connection is closed
        """
        self.pipeline = pipeline
        self.event_queue = queue.Queue(maxsize=max(1, queue_size))
        self.max_consecutive_naks = max_consecutive_naks

        self.server = _ThreadingServer(listen_address, _EventHandler, bind_and_activate=True)
        self.server.service = self

        self.accepted = 0
        self.naks = 0
        self.connections = 0
        self._counter_lock = threading.Lock()

        # source_id -> last accepted event_id, with one lock per source
        self._last_event_id: Dict[str, int] = {}
        self._source_locks: Dict[str, threading.Lock] = {}
        self._sources_lock = threading.Lock()

        self._open_connections: Set[socket.socket] = set()
        self._closing = False
        self._conn_lock = threading.Lock()

        self.report: Optional[PipelineReport] = None
        self.error: Optional[BaseException] = None
        self._accept_thread = None
        self._consumer_thread = None
        self.failed = threading.Event()

    @property
    def address(self) -> Tuple[str, int]:
        host, port = self.server.server_address[:2]
        return host, port

    def record_connection(self, accepted: int, naks: int):
        with self._counter_lock:
            self.accepted += accepted
            self.naks += naks
            self.connections += 1

    def track(self, conn: socket.socket):
        with self._conn_lock:
            self._open_connections.add(conn)
            closing = self._closing
        if closing:
            _shutdown_read(conn)

    def untrack(self, conn: socket.socket):
        with self._conn_lock:
            self._open_connections.discard(conn)

    def enqueue(self, event: EventRecord, line_no: int):
        """
        Hand an event to the pipeline, keeping each source's ids increasing.

        Raises:
            WireFormatError: if the event id does not exceed the source's last one
        """
        with self._sources_lock:
            lock = self._source_locks.setdefault(event.source_id, threading.Lock())
        with lock:
            last = self._last_event_id.get(event.source_id)
            if last is not None and event.event_id <= last:
                raise WireFormatError(line_no, "event_id not increasing")
            self._last_event_id[event.source_id] = event.event_id
            # Blocks while the merged queue is full.
            self.event_queue.put(event)

    def _drain(self) -> Iterator[EventRecord]:
        while True:
            item = self.event_queue.get()
            if item is _STOP:
                return
            yield item

    def _consume(self):
        try:
            self.report = self.pipeline.run(self._drain())
        except PipelineError as e:
            self.error = e
            self.report = e.report
            self.failed.set()
            # Keep draining so connection handlers never block forever.
            while self.event_queue.get() is not _STOP:
                pass

    def start(self):
        """Start the accept loop and the pipeline consumer."""
        self._consumer_thread = threading.Thread(target=self._consume, name="curator-pipeline", daemon=True)
        self._consumer_thread.start()
        self._accept_thread = threading.Thread(target=self.server.serve_forever, name="curator-accept",
                                               kwargs={"poll_interval": 0.1}, daemon=True)
        self._accept_thread.start()
        host, port = self.address
        logger.info(f"Curator listening on {host}:{port}")

    def stop(self) -> PipelineReport:
        """
        Stop accepting, end open connections, and complete in-flight batches.

        Open connections have their read side shut down, so each handler sees
        end-of-stream, answers DONE for what it accepted and exits.

        Returns:
            Report of the pipeline run covering every accepted event
        """
        self.server.shutdown()
        with self._conn_lock:
            self._closing = True
            still_open = list(self._open_connections)
        for conn in still_open:
            _shutdown_read(conn)
        self.server.server_close()
        self.event_queue.put(_STOP)
        self._consumer_thread.join()
        logger.info(f"Curator stopped: connections={self.connections} accepted={self.accepted} "
                    f"naks={self.naks}")
        if self.error is not None:
            raise self.error
        return self.report


def serve(listen_address: Tuple[str, int], pipeline: IngestPipeline,
          shutdown: threading.Event,
          on_ready: Optional[Callable[[Tuple[str, int]], None]] = None,
          **kwargs) -> PipelineReport:
    """
    Run the service until ``shutdown`` is set.

    Args:
        listen_address: (host, port) to bind
        pipeline: Pipeline consuming the merged events
        shutdown: Event that ends the accept loop
        on_ready: Called with the bound address once accepting

    Returns:
        Final pipeline report
    """
    service = CuratorService(listen_address, pipeline, **kwargs)
    service.start()
    if on_ready is not None:
        on_ready(service.address)
    shutdown.wait()
    return service.stop()


@dataclass
class AckSummary:
    """Client-side view of one stream."""
    accepted: int = 0
    naks: int = 0
    nak_lines: List[str] = field(default_factory=list)
    server_accepted: Optional[int] = None


class ClientError(ConnectionError):
    """Connection refused or reset while streaming."""


def client_send(address: Tuple[str, int], lines: Iterable[Union[EventRecord, str]],
                timeout: float = 60.0) -> AckSummary:
    """
    Stream events (or raw lines) to a curator and collect the NAKs.

    Args:
        address: (host, port) of the service
        lines: Events, or pre-formatted wire lines
        timeout: Socket timeout in seconds

    Returns:
        Accepted and NAK counts; ``server_accepted`` echoes the server's DONE line

    Raises:
        ClientError: connection refused or reset
    """
    summary = AckSummary()
    replies: List[str] = []

    try:
        sock = socket.create_connection(address, timeout=timeout)
    except ConnectionRefusedError as e:
        raise ClientError(f"connection refused by {address[0]}:{address[1]}") from e

    def read_replies():
        with sock.makefile("r", encoding="ascii", errors="replace") as reader:
            for reply in reader:
                replies.append(reply.rstrip("\n"))

    reader_thread = threading.Thread(target=read_replies, daemon=True)
    reader_thread.start()
    sent = 0
    try:
        with sock.makefile("wb") as writer:
            for item in lines:
                text = format_wire_line(item) if isinstance(item, EventRecord) else item
                if not text.endswith("\n"):
                    text += "\n"
                writer.write(text.encode("ascii"))
                sent += 1
        sock.shutdown(socket.SHUT_WR)
        reader_thread.join(timeout)
    except (ConnectionResetError, BrokenPipeError) as e:
        raise ClientError(f"connection reset by {address[0]}:{address[1]}") from e
    finally:
        sock.close()

    for reply in replies:
        if reply.startswith("NAK "):
            summary.naks += 1
            summary.nak_lines.append(reply)
        elif reply.startswith("DONE "):
            summary.server_accepted = int(reply.split()[1])
    summary.accepted = sent - summary.naks
    return summary
