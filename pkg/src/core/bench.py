"""
Benchmark Module
Ingest-rate and query-time sweeps over generated graphs of growing size.
"""

import csv
import logging
import shutil
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, List, Optional, TextIO

from core.analytics import TraversalQuery, bfs
from core.graph_gen import GenConfig, generate, graph_depth, sink_nodes
from core.ingest_pipeline import IngestPipeline, PipelineConfig
from core.kv_store import open_store
from core.prov_model import component_count
from utils.logger import PerformanceLogger


logger = logging.getLogger("provd4m.bench")


@dataclass
class BenchRow:
    """
    One CSV row. ``rate_or_latency`` is components/second for ingest rows
    and seconds for query rows; ``max_depth`` is only set for query rows.
    """
    graph_nodes: int
    components: int
    wall_seconds: float
    rate_or_latency: float
    max_depth: Optional[int] = None


def parse_sizes(text: str) -> List[int]:
    """Parse ``2,16,2^10`` into graph sizes."""
    sizes = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if "^" in token:
            base, _, exponent = token.partition("^")
            value = int(base) ** int(exponent)
        else:
            value = int(token)
        if value < 1:
            raise ValueError(f"graph size must be >= 1, got {token}")
        sizes.append(value)
    if not sizes:
        raise ValueError("no graph sizes given")
    return sizes


def write_csv(rows: Iterable[BenchRow], out: TextIO, with_depth: bool = False):
    """Header-first CSV with a fixed column order."""
    names = [f.name for f in fields(BenchRow)]
    if not with_depth:
        names.remove("max_depth")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        values = asdict(row)
        writer.writerow([_format_value(values[name]) for name in names])


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return "" if value is None else str(value)


def bench_ingest(sizes: Iterable[int], max_edges: int, seed: int,
                 db_path: Optional[Path] = None, repetitions: int = 3,
                 batch_size: int = 1024) -> List[BenchRow]:
    """
    Time a complete, durable ingest of one generated graph per size.

    A repetition covers everything a fresh ingest pays for: creating the
    spool directory, starting the loader thread, spooling and loading every
    batch, flushing the snapshot and removing the spool. The row reports the
    median over ``repetitions``. With ``db_path`` the last repetition of
    every size is kept under ``<db_path>/n<size>``.

    Returns:
        One row per size
    """
    perf = PerformanceLogger(logger)
    rows = []
    for size in sizes:
        graph = generate(GenConfig(size, max_edges, seed))
        components = component_count(graph)
        timer = f"ingest n={size}"
        reps = max(1, repetitions)
        for rep in range(reps):
            perf.start_timer(timer)
            work_dir = Path(tempfile.mkdtemp(prefix="provd4m-bench-"))
            try:
                store = open_store(None)
                keep = db_path is not None and rep == reps - 1
                store.root_path = Path(db_path) / f"n{size}" if keep else work_dir / "db"
                pipeline = IngestPipeline(store, PipelineConfig(batch_size=batch_size,
                                                                spool_dir=work_dir / "spool"), perf)
                pipeline.run_components(graph.components())
                store.flush()
            finally:
                shutil.rmtree(work_dir, ignore_errors=True)
                perf.stop_timer(timer)
        wall = perf.get_median(timer)
        rate = components / wall if wall > 0 else 0.0
        logger.info(f"ingest n={size}: {components} components, {rate:.1f} components/s")
        rows.append(BenchRow(size, components, wall, rate))
    perf.log_metrics()
    return rows


def bench_query(sizes: Iterable[int], max_edges: int, seed: int,
                depth_limit: int = 32, repetitions: int = 3,
                batch_size: int = 1024) -> List[BenchRow]:
    """
    Time the traversal that rebuilds each generated graph in full.

    The query starts from every node without descendants, so it reaches the
    whole graph within ``depth_limit`` hops. Rows record the graph's depth
    from that start set, so slow queries on deep graphs can be told apart
    from slow queries on big ones.

    Returns:
        One row per size with ``max_depth`` set
    """
    perf = PerformanceLogger(logger)
    rows = []
    for size in sizes:
        graph = generate(GenConfig(size, max_edges, seed))
        store = open_store(None)
        spool_dir = Path(tempfile.mkdtemp(prefix="provd4m-bench-"))
        try:
            IngestPipeline(store, PipelineConfig(batch_size=batch_size, spool_dir=spool_dir)) \
                .run_components(graph.components())
        finally:
            shutil.rmtree(spool_dir, ignore_errors=True)

        starts = sink_nodes(graph)
        query = TraversalQuery(frozenset(starts), depth_limit)
        timer = f"query n={size}"
        for _ in range(max(1, repetitions)):
            perf.start_timer(timer)
            bfs(store, query)
            perf.stop_timer(timer)
        wall = perf.get_median(timer)
        depth = graph_depth(graph, starts)
        logger.info(f"query n={size}: {len(starts)} start nodes, depth {depth}, {wall:.4f}s")
        rows.append(BenchRow(size, component_count(graph), wall, wall, depth))
    perf.log_metrics()
    return rows
