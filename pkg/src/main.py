"""
Main Application Module
Command-line entry point: graph generation, batch ingest, lineage queries,
the curator service and the ingest/query benchmarks.
"""

import argparse
import logging
import os
import signal
import sys
import threading
from pathlib import Path
from typing import List, Optional

import yaml

# Add src to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.analytics import (
    TraversalQuery,
    bfs,
    format_assoc,
    format_csv,
    format_result,
    lineage_inputs,
    node_kind_filter,
)
from core.bench import bench_ingest, bench_query, parse_sizes, write_csv
from core.curator_service import parse_address, read_events, serve, write_events
from core.d4m_codec import TableId
from core.errors import PipelineError, ProvenanceError
from core.graph_gen import GenConfig, generate
from core.ingest_pipeline import (
    IngestPipeline,
    PipelineConfig,
    Spooler,
    discover_batches,
    ingest_batch,
    synthetic_events,
)
from core.kv_store import IngestStats, open_store
from core.prov_model import EdgeType, NodeKind
from utils.config import Config
from utils.logger import setup_logger


logger = logging.getLogger("provd4m")

MANIFEST_FILE = "manifest.yaml"


class CommandError(ProvenanceError):
    """A subcommand cannot run with the given arguments."""


def _db_path(args, config: Config) -> str:
    path = args.db or config.get('store.path')
    if not path:
        raise CommandError("no store path: pass --db or set PROVD4M_DB")
    return path


def _open_out(path: Optional[str]):
    if not path or path == "-":
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="")


def _parse_edge_types(text: Optional[str]) -> Optional[frozenset]:
    if not text:
        return None
    types = set()
    for token in text.split(","):
        token = token.strip()
        try:
            types.add(EdgeType.from_render(token))
        except ProvenanceError:
            try:
                types.add(EdgeType[token.upper()])
            except KeyError:
                raise CommandError(f"unknown edge type {token!r}") from None
    return frozenset(types)


def _parse_node_kinds(text: Optional[str]):
    if not text:
        return None
    kinds = []
    for token in text.split(","):
        token = token.strip()
        try:
            kinds.append(NodeKind.from_render(token))
        except ProvenanceError:
            try:
                kinds.append(NodeKind[token.upper()])
            except KeyError:
                raise CommandError(f"unknown node kind {token!r}") from None
    return node_kind_filter(kinds)


def cmd_gen(args, config: Config) -> int:
    """Generate a random graph and spool it as TSV batches plus a manifest."""
    gen_config = GenConfig(
        num_nodes=args.nodes,
        max_edges_per_node=args.max_edges or config.get('generator.max_edges', 4),
        seed=args.seed if args.seed is not None else config.get('generator.seed', 0),
        kind_weights=tuple(config.get('generator.kind_weights', [6, 3, 1])),
    )
    graph = generate(gen_config)
    out_dir = Path(args.out)
    spooler = Spooler(out_dir, args.batch_size or config.get('pipeline.batch_size', 1024))
    batches = spooler.spool(graph.components())
    tail = spooler.close()
    if tail is not None:
        batches.append(tail)

    manifest = {
        'nodes': len(graph.nodes),
        'edges': len(graph.edges),
        'components': len(graph.nodes) + len(graph.edges),
        'seed': gen_config.seed,
        'max_edges': gen_config.max_edges_per_node,
        'entries': {table.batch_suffix: count for table, count in spooler.entries_encoded.items()},
        'batches': [
            {
                'seq': batch.seq,
                'components': batch.components,
                'entries': {table.batch_suffix: batch.entry_counts[table] for table in TableId},
            }
            for batch in batches
        ],
    }
    with open(out_dir / MANIFEST_FILE, 'w') as f:
        yaml.safe_dump(manifest, f, sort_keys=False)
    print(f"generated {manifest['nodes']} nodes, {manifest['edges']} edges in {len(batches)} batches -> {out_dir}")
    return 0


def cmd_ingest(args, config: Config) -> int:
    """Load every batch of a spool directory into the store, skipping applied ones."""
    store = open_store(_db_path(args, config), applied_history=config.get('store.applied_history', 4096))
    totals = IngestStats()
    skipped = 0
    for descriptor in discover_batches(Path(args.input)):
        stats = ingest_batch(store, descriptor, chunk_size=args.batch_size, skip_applied=True)
        if stats.batches == 0:
            skipped += 1
        totals.add(stats)
    store.flush()

    node_stats = store.table_stats(TableId.NODE)
    print(f"ingested {totals.entries_written} entries from {totals.batches} batches "
          f"({skipped} already applied), {totals.components} components in {totals.wall_time:.3f}s "
          f"({totals.components_per_sec:.1f} components/s); nodeTable has {node_stats.entries} entries")
    print(IngestStats.csv_header)
    print(totals.csv_row())
    return 0


def cmd_query(args, config: Config) -> int:
    """Run the filtered traversal and print its rows."""
    store = open_store(_db_path(args, config))
    starts = [s.strip() for s in args.start.split(',') if s.strip()]
    depth = args.depth if args.depth is not None else config.get('query.depth', 3)
    query = TraversalQuery(frozenset(starts), depth,
                           _parse_edge_types(args.edge_types), _parse_node_kinds(args.node_types))
    result = bfs(store, query)
    if result.start_not_found:
        print(f"start not found: {', '.join(result.missing_starts)}", file=sys.stderr)

    fmt = args.format or config.get('query.format', 'listing')
    formatter = {'listing': format_result, 'assoc': format_assoc, 'csv': format_csv}[fmt]
    for line in formatter(result):
        print(line)
    logger.debug(f"query used {result.scans_performed} scans over {result.levels} levels")
    return 0


def cmd_lineage(args, config: Config) -> int:
    """Print the input entities an output node was built from."""
    store = open_store(_db_path(args, config))
    for node_id in sorted(lineage_inputs(store, args.node, args.depth)):
        print(node_id)
    return 0


def cmd_bench_ingest(args, config: Config) -> int:
    repetitions = 1 if args.single_run else (args.repetitions or config.get('bench.repetitions', 3))
    rows = bench_ingest(
        parse_sizes(args.sizes) if args.sizes else config.get('bench.sizes'),
        args.max_edges or config.get('generator.max_edges', 4),
        args.seed if args.seed is not None else config.get('generator.seed', 0),
        db_path=Path(args.db) if args.db else None,
        repetitions=repetitions,
        batch_size=args.batch_size or config.get('bench.batch_size', 1024),
    )
    out = _open_out(args.out)
    try:
        write_csv(rows, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_bench_query(args, config: Config) -> int:
    repetitions = 1 if args.single_run else (args.repetitions or config.get('bench.repetitions', 3))
    rows = bench_query(
        parse_sizes(args.sizes) if args.sizes else config.get('bench.sizes'),
        args.max_edges or config.get('generator.max_edges', 4),
        args.seed if args.seed is not None else config.get('generator.seed', 0),
        depth_limit=args.depth_limit or config.get('bench.depth_limit', 32),
        repetitions=repetitions,
        batch_size=config.get('bench.batch_size', 1024),
    )
    out = _open_out(args.out)
    try:
        write_csv(rows, out, with_depth=True)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_serve(args, config: Config, address) -> int:
    """Run the curator until SIGINT/SIGTERM, then flush the store."""
    db = args.db or config.get('store.path') or None
    store = open_store(db)
    pipeline_config = PipelineConfig.from_config(config, batch_size=args.batch_size,
                                                 spool_dir=args.spool_dir)
    pipeline_config.strict = False
    pipeline = IngestPipeline(store, pipeline_config)

    shutdown = threading.Event()
    for signum in (signal.SIGINT, signal.SIGTERM):
        signal.signal(signum, lambda *_: shutdown.set())

    def banner(bound):
        print(f"curator listening on {bound[0]}:{bound[1]}", flush=True)

    report = serve(address, pipeline, shutdown, on_ready=banner,
                   queue_size=config.get('service.queue_size', 10000),
                   max_consecutive_naks=config.get('service.max_consecutive_naks', 100))
    if db:
        store.flush()
    print(report.summary())
    print(report.csv_header)
    print(report.csv_row())
    return 0


def cmd_events(args, config: Config) -> int:
    """Write a synthetic event stream in the wire format."""
    count = write_events(synthetic_events(args.scale, args.seed, args.source), args.out)
    print(f"wrote {count} events to {args.out}")
    return 0


def cmd_replay(args, config: Config) -> int:
    """Run the full pipeline over an event file."""
    db = _db_path(args, config)
    store = open_store(db)
    pipeline_config = PipelineConfig.from_config(config, batch_size=args.batch_size,
                                                 spool_dir=args.spool_dir)
    try:
        report = IngestPipeline(store, pipeline_config).run(read_events(args.events))
    except PipelineError as e:
        if e.report is not None:
            print(e.report.summary())
        raise
    store.flush()
    print(report.summary())
    print(report.csv_header)
    print(report.csv_row())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="provd4m",
                                     description="Provenance graph ingest and lineage query engine")
    parser.add_argument('--config', type=str, help='Path to configuration file')
    parser.add_argument('--log-level', type=str, help='Logging level (overrides config)')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen', help='generate a random provenance graph as TSV batches')
    p.add_argument('--nodes', type=int, required=True)
    p.add_argument('--max-edges', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--out', required=True)
    p.add_argument('--batch-size', type=int)

    p = sub.add_parser('ingest', help='load spooled TSV batches into the store')
    p.add_argument('--input', required=True)
    p.add_argument('--db')
    p.add_argument('--batch-size', type=int, help='entries per store write')

    p = sub.add_parser('query', help='filtered breadth-first lineage traversal')
    p.add_argument('--db')
    p.add_argument('--start', required=True, help='comma-separated start node ids')
    p.add_argument('--depth', type=int)
    p.add_argument('--edge-types', help='comma-separated edge types to follow')
    p.add_argument('--node-types', help='comma-separated node kinds admitted to the frontier')
    p.add_argument('--format', choices=['listing', 'assoc', 'csv'])

    p = sub.add_parser('lineage', help='input entities of an output node')
    p.add_argument('--db')
    p.add_argument('--node', required=True)
    p.add_argument('--depth', type=int, default=32)

    for name, help_text in (('bench-ingest', 'ingest rate vs graph size'),
                            ('bench-query', 'query time vs graph size')):
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--sizes', help='comma-separated sizes, e.g. 2,16,2^10')
        p.add_argument('--max-edges', type=int)
        p.add_argument('--seed', type=int)
        p.add_argument('--out', help='CSV file (default stdout)')
        p.add_argument('--repetitions', type=int)
        p.add_argument('--single-run', action='store_true', help='one repetition per size')
        if name == 'bench-ingest':
            p.add_argument('--db', help='flush each ingested graph under this directory')
            p.add_argument('--batch-size', type=int)
        else:
            p.add_argument('--depth-limit', type=int)

    p = sub.add_parser('serve', help='run the curator event service')
    p.add_argument('--listen', help='host:port')
    p.add_argument('--db')
    p.add_argument('--batch-size', type=int)
    p.add_argument('--spool-dir')

    p = sub.add_parser('events', help='write a synthetic event stream')
    p.add_argument('--scale', type=int, default=1000)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--source', default='local')
    p.add_argument('--out', required=True)

    p = sub.add_parser('replay', help='run the pipeline over an event file')
    p.add_argument('--events', required=True)
    p.add_argument('--db')
    p.add_argument('--batch-size', type=int)
    p.add_argument('--spool-dir')
    return parser


COMMANDS = {
    'gen': cmd_gen,
    'ingest': cmd_ingest,
    'query': cmd_query,
    'lineage': cmd_lineage,
    'bench-ingest': cmd_bench_ingest,
    'bench-query': cmd_bench_query,
    'events': cmd_events,
    'replay': cmd_replay,
}


def main(argv: List[str] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = Config(args.config)
    except (OSError, ValueError, yaml.YAMLError) as e:
        print(f"error: cannot load config: {e}", file=sys.stderr)
        return 1

    log_config = config.get_section('logging')
    if log_config.get('enabled', True):
        setup_logger(name="provd4m",
                     log_file=log_config.get('log_file'),
                     level=args.log_level or log_config.get('level', 'INFO'))

    address = None
    if args.command == 'serve':
        try:
            address = parse_address(args.listen or config.get('service.listen'))
        except ValueError as e:
            parser.error(str(e))

    try:
        if args.command == 'serve':
            return cmd_serve(args, config, address)
        return COMMANDS[args.command](args, config)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 130
    except (ProvenanceError, OSError, ValueError) as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
