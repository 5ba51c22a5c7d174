"""Tests for the ingest and query benchmark sweeps."""

import io

import pytest

from core.analytics import TraversalQuery, bfs
from core.bench import BenchRow, bench_ingest, bench_query, parse_sizes, write_csv
from core.d4m_codec import TableId
from core.graph_gen import GenConfig, generate, graph_depth, sink_nodes
from core.ingest_pipeline import IngestPipeline, PipelineConfig
from core.kv_store import open_store
from core.prov_model import component_count


def test_parse_sizes():
    assert parse_sizes("2,16, 2^10") == [2, 16, 1024]
    with pytest.raises(ValueError):
        parse_sizes("0")
    with pytest.raises(ValueError):
        parse_sizes(" , ")


def test_write_csv_columns():
    out = io.StringIO()
    write_csv([BenchRow(2, 3, 0.5, 6.0)], out)
    assert out.getvalue() == "graph_nodes,components,wall_seconds,rate_or_latency\n2,3,0.500000,6.000000\n"

    out = io.StringIO()
    write_csv([BenchRow(16, 40, 0.25, 0.25, 5)], out, with_depth=True)
    assert out.getvalue().splitlines()[1] == "16,40,0.250000,0.250000,5"


def test_ingest_sweep():
    rows = bench_ingest([2, 16, 256], max_edges=4, seed=0, repetitions=2)
    assert [r.graph_nodes for r in rows] == [2, 16, 256]
    for row in rows:
        assert row.components == component_count(generate(GenConfig(row.graph_nodes, 4, 0)))
        assert row.rate_or_latency > 0
        assert row.max_depth is None


def test_ingest_sweep_persists_last_run(tmp_path):
    bench_ingest([16], max_edges=4, seed=1, db_path=tmp_path, repetitions=2)
    store = open_store(tmp_path / "n16")
    graph = generate(GenConfig(16, 4, 1))
    assert store.table_stats(TableId.NODE).rows == len(graph.nodes)
    assert store.table_stats(TableId.EDGE).rows == len(graph.edges)


def test_query_sweep_records_depth():
    rows = bench_query([16, 512], max_edges=4, seed=2, repetitions=1)
    for row in rows:
        graph = generate(GenConfig(row.graph_nodes, 4, 2))
        assert row.max_depth == graph_depth(graph, sink_nodes(graph))
        assert row.wall_seconds == row.rate_or_latency >= 0
    assert rows[-1].max_depth > 0


@pytest.mark.parametrize("seed", [0, 2])
def test_query_start_set_reaches_every_node(seed):
    graph = generate(GenConfig(256, 4, seed))
    store = open_store(None)
    IngestPipeline(store, PipelineConfig()).run_components(graph.components())
    starts = sink_nodes(graph)
    result = bfs(store, TraversalQuery(frozenset(starts), len(graph.nodes)))
    assert result.discovered() | set(starts) == set(graph.nodes)
    assert result.levels == graph_depth(graph, starts) > 0


@pytest.mark.slow
def test_batching_pays_off_at_scale():
    small, large = bench_ingest([2 ** 4, 2 ** 16], max_edges=4, seed=0, repetitions=3)
    assert large.rate_or_latency > small.rate_or_latency
