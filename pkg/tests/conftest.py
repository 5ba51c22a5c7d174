"""Shared fixtures: the example provenance graph, stores and spool directories."""

import logging
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from core.d4m_codec import encode_graph  # noqa: E402
from core.kv_store import open_store  # noqa: E402
from core.prov_model import EdgeType, NodeKind, ProvEdge, ProvGraph, ProvNode  # noqa: E402


GOLDEN_DIR = ROOT / "tests" / "golden"
EXAMPLE_DIR = ROOT / "fixtures" / "example_graph"

# (edge id, type, ancestor, descendant) of the example graph, in spool order.
EXAMPLE_EDGES = [
    ("used-0", EdgeType.USAGE, "EN0", "AC0"),
    ("wgb-0", EdgeType.GENERATION, "AC0", "EN1"),
    ("wib-0", EdgeType.COMMUNICATION, "AC0", "AC1"),
    ("wdf-0", EdgeType.DERIVATION, "EN2", "EN3"),
    ("used-1", EdgeType.USAGE, "EN3", "AC1"),
    ("wgb-1", EdgeType.GENERATION, "AC1", "EN4"),
    ("wdf-1", EdgeType.DERIVATION, "EN4", "EN5"),
    ("wib-1", EdgeType.COMMUNICATION, "AC1", "AC2"),
    ("used-2", EdgeType.USAGE, "EN5", "AC2"),
    ("wgb-2", EdgeType.GENERATION, "AC2", "EN6"),
    ("wgb-3", EdgeType.GENERATION, "AC2", "EN7"),
]


def build_example_graph() -> ProvGraph:
    graph = ProvGraph()
    for i in range(3):
        graph.add_node(ProvNode(f"AC{i}", NodeKind.ACTIVITY))
    for i in range(8):
        graph.add_node(ProvNode(f"EN{i}", NodeKind.ENTITY))
    for edge_id, etype, in_node, out_node in EXAMPLE_EDGES:
        graph.add_edge(ProvEdge(edge_id, etype, in_node, out_node))
    return graph


@pytest.fixture
def example_graph() -> ProvGraph:
    return build_example_graph()


@pytest.fixture
def memory_store():
    return open_store(None)


@pytest.fixture
def example_store(example_graph):
    store = open_store(None)
    store.put_batches(encode_graph(example_graph))
    return store


@pytest.fixture
def spool_dir(tmp_path) -> Path:
    path = tmp_path / "spool"
    path.mkdir()
    return path


@pytest.fixture(autouse=True)
def reset_cli_logger(monkeypatch):
    """Keep env and CLI logger state from leaking between tests."""
    monkeypatch.delenv("PROVD4M_DB", raising=False)
    yield
    root = logging.getLogger("provd4m")
    for handler in root.handlers:
        handler.close()
    root.handlers.clear()
    root.propagate = True
    root.setLevel(logging.NOTSET)


def golden_bytes(name: str) -> bytes:
    return (GOLDEN_DIR / name).read_bytes()


def golden_lines(name: str):
    return (GOLDEN_DIR / name).read_text().splitlines()
