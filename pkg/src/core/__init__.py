"""Core modules for provenance ingest and lineage queries"""
from .prov_model import NodeKind, EdgeType, ProvNode, ProvEdge, ProvGraph
from .d4m_codec import KvEntry, TableId
from .kv_store import StoreHandle, open_store
from .ingest_pipeline import EventRecord, IngestPipeline, PipelineConfig, run_pipeline
from .analytics import TraversalQuery, bfs, lineage_inputs

__all__ = ['NodeKind', 'EdgeType', 'ProvNode', 'ProvEdge', 'ProvGraph', 'KvEntry', 'TableId',
           'StoreHandle', 'open_store', 'EventRecord', 'IngestPipeline', 'PipelineConfig',
           'run_pipeline', 'TraversalQuery', 'bfs', 'lineage_inputs']
