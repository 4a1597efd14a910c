"""Subgraph enumeration by compiled backtracking plans, batch and streaming."""

from .compiler import (
    apply_triangle_cache,
    apply_vcbc,
    eliminate_common_subexpressions,
    generate_incremental_raw_plan,
    generate_raw_plan,
    optimize_batch_plan,
    optimize_incremental_plan,
    reorder_instructions,
)
from .executor import EngineConfig, RunResult, enumerate_matches, expand_compressed
from .graph import (
    DirectedGraph,
    PatternGraph,
    TotalOrder,
    UndirectedGraph,
    compute_automorphisms,
    induced_subgraph,
    load_edge_list,
    load_pattern,
    symmetry_breaking_conditions,
)
from .optimizer import CostReport, GraphStats, best_execution_plan, best_incremental_plans
from .plan import ExecutionPlan, parse_plan, validate_plan
from .streaming import StreamConfig, StreamingEngine, UpdateBatch, incremental_pattern_graphs, parse_update_stream

__version__ = "0.1.0"

__all__ = [
    "DirectedGraph", "PatternGraph", "TotalOrder", "UndirectedGraph", "compute_automorphisms", "induced_subgraph",
    "load_edge_list", "load_pattern", "symmetry_breaking_conditions", "ExecutionPlan", "parse_plan",
    "validate_plan", "generate_raw_plan", "eliminate_common_subexpressions", "reorder_instructions",
    "apply_triangle_cache", "apply_vcbc", "generate_incremental_raw_plan", "optimize_batch_plan",
    "optimize_incremental_plan", "GraphStats", "CostReport", "best_execution_plan", "best_incremental_plans",
    "EngineConfig", "RunResult", "enumerate_matches", "expand_compressed", "StreamConfig", "StreamingEngine",
    "UpdateBatch", "incremental_pattern_graphs", "parse_update_stream",
]
