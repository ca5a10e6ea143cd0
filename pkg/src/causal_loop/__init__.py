"""causal-loop: human-in-the-loop causal graph workbench for robot task sims."""

from .graph import CausalGraph, Edge, Mechanism, ValidationReport, Variable
from .graph_io import dumps_graph, graph_hash, load_graph, loads_graph, save_graph
from .inference import (
    Distribution,
    Intervention,
    Query,
    SampleSet,
    adjustment_estimate,
    apply_intervention,
    counterfactual,
    query,
    sample,
)
from .simulation import (
    BatchSummary,
    Plan,
    Scenario,
    TrialResult,
    bench_intervention,
    expected_success_rate,
    load_scenario,
    run_batch,
    run_trial,
)
from .session import Session, SessionConfig, SessionManager

__version__ = "0.1.0"

__all__ = [
    "CausalGraph", "Edge", "Mechanism", "ValidationReport", "Variable",
    "dumps_graph", "graph_hash", "load_graph", "loads_graph", "save_graph",
    "Distribution", "Intervention", "Query", "SampleSet",
    "adjustment_estimate", "apply_intervention", "counterfactual", "query", "sample",
    "BatchSummary", "Plan", "Scenario", "TrialResult",
    "bench_intervention", "expected_success_rate", "load_scenario",
    "run_batch", "run_trial",
    "Session", "SessionConfig", "SessionManager",
    "__version__",
]
