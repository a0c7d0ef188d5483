"""flowsynth: finite-state protocol models mined from concurrent message
traces, with a synthetic trace generator for end-to-end validation."""

from .causality import CausalityGraph, build_graph, edge_support, graph_to_dot, node_support
from .constraints import (
    ConstraintSystem,
    Equality,
    Solution,
    check_solution,
    export_smtlib,
    generate_constraints,
    parse_smt_model,
)
from .core import Event, Message, Trace, causal
from .flowgen import (
    FlowParseError,
    FlowSpec,
    bundled_flows_text,
    flows_to_fsa,
    generate_trace,
    library_index,
    parse_flows,
)
from .fsa import (
    AcceptResult,
    Fsa,
    Verdict,
    accepts,
    derive_fsa,
    export_fsa,
    fsa_from_json,
    fsa_to_dot,
    fsa_to_json,
)
from .ingest import (
    MessageCatalog,
    TraceParseError,
    collect_messages,
    find_end_messages,
    find_start_messages,
    format_trace,
    parse_trace,
)
from .solver import model_extract, reduce_model, sample_solutions, solve_one

__version__ = "0.1.0"

__all__ = [
    "AcceptResult",
    "CausalityGraph",
    "ConstraintSystem",
    "Equality",
    "Event",
    "FlowParseError",
    "FlowSpec",
    "Fsa",
    "Message",
    "MessageCatalog",
    "Solution",
    "Trace",
    "TraceParseError",
    "Verdict",
    "accepts",
    "build_graph",
    "bundled_flows_text",
    "causal",
    "check_solution",
    "collect_messages",
    "derive_fsa",
    "edge_support",
    "export_fsa",
    "export_smtlib",
    "find_end_messages",
    "find_start_messages",
    "flows_to_fsa",
    "format_trace",
    "fsa_from_json",
    "fsa_to_dot",
    "fsa_to_json",
    "generate_constraints",
    "generate_trace",
    "graph_to_dot",
    "library_index",
    "model_extract",
    "node_support",
    "parse_flows",
    "parse_smt_model",
    "parse_trace",
    "reduce_model",
    "sample_solutions",
    "solve_one",
    "__version__",
]
