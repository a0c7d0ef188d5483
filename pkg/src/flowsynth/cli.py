"""Command-line front end: mine, gen, check, export-smt.

Exit codes: 0 success, 1 I/O or parse error, 2 unsatisfiable or structurally
infeasible constraints (mine), 3 trace rejected (check), 4 search budget
exceeded (check).
"""

from __future__ import annotations

import argparse
import json
import shlex
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from .causality import CausalityGraph, build_graph
from .constraints import (
    ConstraintSystem,
    Solution,
    export_smtlib,
    generate_constraints,
    parse_smt_model,
)
from .core import Trace
from .flowgen import FlowParseError, bundled_flows_text, generate_trace, library_index, parse_flows
from .fsa import (
    DEFAULT_BUDGET,
    Fsa,
    Verdict,
    accepts,
    derive_fsa,
    fsa_from_json,
    fsa_to_dot,
    fsa_to_json,
    witness_to_json,
)
from .ingest import MessageCatalog, TraceParseError, collect_messages, format_trace, parse_trace
from .solver import reduce_with, replayable_extract


@dataclass
class MineResult:
    trace: Trace
    catalog: MessageCatalog
    graph: CausalityGraph
    system: ConstraintSystem
    solution: Solution | None
    fsa: Fsa | None
    phases: dict[str, float]


def run_mine(trace: Trace, sz: int = 8, seed: int = 0, solve=None) -> MineResult:
    """Run the full pipeline on an already-parsed trace.

    ``solve`` overrides the model-extraction step (used by the SMT-LIB
    backend); it maps a ConstraintSystem to a Solution or None.
    """
    phases: dict[str, float] = {}
    t0 = time.perf_counter()
    catalog = collect_messages(trace)
    phases["catalog"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    graph = build_graph(trace, catalog)
    phases["graph"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    system = generate_constraints(graph)
    phases["constraints"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if system.diagnostics:
        solution = None
    elif solve is not None:
        solution = solve(system)
    else:
        solution = replayable_extract(
            graph, system, trace, order=catalog.index, sz=sz, seed=seed
        )
    phases["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    machine = derive_fsa(graph, solution) if solution is not None else None
    phases["fsa"] = time.perf_counter() - t0

    return MineResult(trace, catalog, graph, system, solution, machine, phases)


def _stats_payload(result: MineResult, parse_seconds: float) -> dict:
    phases = {"parse": parse_seconds, **result.phases}
    return {
        "messages": len(result.catalog.messages),
        "length": result.trace.length,
        "events": len(result.trace.events),
        "graph_edges": len(result.graph.edges),
        "support_edges": len(result.solution.support_edges) if result.solution else 0,
        "states": len(result.fsa.states) if result.fsa else 0,
        "transitions": len(result.fsa.transitions) if result.fsa else 0,
        "status": "ok" if result.solution is not None else "unsat",
        "runtime": round(sum(phases.values()), 6),
        "phases": {k: round(v, 6) for k, v in phases.items()},
    }


def _print_stats(payload: dict, mode: str) -> None:
    if mode == "json":
        print(json.dumps(payload, indent=2))
        return
    for key in ("messages", "length", "events", "graph_edges", "support_edges",
                "states", "transitions", "status"):
        print(f"{key.replace('_', ' ')}: {payload[key]}")
    print(f"runtime: {payload['runtime']:.3f} s")
    for phase, seconds in payload["phases"].items():
        print(f"  {phase}: {seconds:.3f} s")


def _load_dictionary(path: str | None):
    if path is None:
        return None
    text = Path(path).read_text(encoding="utf-8")
    parsed = parse_trace(text)
    if parsed.events:
        raise TraceParseError(1, "dictionary file must not contain event lines")
    return {idx: m for m, idx in (parsed.declared_indices or {}).items()}


def _read_trace(args) -> tuple[Trace, float]:
    t0 = time.perf_counter()
    dictionary = _load_dictionary(getattr(args, "dict", None))
    text = Path(args.trace).read_text(encoding="utf-8")
    trace = parse_trace(text, dictionary=dictionary)
    return trace, time.perf_counter() - t0


def _smt_solve(system: ConstraintSystem, solver_cmd: str) -> Solution | None:
    """Model extraction through an external SMT-LIB solver command.

    Each query writes a problem file, runs the command on it, and parses
    the model from stdout; the reduction loop appends equal-zero assertions
    per iteration.
    """
    argv = shlex.split(solver_cmd)

    def query(zeros: frozenset) -> Solution | None:
        with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as handle:
            handle.write(export_smtlib(system, forced_zero=zeros))
            path = handle.name
        try:
            proc = subprocess.run(argv + [path], capture_output=True, text=True)
            return parse_smt_model(proc.stdout, system)
        finally:
            Path(path).unlink(missing_ok=True)

    initial = query(frozenset())
    if initial is None:
        return None
    return reduce_with(system, initial, query)


def _cmd_mine(args) -> int:
    try:
        trace, parse_seconds = _read_trace(args)
    except (TraceParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    solve = None
    if args.backend == "smtlib":
        if not args.solver_cmd:
            print("error: --backend smtlib requires --solver-cmd", file=sys.stderr)
            return 1
        solve = lambda system: _smt_solve(system, args.solver_cmd)

    result = run_mine(trace, sz=args.sz, seed=args.seed, solve=solve)
    payload = _stats_payload(result, parse_seconds)

    if result.solution is None:
        for diag in result.system.diagnostics:
            print(f"infeasible: {diag}", file=sys.stderr)
        if not result.system.diagnostics:
            print("unsat: no edge-count assignment is consistent with the node supports",
                  file=sys.stderr)
        _print_stats(payload, args.stats)
        return 2

    if args.dot:
        Path(args.dot).write_text(fsa_to_dot(result.fsa), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(fsa_to_json(result.fsa), encoding="utf-8")
    _print_stats(payload, args.stats)
    return 0


def _cmd_gen(args) -> int:
    try:
        path = Path(args.flows)
        if path.exists():
            text = path.read_text(encoding="utf-8")
        else:
            try:
                text = bundled_flows_text(args.flows)
            except ValueError:
                print(f"error: no such flow file or bundled library: {args.flows}",
                      file=sys.stderr)
                return 1
        flows = parse_flows(text)
    except (FlowParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    trace = generate_trace(flows, args.limit, seed=args.seed, simultaneity=args.simul)
    Path(args.out).write_text(format_trace(trace, index=library_index(flows)),
                              encoding="utf-8")
    print(f"wrote {trace.length} messages in {len(trace.events)} events to {args.out}")
    return 0


def _cmd_check(args) -> int:
    try:
        model = fsa_from_json(Path(args.model).read_text(encoding="utf-8"))
        trace, _ = _read_trace(args)
    except (TraceParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    catalog = collect_messages(trace)
    result = accepts(model, trace, budget=args.budget, order=catalog.index)
    if result.verdict is Verdict.ACCEPTED:
        print(f"accepted ({result.nodes_used} search nodes)")
        if args.witness:
            Path(args.witness).write_text(witness_to_json(result.witness), encoding="utf-8")
        return 0
    if result.verdict is Verdict.REJECTED:
        if result.offending is not None:
            print(f"rejected: message {result.offending.text()} is not in the model's alphabet")
        else:
            print(f"rejected ({result.nodes_used} search nodes)")
        return 3
    print(f"indeterminate: search budget of {args.budget} nodes exceeded")
    return 4


def _cmd_export_smt(args) -> int:
    try:
        trace, _ = _read_trace(args)
    except (TraceParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    catalog = collect_messages(trace)
    graph = build_graph(trace, catalog)
    system = generate_constraints(graph)
    Path(args.out).write_text(export_smtlib(system), encoding="utf-8")
    for diag in system.diagnostics:
        print(f"note: {diag}", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowsynth",
        description="Synthesize finite-state protocol models from concurrent message traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mine = sub.add_parser("mine", help="mine an FSA model from a trace file")
    mine.add_argument("--trace", required=True, help="trace file")
    mine.add_argument("--dict", help="separate message dictionary file")
    mine.add_argument("--sz", type=int, default=8, help="solution samples to reduce (default 8)")
    mine.add_argument("--seed", type=int, default=0)
    mine.add_argument("--backend", choices=("flow", "smtlib"), default="flow")
    mine.add_argument("--solver-cmd", help="external SMT solver command (smtlib backend)")
    mine.add_argument("--dot", help="write the model as DOT")
    mine.add_argument("--json", help="write the model as JSON")
    mine.add_argument("--stats", choices=("text", "json"), default="text")
    mine.set_defaults(func=_cmd_mine)

    gen = sub.add_parser("gen", help="generate a synthetic trace from a flow library")
    gen.add_argument("--flows", required=True,
                     help="flow-spec file, or a bundled library name (small, large)")
    gen.add_argument("--limit", type=int, required=True, help="instances per flow")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--simul", type=float, default=0.0,
                     help="probability of merging a message into the previous event")
    gen.add_argument("--out", required=True, help="output trace file")
    gen.set_defaults(func=_cmd_gen)

    check = sub.add_parser("check", help="check a trace against a mined model")
    check.add_argument("--model", required=True, help="model JSON file")
    check.add_argument("--trace", required=True, help="trace file")
    check.add_argument("--dict", help="separate message dictionary file")
    check.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    check.add_argument("--witness", help="write the accepting assignment as JSON")
    check.set_defaults(func=_cmd_check)

    export = sub.add_parser("export-smt", help="export the constraint system as SMT-LIB v2")
    export.add_argument("--trace", required=True, help="trace file")
    export.add_argument("--dict", help="separate message dictionary file")
    export.add_argument("--out", required=True, help="output .smt2 file")
    export.set_defaults(func=_cmd_export_smt)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
