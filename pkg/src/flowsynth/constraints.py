"""Integer consistency constraints over a causality graph.

One integer variable per graph edge.  Every node must route exactly its
support through its chosen outgoing edges and through its chosen incoming
edges, and no edge may carry more than its observed support:

* non-terminal node n:   support(n) == sum of c(n -> n') over outgoing edges
* non-root node n':      support(n') == sum of c(n -> n') over incoming edges
* every edge e:          0 <= c(e) <= support(e)

The module also serializes systems to SMT-LIB v2 (QF_LIA) and parses
solver models back into assignments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .causality import CausalityGraph, Edge
from .core import Message


@dataclass(frozen=True)
class Equality:
    node: Message
    side: str  # "outgoing" or "incoming"
    edges: tuple[Edge, ...]
    target: int


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    bounds: dict[Edge, int]  # upper bounds, in canonical edge order
    equalities: tuple[Equality, ...]
    diagnostics: tuple[str, ...]
    index: dict[Message, int]

    @property
    def variables(self) -> tuple[Edge, ...]:
        return tuple(self.bounds)

    @property
    def trivially_unsat(self) -> bool:
        return any(eq.target > 0 and not eq.edges for eq in self.equalities)

    def edge_name(self, e: Edge) -> str:
        return f"c_{self.index[e[0]]}_{self.index[e[1]]}"

    def restrict(self, zero_edges: Iterable[Edge]) -> "ConstraintSystem":
        """A copy of the system with the given variables forced to zero."""
        zeros = set(zero_edges)
        unknown = zeros - set(self.bounds)
        if unknown:
            raise ValueError(f"unknown edges in restriction: {sorted(unknown)!r}")
        bounds = {e: (0 if e in zeros else ub) for e, ub in self.bounds.items()}
        return ConstraintSystem(bounds, self.equalities, self.diagnostics, self.index)


@dataclass(frozen=True, eq=False)
class Solution:
    """An integral assignment to every edge variable.

    ``forced_zeros`` records the zero-constraints accumulated while the
    solution was reduced; it is empty for solutions straight from the
    solver.
    """

    assignment: dict[Edge, int]
    forced_zeros: frozenset[Edge] = field(default_factory=frozenset)

    @property
    def support_edges(self) -> frozenset[Edge]:
        return frozenset(e for e, v in self.assignment.items() if v > 0)

    def value_key(self, cs: ConstraintSystem) -> tuple[int, ...]:
        """Assignment values in the system's canonical variable order."""
        return tuple(self.assignment[e] for e in cs.bounds)


def generate_constraints(g: CausalityGraph) -> ConstraintSystem:
    """Derive the consistency-constraint system from a causality graph.

    Nodes that are both root and terminal get no equalities.  A non-terminal
    node without outgoing edges (or non-root without incoming) still gets
    its equality, which is unsatisfiable for positive support; a diagnostic
    naming the message is recorded so the caller can surface it.
    """
    edges_sorted = g.sorted_edges()
    bounds = {e: g.edges[e] for e in edges_sorted}

    outgoing: dict[Message, list[Edge]] = {}
    incoming: dict[Message, list[Edge]] = {}
    for e in edges_sorted:
        outgoing.setdefault(e[0], []).append(e)
        incoming.setdefault(e[1], []).append(e)

    equalities: list[Equality] = []
    diagnostics: list[str] = []
    for n in g.sorted_nodes():
        sup = g.nodes[n]
        if n not in g.terminals:
            out = tuple(outgoing.get(n, ()))
            if not out and sup > 0:
                diagnostics.append(
                    f"message {n.text()} (support {sup}) has no outgoing causal successor"
                )
            equalities.append(Equality(n, "outgoing", out, sup))
        if n not in g.roots:
            inc = tuple(incoming.get(n, ()))
            if not inc and sup > 0:
                diagnostics.append(
                    f"message {n.text()} (support {sup}) has no incoming causal predecessor"
                )
            equalities.append(Equality(n, "incoming", inc, sup))

    return ConstraintSystem(bounds, tuple(equalities), tuple(diagnostics), dict(g.index))


def check_solution(cs: ConstraintSystem, sol: Solution) -> bool:
    """True iff every equality holds exactly and every bound holds."""
    values = sol.assignment
    for e, ub in cs.bounds.items():
        if e not in values:
            raise KeyError(f"solution does not assign variable {cs.edge_name(e)}")
        if not 0 <= values[e] <= ub:
            return False
    for eq in cs.equalities:
        if sum(values[e] for e in eq.edges) != eq.target:
            return False
    return True


def _sum_expr(cs: ConstraintSystem, edges: tuple[Edge, ...]) -> str:
    if not edges:
        return "0"
    names = [cs.edge_name(e) for e in edges]
    if len(names) == 1:
        return names[0]
    return "(+ " + " ".join(names) + ")"


def export_smtlib(cs: ConstraintSystem, forced_zero: Iterable[Edge] = ()) -> str:
    """Emit the system as a QF_LIA SMT-LIB v2 problem.

    ``forced_zero`` appends equal-zero assertions for the given variables,
    which is how the reduction loop narrows an external solver run by run.
    Output is deterministic: variables in canonical index order.
    """
    lines = ["(set-option :produce-models true)", "(set-logic QF_LIA)"]
    if not cs.bounds:
        lines.append("(check-sat)")
        return "\n".join(lines) + "\n"
    for e in cs.bounds:
        lines.append(f"(declare-fun {cs.edge_name(e)} () Int)")
    for e, ub in cs.bounds.items():
        name = cs.edge_name(e)
        lines.append(f"(assert (and (>= {name} 0) (<= {name} {ub})))")
    for eq in cs.equalities:
        lines.append(f"(assert (= {eq.target} {_sum_expr(cs, eq.edges)}))")
    zeros = sorted(set(forced_zero), key=lambda e: (cs.index[e[0]], cs.index[e[1]]))
    for e in zeros:
        lines.append(f"(assert (= {cs.edge_name(e)} 0))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


_DEFINE_FUN_RE = re.compile(
    r"\(define-fun\s+(c_\d+_\d+)\s*\(\s*\)\s*Int\s+(\(-\s*\d+\s*\)|-?\d+)\s*\)"
)
_PLAIN_RE = re.compile(r"^\s*(c_\d+_\d+)\s+(-?\d+)\s*$")


def _parse_value(text: str) -> int:
    text = text.strip()
    if text.startswith("("):  # negative literal, e.g. (- 2)
        return -int(text.strip("()- \t"))
    return int(text)


def parse_smt_model(text: str, cs: ConstraintSystem) -> Solution | None:
    """Parse a solver model into a Solution; returns None on ``unsat``.

    Accepts the standard ``(define-fun c_i_j () Int k)`` form as well as
    plain ``c_i_j k`` lines.  Every variable of the system must be assigned.
    """
    if re.search(r"^\s*unsat\b", text, re.MULTILINE):
        return None
    by_name = {cs.edge_name(e): e for e in cs.bounds}
    assignment: dict[Edge, int] = {}
    for name, value in _DEFINE_FUN_RE.findall(text):
        if name in by_name:
            assignment[by_name[name]] = _parse_value(value)
    for line in text.splitlines():
        m = _PLAIN_RE.match(line)
        if m and m.group(1) in by_name:
            assignment[by_name[m.group(1)]] = int(m.group(2))
    missing = [cs.edge_name(e) for e in cs.bounds if e not in assignment]
    if missing:
        raise ValueError(f"model does not assign: {', '.join(missing)}")
    return Solution(assignment)
