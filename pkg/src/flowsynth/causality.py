"""Causality graph construction and support counting.

Nodes are the unique messages of a trace.  A directed edge a -> b exists
when b's sender is a's receiver, a is not an end message, b is not a start
message, and the pair actually co-occurs in order at least once.  Node
support counts occurrences; edge support counts the maximum number of
occurrence-disjoint (a before b) pairs, found by a greedy scan.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import Message, Trace, causal
from .ingest import MessageCatalog

Edge = tuple[Message, Message]


@dataclass(frozen=True, eq=False)
class CausalityGraph:
    nodes: dict[Message, int]
    edges: dict[Edge, int]
    roots: frozenset[Message]
    terminals: frozenset[Message]
    index: dict[Message, int]

    def __post_init__(self) -> None:
        for m, sup in self.nodes.items():
            if sup < 0:
                raise ValueError(f"negative node support for {m.text()}")
            if self.index.get(m, 0) < 1:
                raise ValueError(f"missing or non-positive index for {m.text()}")
        if len(set(self.index.values())) != len(self.index):
            raise ValueError("message indices must be unique")
        for bad in (self.roots | self.terminals) - set(self.nodes):
            raise ValueError(f"root/terminal {bad.text()} is not a node")
        for (a, b), sup in self.edges.items():
            if a not in self.nodes or b not in self.nodes:
                raise ValueError("edge endpoint is not a node")
            if not causal(a, b):
                raise ValueError(f"edge {a.text()} -> {b.text()} violates causality")
            if a in self.terminals:
                raise ValueError(f"edge leaves terminal node {a.text()}")
            if b in self.roots:
                raise ValueError(f"edge enters root node {b.text()}")
            if not 0 <= sup <= min(self.nodes[a], self.nodes[b]):
                raise ValueError(f"edge support out of range for {a.text()} -> {b.text()}")

    def sorted_nodes(self) -> list[Message]:
        return sorted(self.nodes, key=lambda m: self.index[m])

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges, key=lambda e: (self.index[e[0]], self.index[e[1]]))


def _occurrences(trace: Trace) -> dict[Message, list[int]]:
    occ: dict[Message, list[int]] = {}
    for i, m in trace.occurrences():
        occ.setdefault(m, []).append(i)
    return occ


def _pair_support(occ_a: list[int], occ_b: list[int]) -> int:
    # Greedy disjoint pairing: each b occurrence consumes the earliest still
    # unmatched a occurrence from a strictly earlier event.  Works unchanged
    # when both lists are the same message (self-loop edges).
    i = 0
    count = 0
    for t in occ_b:
        if i < len(occ_a) and occ_a[i] < t:
            i += 1
            count += 1
    return count


def node_support(trace: Trace, m: Message) -> int:
    """Number of occurrences of m across all events."""
    return sum(1 for _, x in trace.occurrences() if x == m)


def edge_support(trace: Trace, a: Message, b: Message) -> int:
    """Greedy disjoint-pairing count of (a before b) occurrence pairs.

    Occurrences in the same event never pair.  Equals the maximum matching
    between a-occurrences and strictly later b-occurrences.
    """
    if not causal(a, b):
        raise ValueError(f"edge support requires causal pair, got {a.text()} -> {b.text()}")
    occ = _occurrences(trace)
    return _pair_support(occ.get(a, []), occ.get(b, []))


def build_graph(trace: Trace, catalog: MessageCatalog) -> CausalityGraph:
    """Build the causality graph with node and edge supports.

    Candidate edges are all causal ordered pairs not leaving an end message
    and not entering a start message; pairs with zero support are dropped.
    """
    occ = _occurrences(trace)
    nodes = {m: len(occ[m]) for m in catalog.messages}
    edges: dict[Edge, int] = {}
    for a in catalog.messages:
        if a in catalog.ends:
            continue
        for b in catalog.messages:
            if b in catalog.starts or not causal(a, b):
                continue
            sup = _pair_support(occ[a], occ[b])
            if sup:
                edges[(a, b)] = sup
    return CausalityGraph(
        nodes=nodes,
        edges=edges,
        roots=catalog.starts,
        terminals=catalog.ends,
        index=dict(catalog.index),
    )


def graph_to_dot(g: CausalityGraph) -> str:
    """Render the graph in DOT: roots as double circles, terminals as boxes."""
    lines = ["digraph causality {"]
    for m in g.sorted_nodes():
        label = f"{g.index[m]}:{m.src}:{m.dest}:{m.cmd} ({g.nodes[m]})"
        if m in g.roots:
            shape = "doublecircle"
        elif m in g.terminals:
            shape = "box"
        else:
            shape = "ellipse"
        lines.append(f'  n{g.index[m]} [label="{label}", shape={shape}];')
    for a, b in g.sorted_edges():
        lines.append(f'  n{g.index[a]} -> n{g.index[b]} [label="{g.edges[(a, b)]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
