"""Flow specifications and the randomized concurrent trace generator.

Flow-spec file grammar (``#`` comments):

    flow <name> [param <ident> in {v, v, ...}]
    msg <idx> (<src>:<dest>:<cmd>)
    branch: <idx>, <idx>, ...

``{ident}`` placeholders in message fields are substituted per parameter
value, expanding a parameterized block into one flow per binding.  Every
branch of a flow must share the flow's start message and respect causality
between consecutive messages.

The generator runs flow instances concurrently: at each step it uniformly
picks either initiating a new instance of a flow still under its limit or
advancing one active instance, so instance executions interleave freely.
A simultaneity knob merges some messages into the previous event to
produce multi-message events.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from importlib import resources
from typing import IO, Iterable, Sequence

from .core import Event, Message, Trace, causal
from .fsa import Fsa

_FLOW_LINE = re.compile(r"^flow\s+(\w+)(?:\s+param\s+(\w+)\s+in\s+\{([^}]*)\})?$")
_MSG_LINE = re.compile(r"^msg\s+(\d+)\s+(\(.*\))$")
_BRANCH_LINE = re.compile(r"^branch:\s*(.+)$")
_PLACEHOLDER = re.compile(r"\{(\w+)\}")


class FlowParseError(ValueError):
    """Raised on malformed flow-spec input; carries the offending line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, eq=False)
class FlowSpec:
    """One expanded flow: a set of branches sharing a start message."""

    name: str
    branches: tuple[tuple[Message, ...], ...]
    start: Message
    ends: frozenset[Message]


def _substitute(template: str, binding: dict[str, str], line: int) -> str:
    def repl(m: re.Match) -> str:
        name = m.group(1)
        if name not in binding:
            raise FlowParseError(line, f"unbound parameter {{{name}}}")
        return binding[name]

    return _PLACEHOLDER.sub(repl, template)


def _expand_flow(
    name: str,
    suffix: str,
    binding: dict[str, str],
    msgs: dict[int, tuple[str, int]],
    branches: list[tuple[int, list[int]]],
) -> FlowSpec:
    resolved: dict[int, Message] = {}
    for idx, (text, line) in msgs.items():
        try:
            resolved[idx] = Message.parse(_substitute(text, binding, line))
        except FlowParseError:
            raise
        except ValueError as exc:
            raise FlowParseError(line, str(exc)) from exc

    expanded: list[tuple[Message, ...]] = []
    for line, refs in branches:
        seq = []
        for r in refs:
            if r not in resolved:
                raise FlowParseError(line, f"branch references undeclared msg {r}")
            seq.append(resolved[r])
        for a, b in zip(seq, seq[1:]):
            if not causal(a, b):
                raise FlowParseError(
                    line,
                    f"branch violates causality: {a.text()} cannot be followed by {b.text()}",
                )
        expanded.append(tuple(seq))

    starts = {b[0] for b in expanded}
    if len(starts) > 1:
        raise FlowParseError(
            branches[0][0],
            f"flow {name}{suffix} has branches with differing start messages",
        )
    return FlowSpec(
        name=name + suffix,
        branches=tuple(expanded),
        start=expanded[0][0],
        ends=frozenset(b[-1] for b in expanded),
    )


def parse_flows(source: str | IO[str]) -> list[FlowSpec]:
    """Parse a flow-spec file, expanding parameterized blocks."""
    text = source.read() if hasattr(source, "read") else source

    blocks: list[dict] = []
    current: dict | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        m = _FLOW_LINE.match(content)
        if m:
            current = {
                "name": m.group(1),
                "param": m.group(2),
                "values": [v.strip() for v in (m.group(3) or "").split(",") if v.strip()],
                "line": line_no,
                "msgs": {},
                "branches": [],
            }
            if m.group(2) and not current["values"]:
                raise FlowParseError(line_no, "parameter with empty value set")
            blocks.append(current)
            continue
        if current is None:
            raise FlowParseError(line_no, "content before the first flow header")
        m = _MSG_LINE.match(content)
        if m:
            idx = int(m.group(1))
            if idx in current["msgs"]:
                raise FlowParseError(line_no, f"duplicate msg index {idx}")
            current["msgs"][idx] = (m.group(2), line_no)
            continue
        m = _BRANCH_LINE.match(content)
        if m:
            try:
                refs = [int(tok) for tok in m.group(1).split(",") if tok.strip()]
            except ValueError as exc:
                raise FlowParseError(line_no, "branch must list msg indices") from exc
            if not refs:
                raise FlowParseError(line_no, "empty branch")
            current["branches"].append((line_no, refs))
            continue
        raise FlowParseError(line_no, f"unrecognized line: {content!r}")

    flows: list[FlowSpec] = []
    for block in blocks:
        if not block["branches"]:
            raise FlowParseError(block["line"], f"flow {block['name']} has no branches")
        if block["param"] is None:
            flows.append(_expand_flow(block["name"], "", {}, block["msgs"], block["branches"]))
        else:
            for value in block["values"]:
                suffix = f"[{block['param']}={value}]"
                binding = {block["param"]: value}
                flows.append(
                    _expand_flow(block["name"], suffix, binding, block["msgs"], block["branches"])
                )
    return flows


def library_index(flows: Sequence[FlowSpec]) -> dict[Message, int]:
    """Stable 1-based numbering of every message, in declaration order."""
    index: dict[Message, int] = {}
    for flow in flows:
        for branch in flow.branches:
            for m in branch:
                if m not in index:
                    index[m] = len(index) + 1
    return index


@dataclass(frozen=True)
class InstanceLog:
    """Where one generated instance landed: its flow, branch, and the event
    index of each emitted message in branch order."""

    flow: str
    branch: int
    positions: tuple[int, ...]


def _simulate(
    flows: Sequence[FlowSpec],
    limit_per_flow: int,
    seed: int,
    simultaneity: float,
) -> tuple[list[list[Message]], list[InstanceLog]]:
    rng = random.Random(f"gen:{seed}")
    events: list[list[Message]] = []
    event_owners: list[set[int]] = []
    counts = [0] * len(flows)
    # active: [flow index, branch index, next position, instance id]
    active: list[list[int]] = []
    logs: list[list[int]] = []
    chosen: list[tuple[str, int]] = []

    def emit(instance_id: int, message: Message) -> None:
        merge = (
            events
            and rng.random() < simultaneity
            and instance_id not in event_owners[-1]
        )
        if merge:
            events[-1].append(message)
            event_owners[-1].add(instance_id)
        else:
            events.append([message])
            event_owners.append({instance_id})
        logs[instance_id].append(len(events) - 1)

    while True:
        actions: list[tuple[str, int]] = [
            ("init", i) for i, _ in enumerate(flows) if counts[i] < limit_per_flow
        ]
        actions.extend(("adv", j) for j in range(len(active)))
        if not actions:
            break
        kind, k = rng.choice(actions)
        if kind == "init":
            flow = flows[k]
            branch_i = rng.randrange(len(flow.branches))
            counts[k] += 1
            iid = len(logs)
            logs.append([])
            chosen.append((flow.name, branch_i))
            branch = flow.branches[branch_i]
            emit(iid, branch[0])
            if len(branch) > 1:
                active.append([k, branch_i, 1, iid])
        else:
            rec = active[k]
            flow_i, branch_i, posn, iid = rec
            branch = flows[flow_i].branches[branch_i]
            emit(iid, branch[posn])
            rec[2] += 1
            if rec[2] == len(branch):
                active.pop(k)

    instances = [
        InstanceLog(flow=chosen[i][0], branch=chosen[i][1], positions=tuple(logs[i]))
        for i in range(len(logs))
    ]
    return events, instances


def generate_trace(
    flows: Sequence[FlowSpec],
    limit_per_flow: int,
    seed: int = 0,
    simultaneity: float = 0.0,
) -> Trace:
    """Generate one complete interleaved trace.

    Every flow is initiated exactly ``limit_per_flow`` times (each instance
    pinned to a uniformly chosen branch) and every started instance runs to
    completion.  Output is reproducible from the seed.
    """
    if limit_per_flow < 0:
        raise ValueError("limit_per_flow must be non-negative")
    if not 0.0 <= simultaneity <= 1.0:
        raise ValueError("simultaneity must be a probability")
    events, _ = _simulate(flows, limit_per_flow, seed, simultaneity)
    return Trace(
        tuple(Event(tuple(ev)) for ev in events),
        declared_indices=library_index(flows),
    )


def flows_to_fsa(flows: Sequence[FlowSpec]) -> Fsa:
    """Ground-truth automaton accepting exactly the flows' branch sequences
    (used as the generator's correctness oracle).

    Branches are merged into a prefix tree per flow, so branches sharing a
    prefix share states and the automaton stays deterministic wherever the
    flow itself is.
    """
    states = {"q0"}
    transitions = set()
    for flow in flows:
        node_of: dict[tuple[Message, ...], str] = {(): "q0"}
        for branch in flow.branches:
            for i, m in enumerate(branch):
                src = node_of[branch[:i]]
                if i == len(branch) - 1:
                    transitions.add((src, m, "q0"))
                    continue
                prefix = branch[: i + 1]
                if prefix not in node_of:
                    node_of[prefix] = f"{flow.name}:{len(node_of)}"
                    states.add(node_of[prefix])
                transitions.add((src, m, node_of[prefix]))
    alphabet = {m for _, m, _ in transitions}
    return Fsa(
        states=frozenset(states),
        initial="q0",
        alphabet=frozenset(alphabet),
        transitions=frozenset(transitions),
        accepting=frozenset({"q0"}),
    )


def bundled_flows_text(name: str) -> str:
    """Text of a bundled flow library (``small`` or ``large``)."""
    path = resources.files("flowsynth.data").joinpath(f"flows_{name}.flows")
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ValueError(f"no bundled flow library named {name!r}") from exc
