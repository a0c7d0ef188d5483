"""FSA derivation from reduced solutions, trace acceptance under
execution-scenario semantics, and DOT/JSON export.

A trace is accepted when every message occurrence can be assigned to some
automaton instance (spawning fresh instances from the initial state as
needed, linearizing each event's set in some order) such that each
instance walks valid transitions and all instances are back in the initial
state when the trace ends.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .causality import CausalityGraph, _pair_support
from .constraints import Solution, check_solution, generate_constraints
from .core import Message, Trace

Transition = tuple[str, Message, str]

JSON_FORMAT_TAG = "flowsynth-fsa-1"
WITNESS_FORMAT_TAG = "flowsynth-witness-1"
DEFAULT_BUDGET = 10_000_000
_MEMO_CAP = 2_000_000


@dataclass(frozen=True)
class Fsa:
    states: frozenset[str]
    initial: str
    alphabet: frozenset[Message]
    transitions: frozenset[Transition]
    accepting: frozenset[str]

    def __post_init__(self) -> None:
        if self.initial not in self.states:
            raise ValueError("initial state must be a state")
        if self.accepting != frozenset({self.initial}):
            raise ValueError("the initial state must be the single accepting state")
        for src, label, dst in self.transitions:
            if src not in self.states or dst not in self.states:
                raise ValueError(f"transition endpoint not a state: {src} -> {dst}")
            if label not in self.alphabet:
                raise ValueError(f"transition label {label.text()} not in alphabet")


class Verdict(Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class WitnessStep:
    event: int
    message: Message
    instance: int
    source: str
    target: str


@dataclass(frozen=True)
class AcceptResult:
    verdict: Verdict
    witness: tuple[WitnessStep, ...] | None = None
    offending: Message | None = None
    nodes_used: int = 0

    def __bool__(self) -> bool:
        return self.verdict is Verdict.ACCEPTED


def derive_fsa(g: CausalityGraph, sol: Solution) -> Fsa:
    """Build the automaton whose transitions mirror the solution's edges.

    Each non-terminal message with nonzero throughput becomes one state;
    terminal messages lead back to the initial state.  Start messages with
    nonzero throughput get spawning transitions out of the initial state.
    """
    cs = generate_constraints(g)
    if not check_solution(cs, sol):
        raise ValueError("solution is inconsistent with the graph")

    out_sum: dict[Message, int] = {}
    in_sum: dict[Message, int] = {}
    for (a, b), value in sol.assignment.items():
        out_sum[a] = out_sum.get(a, 0) + value
        in_sum[b] = in_sum.get(b, 0) + value

    def throughput(m: Message) -> int:
        if m in g.roots:
            return out_sum.get(m, 0)
        return in_sum.get(m, 0)

    state = {m: f"q{g.index[m]}" for m in g.nodes}

    def target(m: Message) -> str:
        return "q0" if m in g.terminals else state[m]

    states = {"q0"}
    for m in g.nodes:
        if m not in g.terminals and throughput(m) > 0:
            states.add(state[m])

    transitions: set[Transition] = set()
    for s in sorted(g.roots, key=lambda m: g.index[m]):
        if throughput(s) > 0:
            transitions.add(("q0", s, target(s)))
    for (a, b), value in sol.assignment.items():
        if value > 0:
            transitions.add((state[a], b, target(b)))

    alphabet = {label for _, label, _ in transitions}
    return Fsa(
        states=frozenset(states),
        initial="q0",
        alphabet=frozenset(alphabet),
        transitions=frozenset(transitions),
        accepting=frozenset({"q0"}),
    )


class _Frame:
    __slots__ = ("key", "options", "next_option", "applied")

    def __init__(self, key, options):
        self.key = key
        self.options = options
        self.next_option = 0
        self.applied = None


def accepts(
    fsa: Fsa,
    trace: Trace,
    budget: int = DEFAULT_BUDGET,
    order: Mapping[Message, int] | None = None,
    *,
    strict_events: bool = False,
) -> AcceptResult:
    """Search for an assignment of every occurrence to automaton instances.

    Backtracking DFS over event linearizations and instance choices, with
    memoized failure states.  ``budget`` caps the number of assignment
    attempts; exceeding it yields an INDETERMINATE verdict, never a
    rejection.  ``order`` fixes the message tie-break used for
    linearization (canonical indices when available).

    With ``strict_events`` an instance may advance at most once per event,
    so every consecutive pair of one instance's messages sits in strictly
    ordered events; witnesses then induce step counts within the observed
    edge supports.

    The general search first looks for a strict witness (valid under the
    general semantics too, and found much faster on models whose chains do
    not double up inside events) and widens only when that fails.
    """
    if not strict_events:
        first = _accepts_search(fsa, trace, budget, order, strict_events=True)
        if first.verdict is Verdict.ACCEPTED:
            return first
        left = budget - first.nodes_used
        if left <= 0:
            return AcceptResult(
                Verdict.INDETERMINATE,
                offending=first.offending,
                nodes_used=first.nodes_used,
            )
        if first.offending is not None:
            return first
        second = _accepts_search(fsa, trace, left, order, strict_events=False)
        return AcceptResult(
            second.verdict,
            witness=second.witness,
            offending=second.offending,
            nodes_used=first.nodes_used + second.nodes_used,
        )
    return _accepts_search(fsa, trace, budget, order, strict_events=True)


def _accepts_search(
    fsa: Fsa,
    trace: Trace,
    budget: int,
    order: Mapping[Message, int] | None,
    *,
    strict_events: bool,
) -> AcceptResult:
    for _, m in trace.occurrences():
        if m not in fsa.alphabet:
            return AcceptResult(Verdict.REJECTED, offending=m)
    if not trace.events:
        return AcceptResult(Verdict.ACCEPTED, witness=())

    msg_key = (lambda m: order[m]) if order is not None else (lambda m: m)

    moves: dict[tuple[str, Message], tuple[str, ...]] = {}
    for src, label, dst in fsa.transitions:
        moves.setdefault((src, label), ())
    for src, label, dst in sorted(fsa.transitions, key=lambda t: (t[0], t[2])):
        moves[(src, label)] = moves[(src, label)] + (dst,)

    initial = fsa.initial
    events = trace.events
    n_events = len(events)

    # Pruning data: distance to retirement per state and, per state, how
    # many of its usable labels still occur later in the trace.  A live
    # instance whose labels are exhausted can never retire, and the total
    # retirement distance can never exceed the occurrences left.
    _huge = 10**9
    back: dict[str, set[str]] = {}
    labels_of: dict[str, list[Message]] = {}
    for src, label, dst in fsa.transitions:
        back.setdefault(dst, set()).add(src)
        bucket = labels_of.setdefault(src, [])
        if label not in bucket:
            bucket.append(label)
    dist = {initial: 0}
    frontier = [initial]
    while frontier:
        nxt = []
        for state in frontier:
            for prev in back.get(state, ()):
                if prev not in dist:
                    dist[prev] = dist[state] + 1
                    nxt.append(prev)
        frontier = nxt
    dist_of = lambda s: dist.get(s, _huge)

    counts_left: Counter[Message] = Counter(m for _, m in trace.occurrences())
    states_by_label: dict[Message, list[str]] = {}
    need_live: dict[str, int] = {}
    for state, labels in labels_of.items():
        if state == initial:
            continue
        need_live[state] = sum(1 for m in labels if counts_left[m] > 0)
        for m in labels:
            states_by_label.setdefault(m, []).append(state)
    remaining_total = trace.length
    sum_dist = 0

    # Instance-choice heuristic: prefer the candidate state whose entering
    # label pairs most often with the message in the trace, so temporally
    # plausible chains are explored first.  Deterministic; ties fall back
    # to the oldest instance.
    occ_index: dict[Message, list[int]] = {}
    for i, m in trace.occurrences():
        occ_index.setdefault(m, []).append(i)
    entering: dict[str, Message] = {}
    for src, label, dst in sorted(fsa.transitions, key=lambda t: (t[2], t[0])):
        entering.setdefault(dst, label)
    affinity_cache: dict[tuple[str, Message], int] = {}

    def affinity(state: str, m: Message) -> int:
        key = (state, m)
        cached = affinity_cache.get(key)
        if cached is None:
            a = entering.get(state)
            cached = _pair_support(occ_index.get(a, []), occ_index[m]) if a else 0
            affinity_cache[key] = cached
        return cached

    # Mutable search state, undone on backtrack.
    pos = 0
    remaining: Counter[Message] = Counter(events[0].messages)
    scenario: Counter[str] = Counter()  # states of live instances (never initial)
    ids_in_state: dict[str, list[int]] = {}  # sorted id lists, oldest first
    blocked_ids: set[int] = set()  # advanced during the current event (strict mode)
    blocked_count: Counter[str] = Counter()
    next_instance = 0
    witness: list[WitnessStep] = []
    failed: set = set()
    nodes_used = 0

    def current_key():
        key = (pos, frozenset(remaining.items()), frozenset(scenario.items()))
        if strict_events:
            key += (frozenset(blocked_count.items()),)
        return key

    usage: Counter[tuple[str, Message]] = Counter()
    skey = _state_sort_key(initial)

    def options_here() -> list[tuple[Message, str | None, str]]:
        opts: list[tuple[Message, str | None, str]] = []
        for m in sorted(remaining, key=msg_key):
            candidates = []
            for st in scenario:
                if (st, m) not in moves:
                    continue
                if strict_events and scenario[st] <= blocked_count[st]:
                    continue
                candidates.append(
                    (not usage[(st, m)], -affinity(st, m), skey(st), st)
                )
            for *_, st in sorted(candidates):
                for dst in moves[(st, m)]:
                    opts.append((m, st, dst))
            if (initial, m) in moves:
                for dst in moves[(initial, m)]:
                    opts.append((m, None, dst))
        return opts

    def _oldest_free(st: str) -> int:
        if not strict_events:
            return ids_in_state[st][0]
        for iid in ids_in_state[st]:
            if iid not in blocked_ids:
                return iid
        raise AssertionError("no unblocked instance despite availability check")

    def apply(choice):
        nonlocal pos, remaining, next_instance, blocked_ids, blocked_count
        nonlocal remaining_total, sum_dist
        m, src, dst = choice
        remaining[m] -= 1
        if not remaining[m]:
            del remaining[m]
        if src is None:
            iid = next_instance
            next_instance += 1
        else:
            iid = _oldest_free(src)
            ids_in_state[src].remove(iid)
            scenario[src] -= 1
            if not scenario[src]:
                del scenario[src]
        if dst != initial:
            scenario[dst] += 1
            bucket = ids_in_state.setdefault(dst, [])
            bucket.append(iid)
            bucket.sort()
            if strict_events:
                blocked_ids.add(iid)
                blocked_count[dst] += 1
        if src is not None:
            usage[(src, m)] += 1
        witness.append(WitnessStep(pos, m, iid, src if src is not None else initial, dst))

        viable = True
        remaining_total -= 1
        sum_dist += dist_of(dst) - (dist_of(src) if src is not None else 0)
        counts_left[m] -= 1
        if counts_left[m] == 0:
            for st in states_by_label.get(m, ()):
                need_live[st] -= 1
                if need_live[st] == 0 and scenario.get(st, 0):
                    viable = False
        if dst != initial and need_live.get(dst, 0) == 0:
            viable = False
        if sum_dist > remaining_total:
            viable = False

        advanced = None
        if not remaining and pos + 1 < n_events:
            advanced = (remaining, blocked_ids, blocked_count)
            pos += 1
            remaining = Counter(events[pos].messages)
            if strict_events:
                blocked_ids = set()
                blocked_count = Counter()
        return ((m, src, dst, iid, advanced), viable)

    def undo(record):
        nonlocal pos, remaining, next_instance, blocked_ids, blocked_count
        nonlocal remaining_total, sum_dist
        m, src, dst, iid, advanced = record
        if advanced is not None:
            pos -= 1
            remaining, blocked_ids, blocked_count = advanced
        remaining[m] += 1
        witness.pop()
        if src is not None:
            usage[(src, m)] -= 1
        if counts_left[m] == 0:
            for st in states_by_label.get(m, ()):
                need_live[st] += 1
        counts_left[m] += 1
        remaining_total += 1
        sum_dist -= dist_of(dst) - (dist_of(src) if src is not None else 0)
        if dst != initial:
            scenario[dst] -= 1
            if not scenario[dst]:
                del scenario[dst]
            ids_in_state[dst].remove(iid)
            if strict_events:
                blocked_ids.discard(iid)
                blocked_count[dst] -= 1
                if not blocked_count[dst]:
                    del blocked_count[dst]
        if src is None:
            next_instance -= 1
        else:
            scenario[src] += 1
            bucket = ids_in_state.setdefault(src, [])
            bucket.append(iid)
            bucket.sort()

    start_key = current_key()
    stack = [_Frame(start_key, options_here())]
    while stack:
        frame = stack[-1]
        if frame.applied is not None:
            undo(frame.applied)
            frame.applied = None
        if frame.next_option >= len(frame.options):
            if len(failed) < _MEMO_CAP:
                failed.add(frame.key)
            stack.pop()
            continue
        choice = frame.options[frame.next_option]
        frame.next_option += 1
        nodes_used += 1
        if nodes_used > budget:
            return AcceptResult(Verdict.INDETERMINATE, nodes_used=nodes_used)
        frame.applied, viable = apply(choice)
        if not remaining:  # all events consumed (advance only stops at the end)
            if not scenario:
                return AcceptResult(
                    Verdict.ACCEPTED, witness=tuple(witness), nodes_used=nodes_used
                )
            continue
        if not viable:
            continue
        key = current_key()
        if key in failed:
            continue
        stack.append(_Frame(key, options_here()))
    return AcceptResult(Verdict.REJECTED, nodes_used=nodes_used)


def full_fsa(g: CausalityGraph, banned=frozenset()) -> Fsa:
    """The automaton of the whole causality graph, minus any banned edges.

    Over-approximates the FSA of every solution avoiding ``banned``; an
    accepting run assigns each occurrence to a chain of causally linked
    occurrences, which is the basis for the decomposition-seeded solutions
    in the solver.
    """
    state = {m: f"q{g.index[m]}" for m in g.nodes}

    def target(m: Message) -> str:
        return "q0" if m in g.terminals else state[m]

    states = {"q0"} | {state[m] for m in g.nodes if m not in g.terminals}
    transitions: set[Transition] = set()
    for s in sorted(g.roots, key=lambda m: g.index[m]):
        transitions.add(("q0", s, target(s)))
    for a, b in g.edges:
        if (a, b) not in banned:
            transitions.add((state[a], b, target(b)))
    alphabet = {label for _, label, _ in transitions}
    return Fsa(
        states=frozenset(states),
        initial="q0",
        alphabet=frozenset(alphabet),
        transitions=frozenset(transitions),
        accepting=frozenset({"q0"}),
    )


def _state_sort_key(initial: str):
    return lambda s: (s != initial, len(s), s)


def fsa_to_dot(fsa: Fsa) -> str:
    """DOT rendering; the accepting initial state is doubly circled."""
    key = _state_sort_key(fsa.initial)
    lines = ["digraph fsa {", "  rankdir=LR;"]
    for s in sorted(fsa.states, key=key):
        shape = "doublecircle" if s in fsa.accepting else "circle"
        lines.append(f'  {s} [shape={shape}];')
    for src, label, dst in sorted(
        fsa.transitions, key=lambda t: (key(t[0]), t[1], key(t[2]))
    ):
        lines.append(f'  {src} -> {dst} [label="{label.text()}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def fsa_to_json(fsa: Fsa) -> str:
    key = _state_sort_key(fsa.initial)
    payload = {
        "format": JSON_FORMAT_TAG,
        "states": sorted(fsa.states, key=key),
        "initial": fsa.initial,
        "accepting": sorted(fsa.accepting, key=key),
        "transitions": [
            {
                "from": src,
                "label": {"src": m.src, "dest": m.dest, "cmd": m.cmd},
                "to": dst,
            }
            for src, m, dst in sorted(
                fsa.transitions, key=lambda t: (key(t[0]), t[1], key(t[2]))
            )
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def fsa_from_json(text: str) -> Fsa:
    payload = json.loads(text)
    if payload.get("format") != JSON_FORMAT_TAG:
        raise ValueError(f"unsupported model format: {payload.get('format')!r}")
    transitions = frozenset(
        (
            t["from"],
            Message(t["label"]["src"], t["label"]["dest"], t["label"]["cmd"]),
            t["to"],
        )
        for t in payload["transitions"]
    )
    return Fsa(
        states=frozenset(payload["states"]),
        initial=payload["initial"],
        alphabet=frozenset(m for _, m, _ in transitions),
        transitions=transitions,
        accepting=frozenset(payload["accepting"]),
    )


def export_fsa(fsa: Fsa, format: str) -> str:
    """Serialize to the requested format, one of ``dot`` or ``json``."""
    if format == "dot":
        return fsa_to_dot(fsa)
    if format == "json":
        return fsa_to_json(fsa)
    raise ValueError(f"unknown export format: {format!r}")


def witness_to_json(witness: tuple[WitnessStep, ...]) -> str:
    payload = {
        "format": WITNESS_FORMAT_TAG,
        "steps": [
            {
                "event": w.event,
                "message": {"src": w.message.src, "dest": w.message.dest, "cmd": w.message.cmd},
                "instance": w.instance,
                "from": w.source,
                "to": w.target,
            }
            for w in witness
        ],
    }
    return json.dumps(payload, indent=2) + "\n"
