import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowsynth import (
    Fsa,
    Message,
    Solution,
    Trace,
    Verdict,
    accepts,
    build_graph,
    causal,
    collect_messages,
    derive_fsa,
    export_fsa,
    fsa_from_json,
    fsa_to_dot,
    fsa_to_json,
    generate_constraints,
)
from flowsynth.fsa import full_fsa, witness_to_json

from helpers import M1, M2, M3, M4, M5, M6, msg, twocpu_trace


@pytest.fixture(scope="module")
def twocpu_setup():
    trace = twocpu_trace()
    cat = collect_messages(trace)
    g = build_graph(trace, cat)
    cs = generate_constraints(g)
    by_index = {i: m for m, i in cat.index.items()}
    values = {(1, 2): 2, (3, 5): 2, (5, 6): 2, (6, 4): 2}
    assignment = {e: 0 for e in cs.bounds}
    for (a, b), v in values.items():
        assignment[(by_index[a], by_index[b])] = v
    return trace, cat, g, Solution(assignment)


def test_derive_twocpu_four_edge_model(twocpu_setup):
    _, _, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    assert m.states == {"q0", "q1", "q3", "q5", "q6"}
    assert m.initial == "q0" and m.accepting == {"q0"}
    assert m.transitions == {
        ("q0", M1, "q1"),
        ("q1", M2, "q0"),
        ("q0", M3, "q3"),
        ("q3", M5, "q5"),
        ("q5", M6, "q6"),
        ("q6", M4, "q0"),
    }
    assert m.alphabet == {M1, M2, M3, M4, M5, M6}


def test_state_and_transition_count_formulas(twocpu_setup):
    _, _, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    live_non_terminal = 4  # messages 1, 3, 5, 6
    assert len(m.states) == 1 + live_non_terminal
    nonzero_starts = 2
    assert len(m.transitions) == nonzero_starts + len(sol.support_edges)


def test_derive_rejects_inconsistent_solution(twocpu_setup):
    _, _, g, sol = twocpu_setup
    bad = Solution({e: 0 for e in sol.assignment})
    with pytest.raises(ValueError):
        derive_fsa(g, bad)


def test_derive_empty_graph_gives_single_state():
    trace = Trace(())
    g = build_graph(trace, collect_messages(trace))
    m = derive_fsa(g, Solution({}))
    assert m.states == {"q0"}
    assert m.transitions == frozenset()


def test_derive_single_hop_flow():
    a, b = msg("i:x:req"), msg("x:i:resp")
    trace = Trace.of(a, b)
    g = build_graph(trace, collect_messages(trace))
    m = derive_fsa(g, Solution({(a, b): 1}))
    assert m.states == {"q0", "q1"}
    assert m.transitions == {("q0", a, "q1"), ("q1", b, "q0")}


def test_accepts_twocpu_trace_with_witness(twocpu_setup):
    trace, cat, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    result = accepts(m, trace, order=cat.index)
    assert result.verdict is Verdict.ACCEPTED
    assert bool(result)
    assert len(result.witness) == trace.length
    moves = {(s, lbl): d for s, lbl, d in m.transitions}
    state = {}
    for step in result.witness:
        came_from = state.get(step.instance, "q0")
        assert came_from == step.source
        assert moves[(step.source, step.message)] == step.target
        state[step.instance] = step.target
    assert all(s == "q0" for s in state.values())
    # two instances walk each loop
    assert len(state) == 4


def test_accepts_rejects_stranded_instance():
    a, b = msg("i:x:req"), msg("x:i:resp")
    m = Fsa(
        frozenset({"q0", "A"}), "q0", frozenset({a, b}),
        frozenset({("q0", a, "A"), ("A", b, "q0")}), frozenset({"q0"}),
    )
    result = accepts(m, Trace.of(a))
    assert result.verdict is Verdict.REJECTED
    assert not bool(result)


def test_accepts_empty_trace(twocpu_setup):
    _, _, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    assert accepts(m, Trace(())).verdict is Verdict.ACCEPTED


def test_accepts_reports_unknown_message(twocpu_setup):
    _, _, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    alien = msg("p:q:zap")
    result = accepts(m, Trace.of(alien))
    assert result.verdict is Verdict.REJECTED
    assert result.offending == alien


def test_accepts_budget_exhaustion_is_indeterminate(twocpu_setup):
    trace, cat, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    result = accepts(m, trace, budget=1, order=cat.index)
    assert result.verdict is Verdict.INDETERMINATE


def test_accepts_backtracks_over_spawn_choices():
    a = msg("i:x:go")
    b, c = msg("x:i:b_done"), msg("x:i:c_done")
    m = Fsa(
        frozenset({"q0", "A", "B"}), "q0", frozenset({a, b, c}),
        frozenset({("q0", a, "A"), ("A", b, "q0"), ("q0", a, "B"), ("B", c, "q0")}),
        frozenset({"q0"}),
    )
    assert accepts(m, Trace.of(a, a, b, c)).verdict is Verdict.ACCEPTED
    assert accepts(m, Trace.of(a, a, c, b)).verdict is Verdict.ACCEPTED
    assert accepts(m, Trace.of(a, b, b)).verdict is Verdict.REJECTED


def test_strict_events_forbids_same_event_chaining():
    a, b = msg("i:x:req"), msg("x:i:resp")
    m = Fsa(
        frozenset({"q0", "A"}), "q0", frozenset({a, b}),
        frozenset({("q0", a, "A"), ("A", b, "q0")}), frozenset({"q0"}),
    )
    same_event = Trace.of([a, b])
    assert accepts(m, same_event).verdict is Verdict.ACCEPTED
    assert accepts(m, same_event, strict_events=True).verdict is Verdict.REJECTED


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_interleavings_of_accepted_traces_are_accepted(data):
    a, b = msg("i:x:req"), msg("x:i:resp")
    c, d = msg("j:y:req"), msg("y:j:resp")
    m = Fsa(
        frozenset({"q0", "A", "C"}), "q0", frozenset({a, b, c, d}),
        frozenset({("q0", a, "A"), ("A", b, "q0"), ("q0", c, "C"), ("C", d, "q0")}),
        frozenset({"q0"}),
    )
    t1, t2 = [a, b, a, b], [c, d]
    merged = []
    i = j = 0
    while i < len(t1) or j < len(t2):
        take_first = data.draw(st.booleans()) if i < len(t1) and j < len(t2) else i < len(t1)
        if take_first:
            merged.append(t1[i]); i += 1
        else:
            merged.append(t2[j]); j += 1
    assert accepts(m, Trace.of(*merged)).verdict is Verdict.ACCEPTED


def test_full_fsa_covers_every_edge(twocpu_setup):
    trace, cat, g, _ = twocpu_setup
    m = full_fsa(g)
    assert len(m.transitions) == len(g.edges) + len(g.roots)
    assert accepts(m, trace, order=cat.index, strict_events=True)
    banned = full_fsa(g, frozenset({(M5, M6)}))
    assert len(banned.transitions) == len(m.transitions) - 1


def test_dot_export_shape(twocpu_setup):
    _, _, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    dot = fsa_to_dot(m)
    assert dot == fsa_to_dot(m)
    assert "q0 [shape=doublecircle];" in dot
    assert "q1 [shape=circle];" in dot
    assert 'q0 -> q1 [label="(cpu0:cache:rd_req)"];' in dot
    assert dot.count("->") == 6


def test_json_round_trip(twocpu_setup):
    _, _, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    text = fsa_to_json(m)
    assert '"format": "flowsynth-fsa-1"' in text
    assert fsa_from_json(text) == m
    assert text == fsa_to_json(fsa_from_json(text))


def test_export_dispatcher(twocpu_setup):
    _, _, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    assert export_fsa(m, "dot") == fsa_to_dot(m)
    assert export_fsa(m, "json") == fsa_to_json(m)
    with pytest.raises(ValueError):
        export_fsa(m, "xml")


def test_fsa_from_json_rejects_unknown_format():
    with pytest.raises(ValueError):
        fsa_from_json('{"format": "something-else", "transitions": []}')


def test_fsa_invariants_validated():
    a = msg("i:x:req")
    with pytest.raises(ValueError):  # accepting must be exactly the initial state
        Fsa(frozenset({"q0", "A"}), "q0", frozenset({a}),
            frozenset({("q0", a, "A")}), frozenset({"A"}))
    with pytest.raises(ValueError):  # transition endpoint missing
        Fsa(frozenset({"q0"}), "q0", frozenset({a}),
            frozenset({("q0", a, "A")}), frozenset({"q0"}))
    with pytest.raises(ValueError):  # label outside the alphabet
        Fsa(frozenset({"q0", "A"}), "q0", frozenset(),
            frozenset({("q0", a, "A")}), frozenset({"q0"}))


def test_transition_pairs_follow_causality(twocpu_setup):
    _, _, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    outgoing = {}
    for s, lbl, d in m.transitions:
        outgoing.setdefault(s, []).append((lbl, d))
    for s, lbl, d in m.transitions:
        if d == "q0":
            continue
        for nxt, _ in outgoing.get(d, []):
            assert causal(lbl, nxt)


def test_witness_json_schema(twocpu_setup):
    trace, cat, g, sol = twocpu_setup
    m = derive_fsa(g, sol)
    result = accepts(m, trace, order=cat.index)
    text = witness_to_json(result.witness)
    assert '"format": "flowsynth-witness-1"' in text
    import json

    steps = json.loads(text)["steps"]
    assert len(steps) == trace.length
    assert {"event", "message", "instance", "from", "to"} <= set(steps[0])
