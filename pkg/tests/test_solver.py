import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowsynth import (
    Solution,
    Trace,
    build_graph,
    check_solution,
    collect_messages,
    generate_constraints,
    model_extract,
    reduce_model,
    sample_solutions,
    solve_one,
)
from flowsynth.solver import _FlowBackend, decomposition_solution, replayable_extract

from conftest import traces_strategy
from helpers import M1, M5, msg, support_as_indices, twocpu_trace


@pytest.fixture(scope="module")
def twocpu_case():
    trace = twocpu_trace()
    cat = collect_messages(trace)
    g = build_graph(trace, cat)
    return trace, cat, g, generate_constraints(g)


def system_of(trace):
    cat = collect_messages(trace)
    g = build_graph(trace, cat)
    return cat, g, generate_constraints(g)


def test_solve_one_finds_consistent_assignment(twocpu_case):
    _, _, _, cs = twocpu_case
    sol = solve_one(cs)
    assert sol is not None
    assert check_solution(cs, sol)
    assert all(isinstance(v, int) and 0 <= v <= cs.bounds[e] for e, v in sol.assignment.items())


def test_single_edge_value_is_forced():
    _, _, cs = system_of(Trace.of(M1, M5, M1, M5, M1, M5))
    sol = solve_one(cs)
    assert sol.assignment == {(M1, M5): 3}


def test_dead_end_node_is_unsat():
    # 5 occurs twice mid-trace but its only successor edge is gone: the
    # last event makes 2 an end while 5 needs outgoing support
    _, _, cs = system_of(Trace.of(M1, M5, M1, M5))
    # node 5 is the trace's end here, so instead force infeasibility by bound
    sol = solve_one(cs.restrict([(M1, M5)]))
    assert sol is None


def test_sample_solutions_distinct_and_valid(twocpu_case):
    _, _, _, cs = twocpu_case
    sols = sample_solutions(cs, 10, seed=0)
    assert 1 <= len(sols) <= 10
    keys = {s.value_key(cs) for s in sols}
    assert len(keys) == len(sols)
    assert all(check_solution(cs, s) for s in sols)


def test_sample_size_one_equals_solve_one(twocpu_case):
    _, _, _, cs = twocpu_case
    assert sample_solutions(cs, 1, seed=5)[0].assignment == solve_one(cs, seed=5).assignment


def test_sample_on_unsat_system_is_empty():
    _, _, cs = system_of(Trace.of(M1, M5, M1, M5))
    assert sample_solutions(cs.restrict([(M1, M5)]), 4) == []
    with pytest.raises(ValueError):
        sample_solutions(cs, 0)


def test_reduce_model_reaches_four_edge_solution_shape(twocpu_case):
    _, cat, _, cs = twocpu_case
    by_index = {i: m for m, i in cat.index.items()}
    values = {(1, 2): 2, (3, 5): 2, (5, 6): 2, (6, 4): 2}
    assignment = {e: 0 for e in cs.bounds}
    for (a, b), v in values.items():
        assignment[(by_index[a], by_index[b])] = v
    sol = Solution(assignment)
    assert check_solution(cs, sol)
    complement = frozenset(e for e, v in assignment.items() if v == 0)
    # with the complementary zeros accumulated, no member can be zeroed
    for e in sol.support_edges:
        assert solve_one(cs.restrict(complement | {e})) is None
    # and reduce_model leaves such a solution unchanged
    pinned = Solution(assignment, forced_zeros=complement)
    reduced = reduce_model(cs, pinned)
    assert reduced.assignment == pinned.assignment
    assert reduced.forced_zeros == complement


def test_reduce_model_outputs_are_locally_minimal(twocpu_case):
    _, _, _, cs = twocpu_case
    for seed in range(4):
        start = solve_one(cs, seed=seed)
        reduced = reduce_model(cs, start)
        assert check_solution(cs, reduced)
        assert len(reduced.support_edges) <= len(start.support_edges)
        for e in reduced.support_edges:
            assert solve_one(cs.restrict(reduced.forced_zeros | {e})) is None


def test_reduce_model_requires_consistent_start(twocpu_case):
    _, _, _, cs = twocpu_case
    with pytest.raises(ValueError):
        reduce_model(cs, Solution({e: 0 for e in cs.bounds}))


def test_single_attempt_reduction_is_consistent(twocpu_case):
    _, _, _, cs = twocpu_case
    start = solve_one(cs, seed=1)
    reduced = reduce_model(cs, start, single_attempt=True)
    assert check_solution(cs, reduced)
    assert len(reduced.support_edges) <= len(start.support_edges)


def test_model_extract_support_is_causal(twocpu_case):
    _, _, g, cs = twocpu_case
    sol = model_extract(cs, sz=8, seed=0)
    assert sol is not None
    assert sol.support_edges <= set(g.edges)
    assert all(a.dest == b.src for a, b in sol.support_edges)


def test_model_extract_chain_is_unique():
    a, b, c, d = msg("w:x:go"), msg("x:y:go"), msg("y:z:go"), msg("z:w:done")
    _, _, cs = system_of(Trace.of(a, b, c, d))
    sol = model_extract(cs, sz=4, seed=0)
    assert sol.assignment == {(a, b): 1, (b, c): 1, (c, d): 1}


def test_model_extract_unsat_propagates():
    _, _, cs = system_of(Trace.of(M1, M5, M1, M5))
    assert model_extract(cs.restrict([(M1, M5)])) is None


def test_model_extract_deterministic(twocpu_case):
    _, _, _, cs = twocpu_case
    a = model_extract(cs, sz=8, seed=3)
    b = model_extract(cs, sz=8, seed=3)
    assert a.assignment == b.assignment
    assert a.forced_zeros == b.forced_zeros


@settings(max_examples=40, deadline=None)
@given(traces_strategy(max_events=8, max_event_size=2))
def test_reduction_monotone_and_valid_on_random_traces(trace):
    _, _, cs = system_of(trace)
    start = solve_one(cs, seed=0)
    if start is None:
        return
    reduced = reduce_model(cs, start)
    assert check_solution(cs, reduced)
    assert len(reduced.support_edges) <= len(start.support_edges)


@settings(max_examples=40, deadline=None)
@given(traces_strategy(max_events=8, max_event_size=2), st.integers(0, 5))
def test_incremental_backend_agrees_with_fresh_solver(trace, pick):
    _, _, cs = system_of(trace)
    if not cs.bounds:
        return
    backend = _FlowBackend(cs)
    edges = list(cs.bounds)
    e = edges[pick % len(edges)]
    base = backend.solve(frozenset())
    fresh = solve_one(cs)
    assert (base is None) == (fresh is None)
    if base is None:
        return
    trial = backend.solve(frozenset({e}))
    again = solve_one(cs.restrict([e]))
    assert (trial is None) == (again is None)
    if trial is not None:
        assert check_solution(cs, trial)


def test_decomposition_solution_replays_by_construction(twocpu_case):
    trace, cat, g, cs = twocpu_case
    from flowsynth import Verdict, accepts, derive_fsa

    seeded = decomposition_solution(g, cs, trace)
    assert seeded is not None
    assert check_solution(cs, seeded)
    machine = derive_fsa(g, seeded)
    assert accepts(machine, trace, order=cat.index).verdict is Verdict.ACCEPTED


def test_replayable_extract_returns_accepting_model(twocpu_case):
    trace, cat, g, cs = twocpu_case
    from flowsynth import Verdict, accepts, derive_fsa

    sol = replayable_extract(g, cs, trace, order=cat.index, sz=4, seed=0)
    assert check_solution(cs, sol)
    machine = derive_fsa(g, sol)
    assert accepts(machine, trace, order=cat.index).verdict is Verdict.ACCEPTED


def test_replayable_extract_unsat_returns_none():
    trace = Trace.of(M1, M5, M1, M5)
    cat = collect_messages(trace)
    g = build_graph(trace, cat)
    cs = generate_constraints(g).restrict([(M1, M5)])
    assert replayable_extract(g, cs, trace, order=cat.index) is None
