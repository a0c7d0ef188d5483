"""Shared helpers for the test suite."""

from __future__ import annotations

from pathlib import Path

from flowsynth import Message, Trace, parse_trace

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def msg(text: str) -> Message:
    return Message.parse(f"({text})")


# The two-CPU read example: messages numbered as in its dictionary.
M1 = msg("cpu0:cache:rd_req")
M2 = msg("cache:cpu0:rd_resp")
M3 = msg("cpu1:cache:rd_req")
M4 = msg("cache:cpu1:rd_resp")
M5 = msg("cache:mem:rd_req")
M6 = msg("mem:cache:rd_resp")
TWOCPU = {1: M1, 2: M2, 3: M3, 4: M4, 5: M5, 6: M6}


def twocpu_trace() -> Trace:
    return parse_trace((DATA / "twocpu_read.trace").read_text(encoding="utf-8"))


def edge_by_index(catalog, a: int, b: int):
    by_index = {i: m for m, i in catalog.index.items()}
    return (by_index[a], by_index[b])


def support_as_indices(catalog, solution):
    return sorted(
        (catalog.index[a], catalog.index[b]) for a, b in solution.support_edges
    )
