from __future__ import annotations

import pytest
from hypothesis import strategies as st

from flowsynth import Event, Message, Trace, collect_messages

import helpers

COMPONENTS = ("a", "b", "c", "d")
COMMANDS = ("x", "y")


def messages_strategy(components=COMPONENTS, commands=COMMANDS):
    return st.builds(
        Message,
        st.sampled_from(components),
        st.sampled_from(components),
        st.sampled_from(commands),
    )


def traces_strategy(max_events=8, max_event_size=3, **kwargs):
    events = st.lists(
        messages_strategy(**kwargs), min_size=1, max_size=max_event_size
    ).map(lambda ms: Event(tuple(ms)))
    return st.lists(events, max_size=max_events).map(lambda evs: Trace(tuple(evs)))


@pytest.fixture(scope="session")
def twocpu():
    trace = helpers.twocpu_trace()
    return trace, collect_messages(trace)
