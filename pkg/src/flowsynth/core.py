"""Core domain types shared by the whole pipeline: messages, events, traces."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

_TRIPLE_RE = re.compile(r"^\(([^:(){}\s,]+):([^:(){}\s,]+):([^:(){}\s,]+)\)$")


@dataclass(frozen=True, order=True)
class Message:
    """One message: sender component, receiver component, command name.

    All three fields are opaque non-empty strings; two messages are equal
    exactly when all three fields are equal.
    """

    src: str
    dest: str
    cmd: str

    def __post_init__(self) -> None:
        if not (self.src and self.dest and self.cmd):
            raise ValueError("message fields must all be non-empty")

    def text(self) -> str:
        """Canonical textual form ``(src:dest:cmd)``."""
        return f"({self.src}:{self.dest}:{self.cmd})"

    @classmethod
    def parse(cls, text: str) -> "Message":
        m = _TRIPLE_RE.match(text.strip())
        if m is None:
            raise ValueError(f"not a (src:dest:cmd) triple: {text!r}")
        return cls(*m.groups())


def causal(a: Message, b: Message) -> bool:
    """True when b can be emitted by the component that received a."""
    return a.dest == b.src


@dataclass(frozen=True)
class Event:
    """The messages observed at one time index.

    Ordering inside an event is unknown, so the stored tuple is normalized
    (sorted); events holding the same multiset of messages compare equal.
    Duplicates are allowed: two concurrent instances may emit the same
    message at the same time index.
    """

    messages: tuple[Message, ...]

    def __post_init__(self) -> None:
        msgs = tuple(sorted(self.messages))
        if not msgs:
            raise ValueError("an event must contain at least one message")
        object.__setattr__(self, "messages", msgs)

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self) -> Iterator[Message]:
        return iter(self.messages)


@dataclass(frozen=True)
class Trace:
    """An ordered sequence of events.

    ``declared_indices`` carries the message numbering of the source file
    (when one was given); it is bookkeeping only and does not take part in
    trace equality.
    """

    events: tuple[Event, ...]
    declared_indices: Mapping[Message, int] | None = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))

    @classmethod
    def of(cls, *steps: Message | Iterable[Message]) -> "Trace":
        """Build a trace from steps, each a Message or an iterable of
        simultaneous Messages."""
        events = []
        for step in steps:
            if isinstance(step, Message):
                events.append(Event((step,)))
            else:
                events.append(Event(tuple(step)))
        return cls(tuple(events))

    @property
    def length(self) -> int:
        """Total number of message occurrences (events may hold several)."""
        return sum(len(e) for e in self.events)

    def occurrences(self) -> Iterator[tuple[int, Message]]:
        """Yield (event index, message) pairs in trace order."""
        for i, event in enumerate(self.events):
            for m in event:
                yield i, m
