"""Trace file parsing, unique-message collection, start/end classification.

Trace file grammar (UTF-8 text, ``#`` starts a comment running to end of
line):

* dictionary entries: ``<index> (<src>:<dest>:<cmd>)`` with index >= 1
* event lines, one event each:
  - ``<index>`` or ``(<src>:<dest>:<cmd>)`` for a single message,
  - ``{ref, ref, ...}`` for a set of simultaneous messages.

A file with a dictionary section is self-contained; a dictionary can also
be supplied separately (CLI ``--dict``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import IO, Iterable, Mapping

from .core import Event, Message, Trace

_DICT_LINE = re.compile(r"^(\d+)\s+(\(.*\))$")
_SET_LINE = re.compile(r"^\{(.*)\}$")
_INDEX_REF = re.compile(r"^\d+$")


class TraceParseError(ValueError):
    """Raised on malformed trace input; carries the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, eq=False)
class MessageCatalog:
    """Unique messages of a trace with their classification and numbering.

    ``messages`` is in first-occurrence order.  ``index`` maps each message
    to its canonical number: the file's dictionary index when one was
    declared, otherwise a 1-based first-occurrence rank.  The canonical
    number is what export formats and tie-breaking use throughout.
    """

    messages: tuple[Message, ...]
    starts: frozenset[Message]
    ends: frozenset[Message]
    first_occurrence: dict[Message, int]
    last_occurrence: dict[Message, int]
    index: dict[Message, int]


def _parse_dictionary(lines: list[tuple[int, str]]) -> dict[int, Message]:
    declared: dict[int, Message] = {}
    by_message: dict[Message, int] = {}
    for line_no, text in lines:
        m = _DICT_LINE.match(text)
        if m is None:
            continue
        idx = int(m.group(1))
        if idx < 1:
            raise TraceParseError(line_no, "dictionary index must be a positive integer")
        try:
            msg = Message.parse(m.group(2))
        except ValueError as exc:
            raise TraceParseError(line_no, str(exc)) from exc
        if idx in declared and declared[idx] != msg:
            raise TraceParseError(line_no, f"index {idx} declared twice with different messages")
        if msg in by_message and by_message[msg] != idx:
            raise TraceParseError(line_no, f"message {msg.text()} declared with two indices")
        declared[idx] = msg
        by_message[msg] = idx
    return declared


def _parse_ref(token: str, declared: Mapping[int, Message], line_no: int) -> Message:
    token = token.strip()
    if not token:
        raise TraceParseError(line_no, "empty message reference")
    if _INDEX_REF.match(token):
        idx = int(token)
        if idx not in declared:
            raise TraceParseError(line_no, f"reference to undeclared message index {idx}")
        return declared[idx]
    try:
        return Message.parse(token)
    except ValueError as exc:
        raise TraceParseError(line_no, str(exc)) from exc


def parse_trace(source: str | IO[str], dictionary: Mapping[int, Message] | None = None) -> Trace:
    """Parse a trace file into a Trace.

    ``dictionary`` supplies extra index-to-message bindings (a separate
    dictionary file); bindings in the trace file itself take effect as well.
    """
    text = source.read() if hasattr(source, "read") else source
    lines: list[tuple[int, str]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            lines.append((line_no, stripped))

    declared = dict(dictionary or {})
    declared.update(_parse_dictionary(lines))

    events: list[Event] = []
    for line_no, content in lines:
        if _DICT_LINE.match(content):
            continue
        set_match = _SET_LINE.match(content)
        if set_match:
            inner = set_match.group(1).strip()
            if not inner:
                raise TraceParseError(line_no, "empty event set")
            msgs = tuple(_parse_ref(tok, declared, line_no) for tok in inner.split(","))
            events.append(Event(msgs))
        else:
            events.append(Event((_parse_ref(content, declared, line_no),)))

    index_of = {msg: idx for idx, msg in declared.items()}
    return Trace(tuple(events), declared_indices=index_of or None)


def format_trace(trace: Trace, index: Mapping[Message, int] | None = None) -> str:
    """Render a trace in the file format understood by parse_trace.

    The dictionary section lists every message of ``index`` (or, failing
    that, the trace's own numbering) so the output is self-contained.
    """
    if index is None:
        index = trace.declared_indices or collect_messages(trace).index
    lines = []
    for msg, idx in sorted(index.items(), key=lambda kv: kv[1]):
        lines.append(f"{idx} {msg.text()}")
    for event in trace.events:
        refs = sorted(index[m] for m in event)
        if len(refs) == 1:
            lines.append(str(refs[0]))
        else:
            lines.append("{" + ", ".join(str(r) for r in refs) + "}")
    return "\n".join(lines) + "\n"


def find_start_messages(trace: Trace, messages: Iterable[Message]) -> frozenset[Message]:
    """Messages whose first occurrence is preceded by no message addressed to
    their sender.

    Messages within the same event do not block each other (their relative
    order is unknown).
    """
    wanted = set(messages)
    starts: set[Message] = set()
    seen: set[Message] = set()
    dests_so_far: set[str] = set()
    for event in trace.events:
        for m in event:
            if m not in seen:
                seen.add(m)
                if m.src not in dests_so_far:
                    starts.add(m)
        for m in event:
            dests_so_far.add(m.dest)
    return frozenset(starts & wanted)


def find_end_messages(trace: Trace, messages: Iterable[Message]) -> frozenset[Message]:
    """Mirror of start detection scanning from the end: a message is an end
    when nothing after its last occurrence is sent by its receiver."""
    wanted = set(messages)
    ends: set[Message] = set()
    seen: set[Message] = set()
    srcs_after: set[str] = set()
    for event in reversed(trace.events):
        for m in event:
            if m not in seen:
                seen.add(m)
                if m.dest not in srcs_after:
                    ends.add(m)
        for m in event:
            srcs_after.add(m.src)
    return frozenset(ends & wanted)


def collect_messages(trace: Trace) -> MessageCatalog:
    """Collect unique messages in first-occurrence order and classify them."""
    messages: list[Message] = []
    first: dict[Message, int] = {}
    last: dict[Message, int] = {}
    for i, event in enumerate(trace.events):
        for m in event:
            if m not in first:
                first[m] = i
                messages.append(m)
            last[m] = i

    declared = trace.declared_indices or {}
    next_free = max(declared.values(), default=0) + 1
    index: dict[Message, int] = {}
    for m in messages:
        if m in declared:
            index[m] = declared[m]
        else:
            index[m] = next_free
            next_free += 1

    return MessageCatalog(
        messages=tuple(messages),
        starts=find_start_messages(trace, messages),
        ends=find_end_messages(trace, messages),
        first_occurrence=first,
        last_occurrence=last,
        index=index,
    )
