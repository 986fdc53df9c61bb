"""XML event streams: the unit of transfer between adapters and mediators."""

from __future__ import annotations

import io
from typing import Iterable, Iterator, NamedTuple, Optional
from xml.etree.ElementTree import ParseError, XMLPullParser

from .errors import StreamError

START = "start"
TEXT = "text"
END = "end"
DOC = "doc"
EOS = "eos"
ERROR = "error"


class Event(NamedTuple):
    kind: str
    value: Optional[str] = None


def start(label):
    return Event(START, label)


def text(value):
    return Event(TEXT, value)


def end(label=None):
    return Event(END, label)


DOC_EVENT = Event(DOC)
EOS_EVENT = Event(EOS)


def tree_events(tree, node=0, rename=None) -> Iterator[Event]:
    label = tree.labels[node]
    if rename:
        label = rename.get(label, label)
    yield Event(START, label)
    if tree.texts[node] is not None:
        yield Event(TEXT, tree.texts[node])
    for c in tree.children[node]:
        yield from tree_events(tree, c, rename)
    yield Event(END, label)


def forest_events(forest, rename=None) -> Iterator[Event]:
    for tree in forest:
        yield from tree_events(tree, 0, rename)


def check_well_nested(events: Iterable[Event]) -> list:
    """Consume a stream, raising StreamError on bad nesting; returns the events."""
    out = []
    stack = []
    for ev in events:
        out.append(ev)
        if ev.kind == START:
            stack.append(ev.value)
        elif ev.kind == END:
            if not stack:
                raise StreamError("close without open")
            label = stack.pop()
            if ev.value is not None and ev.value != label:
                raise StreamError(f"close {ev.value!r} does not match open {label!r}")
        elif ev.kind == TEXT:
            if not stack:
                raise StreamError("text outside any element")
        elif ev.kind == DOC:
            if stack:
                raise StreamError("document boundary inside an element")
        elif ev.kind == EOS:
            if stack:
                raise StreamError("end of stream inside an element")
    if stack:
        raise StreamError("stream ended with open elements")
    return out


def _escape(value: str) -> str:
    return value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def to_xml(events: Iterable[Event], doc_separator: str = "") -> str:
    """Serialize elements and text; no whitespace between tags."""
    parts = []
    pending = None  # start tag not yet closed, to emit <a/> for empty elements
    stack = []
    for ev in events:
        if ev.kind == START:
            if pending is not None:
                parts.append(f"<{pending}>")
            pending = ev.value
            stack.append(ev.value)
        elif ev.kind == TEXT:
            if pending is not None:
                parts.append(f"<{pending}>")
                pending = None
            parts.append(_escape(ev.value))
        elif ev.kind == END:
            label = stack.pop()
            if pending is not None:
                parts.append(f"<{pending}/>")
                pending = None
            else:
                parts.append(f"</{label}>")
        elif ev.kind == DOC and doc_separator:
            parts.append(doc_separator)
        elif ev.kind == ERROR:
            raise StreamError(ev.value or "stream error")
    return "".join(parts)


def split_documents(events: Iterable[Event]) -> list:
    """Group a result stream into per-document XML strings."""
    docs = []
    current = []
    depth = 0
    for ev in events:
        if ev.kind == ERROR:
            raise StreamError(ev.value or "stream error")
        if ev.kind == DOC:
            if current:
                docs.append(to_xml(current))
                current = []
            continue
        if ev.kind == EOS:
            continue
        current.append(ev)
        if ev.kind == START:
            depth += 1
        elif ev.kind == END:
            depth -= 1
    if current:
        docs.append(to_xml(current))
    return docs


def parse_xml(source, skip_outer: bool = False, chunk_size: int = 1 << 14) -> Iterator[Event]:
    """Pull-parse XML text into events.

    source: str, bytes or a binary/text file object. Whitespace-only text is
    dropped and XML attributes are ignored. With skip_outer, the outermost
    element is a container and each child is emitted as a document followed
    by a DOC event.
    """
    if isinstance(source, str):
        source = io.BytesIO(source.encode("utf-8"))
    elif isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(bytes(source))
    parser = XMLPullParser(events=("start", "end"))
    depth = 0
    offset = 1 if skip_outer else 0
    # Text of an element arrives with its end event (elem.text) or as tail
    # of the previous sibling; we only model leaf text, so read elem.text at
    # end time for childless elements.
    open_has_child = []

    def drain():
        nonlocal depth
        for kind, elem in parser.read_events():
            tag = elem.tag.split("}")[-1]
            if kind == "start":
                if open_has_child:
                    open_has_child[-1] = True
                depth += 1
                open_has_child.append(False)
                if depth > offset:
                    yield Event(START, tag)
            else:
                had_child = open_has_child.pop()
                if depth > offset:
                    if not had_child and elem.text is not None and elem.text.strip() != "":
                        yield Event(TEXT, elem.text)
                    elif had_child and elem.text is not None and elem.text.strip():
                        raise StreamError(f"mixed content in <{tag}> is not supported")
                    yield Event(END, tag)
                depth -= 1
                if depth == offset:
                    if offset or depth == 0:
                        yield DOC_EVENT
                    # drop finished siblings to keep memory flat
                    elem.clear()

    try:
        while True:
            data = source.read(chunk_size)
            if not data:
                break
            if isinstance(data, str):
                data = data.encode("utf-8")
            parser.feed(data)
            yield from drain()
        parser.close()
        yield from drain()
    except ParseError as exc:
        raise StreamError(f"malformed XML: {exc}") from None
