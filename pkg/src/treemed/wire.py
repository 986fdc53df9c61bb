"""Binary encoding of XTuple streams.

Layout (all integers big-endian)::

    header  := "XTW1" count:u16 (len:u16 utf8-path)*count
               nattrs:u16 (path-id:u16)*nattrs
    record  := 0xF1 event* 0xF0 bindings members
    event   := path-id:u16 tag:u8 payload
               tag 0x00 open an interior (or empty) node, no payload
               tag 0x01 string leaf, len:u32 + UTF-8
               tag 0x02 decimal leaf, len:u32 + ASCII canonical decimal
    bindings:= nslots:u16 slot*nslots
    slot    := path-id:u16 0x00                       every node at the path, in order
             | path-id:u16 0x01 nrefs:u32 (ordinal:u32)*nrefs
    members := nlevels:u16 (len:u16 utf8-name nmembers:u32 (span:u32)*(nmembers*nslots))*nlevels

Tree shape is carried by the path of each event: a node is attached under
the deepest open node whose path is a proper prefix of its own, and missing
ancestors are opened implicitly. An explicit 0x00 event is written only when
implicit opening would reuse an earlier node with the same path (a repeated
interior element, or a second tree with the same root) or when the node has
no content at all. Ordinals number nodes in preorder across the forest.
Path ids stay below 0xF000 so a record-end byte never reads as an id.
"""

from __future__ import annotations

import re
import struct
from typing import Iterator

from .errors import WireError
from .xalgebra.model import (
    NestLevel, NodeRef, Path, TreeBuilder, XRelation, XRelationSchema, XTuple, prefix_close,
)

MAGIC = b"XTW1"
REC_START = 0xF1
REC_END = 0xF0
T_OPEN = 0x00
T_STRING = 0x01
T_DECIMAL = 0x02
MAX_PATHS = 0xF000
S_ALL = 0x00
S_LIST = 0x01

_DECIMAL = re.compile(r"-?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_EVENT = struct.Struct(">HB")


def _str16(s: str) -> bytes:
    b = s.encode("utf-8")
    if len(b) > 0xFFFF:
        raise WireError("string too long for the dictionary")
    return _U16.pack(len(b)) + b


def header(schema: XRelationSchema) -> tuple:
    """(header bytes, path -> id)."""
    paths = sorted(set(schema.guide) | set(schema.attributes), key=lambda p: p.text)
    if len(paths) > MAX_PATHS:
        raise WireError(f"path dictionary overflow: {len(paths)} paths (limit {MAX_PATHS})")
    ids = {p: i for i, p in enumerate(paths)}
    out = [MAGIC, _U16.pack(len(paths))]
    out += [_str16(p.text) for p in paths]
    out.append(_U16.pack(len(schema.attributes)))
    out += [_U16.pack(ids[a]) for a in schema.attributes]
    return b"".join(out), ids


def _is_proper_prefix(a: Path, b: Path) -> bool:
    return len(a) < len(b) and b.steps[: len(a)] == a.steps


def _simulate(stack, path):
    """Decoder stack update for an event at path (paths only)."""
    while stack and not _is_proper_prefix(stack[-1], path):
        stack.pop()
    for k in range(len(stack) + 1, len(path)):
        stack.append(Path(path.steps[:k]))
    stack.append(path)


def encode_tuple(t: XTuple, ids) -> bytes:
    out = [bytes([REC_START])]
    stack = []
    ordinals = {}
    at_path = {}
    k = 0
    for ti, tree in enumerate(t.forest):
        for n in tree.descendants(0):
            ordinals[(ti, n)] = k
            k += 1
            p = tree.paths[n]
            at_path.setdefault(p, []).append(NodeRef(ti, n))
            pid = ids.get(p)
            if pid is None:
                raise WireError(f"path {p} is not in the dictionary")
            text = tree.texts[n]
            if text is not None:
                tag = T_DECIMAL if _DECIMAL.fullmatch(text) else T_STRING
                b = text.encode("utf-8")
                out.append(_EVENT.pack(pid, tag) + _U32.pack(len(b)) + b)
                _simulate(stack, p)
            elif not tree.children[n] or p in stack:
                out.append(_EVENT.pack(pid, T_OPEN))
                _simulate(stack, p)
            # otherwise the node opens implicitly with its first descendant event
    out.append(bytes([REC_END]))
    out.append(_U16.pack(len(t.bindings)))
    for p, refs in t.bindings:
        if list(refs) == at_path.get(p, []):
            out.append(_U16.pack(ids[p]) + bytes([S_ALL]))
            continue
        out.append(_U16.pack(ids[p]) + bytes([S_LIST]) + _U32.pack(len(refs)))
        out.append(b"".join(_U32.pack(ordinals[(r.tree, r.node)]) for r in refs))
    out.append(_U16.pack(len(t.members)))
    for lv in t.members:
        out.append(_str16(lv.name) + _U32.pack(len(lv.spans)))
        for spans in lv.spans:
            if len(spans) != len(t.bindings):
                raise WireError("nest spans do not match the binding slots")
            out.append(b"".join(_U32.pack(s) for s in spans))
    return b"".join(out)


def iter_encode(rel: XRelation) -> Iterator[bytes]:
    """Header chunk, then one chunk per tuple."""
    head, ids = header(rel.schema)
    yield head
    for t in rel:
        yield encode_tuple(t, ids)


def encode(rel: XRelation) -> bytes:
    return b"".join(iter_encode(rel))


# -- decoding -----------------------------------------------------------------


class _Reader:
    def __init__(self, chunks: Iterator[bytes]):
        self.chunks = chunks
        self.buf = bytearray()
        self.pos = 0
        self.eof = False

    def _fill(self, n):
        while len(self.buf) - self.pos < n and not self.eof:
            try:
                c = next(self.chunks)
            except StopIteration:
                self.eof = True
                break
            if self.pos > 65536:
                del self.buf[: self.pos]
                self.pos = 0
            self.buf += c
        return len(self.buf) - self.pos >= n

    def at_end(self) -> bool:
        return not self._fill(1)

    def read(self, n, what="record") -> bytes:
        if not self._fill(n):
            raise WireError(f"truncated {what}")
        b = bytes(self.buf[self.pos : self.pos + n])
        self.pos += n
        return b

    def u8(self, what="record"):
        return self.read(1, what)[0]

    def u16(self, what="record"):
        return _U16.unpack(self.read(2, what))[0]

    def u32(self, what="record"):
        return _U32.unpack(self.read(4, what))[0]

    def str16(self, what="record"):
        n = self.u16(what)
        try:
            return self.read(n, what).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WireError(f"invalid UTF-8 in {what}: {exc}") from None


def _chunks(data) -> Iterator[bytes]:
    if isinstance(data, (bytes, bytearray, memoryview)):
        yield bytes(data)
    elif hasattr(data, "read"):
        while True:
            c = data.read(1 << 16)
            if not c:
                return
            yield c
    else:
        yield from data


def read_header(r: _Reader) -> tuple:
    magic = r.read(4, "header")
    if magic != MAGIC:
        raise WireError(f"bad magic {magic!r}")
    paths = []
    for _ in range(r.u16("header")):
        try:
            paths.append(Path(r.str16("header")))
        except ValueError as exc:
            raise WireError(f"bad dictionary path: {exc}") from None
    attrs = []
    for _ in range(r.u16("header")):
        i = r.u16("header")
        if i >= len(paths):
            raise WireError(f"attribute path id {i} out of range")
        attrs.append(paths[i])
    return paths, attrs


def _decode_record(r: _Reader, paths) -> XTuple:
    builders = []
    stack = []  # (path, node id) in the current builder
    nodes = []  # ordinal -> (tree index, node id)
    while True:
        b = r.u8()
        if b == REC_END:
            break
        pid = _U16.unpack(bytes([b]) + r.read(1))[0]
        tag = r.u8()
        if pid >= len(paths):
            raise WireError(f"path id {pid} out of range")
        p = paths[pid]
        if tag == T_OPEN:
            text = None
        elif tag in (T_STRING, T_DECIMAL):
            n = r.u32()
            try:
                text = r.read(n).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise WireError(f"invalid UTF-8 leaf: {exc}") from None
        else:
            raise WireError(f"unknown type tag 0x{tag:02x}")
        while stack and not _is_proper_prefix(stack[-1][0], p):
            stack.pop()
        if not stack:
            builders.append(TreeBuilder())
            nid = builders[-1].add(p.steps[0])
            nodes.append((len(builders) - 1, nid))
            stack.append((Path(p.steps[0]), nid))
            if len(p) == 1:
                if text is not None:
                    builders[-1].set_text(nid, text)
                continue
        b_ = builders[-1]
        for k in range(len(stack[-1][0]) + 1, len(p)):
            nid = b_.add(p.steps[k - 1], stack[-1][1])
            nodes.append((len(builders) - 1, nid))
            stack.append((Path(p.steps[:k]), nid))
        nid = b_.add(p.label, stack[-1][1], text)
        nodes.append((len(builders) - 1, nid))
        stack.append((p, nid))
    trees = [b_.build() for b_ in builders]
    # nodes were created in preorder, the order the encoder numbered them
    at_path = {}
    for ti, nid in nodes:
        at_path.setdefault(trees[ti].paths[nid], []).append(NodeRef(ti, nid))
    bindings = []
    for _ in range(r.u16()):
        pid = r.u16()
        if pid >= len(paths):
            raise WireError(f"path id {pid} out of range")
        mode = r.u8()
        if mode == S_ALL:
            refs = at_path.get(paths[pid], [])
        elif mode == S_LIST:
            refs = []
            for _ in range(r.u32()):
                o = r.u32()
                if o >= len(nodes):
                    raise WireError(f"ref ordinal {o} out of range")
                refs.append(NodeRef(*nodes[o]))
        else:
            raise WireError(f"unknown binding mode 0x{mode:02x}")
        bindings.append((paths[pid], tuple(refs)))
    members = []
    for _ in range(r.u16()):
        name = r.str16()
        spans = tuple(tuple(r.u32() for _ in bindings) for _ in range(r.u32()))
        members.append(NestLevel(name, spans))
    return XTuple(tuple(bindings), tuple(trees), tuple(members))


def iter_decode(data) -> tuple:
    """(schema, tuple iterator); the header is read immediately."""
    r = _Reader(_chunks(data))
    paths, attrs = read_header(r)
    schema = XRelationSchema(tuple(attrs), prefix_close(paths))

    def records():
        while not r.at_end():
            b = r.u8()
            if b != REC_START:
                raise WireError(f"expected a record, found byte 0x{b:02x}")
            yield _decode_record(r, paths)

    return schema, records()


def decode(data) -> XRelation:
    """Streaming decode: tuples surface as their records complete."""
    schema, tuples = iter_decode(data)
    return XRelation(schema, tuples)


def xml_size(rel: XRelation) -> int:
    """Bytes of the same tuples as XML text, for size comparisons."""
    total = 0
    for t in rel:
        total += sum(len(tree.serialize().encode("utf-8")) for tree in t.forest)
    return total


def relation_equal(a: XRelation, b: XRelation) -> bool:
    from .xalgebra.model import canonical_full

    if tuple(a.schema.attributes) != tuple(b.schema.attributes):
        return False
    return [canonical_full(t) for t in a] == [canonical_full(t) for t in b]

