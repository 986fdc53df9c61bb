"""TCP transport for adapters.

Frames are u8 type + u32 length + payload (big-endian):

    0x01 control  UTF-8 JSON request, or the metadata document in a reply
    0x02 chunk    event-stream bytes in the wire encoding
    0x03 end      empty
    0x04 error    UTF-8 "ErrorClass: message"

A request is one control frame. Result streams travel as wire-encoded
tuples, one per document, with an empty attribute list; the client turns
them back into events.
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading
import time

from .. import errors
from .. import events as ev
from ..catalog import parse_descriptor
from ..errors import CapabilityError, StreamError, WireError
from ..wire import encode_tuple, header, iter_decode
from ..xalgebra.model import TreeBuilder, XRelationSchema, XTuple, prefix_close
from .base import Adapter

CONTROL, CHUNK, END, ERROR = 0x01, 0x02, 0x03, 0x04
_FRAME = struct.Struct(">BI")
CHUNK_BYTES = 1 << 15


def send_frame(sock, kind, payload=b""):
    sock.sendall(_FRAME.pack(kind, len(payload)) + payload)


def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        part = sock.recv(n - len(buf))
        if not part:
            raise StreamError("connection closed mid-frame")
        buf += part
    return bytes(buf)


def recv_frame(sock):
    kind, n = _FRAME.unpack(_recv_exact(sock, _FRAME.size))
    return kind, _recv_exact(sock, n) if n else b""


def _documents(events):
    """Group an event stream into forests, one per document boundary."""
    forest, stack, b = [], [], None
    for e in events:
        if e.kind == ev.START:
            if not stack:
                b = TreeBuilder()
                stack.append(b.add(e.value))
            else:
                stack.append(b.add(e.value, stack[-1]))
        elif e.kind == ev.TEXT:
            b.set_text(stack[-1], e.value)
        elif e.kind == ev.END:
            stack.pop()
            if not stack:
                forest.append(b.build())
        elif e.kind == ev.DOC:
            yield forest
            forest = []
        elif e.kind == ev.ERROR:
            raise StreamError(e.value or "source stream error")
        elif e.kind == ev.EOS:
            break
    if forest:
        yield forest


def _error_text(exc):
    return f"{type(exc).__name__}: {exc}".encode("utf-8")


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        server = self.server
        try:
            kind, payload = recv_frame(self.request)
        except (StreamError, OSError):
            return
        if kind != CONTROL:
            send_frame(self.request, ERROR, b"StreamError: expected a control frame")
            return
        try:
            req = json.loads(payload.decode("utf-8"))
            op = req.get("op")
            adapter = server.adapter
            if op == "metadata":
                send_frame(self.request, CONTROL, adapter.get_metadata().encode("utf-8"))
                send_frame(self.request, END)
                return
            if op == "prepare":
                adapter.prepare(req["query"], bool(req.get("param")))
                send_frame(self.request, END)
                return
            if op == "execute":
                keys = req.get("keys")
                adapter.prepare(req["query"], keys is not None)
                stream = adapter.execute(req["query"]) if keys is None else adapter.execute_batched(req["query"], keys)
            else:
                raise StreamError(f"unknown request {op!r}")
        except (errors.MediatorError, ValueError, KeyError) as exc:
            send_frame(self.request, ERROR, _error_text(exc))
            return
        self._stream(stream)

    def _stream(self, stream):
        server = self.server
        guide = set()
        for c in parse_descriptor(server.adapter.get_metadata()).collections:
            guide |= set(c.guide)
        head, ids = header(XRelationSchema((), prefix_close(guide)))
        pending = bytearray(head)
        try:
            for forest in _documents(stream):
                pending += encode_tuple(XTuple((), tuple(forest)), ids)
                if len(pending) >= CHUNK_BYTES:
                    self._chunk(pending)
                    pending = bytearray()
            if pending:
                self._chunk(pending)
            send_frame(self.request, END)
        except (errors.MediatorError, OSError) as exc:
            try:
                if pending:
                    self._chunk(pending)
                send_frame(self.request, ERROR, _error_text(exc))
            except OSError:
                pass

    def _chunk(self, data):
        if self.server.frame_delay:
            time.sleep(self.server.frame_delay)
        send_frame(self.request, CHUNK, bytes(data))


class AdapterServer(socketserver.ThreadingTCPServer):
    """Serves one adapter; port 0 picks a free port."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, adapter, host="127.0.0.1", port=0, frame_delay=0.0):
        super().__init__((host, port), _Handler)
        self.adapter = adapter
        self.frame_delay = frame_delay
        self._thread = None

    @property
    def address(self):
        return self.server_address[:2]

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, name="adapter-server", daemon=True)
        self._thread.start()
        return self

    def close(self):
        self.shutdown()
        self.server_close()


def _raise_remote(text):
    name, _, msg = text.partition(": ")
    cls = getattr(errors, name, None)
    if isinstance(cls, type) and issubclass(cls, errors.MediatorError):
        raise cls(msg)
    raise StreamError(text)


class RemoteAdapter(Adapter):
    """Client side: speaks to an AdapterServer."""

    def __init__(self, host, port, source_id=None, timeout=30.0):
        self.address = (host, port)
        self.timeout = timeout
        self._descriptor = None
        super().__init__(source_id)
        d = self.descriptor()
        self.source_id = source_id or d.source_id
        self.capability = d.capability

    def _connect(self, request):
        sock = socket.create_connection(self.address, timeout=self.timeout)
        send_frame(sock, CONTROL, json.dumps(request).encode("utf-8"))
        return sock

    def descriptor(self):
        if self._descriptor is None:
            with self._connect({"op": "metadata"}) as sock:
                kind, payload = recv_frame(sock)
                if kind == ERROR:
                    _raise_remote(payload.decode("utf-8"))
                self._descriptor = parse_descriptor(payload.decode("utf-8"))
        return self._descriptor

    def get_metadata(self):
        from ..catalog import descriptor_xml

        return descriptor_xml(self.descriptor())

    def prepare(self, text, param=False):
        with self._connect({"op": "prepare", "query": text, "param": param}) as sock:
            kind, payload = recv_frame(sock)
            if kind == ERROR:
                _raise_remote(payload.decode("utf-8"))
        return text

    def execute(self, text):
        return self._run({"op": "execute", "query": text})

    def execute_batched(self, text, keys):
        keys = list(dict.fromkeys(str(k) for k in keys))
        if not keys:
            raise CapabilityError("execute_batched needs at least one key")
        return self._run({"op": "execute", "query": text, "keys": keys})

    def _run(self, request):
        sock = self._connect(request)
        # errors raised before streaming surface here, as with local adapters
        kind, payload = recv_frame(sock)
        if kind == ERROR:
            sock.close()
            _raise_remote(payload.decode("utf-8"))
        return self._events(sock, kind, payload)

    def _events(self, sock, kind, payload):
        failure = []

        def chunks():
            k, p = kind, payload
            while True:
                if k == CHUNK:
                    yield p
                elif k == END:
                    return
                elif k == ERROR:
                    failure.append(p.decode("utf-8"))
                    return
                else:
                    failure.append(f"StreamError: unexpected frame type 0x{k:02x}")
                    return
                k, p = recv_frame(sock)

        try:
            gen = chunks()
            try:
                _, tuples = iter_decode(gen)
                for t in tuples:
                    yield from ev.forest_events(t.forest)
                    yield ev.DOC_EVENT
            except (WireError, StreamError, OSError) as exc:
                if not failure:
                    failure.append(f"{type(exc).__name__}: {exc}")
            if failure:
                yield ev.Event(ev.ERROR, failure[0])
        finally:
            sock.close()
