"""Adapter interface and the query conventions adapters share.

An adapter query is text in the frontend grammar over the adapter's own
collections, with a path-only return clause:

    for $o in Collection("ORDERS")/orders where $o/orderkey < 10 return ($o/comment)

Each result is the projected tree of every for variable, followed by a
document boundary. ``return $o`` keeps the whole document. A dependent join
puts ``$_key`` on the right of one equality; execute_batched fills it with a
key set.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import events as ev
from ..catalog import QUERY_LANGUAGE, TABULAR, XML_FILE, SourceDescriptor, descriptor_xml
from ..errors import CapabilityError, MediatorError
from ..frontend.ast import PARAM, ForClause, Sequence, VarPath, map_predicate
from ..frontend.normalize import normalize
from ..frontend.parser import parse
from ..xalgebra.predicate import Compare, Member, Not

BATCH_SIZE = 64


@dataclass(frozen=True)
class ParsedQuery:
    """A single-level adapter query, resolved to absolute paths."""

    vars: tuple  # (var, collection name, root label)
    where: object  # predicate over VarPath operands
    returns: tuple  # VarPath per returned path; a bare VarPath keeps the whole tree
    has_param: bool


def _contains_param(p) -> bool:
    found = []

    def fn(x):
        if x is PARAM:
            found.append(x)
        return x

    map_predicate(p, fn)
    return bool(found)


def bind_keys(p, keys):
    """Replace `attr = $_key` atoms with key-set membership."""
    keys = tuple(str(k) for k in keys)

    def rec(q):
        if isinstance(q, Compare) and q.rhs is PARAM:
            if q.op not in ("=", "!="):
                raise CapabilityError("the key slot supports only = and !=")
            m = Member(q.attr, keys)
            return m if q.op == "=" else Not(m)
        if hasattr(q, "items"):
            return type(q)(tuple(rec(i) for i in q.items))
        if isinstance(q, Not):
            return Not(rec(q.item))
        return q

    return None if p is None else rec(p)


def parse_adapter_query(text, roots) -> ParsedQuery:
    """roots: collection name (case-insensitive) -> root label."""
    q = normalize(parse(text))
    lookup = {k.lower(): v for k, v in roots.items()}
    vars_ = []
    for f in q.clauses:
        if not isinstance(f, ForClause) or isinstance(f.source, VarPath):
            raise CapabilityError("adapter queries range over collections only")
        name = f.source.name
        if name == "*" or name.lower() not in lookup:
            raise CapabilityError(f"unknown collection {name!r}")
        root = lookup[name.lower()]
        if f.path is not None and f.path.root != root:
            # a different root selects nothing from this collection
            root = f.path.root
        vars_.append((f.var, name, root))
    returns = []

    def flat(items):
        for it in items:
            if isinstance(it, VarPath):
                returns.append(it)
            elif isinstance(it, Sequence):
                flat(it.items)
            else:
                raise CapabilityError("adapter queries return paths only")

    flat(q.ret)
    return ParsedQuery(tuple(vars_), q.where, tuple(returns), _contains_param(q.where))


def check_capability(pq: ParsedQuery, capability):
    if capability == XML_FILE:
        if len(pq.vars) != 1:
            raise CapabilityError("xml-file sources evaluate single-collection selections only")
        if any(r.path is not None for r in pq.returns):
            raise CapabilityError("xml-file sources cannot project; return the whole document")
    elif capability == TABULAR:
        if any(r.path is not None and len(r.path) != 1 for r in pq.returns):
            raise CapabilityError("tabular sources return columns only")


class Adapter:
    """Uniform source interface: get_metadata / execute / execute_batched."""

    capability = QUERY_LANGUAGE
    batch_size = BATCH_SIZE

    def __init__(self, source_id):
        self.source_id = source_id

    def descriptor(self) -> SourceDescriptor:
        raise NotImplementedError

    def get_metadata(self) -> str:
        return descriptor_xml(self.descriptor())

    def execute(self, text):
        """Event stream for text; capability violations raise before streaming."""
        prepared = self.prepare(text)
        return self._guarded(self.run(prepared, None))

    def execute_batched(self, text, keys):
        keys = list(dict.fromkeys(str(k) for k in keys))
        if not keys:
            raise CapabilityError("execute_batched needs at least one key")
        prepared = self.prepare(text, param=True)

        def batches():
            for i in range(0, len(keys), self.batch_size):
                yield from self.run(prepared, keys[i : i + self.batch_size])

        return self._guarded(batches())

    def prepare(self, text, param=False):
        raise NotImplementedError

    def run(self, prepared, keys):
        raise NotImplementedError

    @staticmethod
    def _guarded(gen):
        try:
            yield from gen
        except MediatorError as exc:
            yield ev.Event(ev.ERROR, f"{type(exc).__name__}: {exc}")
        except OSError as exc:
            yield ev.Event(ev.ERROR, f"backing store failure: {exc}")
