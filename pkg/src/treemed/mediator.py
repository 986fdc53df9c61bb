"""The mediator: compile a query against registered sources and run the plan.

Each source in a plan is read by its own thread, which turns the adapter's
event stream into XTuples and hands them over through a bounded queue. The
algebra runs in the caller's thread as a pull pipeline, so results stream
out while sources are still producing.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field

from . import events as ev
from .catalog import Catalog
from .decomposer.atomize import atomize
from .decomposer.locate import locate_sources
from .decomposer.optimize import optimize
from .decomposer.plan import (
    AGGREGATE, EMPTY, JOIN, NEST, PRODUCT, PROJECT, RECONSTRUCT, RESTRICT, SORT, SOURCE, UNION, UNNEST,
    build_plan, source_query_text,
)
from .errors import MediatorError, PlanError, StreamError
from .frontend.canonize import canonize
from .frontend.normalize import normalize
from .frontend.parser import parse
from .xalgebra.model import Diagnostics, XRelation, XRelationSchema
from .xalgebra.operators import (
    AggregateFn, XAggregate, XJoin, XNest, XProduct, XProject, XRestrict, XSort, XSource, XUnion, XUnnest,
)
from .xalgebra.predicate import equi_atoms
from .xalgebra.template import x_reconstruct

log = logging.getLogger(__name__)


@dataclass
class MediatorConfig:
    queue_capacity: int = 64
    batch_size: int = 64
    parallel: bool = True
    optimize: bool = True


@dataclass
class PhaseTimings:
    """Milliseconds per processing step."""

    parse: float = 0.0
    plan: float = 0.0
    first_result: float = 0.0
    local_exec: float = 0.0
    global_exec: float = 0.0
    total: float = 0.0

    @property
    def init(self) -> float:
        return self.parse + self.plan + self.first_result

    def as_dict(self) -> dict:
        return {
            "parse": self.parse, "plan": self.plan, "first_result": self.first_result,
            "local_exec": self.local_exec, "global_exec": self.global_exec, "total": self.total,
        }


@dataclass
class Compiled:
    query: object
    canonical: object
    atomics: tuple
    global_query: object
    bound: list
    unoptimized: object
    plan: object
    warnings: list = field(default_factory=list)


def _ms(seconds):
    return seconds * 1000.0


# -- source streams -----------------------------------------------------------

_END = object()


class _SourceStream:
    """Runs one adapter query in a thread, producing tuples into a queue."""

    def __init__(self, run, adapter, node, text, keys, capacity):
        self.run = run
        self.adapter = adapter
        self.node = node
        self.text = text
        self.keys = keys
        self.queue = queue.Queue(maxsize=capacity)
        self.busy = 0.0  # seconds spent inside the adapter
        self.thread = None
        self.started = False
        self.lock = threading.Lock()
        self.source_op = XSource(
            self._events(), node["_guide"], node["attrs"], node["multi_root"], node["rename"],
            diagnostics=Diagnostics(),
        )

    def _events(self):
        t = time.perf_counter()
        try:
            if self.keys is None:
                it = iter(self.adapter.execute(self.text))
            else:
                it = iter(self.adapter.execute_batched(self.text, self.keys))
        finally:
            self.busy += time.perf_counter() - t
        while True:
            t = time.perf_counter()
            try:
                e = next(it)
            except StopIteration:
                self.busy += time.perf_counter() - t
                return
            self.busy += time.perf_counter() - t
            if e.kind == ev.EOS:
                return
            yield e

    def start(self):
        with self.lock:
            if self.started:
                return
            self.started = True
            self.thread = threading.Thread(target=self._produce, name=f"src-{self.node['source']}", daemon=True)
            self.thread.start()

    def _put(self, item):
        while not self.run.stopped.is_set():
            try:
                self.queue.put(item, timeout=0.05)
                return True
            except queue.Full:
                continue
        return False

    def _produce(self):
        try:
            for t in self.source_op.relation():
                if not self._put(t):
                    return
        except MediatorError as exc:
            self._put(StreamError(f"{self.node['source']}: {exc}"))
            return
        except Exception as exc:  # surfaced to the consumer, never swallowed
            self._put(StreamError(f"{self.node['source']}: {type(exc).__name__}: {exc}"))
            return
        self._put(_END)

    def tuples(self):
        self.start()
        while True:
            item = self.queue.get()
            if item is _END:
                return
            if isinstance(item, Exception):
                raise item
            yield item

    def relation(self) -> XRelation:
        return XRelation(self.source_op.schema, self.tuples(), True, self.source_op.diagnostics)


class _DependentRight:
    """Right input of a dependent join: re-queries its sources per key batch."""

    def __init__(self, run, node, key_attr):
        self.run = run
        self.node = node
        self.key_attr = key_attr
        self.schema = run.build(node, defer=True).schema
        self.diagnostics = Diagnostics()

    def fetch(self, keys):
        return self.run.build(self.node, keys=list(keys), key_attr=self.key_attr)


class _Run:
    """One execution of a compiled plan."""

    def __init__(self, mediator, plan):
        self.mediator = mediator
        self.config = mediator.config
        self.plan = plan
        self.streams = []
        self.stopped = threading.Event()
        self.diagnostics = Diagnostics()
        self.joins = []

    def stream(self, node, keys=None, key_attr=None, defer=False):
        adapter = self.mediator.adapter(node["source"])
        text = source_query_text(node, key_attr)
        s = _SourceStream(self, adapter, node, text, keys, self.config.queue_capacity)
        if not defer:
            self.streams.append(s)
        return s

    def build(self, node, keys=None, key_attr=None, defer=False) -> XRelation:
        op = node.op
        kids = node.children
        if op == SOURCE:
            return self.stream(node, keys, key_attr, defer).relation()
        if op == EMPTY:
            return XRelation(XRelationSchema.of(node["attrs"], node["_guide"]), [], True, Diagnostics())
        rec = lambda c: self.build(c, keys, key_attr, defer)  # noqa: E731
        if op == UNION:
            return XUnion(rec(kids[0]), rec(kids[1])).relation()
        if op == RESTRICT:
            return XRestrict(rec(kids[0]), node["pred"]).relation()
        if op == PROJECT:
            return XProject(rec(kids[0]), node["keep"]).relation()
        if op == UNNEST:
            return XUnnest(rec(kids[0]), node["multi"], node["pivots"]).relation()
        if op == PRODUCT:
            return XProduct(rec(kids[0]), rec(kids[1])).relation()
        if op == JOIN:
            left = rec(kids[0])
            algo = node["algo"]
            if algo == "dependent":
                probe = self.build(kids[1], defer=True)
                eq = equi_atoms(node["pred"], left.schema.attributes, probe.schema.attributes)
                if not eq:
                    raise PlanError("dependent join without an equality")
                right = _DependentRight(self, kids[1], eq[0][1])
            else:
                right = rec(kids[1])
            j = XJoin(left, right, node["pred"], algo, self.config.batch_size)
            self.joins.append(j)
            return j.relation()
        if op == NEST:
            return XNest(rec(kids[0]), node["group_by"], node["level"]).relation()
        if op == AGGREGATE:
            return XAggregate(rec(kids[0]), AggregateFn(node["fn"]), node["attr"], node["out"]).relation()
        if op == SORT:
            return XSort(rec(kids[0]), node["keys"]).relation()
        raise PlanError(f"cannot execute plan operator {op}")

    def events(self):
        if self.plan.op != RECONSTRUCT:
            raise PlanError("a plan must end with Reconstruct")
        rel = self.build(self.plan.children[0])
        if self.config.parallel:
            for s in list(self.streams):
                s.start()
        return x_reconstruct(rel, self.plan["template"], self.plan["rename"])

    def stop(self):
        self.stopped.set()

    def local_seconds(self) -> float:
        per = {}
        for s in self.streams:
            per[id(s.node)] = per.get(id(s.node), 0.0) + s.busy
        return max(per.values(), default=0.0)


class QueryResult:
    """Streaming result: iterate for events (ending with EOS)."""

    def __init__(self, mediator, compiled: Compiled, timings: PhaseTimings, started):
        self.mediator = mediator
        self.compiled = compiled
        self.plan = compiled.plan
        self.timings = timings
        self.warnings = list(compiled.warnings)
        self._started = started
        self._run = _Run(mediator, compiled.plan)
        self._consumed = False
        self.error = None

    @property
    def diagnostics(self):
        out = {}
        for s in self._run.streams:
            for k, v in s.source_op.diagnostics.total().items():
                out[k] = out.get(k, 0) + v
        out["dependent-fetches"] = sum(getattr(j, "fetches", 0) for j in self._run.joins)
        return out

    def __iter__(self):
        if self._consumed:
            raise RuntimeError("a query result can be iterated once")
        self._consumed = True
        t0 = time.perf_counter()
        first = True
        try:
            for e in self._run.events():
                if first:
                    self.timings.first_result = _ms(time.perf_counter() - t0)
                    first = False
                yield e
        except MediatorError as exc:
            self.error = exc
            yield ev.Event(ev.ERROR, f"{type(exc).__name__}: {exc}")
        finally:
            self._run.stop()
            wall = time.perf_counter() - t0
            if first:
                self.timings.first_result = _ms(wall)
            local = min(self._run.local_seconds(), wall)
            self.timings.local_exec = _ms(local)
            self.timings.global_exec = _ms(wall - local)
            self.timings.total = _ms(time.perf_counter() - self._started)
        yield ev.EOS_EVENT

    def events(self) -> list:
        return list(self)

    def documents(self) -> list:
        """Serialized result documents; raises StreamError on an in-band error."""
        out = []
        for d in ev.split_documents(self):
            out.append(d)
        if self.error is not None:
            raise StreamError(str(self.error))
        return out

    def close(self):
        self._run.stop()


class Mediator:
    def __init__(self, name="M", config=None):
        self.name = name
        self.config = config or MediatorConfig()
        self.catalog = Catalog()
        self._adapters = {}
        self._lock = threading.Lock()

    def register(self, adapter):
        """Register an adapter (or another mediator's adapter view) as a source."""
        descriptor = adapter.get_metadata()
        sid = self.catalog.register_source(descriptor)
        with self._lock:
            self._adapters[sid] = adapter
        return sid

    def adapter(self, source_id):
        with self._lock:
            try:
                return self._adapters[source_id]
            except KeyError:
                raise PlanError(f"no adapter registered as {source_id}") from None

    def compile(self, text, hints=(), keys=None, timings=None) -> Compiled:
        timings = timings if timings is not None else PhaseTimings()
        t0 = time.perf_counter()
        q = parse(text)
        t1 = time.perf_counter()
        timings.parse = _ms(t1 - t0)
        if keys is not None:
            from .adapters.base import bind_keys

            q = q.with_(where=bind_keys(q.where, keys))
        c = canonize(normalize(q))
        atomics, g = atomize(c, self.catalog)
        bound = [locate_sources(a, self.catalog) for a in atomics]
        warnings = g.warnings
        plan0 = build_plan(bound, g, warnings)
        plan = optimize(plan0, tuple(c.hints) + tuple(hints), warnings) if self.config.optimize else plan0
        # capability problems surface now, not mid-stream
        for n in plan.walk():
            if n.op == SOURCE:
                self.adapter(n["source"]).prepare(source_query_text(n))
        timings.plan = _ms(time.perf_counter() - t1)
        for w in warnings:
            log.warning("%s: %s", self.name, w)
        return Compiled(q, c, atomics, g, bound, plan0, plan, warnings)

    def execute_query(self, text, hints=(), keys=None) -> QueryResult:
        started = time.perf_counter()
        timings = PhaseTimings()
        compiled = self.compile(text, hints, keys, timings)
        return QueryResult(self, compiled, timings, started)

    def as_adapter(self, source_id=None):
        from .adapters.mediator_adapter import MediatorAdapter

        return MediatorAdapter(self, source_id or self.name)


def execute_query(text, mediator: Mediator, hints=()) -> QueryResult:
    return mediator.execute_query(text, hints)
