"""Physical operators over XRelations.

Each operator validates its parameters in prepare() (raising PlanError
before any tuple flows) and produces tuples lazily in execute(). The x_*
functions are the usual entry points.
"""

from __future__ import annotations

from collections import OrderedDict
from enum import Enum
from typing import Iterator

from .. import events as ev
from ..errors import PlanError, StreamError
from . import validate
from .model import (
    Diagnostics,
    NestLevel,
    NodeRef,
    Path,
    TreeBuilder,
    XRelation,
    XRelationSchema,
    XTuple,
    canonical_tuple,
    leaf_tree,
    make_tuple,
    prefix_close,
)
from .predicate import Evaluator, equi_atoms, validate as validate_predicate
from .trees import merge_forests, prune, remap_refs
from .values import (
    AVG_CONTEXT,
    DECIMAL_CONTEXT,
    format_decimal,
    parse_decimal,
    sort_key,
)

DEFAULT_BATCH_SIZE = 64


class Operator:
    ordered = True

    def __init__(self, diagnostics=None):
        self.diagnostics = diagnostics or Diagnostics()
        self.schema = self.prepare()

    def prepare(self) -> XRelationSchema:
        raise NotImplementedError

    def execute(self) -> Iterator[XTuple]:
        raise NotImplementedError

    def relation(self) -> XRelation:
        tuples = self.execute()
        if validate.ENABLED:
            tuples = validate.checked(tuples, self.schema)
        return XRelation(self.schema, tuples, self.ordered, self.diagnostics)

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(str(a) for a in self.schema.attributes)})"


def _guide_near(guide, keep):
    """Guide entries on the spine of, or below, some kept attribute."""
    return frozenset(g for g in guide if any(g.is_prefix_of(k) or k.is_prefix_of(g) for k in keep))


def _pad_members(members, before, after):
    return tuple(
        NestLevel(lv.name, tuple((0,) * before + span + (0,) * after for span in lv.spans))
        for lv in members
    )


def _select_members(members, slots):
    return tuple(
        NestLevel(lv.name, tuple(tuple(span[i] for i in slots) for span in lv.spans)) for lv in members
    )


def combine(lt: XTuple, rt: XTuple) -> XTuple:
    """Concatenate two tuples, unifying trees whose roots match."""
    if not rt.forest:
        forest, lmaps, rmaps = lt.forest, [(i, None) for i in range(len(lt.forest))], []
    else:
        forest, lmaps, rmaps = merge_forests(lt.forest, rt.forest)
    bindings = tuple((p, remap_refs(refs, lmaps)) for p, refs in lt.bindings) + tuple(
        (p, remap_refs(refs, rmaps)) for p, refs in rt.bindings
    )
    nl, nr = len(lt.bindings), len(rt.bindings)
    members = _pad_members(lt.members, 0, nr) + _pad_members(rt.members, nl, 0)
    return XTuple(bindings, forest, members)


# -- XSource -------------------------------------------------------------


class XSource(Operator):
    """Builds one tuple per document from an event stream, as events arrive.

    multi_root: a tuple is every tree up to the next DOC event (used for
    sources that return several trees per result, such as pushed joins).
    rename maps original root labels to the labels used in this plan.
    """

    def __init__(self, events, guide, attrs, multi_root=False, rename=None, diagnostics=None):
        self.events = events
        self.raw_guide = [Path(g) for g in guide]
        self.attrs = [Path(a) for a in attrs]
        self.multi_root = multi_root
        self.rename = dict(rename or {})
        super().__init__(diagnostics)

    def prepare(self):
        guide = prefix_close(
            p.with_root(self.rename.get(p.root, p.root)) for p in self.raw_guide
        )
        for a in self.attrs:
            if a.has_joker:
                raise PlanError(f"unexpanded joker in source attribute {a}")
            if a not in guide:
                raise PlanError(f"source attribute {a} is not in the guide")
        self.roots = {p.root for p in guide}
        return XRelationSchema(tuple(self.attrs), guide)

    def execute(self):
        stack = []
        builder = None
        forest = []
        for e in self.events:
            kind = e.kind
            if kind == ev.START:
                label = e.value
                if not stack:
                    label = self.rename.get(label, label)
                    builder = TreeBuilder()
                    stack.append(builder.add(label))
                else:
                    try:
                        stack.append(builder.add(label, stack[-1]))
                    except ValueError as exc:
                        raise StreamError(str(exc)) from None
            elif kind == ev.TEXT:
                if not stack:
                    raise StreamError("text outside any element")
                try:
                    builder.set_text(stack[-1], e.value)
                except ValueError as exc:
                    raise StreamError(str(exc)) from None
            elif kind == ev.END:
                if not stack:
                    raise StreamError("close without open")
                stack.pop()
                if not stack:
                    tree = builder.build()
                    builder = None
                    if tree.labels[0] not in self.roots:
                        self.diagnostics.incr("skipped-document")
                        continue
                    if self.multi_root:
                        forest.append(tree)
                    else:
                        yield make_tuple(self.attrs, [tree])
            elif kind == ev.DOC:
                if stack:
                    raise StreamError("document boundary inside an element")
                if self.multi_root and forest:
                    yield make_tuple(self.attrs, forest)
                    forest = []
            elif kind == ev.ERROR:
                raise StreamError(e.value or "source stream error")
        if stack:
            raise StreamError("stream ended inside an element")
        if self.multi_root and forest:
            yield make_tuple(self.attrs, forest)


def x_source(events, guide, attrs, multi_root=False, rename=None) -> XRelation:
    return XSource(events, guide, attrs, multi_root, rename).relation()


# -- XProject --------------------------------------------------------------


def _slots_for(attributes, wanted):
    """Map each wanted path to a distinct slot index, first unused occurrence."""
    used = set()
    out = []
    for w in wanted:
        for i, a in enumerate(attributes):
            if a == w and i not in used:
                used.add(i)
                out.append(i)
                break
        else:
            raise PlanError(f"unknown attribute {w}")
    return out


def _rebuild(t: XTuple, slots, ref_lists=None) -> XTuple:
    refs = ref_lists if ref_lists is not None else [t.bindings[i][1] for i in slots]
    forest, maps = prune(t.forest, refs)
    bindings = tuple((t.bindings[i][0], remap_refs(r, maps)) for i, r in zip(slots, refs))
    return XTuple(bindings, forest, _select_members(t.members, slots))


class XProject(Operator):
    def __init__(self, rel: XRelation, keep):
        self.input = rel
        self.keep = [Path(k) for k in keep]
        super().__init__(rel.diagnostics)
        self.ordered = rel.ordered

    def prepare(self):
        self.slots = _slots_for(self.input.schema.attributes, self.keep)
        # keeping every attribute in place is the identity, forests untouched
        self.identity = self.slots == list(range(len(self.input.schema.attributes)))
        if self.identity:
            return self.input.schema
        return XRelationSchema(tuple(self.keep), _guide_near(self.input.schema.guide, self.keep))

    def execute(self):
        for t in self.input:
            yield t if self.identity else _rebuild(t, self.slots)


def x_project(rel, keep) -> XRelation:
    return XProject(rel, keep).relation()


# -- XRestrict -------------------------------------------------------------


class XRestrict(Operator):
    def __init__(self, rel: XRelation, predicate):
        self.input = rel
        self.predicate = predicate
        super().__init__(rel.diagnostics)
        self.ordered = rel.ordered

    def prepare(self):
        validate_predicate(self.predicate, self.input.schema.attributes)
        return self.input.schema

    def execute(self):
        check = Evaluator(self.predicate, self.diagnostics).on_tuple
        for t in self.input:
            if check(t):
                yield t


def x_restrict(rel, predicate) -> XRelation:
    return XRestrict(rel, predicate).relation()


# -- XProduct / XJoin ------------------------------------------------------


def _pair_schema(l: XRelationSchema, r: XRelationSchema) -> XRelationSchema:
    return XRelationSchema(l.attributes + r.attributes, l.guide | r.guide)


class XProduct(Operator):
    """Cartesian product with tree merge.

    mode 'nested-loop' keeps left-major order and blocks on the right input;
    'pipelined' interleaves both inputs and gives no order guarantee.
    """

    def __init__(self, left, right, mode="nested-loop"):
        if mode not in ("nested-loop", "pipelined"):
            raise PlanError(f"unknown product mode {mode!r}")
        self.left, self.right, self.mode = left, right, mode
        super().__init__(Diagnostics(left.diagnostics, right.diagnostics))
        self.ordered = left.ordered and mode == "nested-loop"

    def prepare(self):
        return _pair_schema(self.left.schema, self.right.schema)

    def execute(self):
        if self.mode == "nested-loop":
            rights = list(self.right)
            if not rights:
                return
            for lt in self.left:
                for rt in rights:
                    yield combine(lt, rt)
            return
        lseen, rseen = [], []
        li, ri = iter(self.left), iter(self.right)
        ldone = rdone = False
        while not (ldone and rdone):
            if not ldone:
                lt = next(li, None)
                if lt is None:
                    ldone = True
                else:
                    lseen.append(lt)
                    for rt in rseen:
                        yield combine(lt, rt)
            if not rdone:
                rt = next(ri, None)
                if rt is None:
                    rdone = True
                else:
                    rseen.append(rt)
                    for lt in lseen:
                        yield combine(lt, rt)


def x_product(left, right, mode="nested-loop") -> XRelation:
    return XProduct(left, right, mode).relation()


class JoinAlgo(str, Enum):
    NESTED_LOOP = "nested-loop"
    SORT_MERGE = "sort-merge"
    DEPENDENT = "dependent"


class XJoin(Operator):
    """Product followed by restriction, with three evaluation strategies.

    For the dependent strategy, right is a rebindable source: an object with
    a schema attribute and fetch(keys) -> XRelation returning at least every
    right tuple whose key is among keys.
    """

    def __init__(self, left, right, predicate, algo="nested-loop", batch_size=DEFAULT_BATCH_SIZE):
        self.left, self.right, self.predicate = left, right, predicate
        self.algo = JoinAlgo(algo)
        self.batch_size = batch_size
        super().__init__(Diagnostics(left.diagnostics, getattr(right, "diagnostics", None)))
        # sort-merge emits in key order, which is deterministic but not input order
        self.ordered = self.left.ordered and self.algo != JoinAlgo.SORT_MERGE

    def prepare(self):
        ls, rs = self.left.schema, self.right.schema
        validate_predicate(self.predicate, ls.attributes + rs.attributes)
        self.equi = equi_atoms(self.predicate, ls.attributes, rs.attributes)
        if self.algo in (JoinAlgo.SORT_MERGE, JoinAlgo.DEPENDENT) and not self.equi:
            raise PlanError(f"{self.algo.value} join needs an equality between a left and a right attribute")
        if self.algo == JoinAlgo.DEPENDENT and not hasattr(self.right, "fetch"):
            raise PlanError("dependent join needs a rebindable right source")
        return _pair_schema(ls, rs)

    def execute(self):
        check = Evaluator(self.predicate, self.diagnostics).on_pair
        if self.algo == JoinAlgo.NESTED_LOOP:
            yield from self._nested_loop(self.left, list(self.right), check)
        elif self.algo == JoinAlgo.SORT_MERGE:
            yield from self._sort_merge(check)
        else:
            yield from self._dependent(check)

    @staticmethod
    def _nested_loop(lefts, rights, check):
        if not rights:
            return
        for lt in lefts:
            for rt in rights:
                if check(lt, rt):
                    yield combine(lt, rt)

    def _sort_merge(self, check):
        lk, rk = self.equi[0]

        def entries(rel, key):
            out = []
            tuples = list(rel)
            for i, t in enumerate(tuples):
                seen = set()
                for v in t.values(key):
                    sk = sort_key(v)
                    if sk not in seen:
                        seen.add(sk)
                        out.append((sk, i))
            out.sort(key=lambda e: e[0])
            return tuples, out

        lts, lentries = entries(self.left, lk)
        rts, rentries = entries(self.right, rk)
        emitted = set()
        i = j = 0
        while i < len(lentries) and j < len(rentries):
            kl, kr = lentries[i][0], rentries[j][0]
            if kl < kr:
                i += 1
            elif kr < kl:
                j += 1
            else:
                i2 = i
                while i2 < len(lentries) and lentries[i2][0] == kl:
                    i2 += 1
                j2 = j
                while j2 < len(rentries) and rentries[j2][0] == kr:
                    j2 += 1
                for _, li in lentries[i:i2]:
                    for _, ri in rentries[j:j2]:
                        if (li, ri) in emitted:
                            continue
                        if check(lts[li], rts[ri]):
                            emitted.add((li, ri))
                            yield combine(lts[li], rts[ri])
                i, j = i2, j2

    def _dependent(self, check):
        lk, _ = self.equi[0]
        batch, keys = [], OrderedDict()
        for lt in self.left:
            new = [v for v in dict.fromkeys(lt.values(lk)) if v not in keys]
            # a tuple's keys never straddle two fetches
            if batch and len(keys) + len(new) > self.batch_size:
                yield from self._flush(batch, keys, check)
                batch, keys = [], OrderedDict()
            batch.append(lt)
            for v in lt.values(lk):
                keys.setdefault(v, None)
            if len(keys) >= self.batch_size:
                yield from self._flush(batch, keys, check)
                batch, keys = [], OrderedDict()
        if batch:
            yield from self._flush(batch, keys, check)

    def _flush(self, batch, keys, check):
        if not keys:
            return
        self.fetches = getattr(self, "fetches", 0) + 1
        rights = list(self.right.fetch(list(keys)))
        yield from self._nested_loop(batch, rights, check)


def x_join(left, right, predicate, algo="nested-loop", batch_size=DEFAULT_BATCH_SIZE) -> XRelation:
    return XJoin(left, right, predicate, algo, batch_size).relation()


# -- XSort -----------------------------------------------------------------


def _first_value(t: XTuple, slot: int):
    refs = t.bindings[slot][1]
    if not refs:
        return None
    r = refs[0]
    return t.forest[r.tree].string_value(r.node)


class XSort(Operator):
    def __init__(self, rel, keys):
        self.input = rel
        self.keys = [(Path(p), d) for p, d in keys]
        super().__init__(rel.diagnostics)

    def prepare(self):
        self.key_slots = []
        for p, d in self.keys:
            if d not in ("asc", "desc"):
                raise PlanError(f"sort direction must be asc or desc, not {d!r}")
            self.key_slots.append((self.input.schema.index(p), d))
        return self.input.schema

    def execute(self):
        rows = list(self.input)
        for slot, d in reversed(self.key_slots):
            rows.sort(key=lambda t: sort_key(_first_value(t, slot)), reverse=(d == "desc"))
        yield from rows


def x_sort(rel, keys) -> XRelation:
    return XSort(rel, keys).relation()


# -- XNest / XUnnest -------------------------------------------------------


class XNest(Operator):
    """Groups tuples with equal group values, merging their trees.

    Trees unify only along the spine of the grouping paths; every other
    branch is appended in input order. Output is in group-key order and
    records member boundaries under the given level name.
    """

    def __init__(self, rel, group_by, level="nest"):
        self.input = rel
        self.group_by = [Path(g) for g in group_by]
        self.level = level
        super().__init__(rel.diagnostics)

    def prepare(self):
        self.group_slots = [self.input.schema.index(g) for g in self.group_by]
        self.spine = prefix_close(self.group_by)
        return self.input.schema

    def execute(self):
        def key(t):
            sk = tuple(sort_key(_first_value(t, s)) for s in self.group_slots)
            ck = tuple(t.serialize_refs(t.bindings[s][1]) for s in self.group_slots)
            return sk, ck

        rows = sorted(((key(t), t) for t in self.input), key=lambda kt: kt[0])
        i = 0
        while i < len(rows):
            j = i + 1
            while j < len(rows) and rows[j][0][1] == rows[i][0][1]:
                j += 1
            yield self._merge_group([t for _, t in rows[i:j]])
            i = j

    def _merge_group(self, group):
        first = group[0]
        forest = first.forest
        nslots = len(first.bindings)
        refs = [list(r) for _, r in first.bindings]
        spans = [tuple(len(r) for _, r in first.bindings)]
        for t in group[1:]:
            forest, lmaps, rmaps = merge_forests(forest, t.forest, self.spine, once=False)
            changed = {i for i, (_, m) in enumerate(lmaps) if m is not None}
            if changed:
                refs = [
                    [r if r.tree not in changed else NodeRef(r.tree, lmaps[r.tree][1][r.node]) for r in lst]
                    for lst in refs
                ]
            for s, (_, rr) in enumerate(t.bindings):
                refs[s].extend(remap_refs(rr, rmaps))
            spans.append(tuple(len(r) for _, r in t.bindings))
        group_set = set(self.group_slots)
        for s in group_set:
            refs[s] = list(dict.fromkeys(refs[s]))
        spans = tuple(tuple(0 if s in group_set else span[s] for s in range(nslots)) for span in spans)
        bindings = tuple((p, tuple(refs[s])) for s, (p, _) in enumerate(first.bindings))
        return XTuple(bindings, forest, (NestLevel(self.level, spans),))


def x_nest(rel, group_by, level="nest") -> XRelation:
    return XNest(rel, group_by, level).relation()


class XUnnest(Operator):
    """One output tuple per ref of a multi-valued attribute.

    Output attributes are the pivots, the unnested attribute and any
    attribute lying under it (rebound inside the selected subtree).
    """

    def __init__(self, rel, multi, pivots):
        self.input = rel
        self.multi = Path(multi)
        self.pivots = [Path(p) for p in pivots]
        super().__init__(rel.diagnostics)
        self.ordered = rel.ordered

    def prepare(self):
        attrs = self.input.schema.attributes
        if self.multi not in attrs:
            raise PlanError(f"unknown attribute {self.multi}")
        for p in self.pivots:
            if p not in attrs:
                raise PlanError(f"unknown pivot {p}")
        self.multi_slot = attrs.index(self.multi)
        self.slots = []
        self.dependent = set()
        for i, a in enumerate(attrs):
            if i == self.multi_slot or (a in self.pivots and a != self.multi):
                self.slots.append(i)
            elif self.multi.is_prefix_of(a) and a != self.multi:
                self.slots.append(i)
                self.dependent.add(i)
        keep = [attrs[i] for i in self.slots]
        return XRelationSchema(tuple(keep), _guide_near(self.input.schema.guide, keep))

    def execute(self):
        for t in self.input:
            for m in t.bindings[self.multi_slot][1]:
                tree = t.forest[m.tree]
                inside = set(tree.descendants(m.node))
                lists = []
                for i in self.slots:
                    refs = t.bindings[i][1]
                    if i == self.multi_slot:
                        refs = (m,)
                    elif i in self.dependent:
                        refs = tuple(r for r in refs if r.tree == m.tree and r.node in inside)
                    lists.append(refs)
                out = _rebuild(t, self.slots, lists)
                yield XTuple(out.bindings, out.forest, ())


def x_unnest(rel, multi, pivots) -> XRelation:
    return XUnnest(rel, multi, pivots).relation()


# -- XAggregate ------------------------------------------------------------


class AggregateFn(str, Enum):
    MIN = "MIN"
    MAX = "MAX"
    COUNT = "COUNT"
    AVG = "AVG"
    SUM = "SUM"


def aggregate_values(fn: AggregateFn, texts):
    """Apply fn to leaf texts; returns canonical text or None (absent)."""
    if fn == AggregateFn.COUNT:
        return str(len(texts))
    if not texts:
        return None
    nums = [parse_decimal(v) for v in texts]
    if any(n is None for n in nums):
        raise ValueError("non-numeric value")
    if fn == AggregateFn.MIN:
        return format_decimal(min(nums))
    if fn == AggregateFn.MAX:
        return format_decimal(max(nums))
    total = DECIMAL_CONTEXT.create_decimal(0)
    for n in nums:
        total = DECIMAL_CONTEXT.add(total, n)
    if fn == AggregateFn.SUM:
        return format_decimal(total)
    return format_decimal(AVG_CONTEXT.divide(total, len(nums)))


class XAggregate(Operator):
    ordered = False

    def __init__(self, rel, fn, attr, out):
        self.input = rel
        self.fn = AggregateFn(fn.upper() if isinstance(fn, str) else fn)
        self.attr = Path(attr)
        self.out = Path(out)
        super().__init__(rel.diagnostics)

    def prepare(self):
        self.slot = self.input.schema.index(self.attr)
        if len(self.out) != 1:
            raise PlanError("aggregate output must be a single-step path")
        if self.out in self.input.schema.guide:
            raise PlanError(f"aggregate output {self.out} collides with the guide")
        s = self.input.schema
        return XRelationSchema(s.attributes + (self.out,), s.guide | {self.out})

    def execute(self):
        rows = list(self.input)
        for t in rows:
            refs = t.bindings[self.slot][1]
            try:
                value = aggregate_values(self.fn, t.text_values(refs))
            except ValueError:
                self.diagnostics.incr("aggregate-non-numeric")
                value = None
            forest = t.forest
            bound = ()
            if value is not None:
                bound = (NodeRef(len(forest), 0),)
                forest = forest + (leaf_tree(self.out.label, value),)
            yield XTuple(t.bindings + ((self.out, bound),), forest, _pad_members(t.members, 0, 1))


def x_aggregate(rel, fn, attr, out) -> XRelation:
    return XAggregate(rel, fn, attr, out).relation()


# -- set operators ---------------------------------------------------------


class _SetOp(Operator):
    def __init__(self, left, right):
        self.left, self.right = left, right
        super().__init__(Diagnostics(left.diagnostics, right.diagnostics))
        self.ordered = left.ordered

    def prepare(self):
        if self.left.schema.attributes != self.right.schema.attributes:
            raise PlanError("set operators need identical attribute lists")
        return XRelationSchema(self.left.schema.attributes, self.left.schema.guide | self.right.schema.guide)


class XUnion(_SetOp):
    def execute(self):
        seen = set()
        for rel in (self.left, self.right):
            for t in rel:
                k = canonical_tuple(t)
                if k not in seen:
                    seen.add(k)
                    yield t


class XDifference(_SetOp):
    def execute(self):
        rkeys = {canonical_tuple(t) for t in self.right}
        seen = set()
        for t in self.left:
            k = canonical_tuple(t)
            if k not in rkeys and k not in seen:
                seen.add(k)
                yield t


class XIntersection(_SetOp):
    def execute(self):
        rkeys = {canonical_tuple(t) for t in self.right}
        seen = set()
        for t in self.left:
            k = canonical_tuple(t)
            if k in rkeys and k not in seen:
                seen.add(k)
                yield t


def x_union(left, right) -> XRelation:
    return XUnion(left, right).relation()


def x_difference(left, right) -> XRelation:
    return XDifference(left, right).relation()


def x_intersection(left, right) -> XRelation:
    return XIntersection(left, right).relation()
