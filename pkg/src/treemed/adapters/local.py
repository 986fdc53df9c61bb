"""Evaluation of adapter queries over locally stored documents or rows."""

from __future__ import annotations

from .. import events as ev
from ..errors import CapabilityError
from ..frontend.ast import VarPath, predicate_vars
from ..xalgebra.predicate import Compare, Evaluator, conj, conjuncts
from ..xalgebra.values import sort_key
from .base import ParsedQuery, bind_keys


class DocAccess:
    """How the evaluator reads one kind of stored document."""

    def values(self, doc, rel):  # rel: Path or None
        raise NotImplementedError

    def emit(self, doc, root, rels, whole):  # -> iterable of events
        raise NotImplementedError


def _equi_link(atom, var, earlier):
    """(this var's VarPath, earlier VarPath) if atom is var.x = earlier.y."""
    if not (isinstance(atom, Compare) and atom.op == "=" and isinstance(atom.rhs, VarPath)):
        return None
    a, b = atom.attr, atom.rhs
    if a.var == var and b.var in earlier:
        return a, b
    if b.var == var and a.var in earlier:
        return b, a
    return None


def evaluate(pq: ParsedQuery, docs_for, access: DocAccess, keys=None, diagnostics=None):
    """Yield result events. docs_for(var_index) -> iterable of documents."""
    if pq.has_param and keys is None:
        raise CapabilityError("the query has an unfilled $_key slot")
    where = bind_keys(pq.where, keys) if keys is not None else pq.where
    atoms = conjuncts(where)
    names = [v for v, _, _ in pq.vars]
    local = {v: [] for v in names}
    cross = []
    for a in atoms:
        vs = predicate_vars(a)
        if len(vs) == 1 and next(iter(vs)) in local:
            local[next(iter(vs))].append(a)
        else:
            cross.append(a)
    checks = {v: Evaluator(conj(local[v]), diagnostics) if local[v] else None for v in names}

    def lookup_in(binding):
        def lookup(vp):
            doc = binding.get(vp.var)
            return [] if doc is None else access.values(doc, vp.path)

        return lookup

    rets = {}
    for v in names:
        whole = any(r.var == v and r.path is None for r in pq.returns)
        rels = [r.path for r in pq.returns if r.var == v and r.path is not None]
        rets[v] = (whole, rels, any(r.var == v for r in pq.returns))

    def emit(binding):
        for v, _, root in pq.vars:
            whole, rels, wanted = rets[v]
            if wanted:
                yield from access.emit(binding[v], root, rels, whole)
        yield ev.DOC_EVENT

    first = names[0]

    def passes(v, doc):
        c = checks[v]
        return c is None or c.on_values(lookup_in({v: doc}))

    if len(names) == 1:
        for doc in docs_for(0):
            if passes(first, doc):
                yield from emit({first: doc})
        return

    # multi-collection: stream the first, hash or scan the others
    tables = []
    placed = {first}
    remaining = list(cross)
    for i, v in enumerate(names[1:], start=1):
        rows = [d for d in docs_for(i) if passes(v, d)]
        link = None
        for a in remaining:
            link = _equi_link(a, v, placed)
            if link:
                break
        index = None
        if link:
            index = {}
            for d in rows:
                for val in access.values(d, link[0].path):
                    index.setdefault(sort_key(val), []).append(d)
        placed.add(v)
        here = [a for a in remaining if predicate_vars(a) <= placed]
        remaining = [a for a in remaining if a not in here]
        tables.append((v, rows, link, index, Evaluator(conj(here), diagnostics) if here else None))
    if remaining:
        raise CapabilityError("predicate refers to variables outside the query")

    def extend(binding, k):
        if k == len(tables):
            yield from emit(binding)
            return
        v, rows, link, index, check = tables[k]
        if index is not None:
            cands = []
            seen = set()
            other = binding[link[1].var]
            for val in access.values(other, link[1].path):
                for d in index.get(sort_key(val), ()):
                    if id(d) not in seen:
                        seen.add(id(d))
                        cands.append(d)
        else:
            cands = rows
        for d in cands:
            b = dict(binding)
            b[v] = d
            if check is None or check.on_values(lookup_in(b)):
                yield from extend(b, k + 1)

    for doc in docs_for(0):
        if passes(first, doc):
            yield from extend({first: doc}, 0)
