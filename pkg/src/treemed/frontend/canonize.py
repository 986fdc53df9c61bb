"""Split a normalized query into simple queries plus a reconstruction template.

The outer FLWR becomes t1. Every nested FLWR becomes its own simple query
ranging over t1 (``for $n in $t1``), with its correlation atoms kept in the
where clause after its own atoms. Return lists hold only paths: for each
variable, the paths used by correlation atoms come first, then join paths,
then the paths the template reads. The first variable's paths are listed
flat and every following variable opens a nested group.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..errors import UnsupportedFeature
from ..xalgebra.predicate import conj, conjuncts
from ..xalgebra.template import COPY, ROOT, VALUE, Element, Placeholder, Repeat, Text
from .ast import (
    Aggregate,
    Constructor,
    ForClause,
    Query,
    Sequence,
    TextLit,
    VarPath,
    nested_queries,
    predicate_varpaths,
    predicate_vars,
)
from .printer import print_predicate


@dataclass(frozen=True)
class SimpleQuery:
    id: str
    fors: tuple  # ForClause over collections or variables of this query
    where: object = None
    ret: tuple = ()  # VarPath or nested tuple groups
    outer: Optional[str] = None  # id of the query this one ranges over
    outer_var: Optional[str] = None

    def return_paths(self) -> list:
        out = []

        def rec(items):
            for it in items:
                if isinstance(it, tuple):
                    rec(it)
                else:
                    out.append(it)

        rec(self.ret)
        return out

    def atoms(self) -> tuple:
        return conjuncts(self.where)


@dataclass(frozen=True)
class Canonical:
    queries: tuple
    recon: tuple  # template nodes; placeholders hold VarPath or Aggregate
    var_query: dict = field(default_factory=dict)  # variable -> simple query id
    hints: tuple = ()
    constructor_free: bool = False

    def query(self, qid) -> SimpleQuery:
        for q in self.queries:
            if q.id == qid:
                return q
        raise KeyError(qid)


def _template_paths(items, out):
    for it in items:
        if isinstance(it, VarPath):
            out.append(it)
        elif isinstance(it, Aggregate):
            out.append(it.arg)
        elif isinstance(it, Constructor):
            _template_paths(it.content, out)
        elif isinstance(it, Sequence):
            _template_paths(it.items, out)
    return out


def _join_paths(atoms, vars_):
    """Paths of atoms that tie two or more of vars_ together."""
    out = []
    for a in atoms:
        if len(predicate_vars(a) & vars_) >= 2:
            out.extend(predicate_varpaths(a))
    return out


def _ret_groups(fors, ordered_paths):
    groups = []
    for f in fors:
        paths = []
        for vp in ordered_paths:
            if vp.var == f.var and vp not in paths:
                paths.append(vp)
        groups.append(paths)
    # first variable flat, each following one nested inside the previous group
    result = ()
    for paths in reversed(groups):
        if not paths and not result:
            continue
        result = tuple(paths) + ((result,) if result else ())
    return result


def _is_constructor_free(items):
    for it in items:
        if isinstance(it, (Constructor, Aggregate, Query, TextLit)):
            return False
        if isinstance(it, Sequence) and not _is_constructor_free(it.items):
            return False
    return True


def canonize(q: Query) -> Canonical:
    """q must be normalized."""
    if q.lets:
        raise UnsupportedFeature("canonize needs a normalized query (let clauses remain)")
    nested = nested_queries(q.ret)
    outer_vars = {f.var for f in q.fors}
    ids = {}
    for k, inner in enumerate(nested):
        ids[id(inner)] = f"t{k + 2}"

    # t1 returns what the nested queries correlate on, its own join paths,
    # then what the template reads from outer variables
    corr_outer = []
    for inner in nested:
        for a in inner.correlation:
            corr_outer.extend(vp for vp in predicate_varpaths(a) if vp.var in outer_vars)
    outer_atoms = conjuncts(q.where)
    tpl_outer = [vp for vp in _template_paths(q.ret, []) if vp.var in outer_vars]
    t1_paths = corr_outer + _join_paths(outer_atoms, outer_vars) + tpl_outer
    queries = [SimpleQuery("t1", q.fors, q.where, _ret_groups(q.fors, t1_paths))]
    var_query = {f.var: "t1" for f in q.fors}

    outer_var = q.fors[0].var if q.fors else None
    for inner in nested:
        qid = ids[id(inner)]
        inner_vars = {f.var for f in inner.fors}
        corr = [vp for a in inner.correlation for vp in predicate_varpaths(a) if vp.var in inner_vars]
        local = conjuncts(inner.where)
        tpl = [vp for vp in _template_paths(inner.ret, []) if vp.var in inner_vars]
        paths = corr + _join_paths(local, inner_vars) + tpl
        fors = (ForClause(outer_var, VarPath("t1")),) + inner.fors
        where = conj(local + tuple(inner.correlation)) if (local or inner.correlation) else None
        queries.append(SimpleQuery(qid, fors, where, _ret_groups(inner.fors, paths), "t1", outer_var))
        for f in inner.fors:
            var_query[f.var] = qid

    free = not nested and _is_constructor_free(q.ret)
    if free:
        seen = []
        for vp in _template_paths(q.ret, []):
            if vp.var not in seen:
                seen.append(vp.var)
        recon = tuple(Placeholder(VarPath(v), ROOT) for v in seen)
    else:
        recon = _template(q.ret, ids)
    return Canonical(tuple(queries), recon, var_query, q.hints, free)


def _template(items, ids) -> tuple:
    out = []
    for it in items:
        if isinstance(it, VarPath):
            out.append(Placeholder(it, COPY))
        elif isinstance(it, TextLit):
            out.append(Text(it.value))
        elif isinstance(it, Constructor):
            out.append(Element(it.tag, _template(it.content, ids)))
        elif isinstance(it, Sequence):
            out.extend(_template(it.items, ids))
        elif isinstance(it, Aggregate):
            out.append(Placeholder(it, VALUE))
        elif isinstance(it, Query):
            out.append(Repeat(ids[id(it)], _template(it.ret, ids)))
        else:
            raise TypeError(it)
    return tuple(out)


# -- printing ------------------------------------------------------------------


def _ret_text(items) -> str:
    parts = []
    for it in items:
        parts.append("(" + _ret_text(it) + ")" if isinstance(it, tuple) else str(it))
    return ", ".join(parts)


def simple_query_text(sq: SimpleQuery) -> str:
    parts = []
    for f in sq.fors:
        if isinstance(f.source, VarPath) and f.source.var == sq.outer:
            parts.append(f"for ${f.var} in ${sq.outer}")
        else:
            parts.append(f"for ${f.var} in {f.source_text()}")
    if sq.where is not None:
        parts.append("where " + print_predicate(sq.where))
    parts.append("return (" + _ret_text(sq.ret) + ")")
    return f"let {sq.id} ::= " + " ".join(parts)


def recon_text(nodes) -> str:
    """The reconstruction template with variable paths in place of data."""
    out = []
    for n in nodes:
        if isinstance(n, Element):
            out.append(f"<{n.tag}>" + recon_text(n.children) + f"</{n.tag}>")
        elif isinstance(n, Text):
            out.append(n.value)
        elif isinstance(n, Placeholder):
            p = n.path
            out.append(f"aggregate({p.fn}, {p.arg})" if isinstance(p, Aggregate) else str(p))
        elif isinstance(n, Repeat):
            out.append(recon_text(n.children))
    return "".join(out)


def canonical_text(c: Canonical) -> str:
    lines = [simple_query_text(q) for q in c.queries]
    lines.append("recon ::= " + recon_text(c.recon))
    return "\n".join(lines) + "\n"
