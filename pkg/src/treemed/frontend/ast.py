"""Query syntax tree for the supported FLWR subset.

Predicates reuse the algebra's predicate classes with VarPath operands in
place of absolute paths; return content reuses nothing and has its own
small node set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from ..xalgebra.model import Path
from ..xalgebra.predicate import And, Compare, Contains, Member, Not, Or


@dataclass(frozen=True)
class VarPath:
    """$var or $var/rel/path."""

    var: str
    path: Optional[Path] = None

    def __str__(self):
        return f"${self.var}" if self.path is None else f"${self.var}/{self.path}"

    def extend(self, rest: Optional[Path]) -> "VarPath":
        if rest is None:
            return self
        if self.path is None:
            return VarPath(self.var, rest)
        return VarPath(self.var, Path(self.path.steps + rest.steps))


@dataclass(frozen=True)
class ParamSlot:
    """The $_key placeholder filled with a key batch by a dependent join."""

    def __str__(self):
        return "$_key"


PARAM = ParamSlot()
PARAM_NAME = "_key"


@dataclass(frozen=True)
class CollectionRef:
    name: str
    spelling: str = "Collection"  # keep the caller's capitalisation for printing

    def __str__(self):
        return f'{self.spelling}("{self.name}")'


@dataclass(frozen=True)
class ForClause:
    var: str
    source: object  # CollectionRef or VarPath
    path: Optional[Path] = None

    def source_text(self):
        base = str(self.source)
        return base if self.path is None else f"{base}/{self.path}"


@dataclass(frozen=True)
class LetClause:
    var: str
    expr: object  # VarPath, literal str/Decimal, or Query


@dataclass(frozen=True)
class Constructor:
    tag: str
    content: tuple = ()


@dataclass(frozen=True)
class TextLit:
    value: str


@dataclass(frozen=True)
class Sequence:
    items: tuple = ()


@dataclass(frozen=True)
class Aggregate:
    fn: str
    arg: VarPath


@dataclass(frozen=True)
class Hint:
    join: str
    algo: str


@dataclass(frozen=True)
class Query:
    clauses: tuple  # ForClause / LetClause in source order
    where: object = None
    ret: tuple = ()
    correlation: tuple = ()  # atoms tying a nested query to outer variables
    hints: tuple = field(default=(), compare=False)

    @property
    def fors(self):
        return tuple(c for c in self.clauses if isinstance(c, ForClause))

    @property
    def lets(self):
        return tuple(c for c in self.clauses if isinstance(c, LetClause))

    @property
    def variables(self):
        return tuple(c.var for c in self.clauses)

    def with_(self, **kw) -> "Query":
        return replace(self, **kw)


def predicate_varpaths(p) -> list:
    """VarPath operands of a predicate, in order, repeats removed."""
    out = []

    def add(x):
        if isinstance(x, VarPath) and x not in out:
            out.append(x)

    def rec(q):
        if isinstance(q, Compare):
            add(q.attr)
            add(q.rhs)
        elif isinstance(q, (Contains, Member)):
            add(q.attr)
        elif isinstance(q, (And, Or)):
            for i in q.items:
                rec(i)
        elif isinstance(q, Not):
            rec(q.item)

    if p is not None:
        rec(p)
    return out


def predicate_vars(p) -> set:
    return {v.var for v in predicate_varpaths(p)}


def map_predicate(p, fn):
    """Rebuild p with every operand passed through fn (constants included)."""
    if p is None:
        return None
    if isinstance(p, Compare):
        return Compare(fn(p.attr), p.op, fn(p.rhs))
    if isinstance(p, Contains):
        return Contains(fn(p.attr), p.needle)
    if isinstance(p, Member):
        return Member(fn(p.attr), p.values)
    if isinstance(p, And):
        return And(tuple(map_predicate(i, fn) for i in p.items))
    if isinstance(p, Or):
        return Or(tuple(map_predicate(i, fn) for i in p.items))
    if isinstance(p, Not):
        return Not(map_predicate(p.item, fn))
    raise TypeError(p)


def walk_return(items, fn_varpath=None, fn_query=None):
    """Rebuild return content, mapping VarPaths and nested queries."""
    out = []
    for it in items:
        if isinstance(it, VarPath):
            out.append(fn_varpath(it) if fn_varpath else it)
        elif isinstance(it, Constructor):
            out.append(Constructor(it.tag, walk_return(it.content, fn_varpath, fn_query)))
        elif isinstance(it, Sequence):
            out.append(Sequence(walk_return(it.items, fn_varpath, fn_query)))
        elif isinstance(it, Aggregate):
            arg = fn_varpath(it.arg) if fn_varpath else it.arg
            out.append(Aggregate(it.fn, arg))
        elif isinstance(it, Query):
            out.append(fn_query(it) if fn_query else it)
        else:
            out.append(it)
    return tuple(out)


def nested_queries(items) -> list:
    out = []
    for it in items:
        if isinstance(it, Query):
            out.append(it)
        elif isinstance(it, Constructor):
            out.extend(nested_queries(it.content))
        elif isinstance(it, Sequence):
            out.extend(nested_queries(it.items))
    return out
