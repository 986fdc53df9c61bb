"""Boolean predicates over tuple attributes.

Atoms are existential over multi-valued attributes and false over absent
ones. When a predicate is evaluated on a (left, right) pair, an attribute on
the left-hand side of an atom resolves to the left tuple first; one on the
right-hand side resolves to the right tuple first. On a single merged tuple
the same rule reads "first binding" and "last binding" respectively, which
keeps join and restrict-over-product in agreement.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Union

from ..errors import PlanError
from .model import Path
from .values import apply_op, compare_values, parse_decimal

OPS = ("=", "!=", "<", "<=", ">", ">=")
Constant = Union[str, Decimal]


@dataclass(frozen=True)
class Compare:
    attr: Path
    op: str
    rhs: object  # Constant or Path

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"bad operator {self.op!r}")


@dataclass(frozen=True)
class Contains:
    attr: Path
    needle: str


@dataclass(frozen=True)
class Member:
    """attr equals at least one of values (key-set membership)."""

    attr: Path
    values: tuple


@dataclass(frozen=True)
class And:
    items: tuple = ()


@dataclass(frozen=True)
class Or:
    items: tuple = ()


@dataclass(frozen=True)
class Not:
    item: object


TRUE = And(())


def is_attr(x) -> bool:
    """Operands are attributes unless they are string or decimal constants."""
    return not isinstance(x, (str, Decimal))


def conj(items) -> object:
    items = tuple(i for i in items if i != TRUE)
    flat = []
    for i in items:
        flat.extend(i.items if isinstance(i, And) else (i,))
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def conjuncts(p) -> tuple:
    if p is None:
        return ()
    if isinstance(p, And):
        out = ()
        for i in p.items:
            out += conjuncts(i)
        return out
    return (p,)


def attributes(p) -> list:
    """Attribute paths mentioned, in order of appearance (with repeats removed)."""
    out = []

    def add(x):
        if x not in out:
            out.append(x)

    def rec(q):
        if isinstance(q, Compare):
            add(q.attr)
            if is_attr(q.rhs):
                add(q.rhs)
        elif isinstance(q, (Contains, Member)):
            add(q.attr)
        elif isinstance(q, (And, Or)):
            for i in q.items:
                rec(i)
        elif isinstance(q, Not):
            rec(q.item)

    rec(p)
    return out


def validate(p, attrs) -> None:
    attrs = set(attrs)
    for a in attributes(p):
        if a not in attrs:
            raise PlanError(f"predicate mentions unknown attribute {a}")


def equi_atoms(p, left_attrs, right_attrs) -> list:
    """Top-level equality atoms between a left and a right attribute.

    Returned as (left_path, right_path) pairs, orientation normalised.
    """
    left_attrs, right_attrs = set(left_attrs), set(right_attrs)
    out = []
    for a in conjuncts(p):
        if isinstance(a, Compare) and a.op == "=" and is_attr(a.rhs):
            if a.attr in left_attrs and a.rhs in right_attrs:
                out.append((a.attr, a.rhs))
            elif a.rhs in left_attrs and a.attr in right_attrs:
                out.append((a.rhs, a.attr))
    return out


def to_text(p, fmt=str) -> str:
    """Readable form; fmt renders a Path (the frontend passes a $var printer)."""

    def const(c):
        if isinstance(c, Decimal):
            return str(c)
        if not isinstance(c, str):
            return str(c)
        return '"' + c.replace('"', '""') + '"'

    def rec(q, top=False):
        if isinstance(q, Compare):
            rhs = fmt(q.rhs) if is_attr(q.rhs) else const(q.rhs)
            return f"{fmt(q.attr)} {q.op} {rhs}"
        if isinstance(q, Contains):
            return f"contains({fmt(q.attr)}, {const(q.needle)})"
        if isinstance(q, Member):
            return f"{fmt(q.attr)} = (" + ", ".join(const(v) for v in q.values) + ")"
        if isinstance(q, And):
            if not q.items:
                return "true()"
            s = " and ".join(rec(i) for i in q.items)
            return s if top else f"({s})"
        if isinstance(q, Or):
            if not q.items:
                return "false()"
            return "(" + " or ".join(rec(i) for i in q.items) + ")"
        if isinstance(q, Not):
            return f"not({rec(q.item, True)})"
        raise TypeError(q)

    return rec(p, True)


class Evaluator:
    """Evaluates a predicate; counts non-numeric operands in diagnostics."""

    def __init__(self, p, diagnostics=None):
        self.p = p
        self.diagnostics = diagnostics

    def _note(self, key):
        if self.diagnostics is not None:
            self.diagnostics.incr(key)

    def on_tuple(self, t) -> bool:
        return self._eval(self.p, lambda a: t.values(a), lambda a: t.values(a, last=True))

    def on_pair(self, lt, rt) -> bool:
        def left_first(a):
            if lt.slot(a) is not None:
                return lt.values(a)
            return rt.values(a)

        def right_first(a):
            if rt.slot(a) is not None:
                return rt.values(a)
            return lt.values(a)

        return self._eval(self.p, left_first, right_first)

    def on_values(self, lookup) -> bool:
        """lookup(path) -> list of texts; used by adapters over raw rows."""
        return self._eval(self.p, lookup, lookup)

    def _eval(self, q, lhs, rhs) -> bool:
        if isinstance(q, Compare):
            values = lhs(q.attr)
            if not values:
                return False
            if is_attr(q.rhs):
                others = rhs(q.rhs)
                return any(apply_op(compare_values(v, o), q.op) for v in values for o in others)
            if isinstance(q.rhs, Decimal):
                for v in values:
                    d = parse_decimal(v)
                    if d is None:
                        self._note("non-numeric")
                        continue
                    if apply_op((d > q.rhs) - (d < q.rhs), q.op):
                        return True
                return False
            return any(apply_op(compare_values(v, q.rhs), q.op) for v in values)
        if isinstance(q, Contains):
            return any(q.needle in v for v in lhs(q.attr))
        if isinstance(q, Member):
            values = lhs(q.attr)
            return any(compare_values(v, str(k)) == 0 for v in values for k in q.values)
        if isinstance(q, And):
            return all(self._eval(i, lhs, rhs) for i in q.items)
        if isinstance(q, Or):
            return any(self._eval(i, lhs, rhs) for i in q.items)
        if isinstance(q, Not):
            return not self._eval(q.item, lhs, rhs)
        raise TypeError(f"not a predicate: {q!r}")
