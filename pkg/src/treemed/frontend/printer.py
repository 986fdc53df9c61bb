"""Query text from syntax trees; parse(print(q)) == q."""

from __future__ import annotations

import re

from ..xalgebra.predicate import conj, conjuncts, to_text
from .ast import Aggregate, Constructor, ForClause, LetClause, Query, Sequence, TextLit, VarPath

_SAFE_TEXT = re.compile(r"^[^<>{}$\"(),:]+$")


def _literal(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace('"', '""') + '"'
    return str(v)


def print_predicate(p) -> str:
    return to_text(p, str)


def print_query(q: Query) -> str:
    parts = []
    for c in q.clauses:
        if isinstance(c, ForClause):
            parts.append(f"for ${c.var} in {c.source_text()}")
        elif isinstance(c, LetClause):
            expr = c.expr
            if isinstance(expr, Query):
                text = print_query(expr)
            elif isinstance(expr, VarPath):
                text = str(expr)
            else:
                text = _literal(expr)
            parts.append(f"let ${c.var} := {text}")
    # hoisted correlation atoms print back into the where clause
    where = conj(list(conjuncts(q.where)) + list(q.correlation)) if q.correlation else q.where
    if where is not None:
        parts.append("where " + print_predicate(where))
    parts.append("return " + _items(q.ret, ", "))
    return " ".join(parts)


def _items(items, sep, in_content=False) -> str:
    out = []
    for i, it in enumerate(items):
        last = i == len(items) - 1
        out.append(_item(it, last, in_content))
    return sep.join(out)


def _item(it, last, in_content) -> str:
    if isinstance(it, VarPath):
        return str(it)
    if isinstance(it, TextLit):
        if in_content and _SAFE_TEXT.match(it.value) and it.value == it.value.strip():
            return it.value
        return "{" + _literal(it.value) + "}" if in_content else _literal(it.value)
    if isinstance(it, Constructor):
        if not it.content:
            return f"<{it.tag}/>"
        return f"<{it.tag}>" + _items(it.content, " ", True) + f"</{it.tag}>"
    if isinstance(it, Sequence):
        return "(" + _items(it.items, ", ") + ")"
    if isinstance(it, Aggregate):
        return f"aggregate({it.fn}, {it.arg})"
    if isinstance(it, Query):
        text = print_query(it)
        return text if last else "{" + text + "}"
    raise TypeError(it)
