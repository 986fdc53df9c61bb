"""LET elimination and correlation hoisting for nested FLWR expressions."""

from __future__ import annotations

from decimal import Decimal

from ..errors import UnsupportedFeature
from ..xalgebra.predicate import conj, conjuncts
from .ast import (
    ForClause,
    LetClause,
    Query,
    TextLit,
    VarPath,
    map_predicate,
    predicate_vars,
    walk_return,
)

MAX_DEPTH = 2


def normalize(q: Query) -> Query:
    return _normalize(q, {}, frozenset(), 1).with_(hints=q.hints)


def _substitute(vp, env):
    if not isinstance(vp, VarPath) or vp.var not in env:
        return vp
    value = env[vp.var]
    if isinstance(value, VarPath):
        return value.extend(vp.path)
    if vp.path is not None:
        raise UnsupportedFeature(f"path step applied to constant ${vp.var}")
    return value


def _normalize(q: Query, env, outer_vars, depth) -> Query:
    if depth > MAX_DEPTH:
        raise UnsupportedFeature("FLWR nesting deeper than two levels")
    env = dict(env)
    fors = []
    for c in q.clauses:
        if isinstance(c, LetClause):
            if isinstance(c.expr, Query):
                raise UnsupportedFeature(f"let ${c.var} is bound to a FLWR expression")
            env[c.var] = _substitute(c.expr, env)
        else:
            source = c.source
            if isinstance(source, VarPath):
                source = _substitute(source, env)
                if not isinstance(source, VarPath):
                    raise UnsupportedFeature(f"for ${c.var} ranges over a constant")
                if source.var in outer_vars:
                    raise UnsupportedFeature(f"for ${c.var} ranges over an outer variable")
                full = source.extend(c.path)
                fors.append(ForClause(c.var, VarPath(full.var), full.path))
                continue
            fors.append(ForClause(c.var, source, c.path))
    sub = lambda x: _substitute(x, env)  # noqa: E731
    where = map_predicate(q.where, sub)
    local, correlated = [], list(q.correlation)
    for atom in conjuncts(where):
        if predicate_vars(atom) & outer_vars:
            correlated.append(atom)
        else:
            local.append(atom)
    if depth > 1 and not correlated:
        raise UnsupportedFeature("nested FLWR without a correlation to the outer query")
    inner_vars = outer_vars | {f.var for f in fors}

    def nested(inner: Query) -> Query:
        return _normalize(inner, env, inner_vars, depth + 1)

    def ret_var(vp):
        v = sub(vp)
        if isinstance(v, (str, Decimal)):
            return TextLit(str(v))
        return v

    ret = walk_return(q.ret, ret_var, nested)
    return Query(tuple(fors), conj(local) if local else None, ret, tuple(correlated))
