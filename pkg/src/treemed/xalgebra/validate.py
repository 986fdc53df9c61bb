"""Structural checks for tuples and relations.

When ENABLED is true (the test suite turns it on), every operator output is
checked tuple by tuple as it streams.
"""

from __future__ import annotations

import os

from ..errors import PlanError
from .model import XRelationSchema, XTuple, is_prefix_closed

ENABLED = os.environ.get("TREEMED_VALIDATE", "") not in ("", "0")

# checks performed so far; increments race across threads, so treat as a lower bound
STATS = {"schemas": 0, "tuples": 0}


class InvariantError(PlanError):
    pass


def check_schema(schema: XRelationSchema):
    if not is_prefix_closed(schema.guide):
        raise InvariantError("guide is not prefix-closed")
    for a in schema.attributes:
        if a not in schema.guide:
            raise InvariantError(f"attribute {a} outside guide")


def check_tuple(t: XTuple, schema: XRelationSchema):
    if t.attributes != schema.attributes:
        raise InvariantError(f"bindings {t.attributes} do not match schema {schema.attributes}")
    for path, refs in t.bindings:
        for r in refs:
            if not (0 <= r.tree < len(t.forest)):
                raise InvariantError(f"dangling tree index in {r}")
            tree = t.forest[r.tree]
            if not (0 <= r.node < len(tree)):
                raise InvariantError(f"dangling node id in {r}")
            if tree.paths[r.node] != path:
                raise InvariantError(f"ref for {path} points at {tree.paths[r.node]}")
    for tree in t.forest:
        for i, par in enumerate(tree.parents):
            if par is not None and i not in tree.children[par]:
                raise InvariantError("parent/children links disagree")
            if tree.texts[i] is not None and tree.children[i]:
                raise InvariantError("text node with children")
        for p in tree.paths:
            if p not in schema.guide:
                raise InvariantError(f"forest path {p} outside guide")
    for lv in t.members:
        for span in lv.spans:
            if len(span) != len(t.bindings):
                raise InvariantError("nest spans do not cover every slot")


def checked(tuples, schema):
    check_schema(schema)
    STATS["schemas"] += 1
    for t in tuples:
        check_tuple(t, schema)
        STATS["tuples"] += 1
        yield t


def check_relation(rel):
    """Materialize and check; returns the list of tuples."""
    check_schema(rel.schema)
    out = list(rel)
    for t in out:
        check_tuple(t, rel.schema)
    return out
