"""Binding atomic queries to the sources that can answer them."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import UnsupportedFeature
from ..frontend.ast import VarPath, map_predicate
from ..xalgebra.model import Path
from .atomize import AtomicQuery


@dataclass(frozen=True)
class Binding:
    source_id: str
    collection: str  # local collection name
    capability: str
    cardinality: int
    guide: frozenset  # rooted at the collection's own root


@dataclass(frozen=True)
class BoundAtomicQuery:
    atomic: AtomicQuery  # with jokers already replaced
    bindings: tuple
    expanded: tuple = ()  # (joker path, expansion), alias-rooted

    @property
    def id(self):
        return self.atomic.id


def _substitute(atomic: AtomicQuery, mapping) -> AtomicQuery:
    """Replace joker paths by their expansion."""
    if not mapping:
        return atomic
    rel = {}
    for orig, exp in mapping.items():
        rel[orig] = exp

    def fix(vp):
        if not isinstance(vp, VarPath):
            return vp
        p = atomic.abs(vp, original=True)
        if p in rel:
            base = atomic.bases[vp.var].with_root(atomic.root)
            return VarPath(vp.var, Path(rel[p].steps[len(base) :]))
        return vp

    return replace(
        atomic,
        restriction=None if atomic.restriction is None else map_predicate(atomic.restriction, fix),
        ret=tuple(fix(v) for v in atomic.ret),
    )


def locate_sources(atom: AtomicQuery, catalog) -> BoundAtomicQuery:
    used = atom.used_paths(original=True)
    matches = catalog.lookup(atom.collection, used)
    per_source = {}
    for m in matches:
        per_source.setdefault((m.source_id, m.collection), []).append(m)
    expansion = None
    bindings = []
    for (sid, coll), ms in per_source.items():
        options = {m.expanded for m in ms}
        if len(options) > 1:
            raise UnsupportedFeature(f"joker paths of {atom.id} are ambiguous in {sid}/{coll}")
        (exp,) = options
        if expansion is None:
            expansion = exp
        elif exp != expansion:
            raise UnsupportedFeature(f"joker paths of {atom.id} expand differently across sources")
        desc = catalog.source(sid)
        meta = desc.collection(coll)
        bindings.append(Binding(sid, meta.name, desc.capability, meta.cardinality, meta.guide))
    mapping = {}
    if expansion:
        mapping = {u: e for u, e in zip(used, expansion) if u != e}
    aliased = tuple((u.with_root(atom.alias), e.with_root(atom.alias)) for u, e in mapping.items())
    return BoundAtomicQuery(_substitute(atom, mapping), tuple(bindings), aliased)


def binding_table(bound) -> list:
    """[(atomic id, [source ids])] in atomic order."""
    return [(b.id, [x.source_id for x in b.bindings]) for b in bound]
