"""Atomization: one query per collection variable, plus the global remainder."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import UnsupportedFeature
from ..frontend.ast import Aggregate, CollectionRef, VarPath, map_predicate, predicate_varpaths, predicate_vars
from ..frontend.canonize import Canonical, _ret_groups
from ..frontend.printer import print_predicate
from ..xalgebra.model import Path
from ..xalgebra.predicate import conj, conjuncts
from ..xalgebra.template import ROOT, VALUE, Element, Placeholder, Repeat, Text


@dataclass(frozen=True)
class AtomicQuery:
    id: str
    var: str
    collection: str  # name or "*"
    root: str
    alias: str  # root label inside the plan; differs from root for self-joins
    source_text: str  # the for clause source as written
    restriction: object  # predicate over VarPath, or None
    ret: tuple  # VarPath, in canonical order
    unnests: tuple = ()  # (var, multi Path) for variables ranging inside this one
    bases: dict = field(default_factory=dict, compare=False)  # var -> alias-rooted base Path

    def abs(self, vp: VarPath, original=False) -> Path:
        base = self.bases[vp.var]
        if original:
            base = base.with_root(self.root)
        return base if vp.path is None else Path(base.steps + vp.path.steps)

    def restriction_paths(self, original=True) -> list:
        return [self.abs(vp, original) for vp in predicate_varpaths(self.restriction)]

    def return_paths(self, original=True) -> list:
        return [self.abs(vp, original) for vp in self.ret]

    def used_paths(self, original=True) -> list:
        out = []
        for p in self.restriction_paths(original) + self.return_paths(original):
            if p not in out:
                out.append(p)
        return out

    def restriction_abs(self):
        """Restriction over alias-rooted paths."""
        if self.restriction is None:
            return None
        return map_predicate(self.restriction, lambda x: self.abs(x) if isinstance(x, VarPath) else x)

    def text(self) -> str:
        parts = [f"for ${self.var} in {self.source_text}"]
        if self.restriction is not None:
            parts.append("where " + print_predicate(self.restriction))
        parts.append("return (" + ", ".join(str(v) for v in self.ret) + ")")
        return f"let {self.id} ::= " + " ".join(parts)


@dataclass(frozen=True)
class JoinAtom:
    predicate: object  # over alias-rooted Paths
    source: object  # the VarPath form, for printing
    ids: frozenset


@dataclass(frozen=True)
class NestSpec:
    level: str  # simple query id of the nested FLWR
    group_by: tuple  # alias Paths returned by t1
    outer_ids: tuple
    member_ids: tuple


@dataclass
class GlobalQuery:
    atomics: tuple
    joins: tuple  # JoinAtom
    nests: tuple  # NestSpec
    aggregates: tuple  # (fn, attr Path, out Path)
    template: tuple
    rename: dict  # alias -> original root
    var_atomic: dict  # var -> atomic id
    ret: tuple  # VarPath groups for printing
    hints: tuple = ()
    warnings: list = field(default_factory=list)

    def atomic(self, aid) -> AtomicQuery:
        for a in self.atomics:
            if a.id == aid:
                return a
        raise KeyError(aid)

    def text(self) -> str:
        binds = ", ".join(f"${a.var} in {a.id}" for a in self.atomics)
        parts = [f"for {binds}"]
        if self.joins:
            parts.append("where " + print_predicate(conj([j.source for j in self.joins])))
        parts.append("return (" + _groups_text(self.ret) + ")")
        return " ".join(parts)


def _groups_text(items):
    return ", ".join("(" + _groups_text(i) + ")" if isinstance(i, tuple) else str(i) for i in items)


def atomize(c: Canonical, catalog=None):
    """Returns (atomic queries, global query)."""
    # resolve every variable to a base path and an anchoring collection variable
    bases, anchor, info = {}, {}, {}
    roots_used = {}
    order = []
    outer_bindings = set()
    for sq in c.queries:
        for f in sq.fors:
            if isinstance(f.source, VarPath) and f.source.var == sq.outer:
                outer_bindings.add(f.var)
                continue
            if f.var in bases:
                continue
            if isinstance(f.source, CollectionRef):
                if f.path is not None:
                    root = f.path.steps[0]
                else:
                    root = catalog.root_of(f.source.name) if catalog is not None else None
                    if root is None and f.source.name == "*":
                        raise UnsupportedFeature(f"Collection(\"*\") needs a root step for ${f.var}")
                    root = root or f.source.name.lower()
                alias = root if root not in roots_used else f"{root}_{f.var}"
                roots_used[alias] = f.var
                bases[f.var] = Path(alias)
                anchor[f.var] = f.var
                info[f.var] = (f.source.name, root, alias, f.source_text())
                order.append(f.var)
            else:
                u = f.source.var
                if u not in bases:
                    raise UnsupportedFeature(f"${f.var} ranges over ${u} from another query")
                bases[f.var] = bases[u] if f.path is None else Path(bases[u].steps + f.path.steps)
                anchor[f.var] = anchor[u]

    # alias for outer-binding variables of nested queries: they are t1's first var
    ids = {v: f"t{i + 1}" for i, v in enumerate(order)}

    def atomic_of(var):
        return ids[anchor[var]]

    all_atoms = []
    for sq in c.queries:
        all_atoms.extend(conjuncts(sq.where))

    pushed = {v: [] for v in order}
    global_atoms = []
    for a in all_atoms:
        vs = predicate_vars(a)
        if len(vs) == 1:
            (v,) = vs
            if anchor.get(v) == v:
                pushed[v].append(a)
                continue
        anchors = {anchor[v] for v in vs}
        if len(anchors) > 2:
            raise UnsupportedFeature("a predicate atom spans three or more collections")
        global_atoms.append(a)

    rets = {v: [] for v in order}
    unnests = {v: [] for v in order}
    for sq in c.queries:
        for vp in sq.return_paths():
            a = anchor[vp.var]
            target = vp if vp.var == a else VarPath(a, Path(bases[vp.var].steps[1:] + (vp.path.steps if vp.path else ())))
            if target not in rets[a]:
                rets[a].append(target)
    for var, a in anchor.items():
        if var != a:
            multi = VarPath(a, Path(bases[var].steps[1:]))
            unnests[a].append((var, bases[var]))
            if multi not in rets[a]:
                rets[a].append(multi)
    # atoms kept global must still find their paths in the atomic outputs
    for a in global_atoms:
        for vp in predicate_varpaths(a):
            an = anchor[vp.var]
            target = vp if vp.var == an else VarPath(an, Path(bases[vp.var].steps[1:] + (vp.path.steps if vp.path else ())))
            if target not in rets[an]:
                rets[an].append(target)

    atomics = []
    for v in order:
        name, root, alias, src = info[v]
        atomics.append(
            AtomicQuery(
                ids[v], v, name, root, alias, src,
                conj(pushed[v]) if pushed[v] else None,
                tuple(rets[v]),
                tuple(unnests[v]),
                {x: bases[x] for x in bases if anchor[x] == v},
            )
        )

    def abs_path(vp):
        return bases[vp.var] if vp.path is None else Path(bases[vp.var].steps + vp.path.steps)

    def to_abs(x):
        return abs_path(x) if isinstance(x, VarPath) else x

    joins = tuple(
        JoinAtom(map_predicate(a, to_abs), a, frozenset(atomic_of(v) for v in predicate_vars(a)))
        for a in global_atoms
    )

    nests = []
    t1 = c.queries[0]
    group_by = tuple(abs_path(vp) for vp in t1.return_paths())
    outer_ids = tuple(dict.fromkeys(atomic_of(f.var) for f in t1.fors))
    for sq in c.queries[1:]:
        members = tuple(dict.fromkeys(atomic_of(f.var) for f in sq.fors if f.var not in outer_bindings))
        nests.append(NestSpec(sq.id, group_by, outer_ids, members))

    aggregates = []

    def resolve(nodes):
        out = []
        for n in nodes:
            if isinstance(n, Element):
                out.append(Element(n.tag, resolve(n.children)))
            elif isinstance(n, Repeat):
                out.append(Repeat(n.level, resolve(n.children)))
            elif isinstance(n, Text):
                out.append(n)
            elif isinstance(n, Placeholder):
                p = n.path
                if isinstance(p, Aggregate):
                    outp = Path(f"agg{len(aggregates) + 1}")
                    aggregates.append((p.fn, abs_path(p.arg), outp))
                    out.append(Placeholder(outp, VALUE))
                elif n.mode == ROOT:
                    out.append(Placeholder(Path(bases[p.var].steps[:1]), ROOT))
                else:
                    out.append(Placeholder(abs_path(p), n.mode))
        return tuple(out)

    template = resolve(c.recon)
    rename = {info[v][2]: info[v][1] for v in order if info[v][2] != info[v][1]}

    tpl_paths = []

    def collect(nodes):
        for n in nodes:
            if isinstance(n, (Element, Repeat)):
                collect(n.children)
            elif isinstance(n, Placeholder):
                p = n.path
                if isinstance(p, Aggregate):
                    tpl_paths.append(p.arg)
                elif isinstance(p, VarPath) and p.path is not None:
                    tpl_paths.append(p)

    collect(c.recon)
    from ..frontend.ast import ForClause

    ret = _ret_groups([ForClause(v, None) for v in order], tpl_paths)
    g = GlobalQuery(tuple(atomics), joins, tuple(nests), tuple(aggregates), template, rename,
                    {v: atomic_of(v) for v in anchor}, ret, c.hints)
    return tuple(atomics), g


