"""Plan trees, their text form, and the unoptimized plan for a global query."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..frontend.ast import VarPath, map_predicate
from ..frontend.printer import print_predicate
from ..xalgebra.model import Path, prefix_close
from ..xalgebra.predicate import Compare, attributes, conj, conjuncts, to_text
from ..xalgebra.template import template_text

SOURCE = "Source"
EMPTY = "Empty"
UNION = "Union"
RESTRICT = "Restrict"
PROJECT = "Project"
UNNEST = "Unnest"
JOIN = "Join"
PRODUCT = "Product"
NEST = "Nest"
AGGREGATE = "Aggregate"
SORT = "Sort"
RECONSTRUCT = "Reconstruct"


@dataclass
class PlanNode:
    op: str
    children: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def ids(self) -> tuple:
        """Atomic query ids below this node, in leaf order."""
        out = []
        for n in self.walk():
            if n.op in (SOURCE, EMPTY):
                for i in n.params["ids"]:
                    if i not in out:
                        out.append(i)
        return tuple(out)

    def copy(self) -> "PlanNode":
        return PlanNode(self.op, [c.copy() for c in self.children], dict(self.params))

    def serialize(self) -> str:
        lines = []
        self._lines(0, lines)
        return "\n".join(lines) + "\n"

    def _lines(self, depth, lines):
        parts = [self.op]
        for k in sorted(self.params):
            if k.startswith("_") or k == "vars":
                continue
            parts.append(f"{k}={_fmt(self.params[k])}")
        if self.op == SOURCE:
            parts.append("query=" + source_query_text(self))
        lines.append("  " * depth + " ".join(parts))
        for c in self.children:
            c._lines(depth + 1, lines)

    def __str__(self):
        return self.serialize()


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, dict):
        return "{" + ",".join(f"{k}:{v[k]}" for k in sorted(v)) + "}"
    if isinstance(v, (list, tuple)):
        if v and all(type(x).__name__ in ("Element", "Text", "Placeholder", "Repeat") for x in v):
            return template_text(v)
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    if hasattr(v, "__dataclass_fields__") and type(v).__module__.endswith("predicate"):
        return "(" + to_text(v) + ")"
    return str(v)


def source_query_text(node: PlanNode, key_attr=None) -> str:
    """Adapter query for a Source node; key_attr adds `= $_key` for dependent fetches."""
    p = node.params
    by_alias = {alias: (var, root) for var, _, root, alias in p["vars"]}

    def vp(path):
        var, _ = by_alias[path.root]
        return VarPath(var, Path(path.steps[1:]) if len(path) > 1 else None)

    binds = ", ".join(f'${var} in Collection("{coll}")/{root}' for var, coll, root, _ in p["vars"])
    text = f"for {binds}"
    where = p.get("where")
    if key_attr is not None:
        from ..frontend.ast import PARAM

        where = conj(([where] if where is not None else []) + [Compare(key_attr, "=", PARAM)])
    if where is not None:
        text += " where " + print_predicate(map_predicate(where, lambda x: vp(x) if isinstance(x, Path) else x))
    rets = p.get("returns")
    if rets is None:
        vars_ = [f"${var}" for var, _, _, _ in p["vars"]]
        text += " return " + (vars_[0] if len(vars_) == 1 else "(" + ", ".join(vars_) + ")")
    else:
        text += " return (" + ", ".join(str(vp(r)) for r in rets) + ")"
    return text


# -- building ----------------------------------------------------------------


def _alias_guide(guide, root, alias):
    return prefix_close(g.with_root(alias) for g in guide if g.root == root)


def leaf_plan(bound, warnings) -> PlanNode:
    """Source (or Union of sources) for one atomic query, restricted and projected."""
    a = bound.atomic
    attrs = a.used_paths(original=False)
    # unnest targets must exist on the source side
    for _, base in a.unnests:
        if base not in attrs:
            attrs.append(base)
    sources = []
    for b in bound.bindings:
        sources.append(
            PlanNode(
                SOURCE,
                [],
                {
                    "ids": (a.id,),
                    "source": b.source_id,
                    "capability": b.capability,
                    "card": b.cardinality,
                    "vars": ((a.var, b.collection, a.root, a.alias),),
                    "where": None,
                    "returns": None,
                    "attrs": tuple(attrs),
                    "multi_root": False,
                    "rename": {a.root: a.alias} if a.root != a.alias else {},
                    "_guide": _alias_guide(b.guide, a.root, a.alias),
                },
            )
        )
    if not sources:
        warnings.append(f"no source answers {a.id} ({a.collection}); its result is empty")
        node = PlanNode(EMPTY, [], {"ids": (a.id,), "attrs": tuple(attrs), "_guide": prefix_close(attrs)})
    elif len(sources) == 1:
        node = sources[0]
    else:
        node = sources[0]
        for s in sources[1:]:
            node = PlanNode(UNION, [node, s], {})
    r = a.restriction_abs()
    if r is not None:
        node = PlanNode(RESTRICT, [node], {"pred": r})
    keep = a.return_paths(original=False)
    for _, base in a.unnests:
        if base not in keep:
            keep.append(base)
    node = PlanNode(PROJECT, [node], {"keep": tuple(keep)})
    for var, base in a.unnests:
        pivots = tuple(p for p in keep if not base.is_prefix_of(p))
        node = PlanNode(UNNEST, [node], {"multi": base, "pivots": pivots})
        keep = list(pivots) + [p for p in keep if base.is_prefix_of(p)]
    return node


def join_region(leaves: dict, atoms) -> PlanNode:
    """Left-deep-ish join tree over leaves (id -> node) in atom order."""
    comp = {i: i for i in leaves}
    trees = {i: leaves[i] for i in leaves}

    def find(i):
        while comp[i] != i:
            i = comp[i]
        return i

    pending = list(atoms)
    extra = {}  # root -> atoms to apply later as restrictions
    for atom in pending:
        ids = sorted(atom.ids, key=_id_key)
        if len(ids) == 1:
            r = find(ids[0])
            extra.setdefault(r, []).append(atom.predicate)
            continue
        ra, rb = find(ids[0]), find(ids[1])
        if ra == rb:
            extra.setdefault(ra, []).append(atom.predicate)
            continue
        # keep the earlier atomic query on the left
        if _first(trees[ra]) > _first(trees[rb]):
            ra, rb = rb, ra
        left, right = trees[ra], trees[rb]
        preds = [atom.predicate] + extra.pop(ra, []) + extra.pop(rb, [])
        node = PlanNode(JOIN, [left, right], {"pred": conj(preds), "algo": "nested-loop"})
        comp[rb] = ra
        trees[ra] = node
        del trees[rb]
    roots = sorted(trees, key=lambda r: _first(trees[r]))
    node = trees[roots[0]]
    pend = extra.pop(roots[0], [])
    for r in roots[1:]:
        node = PlanNode(PRODUCT, [node, trees[r]], {})
        pend += extra.pop(r, [])
    if pend:
        node = PlanNode(RESTRICT, [node], {"pred": conj(pend)})
    return node


def _id_key(i):
    return int(i[1:]) if i[1:].isdigit() else 0


def _first(node):
    return min(_id_key(i) for i in node.ids())


def _substitute_paths(pred, bound_list):
    mapping = {}
    for b in bound_list:
        mapping.update(dict(b.expanded))
    if not mapping:
        return pred
    return map_predicate(pred, lambda x: mapping.get(x, x) if isinstance(x, Path) else x)


def build_plan(bound_list, g, warnings=None) -> PlanNode:
    """Unoptimized plan: sources, restrictions, projections, joins, nests, reconstruction."""
    warnings = g.warnings if warnings is None else warnings
    by_id = {b.id: b for b in bound_list}
    leaves = {b.id: leaf_plan(b, warnings) for b in bound_list}
    from .atomize import JoinAtom

    atoms = [JoinAtom(_substitute_paths(j.predicate, bound_list), j.source, j.ids) for j in g.joins]
    # atoms on unnested variables of one collection apply after the unnest
    for a in list(atoms):
        if len(a.ids) == 1:
            (i,) = a.ids
            leaves[i] = PlanNode(RESTRICT, [leaves[i]], {"pred": a.predicate})
            atoms.remove(a)

    if not g.nests:
        node = join_region(leaves, atoms)
    else:
        regions = []
        for spec in g.nests:
            ids = set(spec.outer_ids) | set(spec.member_ids)
            sub = {i: leaves[i].copy() for i in by_id if i in ids}
            ratoms = [a for a in atoms if a.ids <= ids]
            regions.append(
                PlanNode(NEST, [join_region(sub, ratoms)], {"group_by": spec.group_by, "level": spec.level})
            )
        node = regions[0]
        for r in regions[1:]:
            gb = g.nests[0].group_by
            pred = conj([Compare(p, "=", p) for p in gb])
            node = PlanNode(JOIN, [node, r], {"pred": pred, "algo": "nested-loop", "label": "-", "fixed": True})
    for fn, attr, out in g.aggregates:
        node = PlanNode(AGGREGATE, [node], {"fn": fn.upper(), "attr": attr, "out": out})
    plan = PlanNode(RECONSTRUCT, [node], {"template": g.template, "rename": dict(g.rename)})
    label_joins(plan)
    return plan


def _alias_ids(node):
    out = {}
    for s in node.walk():
        if s.op == SOURCE:
            for (_, _, _, alias), i in zip(s["vars"], s["ids"]):
                out[alias] = i
        elif s.op == EMPTY:
            for a in s["attrs"]:
                out[a.root] = s["ids"][0]
    return out


def label_joins(node):
    """Name each join tA-tB after the first atom linking its two sides."""
    aliases = _alias_ids(node)
    for n in node.walk():
        if n.op == JOIN and not n.get("fixed"):
            lids, rids = n.children[0].ids(), n.children[1].ids()
            label = "-"
            for atom in conjuncts(n["pred"]):
                ids = [aliases.get(p.root) for p in attributes(atom)]
                lefts = [i for i in ids if i in lids]
                rights = [i for i in ids if i in rids]
                if lefts and rights:
                    label = f"{lefts[0]}-{rights[0]}"
                    break
            n.params["label"] = label

