"""Rule-based plan rewriting.

Rules, in order: restrictions move into source queries, projections move
into sources that can project, connected leaves on one source are fused into
one query, joins are reordered smallest-first, and algorithms are chosen
(dependent for a small driving input, sort-merge for equi-joins, nested
loop otherwise). User hints override the choice.
"""

from __future__ import annotations

from ..catalog import QUERY_LANGUAGE, TABULAR
from ..xalgebra.predicate import attributes, conj, conjuncts, equi_atoms
from .plan import (
    EMPTY, JOIN, NEST, PRODUCT, PROJECT, RESTRICT, SOURCE, UNION, UNNEST, PlanNode, _id_key, label_joins,
)

ALGOS = ("nested-loop", "sort-merge", "dependent")
DEPENDENT_LIMIT = 64
PROJECTING = (TABULAR, QUERY_LANGUAGE)


def out_attrs(node) -> list:
    op = node.op
    if op in (SOURCE, EMPTY):
        return list(node["attrs"])
    if op == PROJECT:
        return list(node["keep"])
    if op in (RESTRICT, UNION, NEST) or op.startswith("Aggregate") or op == "Sort":
        out = out_attrs(node.children[0])
        if op.startswith("Aggregate"):
            out.append(node["out"])
        return out
    if op == UNNEST:
        inner = out_attrs(node.children[0])
        multi = node["multi"]
        return list(node["pivots"]) + [multi] + [a for a in inner if multi.is_prefix_of(a) and a != multi and a not in node["pivots"]]
    if op in (JOIN, PRODUCT):
        return out_attrs(node.children[0]) + out_attrs(node.children[1])
    return []


def cardinality(node) -> int:
    """Declared size of a leaf; 0 when unknown."""
    if node.op == SOURCE:
        return node["card"] or 0
    if node.op == EMPTY:
        return 0
    if node.op == UNION:
        return sum(cardinality(c) for c in node.children)
    if node.children:
        return cardinality(node.children[0])
    return 0


def _push_restrict(node):
    node.children = [_push_restrict(c) for c in node.children]
    if node.op != RESTRICT:
        return node
    child = node.children[0]
    targets = [child] if child.op == SOURCE else (
        child.children if child.op == UNION and all(c.op == SOURCE for c in child.children) else None
    )
    if not targets:
        return node
    for s in targets:
        w = s.get("where")
        s.params["where"] = node["pred"] if w is None else conj(list(conjuncts(w)) + list(conjuncts(node["pred"])))
    return child


def _can_project(s, keep):
    if s.op != SOURCE or s["capability"] not in PROJECTING:
        return False
    if s["capability"] == TABULAR:
        return all(len(p) <= 2 for p in keep)
    return True


def _push_project(node):
    node.children = [_push_project(c) for c in node.children]
    if node.op != PROJECT:
        return node
    child = node.children[0]
    keep = tuple(node["keep"])
    targets = [child] if child.op == SOURCE else (child.children if child.op == UNION else [])
    if not targets or not all(_can_project(s, keep) for s in targets):
        return node
    for s in targets:
        s.params["returns"] = keep
        s.params["attrs"] = keep
    return child


# -- join regions --------------------------------------------------------------


def _is_region(node):
    return (node.op == JOIN and not node.get("fixed")) or node.op == PRODUCT


def _collect(node, leaves, atoms):
    if _is_region(node):
        if node.op == JOIN:
            atoms.extend(conjuncts(node["pred"]))
        for c in node.children:
            _collect(c, leaves, atoms)
    elif node.op == RESTRICT and _is_region(node.children[0]):
        atoms.extend(conjuncts(node["pred"]))
        _collect(node.children[0], leaves, atoms)
    else:
        leaves.append(node)


def _leaf_of(atom, leaves, attr_sets):
    out = []
    for p in attributes(atom):
        for i, s in enumerate(attr_sets):
            if p in s:
                if i not in out:
                    out.append(i)
                break
    return out


def _fusable(a, b):
    if a.op != SOURCE or b.op != SOURCE:
        return False
    if a["source"] != b["source"] or a["capability"] not in PROJECTING or a.get("returns") is None or b.get("returns") is None:
        return False
    roots_a = {r for _, _, r, _ in a["vars"]} | {al for *_, al in a["vars"]}
    roots_b = {r for _, _, r, _ in b["vars"]} | {al for *_, al in b["vars"]}
    return not (roots_a & roots_b)


def _fuse(a, b, preds):
    p = dict(a.params)
    ws = [w for w in (a.get("where"), b.get("where")) if w is not None] + list(preds)
    p["ids"] = tuple(a["ids"]) + tuple(b["ids"])
    p["vars"] = tuple(a["vars"]) + tuple(b["vars"])
    p["where"] = conj([x for w in ws for x in conjuncts(w)]) if ws else None
    p["returns"] = tuple(a["returns"]) + tuple(b["returns"])
    p["attrs"] = tuple(a["attrs"]) + tuple(b["attrs"])
    p["multi_root"] = True
    p["card"] = max(a["card"] or 0, b["card"] or 0)
    p["rename"] = {**a["rename"], **b["rename"]}
    p["_guide"] = frozenset(a["_guide"]) | frozenset(b["_guide"])
    return PlanNode(SOURCE, [], p)


def _fuse_leaves(leaves, atoms):
    changed = True
    while changed:
        changed = False
        sets = [set(out_attrs(l)) for l in leaves]
        for k, atom in enumerate(atoms):
            ix = _leaf_of(atom, leaves, sets)
            if len(ix) != 2:
                continue
            i, j = sorted(ix)
            if not _fusable(leaves[i], leaves[j]):
                continue
            between = [x for x in atoms if sorted(_leaf_of(x, leaves, sets)) == [i, j]]
            leaves[i] = _fuse(leaves[i], leaves[j], between)
            del leaves[j]
            atoms[:] = [x for x in atoms if x not in between]
            changed = True
            break
    return leaves, atoms


def _leaf_key(leaf):
    c = cardinality(leaf)
    return (c == 0, c, min(_id_key(i) for i in leaf.ids()))


def _order(leaves, atoms):
    sets = [set(out_attrs(l)) for l in leaves]
    placed = []
    remaining = list(range(len(leaves)))
    used = set()
    node = None
    while remaining:
        if node is None:
            pick = min(remaining, key=lambda i: _leaf_key(leaves[i]))
            node = leaves[pick]
            placed.append(pick)
            remaining.remove(pick)
            continue
        connected = [
            i for i in remaining
            if any(k not in used and i in (ix := _leaf_of(a, leaves, sets)) and set(ix) - {i} <= set(placed)
                   and len(ix) == 2 for k, a in enumerate(atoms))
        ]
        pick = min(connected or remaining, key=lambda i: _leaf_key(leaves[i]))
        here = [k for k, a in enumerate(atoms)
                if k not in used and set(_leaf_of(a, leaves, sets)) <= set(placed) | {pick}]
        used.update(here)
        right = leaves[pick]
        if here:
            node = PlanNode(JOIN, [node, right], {"pred": conj([atoms[k] for k in here]), "algo": "nested-loop"})
        else:
            node = PlanNode(PRODUCT, [node, right], {})
        placed.append(pick)
        remaining.remove(pick)
    rest = [atoms[k] for k in range(len(atoms)) if k not in used]
    if rest:
        node = PlanNode(RESTRICT, [node], {"pred": conj(rest)})
    return node


def _rebindable(node):
    if node.op == PROJECT:
        node = node.children[0]
    if node.op == SOURCE:
        return True
    return node.op == UNION and all(c.op == SOURCE for c in node.children)


def _has_equi(n):
    return bool(equi_atoms(n["pred"], out_attrs(n.children[0]), out_attrs(n.children[1])))


def _choose_algos(region):
    joins = [n for n in region.walk() if n.op == JOIN and not n.get("fixed")]
    for n in joins:
        n.params["algo"] = "sort-merge" if _has_equi(n) else "nested-loop"
    # the bottom join of the left-deep chain
    bottom = region
    while bottom.op in (JOIN, PRODUCT, RESTRICT) and bottom.children and bottom.children[0].op in (JOIN, PRODUCT, RESTRICT):
        bottom = bottom.children[0]
    if bottom.op == JOIN and not bottom.get("fixed"):
        left, right = bottom.children
        c = cardinality(left)
        if left.op not in (JOIN, PRODUCT) and 0 < c <= DEPENDENT_LIMIT and _rebindable(right) and _has_equi(bottom):
            bottom.params["algo"] = "dependent"


def _reorder(node):
    if _is_region(node) or (node.op == RESTRICT and _is_region(node.children[0])):
        leaves, atoms = [], []
        _collect(node, leaves, atoms)
        leaves = [_reorder(l) for l in leaves]
        leaves, atoms = _fuse_leaves(leaves, atoms)
        if len(leaves) == 1:
            out = leaves[0]
            if atoms:
                out = PlanNode(RESTRICT, [out], {"pred": conj(atoms)})
            return out
        out = _order(leaves, atoms)
        _choose_algos(out)
        return out
    node.children = [_reorder(c) for c in node.children]
    return node


def apply_hints(plan, hints, warnings):
    label_joins(plan)
    for h in hints:
        if h.algo not in ALGOS:
            warnings.append(f"hint ignored: unknown algorithm {h.algo!r}")
            continue
        parts = (h.join or "").split("-")
        if len(parts) != 2:
            warnings.append(f"hint ignored: bad join id {h.join!r}")
            continue
        a, b = parts
        hit = False
        for n in plan.walk():
            if n.op != JOIN or n.get("fixed"):
                continue
            lids, rids = n.children[0].ids(), n.children[1].ids()
            if (a in lids and b in rids) or (b in lids and a in rids):
                hit = True
                if h.algo != "nested-loop" and not _has_equi(n):
                    warnings.append(f"hint ignored: join {h.join} has no equality for {h.algo}")
                elif h.algo == "dependent" and not _rebindable(n.children[1]):
                    warnings.append(f"hint ignored: the right input of {h.join} cannot be re-queried")
                else:
                    n.params["algo"] = h.algo
                break
        if not hit:
            warnings.append(f"hint ignored: no join {h.join}")
    return plan


def optimize(plan: PlanNode, hints=(), warnings=None) -> PlanNode:
    """Rewrite a copy of plan; the input is left untouched."""
    warnings = [] if warnings is None else warnings
    p = plan.copy()
    p = _push_restrict(p)
    p = _push_project(p)
    p = _reorder(p)
    return apply_hints(p, hints, warnings)
