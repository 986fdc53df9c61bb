"""Tree surgery used by the operators: unification merge and reachability pruning."""

from __future__ import annotations

from collections import Counter

from .model import NodeRef, TreeBuilder, XTree


def compatible(lt: XTree, ln: int, rt: XTree, rn: int) -> bool:
    if lt.labels[ln] != rt.labels[rn] or lt.texts[ln] != rt.texts[rn]:
        return False
    if lt.texts[ln] is not None:
        return not lt.children[ln] and not rt.children[rn]
    return True


def _unify(lt, ln, rt, rn, b, parent, lm, rm, spine):
    new = b.add(lt.labels[ln], parent, lt.texts[ln])
    lm[ln] = new
    rm[rn] = new
    lkids = lt.children[ln]
    rkids = rt.children[rn]
    lcount = Counter(lt.labels[c] for c in lkids)
    rcount = Counter(rt.labels[c] for c in rkids)
    single_right = {rt.labels[c]: c for c in rkids if rcount[rt.labels[c]] == 1}
    used = set()
    for c in lkids:
        label = lt.labels[c]
        rc = single_right.get(label) if lcount[label] == 1 else None
        if (
            rc is not None
            and compatible(lt, c, rt, rc)
            and (spine is None or lt.paths[c] in spine)
        ):
            _unify(lt, c, rt, rc, b, new, lm, rm, spine)
            used.add(rc)
        else:
            b.copy_subtree(lt, c, new, lm)
    for rc in rkids:
        if rc not in used:
            b.copy_subtree(rt, rc, new, rm)
    return new


def unify_trees(lt: XTree, rt: XTree, spine=None):
    """Merge rt into lt. Returns (tree, left_map, right_map) or None if roots differ.

    Nodes unify along equal paths only where each side has exactly one child
    with that label and the two nodes are compatible (equal text, leaves stay
    leaves). When spine is given, only nodes whose path is in spine unify.
    Everything else from the right is appended after the left children.
    """
    if not compatible(lt, 0, rt, 0):
        return None
    if spine is not None and lt.paths[0] not in spine:
        return None
    b = TreeBuilder()
    lm, rm = {}, {}
    _unify(lt, 0, rt, 0, b, None, lm, rm, spine)
    return b.build(), lm, rm


def merge_forests(left, right, spine=None, once=True):
    """Merge the right forest into the left one.

    Returns (forest, left_maps, right_maps); each map entry is
    (new_tree_index, node_map or None for an unchanged tree).
    once: each left tree absorbs at most one right tree (product rule).
    """
    out = list(left)
    lmaps = [(i, None) for i in range(len(left))]
    rmaps = []
    absorbed = set()
    for rt in right:
        target = None
        if spine is None or rt.paths[0] in spine:
            for i in range(len(left)):
                if once and i in absorbed:
                    continue
                if out[i].labels[0] == rt.labels[0]:
                    merged = unify_trees(out[i], rt, spine)
                    if merged is not None:
                        target = i
                        break
        if target is None:
            out.append(rt)
            rmaps.append((len(out) - 1, None))
            continue
        tree, lm, rm = merged
        out[target] = tree
        absorbed.add(target)
        prev = lmaps[target][1]
        lmaps[target] = (target, lm if prev is None else {k: lm[v] for k, v in prev.items()})
        for j, (ti, m) in enumerate(rmaps):
            if ti == target and m is not None:
                rmaps[j] = (ti, {k: lm[v] for k, v in m.items()})
        rmaps.append((target, rm))
    return tuple(out), lmaps, rmaps


def remap_ref(ref: NodeRef, maps) -> NodeRef:
    ti, m = maps[ref.tree]
    return NodeRef(ti, ref.node if m is None else m[ref.node])


def remap_refs(refs, maps) -> tuple:
    return tuple(remap_ref(r, maps) for r in refs)


def prune(forest, ref_lists):
    """Keep only nodes on or under a referenced node, plus their ancestors.

    Returns (new_forest, maps) where maps is indexed by old tree index and
    holds (new_index, node_map or None) or None for dropped trees.
    """
    keep = {}
    for refs in ref_lists:
        for r in refs:
            tree = forest[r.tree]
            s = keep.setdefault(r.tree, set())
            n = tree.parents[r.node]
            while n is not None and n not in s:
                s.add(n)
                n = tree.parents[n]
            s.update(tree.descendants(r.node))
    new_forest = []
    maps = [None] * len(forest)
    for ti, tree in enumerate(forest):
        s = keep.get(ti)
        if not s:
            continue
        if len(s) == len(tree):
            maps[ti] = (len(new_forest), None)
            new_forest.append(tree)
            continue
        b = TreeBuilder()
        m = {}
        for n in tree.descendants(0):
            if n in s:
                par = tree.parents[n]
                m[n] = b.add(tree.labels[n], None if par is None else m[par], tree.texts[n])
        maps[ti] = (len(new_forest), m)
        new_forest.append(b.build())
    return tuple(new_forest), maps
