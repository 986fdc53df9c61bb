"""Shared fixtures data, oracles and hypothesis strategies for the tests."""

from __future__ import annotations

import itertools
import os

from hypothesis import strategies as st

from treemed import events as ev
from treemed.xalgebra import XRelation, XRelationSchema, canonical_full, canonical_tuple, make_tuple, x_source
from treemed.xalgebra.model import TreeBuilder, escape_text, prefix_close, tree_from_nested

# -- the person/book example relation ----------------------------------------

EXAMPLE_DOCS = [
    "<personne><prenom>Jean</prenom><nom>Dupont</nom>"
    "<adresse><rue>rue de Rivoli</rue><ville>Paris</ville></adresse></personne>",
    "<livre><titre>Les Miserables</titre><auteur><nom>Hugo</nom></auteur><date>1862</date></livre>",
    "<personne><prenom>Marie</prenom><nom>Curie</nom>"
    "<adresse><rue>rue Cuvier</rue><ville>Paris</ville></adresse></personne>",
    "<livre><titre>Germinal</titre><auteur><nom>Zola</nom></auteur><date>1885</date></livre>",
]
EXAMPLE_ATTRS = [
    "personne/prenom", "personne/nom", "personne/adresse/rue",
    "livre/titre", "livre/auteur/nom", "livre/date",
]
EXAMPLE_GUIDE = [
    "personne/prenom", "personne/nom", "personne/adresse", "personne/adresse/rue",
    "personne/adresse/ville", "livre/titre", "livre/auteur", "livre/auteur/nom", "livre/date",
]


def example_events():
    out = []
    for d in EXAMPLE_DOCS:
        out.extend(e for e in ev.parse_xml(d) if e.kind != ev.DOC)
        out.append(ev.DOC_EVENT)
    return out


def example_relation() -> XRelation:
    return x_source(example_events(), EXAMPLE_GUIDE, EXAMPLE_ATTRS)


# -- small builders -------------------------------------------------------------


def relation(attrs, specs, guide=()) -> XRelation:
    """Relation of one-tree tuples built from ('label', body) nested specs."""
    tuples = [make_tuple(attrs, [tree_from_nested(s)]) for s in specs]
    return XRelation.from_tuples(attrs, tuples, guide)


def canon(rel) -> list:
    return [canonical_full(t) for t in rel]


def canon_set(rel) -> list:
    return sorted(canonical_full(t) for t in rel)


def keys(rel) -> list:
    return [canonical_tuple(t) for t in rel]


def values(rel, path) -> list:
    return [t.values(path) for t in rel]


# -- hypothesis strategies ------------------------------------------------------

LEAF_VALUES = st.sampled_from(["1", "2", "3", "1.0", "10", "a", "b", "ab", "-2"])


@st.composite
def record_tree(draw, root, fields=("k", "v"), multi=True):
    """root{k*, v*} with 0..2 values per field (1 when multi is false)."""
    children = []
    for f in fields:
        n = draw(st.integers(0, 2)) if multi else 1
        children += [(f, draw(LEAF_VALUES)) for _ in range(n)]
    return tree_from_nested((root, children or [("k", draw(LEAF_VALUES))]))


@st.composite
def relations(draw, root="a", fields=("k", "v"), max_size=6, multi=True):
    attrs = [f"{root}/{f}" for f in fields]
    trees = draw(st.lists(record_tree(root, fields, multi), max_size=max_size))
    tuples = [make_tuple(attrs, [t]) for t in trees]
    guide = prefix_close([f"{root}/{f}" for f in fields])
    return XRelation(XRelationSchema(tuple(attrs), guide), tuples)


@st.composite
def nested_trees(draw, depth=0):
    """Arbitrary small trees over a tiny label alphabet, with repeated siblings."""
    label = draw(st.sampled_from(["x", "y", "z"]))
    if depth >= 3 or draw(st.booleans()):
        return (label, draw(st.one_of(st.none(), st.text("ab<&>é \"'", max_size=4), LEAF_VALUES)))
    kids = draw(st.lists(nested_trees(depth + 1), min_size=1, max_size=3))
    return (label, kids)


def _build(spec):
    b = TreeBuilder()

    def rec(s, parent):
        label, body = s
        if isinstance(body, list):
            n = b.add(label, parent)
            for c in body:
                rec(c, n)
        else:
            b.add(label, parent, body if body else None)

    rec(spec, None)
    return b.build()


@st.composite
def random_relations(draw):
    """Relations with one to three trees per tuple, repeated paths and nest spans."""
    roots = ["r", "s"]
    forests = []
    for _ in range(draw(st.integers(0, 5))):
        forests.append([_build((draw(st.sampled_from(roots)), draw(st.lists(nested_trees(1), max_size=3))))
                        for _ in range(draw(st.integers(1, 3)))])
    paths = set()
    for f in forests:
        for t in f:
            paths.update(t.paths)
    pool = sorted(paths, key=lambda p: p.text)
    attrs = draw(st.lists(st.sampled_from(pool), max_size=4)) if pool else []
    tuples = []
    for f in forests:
        t = make_tuple(attrs, f)
        if attrs and draw(st.booleans()):
            from treemed.xalgebra import NestLevel

            spans = tuple(tuple(draw(st.integers(0, 3)) for _ in attrs) for _ in range(draw(st.integers(0, 2))))
            t = type(t)(t.bindings, t.forest, (NestLevel("t2", spans),))
        tuples.append(t)
    guide = prefix_close(list(paths) + attrs + [p for p in ("r", "s")])
    return XRelation(XRelationSchema(tuple(attrs), guide), tuples)


# -- the worked nation/supplier/partsupp example ------------------------------------

NATION_QUERY = """for $n in Collection("*")/nation
where contains($n/comment, "iron")
return <nation><name>{$n/name}</name>
  <suppliers>{
    for $s in Collection("*")/supplier, $ps in Collection("*")/partsupp
    where $s/id/suppkey = $ps/suppkey and $ps/availqty > 45 and $s/contact/localisation/nationkey = $n/nationkey
    return <supplier>{$s/name}</supplier><phone>{$s/contact/phone}</phone>
      <partsupp><partkey>{$ps/partkey}</partkey><supplycost>{$ps/supplycost}</supplycost></partsupp>
  }</suppliers></nation>
"""


def _leaf(label, value):
    return f"<{label}>{escape_text(value)}</{label}>"


def nation_oracle(data) -> list:
    """Materialize everything, filter, join, group by nation, expand the template."""
    out = []
    for n in data["NATION"]:
        if "iron" not in n["comment"]:
            continue
        members = []
        for s, ps in itertools.product(data["SUPPLIER"], data["PARTSUPP"]):
            if (s["id"]["suppkey"] == ps["suppkey"] and int(ps["availqty"]) > 45
                    and s["contact"]["localisation"]["nationkey"] == n["nationkey"]):
                members.append(
                    f"<supplier>{_leaf('name', s['name'])}</supplier>"
                    f"<phone>{_leaf('phone', s['contact']['phone'])}</phone>"
                    f"<partsupp><partkey>{_leaf('partkey', ps['partkey'])}</partkey>"
                    f"<supplycost>{_leaf('supplycost', ps['supplycost'])}</supplycost></partsupp>"
                )
        if members:
            out.append((n, members))
    return out


def nation_documents(data, member_order=sorted) -> list:
    docs = []
    for n, members in nation_oracle(data):
        body = "".join(member_order(members))
        docs.append(f"<nation><name>{_leaf('name', n['name'])}</name><suppliers>{body}</suppliers></nation>")
    return sorted(docs)


# -- golden files --------------------------------------------------------------

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def golden(name, actual=None) -> str:
    """Read a golden file; TREEMED_REGOLD=1 rewrites it from actual first."""
    path = os.path.join(GOLDEN, name)
    if actual is not None and os.environ.get("TREEMED_REGOLD"):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(actual)
    with open(path, encoding="utf-8") as fh:
        return fh.read()
