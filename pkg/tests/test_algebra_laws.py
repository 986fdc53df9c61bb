"""Algebraic laws over randomly generated small relations (<= 6 tuples each)."""

from collections import Counter
from decimal import Decimal

from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import LEAF_VALUES, canon, relations
from treemed.xalgebra import (
    And, Compare, Contains, Not, Or, Path, XRelation, canonical_full, canonical_tuple, x_aggregate,
    x_difference, x_intersection, x_join, x_nest, x_product, x_project, x_restrict, x_sort, x_union,
    x_unnest,
)
from treemed.xalgebra.values import compare_values, parse_decimal, sort_key

P = Path
LAWS = settings(max_examples=1000)


def copy(rel):
    """Relations are single-pass streams; tests re-read a materialized list."""
    tuples = list(rel)
    return lambda: XRelation(rel.schema, list(tuples))


class Rebindable:
    """Right input for dependent joins: re-queried with the observed keys."""

    def __init__(self, rel, key):
        self.tuples = list(rel)
        self.schema = rel.schema
        self.key = key
        self.diagnostics = None
        self.calls = []

    def fetch(self, keys):
        self.calls.append(list(keys))
        hit = [t for t in self.tuples
               if any(compare_values(v, k) == 0 for v in t.values(self.key) for k in keys)]
        return XRelation(self.schema, hit)


@st.composite
def predicates(draw, left, right, equi=True):
    lk, lv = P(f"{left}/k"), P(f"{left}/v")
    rk, rv = P(f"{right}/k"), P(f"{right}/v")
    extras = st.one_of(
        st.builds(Compare, st.sampled_from([lv, rv]), st.sampled_from(["=", "!=", "<", ">="]), LEAF_VALUES),
        st.builds(Compare, st.sampled_from([lv, lk]), st.sampled_from(["<", "<=", "!=", ">"]),
                  st.sampled_from([rv, rk])),
        st.builds(Compare, st.just(lk), st.sampled_from([">", "<"]), st.sampled_from([Decimal(1), Decimal("2.5")])),
        st.builds(Contains, st.sampled_from([lv, rv]), st.sampled_from(["a", "1", ""])),
    )
    atoms = draw(st.lists(extras, max_size=2))
    if draw(st.booleans()) and len(atoms) == 2:
        atoms = [Or(tuple(atoms))]
    if draw(st.booleans()) and atoms:
        atoms[-1] = Not(atoms[-1])
    if equi or draw(st.booleans()):
        atoms.insert(0, Compare(lk, "=", rk))
    return And(tuple(atoms))


def _multiset(rel):
    return Counter(canonical_full(t) for t in rel)


@LAWS
@given(st.data())
def test_join_equals_restrict_of_product(data):
    right_root = data.draw(st.sampled_from(["b", "a"]), label="right root")
    l = copy(data.draw(relations("a"), label="left"))
    r = copy(data.draw(relations(right_root), label="right"))
    pred = data.draw(predicates("a", right_root, equi=True), label="predicate")
    oracle = _multiset(x_restrict(x_product(l(), r()), pred))
    nl = x_join(l(), r(), pred, "nested-loop")
    assert _multiset(nl) == oracle
    assert _multiset(x_join(l(), r(), pred, "sort-merge")) == oracle
    dep = Rebindable(r(), P(f"{right_root}/k"))
    assert _multiset(x_join(l(), dep, pred, "dependent", batch_size=2)) == oracle
    # one parameterized fetch per batch of at most two distinct keys
    assert all(1 <= len(c) <= 2 for c in dep.calls)


@LAWS
@given(st.data())
def test_nested_loop_join_without_equality(data):
    l = copy(data.draw(relations("a")))
    r = copy(data.draw(relations("b")))
    pred = data.draw(predicates("a", "b", equi=False))
    out = [canonical_full(t) for t in x_join(l(), r(), pred, "nested-loop")]
    # nested loop keeps left-major order, so it equals the ordered restrict over the product
    assert out == [canonical_full(t) for t in x_restrict(x_product(l(), r()), pred)]


@st.composite
def flat_relations(draw):
    """Duplicate-free relations whose attributes are all single-valued."""
    rel = draw(relations("a", fields=("g", "h", "m"), multi=False))
    seen, tuples = set(), []
    for t in rel:
        k = canonical_tuple(t)
        if k not in seen:
            seen.add(k)
            tuples.append(t)
    return XRelation(rel.schema, tuples)


@LAWS
@given(flat_relations(), st.sampled_from([["a/g"], ["a/g", "a/h"], ["a/h"]]))
def test_unnest_of_nest_round_trip(rel, group):
    rel = copy(rel)
    non_group = [str(a) for a in rel().schema.attributes if str(a) not in group]
    for m in non_group:
        keep = group + [m]
        base = x_project(rel(), keep)
        back = x_unnest(x_nest(rel(), group), m, group)
        # unnest returns the pivots and m; compare attribute subtrees as multisets
        got = Counter(canonical_tuple(t) for t in x_project(back, keep))
        assert got == Counter(canonical_tuple(t) for t in base)


@LAWS
@given(relations("a"), st.lists(st.sampled_from(["a/k", "a/v"]), min_size=1, max_size=2, unique=True))
def test_projection_idempotent(rel, keep):
    rel = copy(rel)
    once = canon(x_project(rel(), keep))
    assert canon(x_project(x_project(rel(), keep), keep)) == once


@LAWS
@given(relations("a"), relations("a"))
def test_set_operator_laws(l, r):
    l, r = copy(l), copy(r)
    empty = lambda: XRelation(l().schema, [])  # noqa: E731
    assert list(x_difference(l(), l())) == []
    dedup = list(dict.fromkeys(canonical_tuple(t) for t in l()))
    assert [canonical_tuple(t) for t in x_union(l(), empty())] == dedup
    assert [canonical_tuple(t) for t in x_intersection(l(), l())] == dedup
    u1 = {canonical_tuple(t) for t in x_union(l(), r())}
    u2 = {canonical_tuple(t) for t in x_union(r(), l())}
    assert u1 == u2
    inter = {canonical_tuple(t) for t in x_intersection(l(), r())}
    diff = {canonical_tuple(t) for t in x_difference(l(), r())}
    assert inter | diff == set(dedup) and not (inter & diff)


@LAWS
@given(relations("a"), st.sampled_from(["asc", "desc"]))
def test_sort_orders_and_permutes(rel, direction):
    rel = copy(rel)
    out = list(x_sort(rel(), [("a/k", direction)]))
    assert Counter(canonical_full(t) for t in out) == Counter(canonical_full(t) for t in rel())
    firsts = [sort_key((t.values(P("a/k")) or [None])[0]) for t in out]
    assert firsts == sorted(firsts, reverse=(direction == "desc"))


@LAWS
@given(st.lists(st.lists(st.decimals(min_value=-10**6, max_value=10**6, places=4, allow_nan=False,
                                     allow_infinity=False), max_size=5), max_size=4))
def test_aggregates_match_decimal_oracle(rows):
    from treemed.xalgebra.values import format_decimal
    from helpers import relation

    specs = [("a", [("k", str(d)) for d in row] or [("v", "x")]) for row in rows]
    mk = lambda: relation(["a/k"], specs)  # noqa: E731
    counts = [t.values(P("agg")) for t in x_aggregate(mk(), "COUNT", "a/k", "agg")]
    assert counts == [[str(len(row))] for row in rows]
    sums = [t.values(P("agg")) for t in x_aggregate(mk(), "SUM", "a/k", "agg")]
    assert sums == [[format_decimal(sum(row, Decimal(0)))] if row else [] for row in rows]
    for t, row in zip(x_aggregate(mk(), "MAX", "a/k", "agg"), rows):
        assert t.values(P("agg")) == ([format_decimal(max(row))] if row else [])
    for t, row in zip(x_aggregate(mk(), "AVG", "a/k", "agg"), rows):
        if not row:
            assert t.values(P("agg")) == []
            continue
        # averages round to 28 significant digits; the product must land back on the sum
        avg = parse_decimal(t.values(P("agg"))[0])
        total = sum(row, Decimal(0))
        assert abs(avg * len(row) - total) <= Decimal("1e-20") * max(1, abs(total))
