from decimal import Decimal

import pytest

from helpers import canon, canon_set, example_events, example_relation, relation, values
from treemed import events as ev
from treemed.errors import PlanError, StreamError
from treemed.xalgebra import (
    TRUE, And, Compare, Contains, Element, Not, Or, Path, Placeholder, Repeat, Text, XRelation,
    XRelationSchema, x_aggregate, x_difference, x_intersection, x_join, x_nest, x_product, x_project,
    x_reconstruct, x_restrict, x_sort, x_source, x_union, x_unnest,
)
from treemed.xalgebra.template import VALUE

P = Path

NATIONS = [
    ("nation", [("nationkey", "1"), ("name", "FRANCE"), ("comment", "rich in iron ore")]),
    ("nation", [("nationkey", "2"), ("name", "PERU"), ("comment", "quiet lands")]),
]
NATION_ATTRS = ["nation/nationkey", "nation/name", "nation/comment"]


def nations():
    return relation(NATION_ATTRS, NATIONS)


def xml(rel):
    return [t.serialize_refs([r for _, refs in t.bindings for r in refs]) for t in rel]


def forests(rel):
    return ["".join(tree.serialize() for tree in t.forest) for t in rel]


class TestSource:
    def test_example_relation(self):
        rel = example_relation()
        assert len(list(rel)) == 4

    def test_empty_stream(self):
        rel = x_source([], ["nation/name"], ["nation/name"])
        assert list(rel) == [] and rel.schema.attributes == (P("nation/name"),)

    def test_two_nations_match_manual_trees(self):
        events = list(ev.parse_xml("<r><nation><name>A</name></nation><nation><name>B</name></nation></r>",
                                   skip_outer=True))
        rel = list(x_source(events, ["nation/name"], ["nation/name"]))
        assert [t.values(P("nation/name")) for t in rel] == [["A"], ["B"]]
        assert [len(t.bindings[0][1]) for t in rel] == [1, 1]

    def test_first_tuple_before_stream_ends(self):
        def events():
            yield from ev.parse_xml("<nation><name>A</name></nation>")
            raise AssertionError("read past the first document")

        it = iter(x_source(events(), ["nation/name"], ["nation/name"]))
        assert next(it).values(P("nation/name")) == ["A"]

    def test_foreign_root_is_skipped_and_counted(self):
        events = list(ev.parse_xml("<r><nation><name>A</name></nation><region><name>X</name></region></r>",
                                   skip_outer=True))
        rel = x_source(events, ["nation/name"], ["nation/name"])
        assert len(list(rel)) == 1
        assert rel.diagnostics["skipped-document"] == 1

    @pytest.mark.parametrize("events", [
        [ev.end("a")],
        [ev.start("a"), ev.DOC_EVENT],
        [ev.start("a")],
        [ev.text("x")],
    ])
    def test_malformed_nesting(self, events):
        with pytest.raises(StreamError):
            list(x_source(events, ["a"], ["a"]))

    def test_unknown_attribute_rejected_before_execution(self):
        with pytest.raises(PlanError):
            x_source(iter(()), ["a/b"], ["a/c"])


class TestProject:
    def test_prunes_to_referenced_spine(self):
        rel = x_project(example_relation(), ["personne/prenom", "personne/nom"])
        assert [str(a) for a in rel.schema.attributes] == ["personne/prenom", "personne/nom"]
        assert forests(rel) == [
            "<personne><prenom>Jean</prenom><nom>Dupont</nom></personne>",
            "",
            "<personne><prenom>Marie</prenom><nom>Curie</nom></personne>",
            "",
        ]

    def test_keeps_ancestor_spine(self):
        rel = x_project(example_relation(), ["personne/adresse/rue"])
        assert forests(rel)[0] == "<personne><adresse><rue>rue de Rivoli</rue></adresse></personne>"

    def test_full_attribute_list_is_identity(self):
        rel = example_relation()
        assert canon(x_project(example_relation(), [str(a) for a in rel.schema.attributes])) == canon(rel)

    def test_unknown_attribute(self):
        with pytest.raises(PlanError):
            x_project(nations(), ["nation/region"])

    def test_no_duplicate_elimination(self):
        rel = relation(["a/k"], [("a", [("k", "1")]), ("a", [("k", "1")])])
        assert len(list(x_project(rel, ["a/k"]))) == 2


class TestRestrict:
    def test_contains(self):
        rel = x_restrict(nations(), Contains(P("nation/comment"), "iron"))
        assert values(rel, P("nation/name")) == [["FRANCE"]]

    def test_true_is_identity(self):
        assert canon(x_restrict(nations(), TRUE)) == canon(nations())

    def test_numeric_comparison_like_availqty(self):
        rows = [("partsupp", [("availqty", q)]) for q in ("45", "46", "100", "9", "45.5")]
        rel = x_restrict(relation(["partsupp/availqty"], rows), Compare(P("partsupp/availqty"), ">", Decimal(45)))
        # numeric, not lexicographic: "9" < 45 and "100" > 45
        assert values(rel, P("partsupp/availqty")) == [["46"], ["100"], ["45.5"]]

    def test_existential_and_absent(self):
        rel = relation(["a/k"], [("a", [("k", "1"), ("k", "5")]), ("a", [("v", "x")]), ("a", [("k", "2")])])
        out = x_restrict(rel, Compare(P("a/k"), ">", Decimal(4)))
        assert values(out, P("a/k")) == [["1", "5"]]
        # absent attribute makes every atom false, including !=
        out = x_restrict(rel, Compare(P("a/k"), "!=", "zzz"))
        assert len(list(out)) == 2

    def test_non_numeric_is_false_and_counted(self):
        rel = x_restrict(relation(["a/k"], [("a", [("k", "abc")]), ("a", [("k", "7")])]),
                         Compare(P("a/k"), "<", Decimal(10)))
        assert values(rel, P("a/k")) == [["7"]]
        assert rel.diagnostics["non-numeric"] == 1

    def test_or_not(self):
        p = Or((Compare(P("nation/name"), "=", "PERU"), Not(Contains(P("nation/comment"), "ore"))))
        assert values(x_restrict(nations(), p), P("nation/name")) == [["PERU"]]

    def test_unknown_attribute(self):
        with pytest.raises(PlanError):
            x_restrict(nations(), Compare(P("nation/x"), "=", "1"))


class TestProduct:
    def test_disjoint_roots_concatenate(self):
        l = relation(["a/k"], [("a", [("k", str(i))]) for i in range(2)])
        r = relation(["b/k"], [("b", [("k", str(i))]) for i in range(3)])
        out = list(x_product(l, r))
        assert len(out) == 6
        assert "".join(tree.serialize() for tree in out[0].forest) == "<a><k>0</k></a><b><k>0</k></b>"
        assert [t.values(P("b/k")) for t in out[:3]] == [["0"], ["1"], ["2"]]

    def test_equal_roots_merge(self):
        l = relation(["personne/nom"], [("personne", [("nom", "Hugo")])])
        r = relation(["personne/adresse/ville"], [("personne", [("adresse", [("ville", "Paris")])])])
        out = list(x_product(l, r))
        assert len(out) == 1 and len(out[0].forest) == 1
        assert out[0].forest[0].serialize() == "<personne><nom>Hugo</nom><adresse><ville>Paris</ville></adresse></personne>"
        assert out[0].values(P("personne/adresse/ville")) == ["Paris"]

    def test_empty_operand(self):
        assert list(x_product(nations(), relation(["b/k"], []))) == []
        assert list(x_product(relation(["b/k"], []), nations())) == []

    def test_pipelined_is_same_multiset_but_unordered(self):
        l = relation(["a/k"], [("a", [("k", str(i))]) for i in range(3)])
        r = relation(["b/k"], [("b", [("k", str(i))]) for i in range(3)])
        nl = x_product(l, r)
        pl = x_product(relation(["a/k"], [("a", [("k", str(i))]) for i in range(3)]),
                       relation(["b/k"], [("b", [("k", str(i))]) for i in range(3)]), mode="pipelined")
        assert pl.ordered is False and nl.ordered is True
        assert canon_set(nl) == canon_set(pl)


class TestJoin:
    def _people(self):
        l = relation(["personne/nom", "personne/adresse/ville"], [
            ("personne", [("nom", "Hugo"), ("adresse", [("ville", "Paris")])]),
            ("personne", [("nom", "Zola"), ("adresse", [("ville", "Aix")])]),
        ])
        r = relation(["personne/adresse/ville", "personne/adresse/rue"], [
            ("personne", [("adresse", [("ville", "Paris"), ("rue", "Rivoli")])]),
            ("personne", [("adresse", [("ville", "Lyon"), ("rue", "Gerland")])]),
        ])
        return l, r

    @pytest.mark.parametrize("algo", ["nested-loop", "sort-merge"])
    def test_natural_join_on_ville_merges_trees(self, algo):
        l, r = self._people()
        p = Compare(P("personne/adresse/ville"), "=", P("personne/adresse/ville"))
        out = list(x_join(l, r, p, algo))
        assert len(out) == 1
        assert [tree.serialize() for tree in out[0].forest] == [
            "<personne><nom>Hugo</nom><adresse><ville>Paris</ville><rue>Rivoli</rue></adresse></personne>"
        ]

    def test_false_predicate(self):
        l, r = self._people()
        assert list(x_join(l, r, Compare(P("personne/nom"), "=", "nobody"))) == []

    def test_sort_merge_needs_equi_atom(self):
        l, r = self._people()
        with pytest.raises(PlanError):
            x_join(l, r, Compare(P("personne/nom"), "=", "Hugo"), "sort-merge")

    def test_dependent_needs_rebindable_right(self):
        l, r = self._people()
        with pytest.raises(PlanError):
            x_join(l, r, Compare(P("personne/adresse/ville"), "=", P("personne/adresse/ville")), "dependent")

    def test_supplier_partsupp_against_product_oracle(self, data):
        sup = relation(["supplier/id/suppkey", "supplier/name"], [
            ("supplier", [("id", [("suppkey", s["id"]["suppkey"])]), ("name", s["name"])]) for s in data["SUPPLIER"]
        ])
        ps_rows = [("partsupp", [("suppkey", p["suppkey"]), ("partkey", p["partkey"])]) for p in data["PARTSUPP"][:200]]
        pred = Compare(P("supplier/id/suppkey"), "=", P("partsupp/suppkey"))

        def ps():
            return relation(["partsupp/suppkey", "partsupp/partkey"], ps_rows)

        oracle = canon_set(x_restrict(x_product(sup, ps()), pred))
        assert len(oracle) == 200
        for algo in ("nested-loop", "sort-merge"):
            sup = relation(["supplier/id/suppkey", "supplier/name"], [
                ("supplier", [("id", [("suppkey", s["id"]["suppkey"])]), ("name", s["name"])])
                for s in data["SUPPLIER"]
            ])
            assert canon_set(x_join(sup, ps(), pred, algo)) == oracle

    def test_sort_merge_orders_by_key(self):
        l = relation(["a/k"], [("a", [("k", k)]) for k in ("3", "1", "2")])
        r = relation(["b/k"], [("b", [("k", k)]) for k in ("2", "3", "1")])
        out = x_join(l, r, Compare(P("a/k"), "=", P("b/k")), "sort-merge")
        assert out.ordered is False
        assert [t.values(P("a/k")) for t in out] == [["1"], ["2"], ["3"]]


class TestSort:
    def test_empty_keys_identity(self):
        assert canon(x_sort(nations(), [])) == canon(nations())

    def test_by_name(self):
        rel = relation(NATION_ATTRS, list(reversed(NATIONS)))
        assert values(x_sort(rel, [("nation/name", "asc")]), P("nation/name")) == [["FRANCE"], ["PERU"]]

    def test_mixed_values_numbers_first_absent_first(self):
        rows = [("a", [("k", v)]) for v in ("b", "10", "9", "a", "-1")] + [("a", [("v", "x")])]
        out = x_sort(relation(["a/k"], rows), [("a/k", "asc")])
        assert values(out, P("a/k")) == [[], ["-1"], ["9"], ["10"], ["a"], ["b"]]
        desc = x_sort(relation(["a/k"], rows), [("a/k", "desc")])
        assert values(desc, P("a/k")) == [["b"], ["a"], ["10"], ["9"], ["-1"], []]

    def test_stable(self):
        rows = [("a", [("k", "1"), ("v", v)]) for v in "xyz"]
        out = x_sort(relation(["a/k", "a/v"], rows), [("a/k", "asc")])
        assert values(out, P("a/v")) == [["x"], ["y"], ["z"]]

    def test_bad_direction(self):
        with pytest.raises(PlanError):
            x_sort(nations(), [("nation/name", "up")])


def suppliers(nks=("7", "7", "7")):
    return relation(["supplier/contact/localisation/nationkey", "supplier/name"], [
        ("supplier", [("name", f"S{i}"), ("contact", [("localisation", [("nationkey", nk)])])])
        for i, nk in enumerate(nks)
    ])


class TestNest:
    def test_distinct_groups_are_sorted_input(self):
        out = x_nest(suppliers(("3", "1", "2")), ["supplier/contact/localisation/nationkey"])
        assert values(out, P("supplier/name")) == [["S1"], ["S2"], ["S0"]]

    def test_three_suppliers_one_nation(self):
        out = list(x_nest(suppliers(), ["supplier/contact/localisation/nationkey"], level="t2"))
        assert len(out) == 1
        t = out[0]
        assert t.values(P("supplier/name")) == ["S0", "S1", "S2"]
        # the group path unifies into one spine, other branches appended in order
        assert len(t.forest) == 1
        assert t.forest[0].serialize() == (
            "<supplier><name>S0</name><contact><localisation><nationkey>7</nationkey></localisation></contact>"
            "<name>S1</name><name>S2</name></supplier>")
        assert t.values(P("supplier/contact/localisation/nationkey")) == ["7"]
        assert t.members[0].name == "t2"
        assert t.members[0].spans == ((0, 1), (0, 1), (0, 1))

    def test_empty(self):
        assert list(x_nest(suppliers(()), ["supplier/name"])) == []


class TestUnnest:
    def test_three_refs_three_tuples(self):
        nested = x_nest(suppliers(), ["supplier/contact/localisation/nationkey"])
        out = list(x_unnest(nested, "supplier/name", ["supplier/contact/localisation/nationkey"]))
        assert [t.values(P("supplier/name")) for t in out] == [["S0"], ["S1"], ["S2"]]
        assert all(t.values(P("supplier/contact/localisation/nationkey")) == ["7"] for t in out)
        # only the selected multi subtree survives in each copy
        assert "S1" not in out[0].forest[0].serialize()

    def test_round_trip(self):
        rel = suppliers(("1", "2", "1", "3"))
        g = ["supplier/contact/localisation/nationkey"]
        back = x_unnest(x_nest(rel, g), "supplier/name", g)
        assert sorted(xml(back)) == sorted(xml(suppliers(("1", "2", "1", "3"))))

    def test_zero_refs_dropped(self):
        rel = relation(["a/k", "a/v"], [("a", [("k", "1")]), ("a", [("k", "2"), ("v", "x")])])
        out = list(x_unnest(rel, "a/v", ["a/k"]))
        assert [t.values(P("a/k")) for t in out] == [["2"]]

    def test_descendant_attributes_follow_the_selected_subtree(self):
        rel = relation(["a/b", "a/b/c"], [("a", [("b", [("c", "1")]), ("b", [("c", "2"), ("c", "3")])])])
        out = list(x_unnest(rel, "a/b", []))
        assert [t.values(P("a/b/c")) for t in out] == [["1"], ["2", "3"]]


class TestAggregate:
    def rel(self, *vals):
        return relation(["a/k"], [("a", [("k", v) for v in vals])])

    def test_count(self):
        out = list(x_aggregate(self.rel("x", "y", "z"), "COUNT", "a/k", "agg1"))
        assert out[0].values(P("agg1")) == ["3"]
        assert out[0].values(P("a/k")) == ["x", "y", "z"]

    def test_sum_is_exact_decimal(self):
        assert list(x_aggregate(self.rel("10", "20.5"), "SUM", "a/k", "s"))[0].values(P("s")) == ["30.5"]
        out = list(x_aggregate(self.rel("0.1", "0.2"), "SUM", "a/k", "s"))
        assert out[0].values(P("s")) == ["0.3"]

    @pytest.mark.parametrize("fn,expected", [("AVG", "45"), ("MIN", "45"), ("MAX", "45"), ("SUM", "45")])
    def test_singleton(self, fn, expected):
        assert list(x_aggregate(self.rel("45"), fn, "a/k", "o"))[0].values(P("o")) == [expected]

    def test_min_max_avg(self):
        r = lambda: self.rel("3", "-1", "10")  # noqa: E731
        assert list(x_aggregate(r(), "MIN", "a/k", "o"))[0].values(P("o")) == ["-1"]
        assert list(x_aggregate(r(), "MAX", "a/k", "o"))[0].values(P("o")) == ["10"]
        assert list(x_aggregate(r(), "AVG", "a/k", "o"))[0].values(P("o")) == ["4"]

    def test_empty_and_non_numeric_are_absent(self):
        out = list(x_aggregate(self.rel(), "SUM", "a/k", "o"))
        assert out[0].values(P("o")) == []
        assert list(x_aggregate(self.rel(), "COUNT", "a/k", "o"))[0].values(P("o")) == ["0"]
        rel = x_aggregate(self.rel("1", "x"), "SUM", "a/k", "o")
        assert list(rel)[0].values(P("o")) == []
        assert rel.diagnostics["aggregate-non-numeric"] == 1

    def test_output_must_be_fresh_single_step(self):
        with pytest.raises(PlanError):
            x_aggregate(self.rel("1"), "SUM", "a/k", "a/k/s")
        with pytest.raises(PlanError):
            x_aggregate(self.rel("1"), "SUM", "a/k", "a")


class TestReconstruct:
    def test_constants_only(self):
        out = ev.to_xml(x_reconstruct(nations(), Element("hello", (Text("x"),))), doc_separator="|")
        assert out.split("|")[:2] == ["<hello>x</hello>", "<hello>x</hello>"]

    def test_multi_valued_placeholder_repeats(self):
        rel = relation(["a/k"], [("a", [("k", "1"), ("k", "2")])])
        docs = ev.split_documents(x_reconstruct(rel, Element("r", (Placeholder(P("a/k")),))))
        assert docs == ["<r><k>1</k><k>2</k></r>"]

    def test_value_mode_and_absent_element_omitted(self):
        rel = relation(["a/k", "a/v"], [("a", [("k", "1")])])
        tpl = Element("r", (Element("key", (Placeholder(P("a/k"), VALUE),)), Element("v", (Placeholder(P("a/v")),))))
        assert ev.split_documents(x_reconstruct(rel, tpl)) == ["<r><key>1</key></r>"]

    def test_repeat_over_nest_members(self):
        nested = x_nest(suppliers(("7", "7")), ["supplier/contact/localisation/nationkey"], level="t2")
        tpl = Element("n", (Placeholder(P("supplier/contact/localisation/nationkey")),
                            Repeat("t2", (Element("s", (Placeholder(P("supplier/name")),)),))))
        assert ev.split_documents(x_reconstruct(nested, tpl)) == [
            "<n><nationkey>7</nationkey><s><name>S0</name></s><s><name>S1</name></s></n>"]

    def test_unknown_placeholder(self):
        with pytest.raises(PlanError):
            list(x_reconstruct(nations(), Placeholder(P("nation/x"))))


class TestSetOps:
    def rel(self, *ks):
        return relation(["a/k"], [("a", [("k", k)]) for k in ks])

    def test_union_with_empty_dedups(self):
        out = x_union(self.rel("1", "2", "1"), self.rel())
        assert values(out, P("a/k")) == [["1"], ["2"]]

    def test_union_first_occurrence_order(self):
        assert values(x_union(self.rel("2", "1"), self.rel("3", "1")), P("a/k")) == [["2"], ["1"], ["3"]]

    def test_difference_self_empty(self):
        assert list(x_difference(self.rel("1", "2"), self.rel("1", "2"))) == []

    def test_intersection_single_shared(self):
        assert values(x_intersection(self.rel("1", "2"), self.rel("2", "3")), P("a/k")) == [["2"]]

    def test_schema_mismatch(self):
        with pytest.raises(PlanError):
            x_union(self.rel("1"), relation(["a/v"], []))

    def test_equality_ignores_unbound_branches(self):
        l = relation(["a/k"], [("a", [("k", "1"), ("v", "x")])])
        r = relation(["a/k"], [("a", [("k", "1"), ("v", "y")])])
        assert len(list(x_intersection(l, r))) == 1


def test_order_flags():
    ordered = nations()
    assert x_restrict(nations(), TRUE).ordered
    assert x_project(nations(), ["nation/name"]).ordered
    assert x_join(nations(), relation(["b/k"], []), Compare(P("nation/nationkey"), "=", P("b/k"))).ordered
    assert not x_aggregate(nations(), "COUNT", "nation/name", "c").ordered
    assert not x_product(nations(), relation(["b/k"], []), mode="pipelined").ordered
    unordered = XRelation(ordered.schema, list(ordered), ordered=False)
    assert not x_restrict(unordered, TRUE).ordered


def test_schema_guides_cover_outputs():
    rel = x_product(example_relation(), nations())
    assert rel.schema.guide >= XRelationSchema.of(NATION_ATTRS).guide
    assert And(()) == TRUE
    assert example_events()[-1] == ev.DOC_EVENT
