"""Acceptance criteria 1-9, one test each, each printing a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines appear even
under output capture.
"""

import sys
import time

import pytest

import test_algebra_laws as laws
import test_wire
from helpers import NATION_QUERY, golden, nation_documents
from treemed import wire
from treemed.bench.experiments import run_experiment, xjoin_query
from treemed.decomposer import atomize, binding_table, locate_sources
from treemed.frontend import canonical_text, canonize, normalize, parse
from treemed.mediator import Mediator, MediatorConfig
from treemed.xalgebra import XRelation, validate, x_source

SWEEP = [1, 10, 100, 1000]


@pytest.fixture
def verdict(capsys):
    def say(n, ok, detail):
        with capsys.disabled():
            sys.stdout.write(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}\n")
        assert ok, detail

    return say


def _materialize(rel):
    return XRelation(rel.schema, list(rel))


def test_1_worked_example_fidelity(topology, verdict):
    catalog = topology["M0"].catalog
    t0 = time.perf_counter()
    c = canonize(normalize(parse(NATION_QUERY)))
    atomics, g = atomize(c, catalog)
    bound = [locate_sources(a, catalog) for a in atomics]
    elapsed = time.perf_counter() - t0
    canonical_ok = canonical_text(c) == golden("nation_canonical.txt")
    atomic_ok = "\n".join([a.text() for a in atomics] + [g.text()]) + "\n" == golden("nation_atomic.txt")
    table = binding_table(bound)
    table_ok = table == [("t1", ["A6"]), ("t2", ["A4", "A6"]), ("t3", ["A1"])]
    ok = canonical_ok and atomic_ok and table_ok and elapsed < 1.0
    verdict(1, ok, f"canonical={canonical_ok} atomic={atomic_ok} bindings={table} in {elapsed * 1000:.1f} ms")


def test_2_end_to_end_oracle_equality(topology, data, verdict):
    t0 = time.perf_counter()
    got = sorted(topology["M0"].execute_query(NATION_QUERY).documents())
    elapsed = time.perf_counter() - t0
    expected = nation_documents(data, member_order=list)
    ok = got == expected and bool(got) and elapsed < 10.0
    verdict(2, ok, f"{len(got)} documents, oracle {len(expected)}, exact={got == expected}, {elapsed:.2f} s")


def test_3_algebraic_laws(verdict):
    # each law runs its own 1000 generated instances
    checks = {
        "join=restrict.product (3 algorithms)": laws.test_join_equals_restrict_of_product,
        "unnest.nest round trip": laws.test_unnest_of_nest_round_trip,
        "projection idempotence": laws.test_projection_idempotent,
        "set laws": laws.test_set_operator_laws,
    }
    failed = []
    for name, law in checks.items():
        try:
            law()
        except Exception as exc:  # report the law, keep going
            failed.append(f"{name}: {type(exc).__name__}")
    verdict(3, not failed, "4 laws x 1000 instances, " + (", ".join(failed) or "zero failures"))


def test_4_structural_validator(topology, verdict):
    assert validate.ENABLED
    before = dict(validate.STATS)
    errors = []
    try:
        topology["M0"].execute_query(NATION_QUERY).documents()
        topology["M1"].execute_query(NATION_QUERY).documents()
        laws.test_join_equals_restrict_of_product()
        laws.test_unnest_of_nest_round_trip()
    except validate.InvariantError as exc:
        errors.append(str(exc))
    tuples = validate.STATS["tuples"] - before["tuples"]
    schemas = validate.STATS["schemas"] - before["schemas"]
    ok = not errors and tuples > 0 and schemas > 0
    verdict(4, ok, f"{tuples} tuples over {schemas} operator outputs checked, "
                   f"{errors[0] if errors else 'no invariant violations'}")


def test_5_wire_round_trip(topology, verdict):
    failures, relations, smaller = [], 0, 0
    for name, adapter in topology.adapters.items():
        for coll in adapter.descriptor().collections:
            root = coll.root
            attrs = sorted(p for p in coll.guide if len(p) == 2 or p.text.endswith("key"))[:4]
            events = adapter.execute(f'for $x in Collection("{coll.name}")/{root} return $x')
            rel = _materialize(x_source(events, coll.guide, attrs))
            data = wire.encode(rel)
            back = _materialize(wire.decode(data))
            relations += 1
            if not wire.relation_equal(rel, back):
                failures.append(f"{name}/{coll.name} round trip")
            if len(rel.tuples) >= 10:
                if len(data) < wire.xml_size(rel):
                    smaller += 1
                else:
                    failures.append(f"{name}/{coll.name} not smaller than XML")
    try:
        test_wire.test_random_relations_round_trip()
    except Exception as exc:
        failures.append(f"random relations: {type(exc).__name__}")
    verdict(5, not failures, f"{relations} dataset relations ({smaller} smaller than XML) + 1000 random, "
                             + (", ".join(failures) or "zero failures"))


@pytest.fixture(scope="module")
def overhead(topology):
    return run_experiment("overhead", SWEEP, topology, reps=7)


def test_6_topology_transparency(overhead, verdict):
    r = overhead
    same = all(r.documents[("M0", n)] == r.documents[("M1", n)] == r.documents[("A3", n)] for n in SWEEP)
    counts = [len(r.documents[("M0", n)]) for n in SWEEP]
    totals = {t: [r.value(t, n, "total") for n in SWEEP] for t in ("M0", "M1", "A3")}
    monotone = all(all(a <= b for a, b in zip(v, v[1:])) for v in totals.values())
    at = {t: v[-1] for t, v in totals.items()}
    ordered = at["M1"] >= at["M0"] >= at["A3"]
    ok = same and counts == SWEEP and monotone and ordered
    shape = "; ".join(f"{t} " + "/".join(f"{x:.2f}" for x in v) for t, v in totals.items())
    verdict(6, ok, f"identical results={same} counts={counts} monotone={monotone} "
                   f"M1>=M0>=A3 at N=1000={ordered} (median ms {shape})")


def test_7_phase_profile(topology, verdict):
    r = run_experiment("phases", [1000], topology, reps=5)
    init, total, parse_ms = (r.value("M0", 1000, p) for p in ("init", "total", "parse"))
    share = init / total
    ok = share < 0.25 and parse_ms < 50
    verdict(7, ok, f"init {init:.2f} ms = {share:.1%} of total {total:.2f} ms, parse {parse_ms:.2f} ms")


def test_8_pushdown_visibility(topology, data, verdict):
    m2 = topology["M2"].compile(xjoin_query(10)).plan
    m4 = topology["M4"].compile(xjoin_query(10)).plan
    golden_ok = (m2.serialize() + "\n" == golden("xjoin_m2_plan.txt")
                 and m4.serialize() + "\n" == golden("xjoin_m4_plan.txt"))
    m4_sources = [n for n in m4.walk() if n.op == "Source"]
    pushed = (len(m4_sources) == 1 and m4_sources[0]["multi_root"]
              and not any(n.op == "Join" for n in m4.walk()))
    mediator_join = any(n.op == "Join" for n in m2.walk())
    orders = {o["orderkey"]: o["comment"] for o in data["ORDERS"]}
    same = True
    for n in (1, 10, 100):
        oracle = sorted(f"<result><lcom><comment>{li['comment']}</comment></lcom>"
                        f"<ocom><comment>{orders[li['orderkey']]}</comment></ocom></result>"
                        for li in data["LINEITEM"] if int(li["orderkey"]) < n)
        a = sorted(topology["M2"].execute_query(xjoin_query(n)).documents())
        b = sorted(topology["M4"].execute_query(xjoin_query(n)).documents())
        same = same and a == b == oracle
    ok = golden_ok and pushed and mediator_join and same
    verdict(8, ok, f"plan goldens={golden_ok} M4 single-adapter join={pushed} M2 mediator join={mediator_join} "
                   f"results equal oracle={same}")


def test_9_streaming_liveness(topology, verdict):
    from test_mediator import Counting
    from treemed.bench.experiments import overhead_query

    src = Counting(topology.adapters["A3"])
    m = Mediator("live", MediatorConfig())
    m.register(src)
    stream = iter(m.execute_query(overhead_query(1000)))
    next(stream)
    at_first = src.produced
    for _ in stream:
        pass
    share = at_first / src.produced
    verdict(9, share < 0.5, f"first output after {at_first} of {src.produced} source events ({share:.1%})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
