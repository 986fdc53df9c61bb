"""Seeded TPC-style dataset laid out over the seven adapter stores.

Relational collections (PARTSUPP, CUSTOMER, LINEITEM, ORDERS) are written as
'|'-delimited tables; tree collections (SUPPLIER, PART, NATION, REGION) as
XML files. Field sets follow the standard TPC columns; supplier documents
group the key under id/ and the address data under contact/.

Layout under the output directory:

    A1/PARTSUPP.tbl   A2/CUSTOMER.tbl A2/LINEITEM.tbl   A3/ORDERS.tbl
    A4/SUPPLIER.xml (first half)   A5/PART.xml
    A6/SUPPLIER.xml (second half) A6/NATION.xml A6/REGION.xml
    A7/ copies of every A1-A3 table
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass, field
from decimal import Decimal

from ..adapters.tabular import write_table
from ..xalgebra.model import Path, escape_text, prefix_close

DEFAULT_COUNTS = {
    "NATION": 25,
    "REGION": 5,
    "SUPPLIER": 100,
    "PART": 200,
    "PARTSUPP": 800,
    "CUSTOMER": 150,
    "ORDERS": 1500,
    "LINEITEM": 6000,
}

PLACEMENT = {
    "PARTSUPP": ("A1", "A7"),
    "CUSTOMER": ("A2", "A7"),
    "LINEITEM": ("A2", "A7"),
    "ORDERS": ("A3", "A7"),
    "SUPPLIER": ("A4", "A6"),  # partitioned
    "PART": ("A5",),
    "NATION": ("A6",),
    "REGION": ("A6",),
}

COLUMNS = {
    "PARTSUPP": ["partkey", "suppkey", "availqty", "supplycost", "comment"],
    "CUSTOMER": ["custkey", "name", "address", "nationkey", "phone", "acctbal", "mktsegment", "comment"],
    "ORDERS": ["orderkey", "custkey", "orderstatus", "totalprice", "orderdate", "comment"],
    "LINEITEM": ["orderkey", "partkey", "suppkey", "linenumber", "quantity", "extendedprice", "discount", "shipdate", "comment"],
}

# element layout of the tree collections; nested tuples are (label, children)
TREES = {
    "NATION": ("nation", ["nationkey", "name", "regionkey", "comment"]),
    "REGION": ("region", ["regionkey", "name", "comment"]),
    "SUPPLIER": ("supplier", [("id", ["suppkey"]), "name",
                              ("contact", ["phone", "address", ("localisation", ["nationkey"])]),
                              "acctbal", "comment"]),
    "PART": ("part", ["partkey", "name", "mfgr", "brand", "type", "size", "retailprice", "comment"]),
}

NATIONS = [
    "ALGERIA", "ARGENTINA", "BRAZIL", "CANADA", "EGYPT", "ETHIOPIA", "FRANCE", "GERMANY", "INDIA",
    "INDONESIA", "IRAN", "IRAQ", "JAPAN", "JORDAN", "KENYA", "MOROCCO", "MOZAMBIQUE", "PERU", "CHINA",
    "ROMANIA", "SAUDI ARABIA", "VIETNAM", "RUSSIA", "UNITED KINGDOM", "UNITED STATES",
]
NATION_REGION = [0, 1, 1, 1, 4, 0, 3, 3, 2, 2, 4, 4, 2, 4, 0, 0, 0, 1, 2, 3, 4, 2, 3, 3, 1]
REGIONS = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"]
# no word here contains the substring "iron"
WORDS = (
    "quick slow furious careful final pending express regular special bold even ideas deposits "
    "accounts packages requests theodolites pinto beans instructions dependencies foxes platelets "
    "asymptotes courts dolphins warthogs sheaves sauternes tithes dugouts frets sleep wake haggle "
    "nag use boost cajole detect integrate engage among above along across after against"
).split()
SEGMENTS = ["AUTOMOBILE", "BUILDING", "FURNITURE", "MACHINERY", "HOUSEHOLD"]
TOKEN = "iron"


@dataclass(frozen=True)
class DatasetSpec:
    scale: float = 1.0
    seed: int = 1
    iron_fraction: float = 0.2
    counts: dict = field(default_factory=dict)  # explicit per-collection overrides

    def count(self, name) -> int:
        if name in self.counts:
            return int(self.counts[name])
        if self.scale <= 0:
            return 0
        if name in ("NATION", "REGION"):
            return DEFAULT_COUNTS[name]
        return max(1, round(DEFAULT_COUNTS[name] * self.scale))


def _guide_paths(root, children, prefix=()):
    out = [Path(prefix + (root,))]
    for c in children:
        if isinstance(c, tuple):
            out += _guide_paths(c[0], c[1], prefix + (root,))
        else:
            out.append(Path(prefix + (root, c)))
    return out


def guides() -> dict:
    """Declared dataguide per collection (the data may leave leaves empty)."""
    out = {name: prefix_close(_guide_paths(*TREES[name])) for name in TREES}
    for name, cols in COLUMNS.items():
        root = name.lower()
        out[name] = prefix_close([Path(root)] + [Path((root, c)) for c in cols])
    return out


def _comment(rng, n=5):
    return " ".join(rng.choice(WORDS) for _ in range(n))


def _money(rng, lo, hi):
    return str(Decimal(rng.randint(lo * 100, hi * 100)) / 100)


def _phone(rng, nationkey):
    return f"{10 + nationkey}-{rng.randint(100, 999)}-{rng.randint(100, 999)}-{rng.randint(1000, 9999)}"


def _date(rng):
    return f"{rng.randint(1992, 1998)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"


def generate(spec: DatasetSpec) -> dict:
    """Collection name -> list of records (dicts with nested dicts for trees)."""
    rng = random.Random(spec.seed)
    n = {k: spec.count(k) for k in DEFAULT_COUNTS}
    data = {}

    nn = n["NATION"]
    iron = set(rng.sample(range(nn), round(spec.iron_fraction * nn))) if nn else set()
    nations = []
    for k in range(nn):
        words = _comment(rng).split()
        if k in iron:
            words.insert(rng.randint(0, len(words)), TOKEN)
        nations.append({
            "nationkey": str(k),
            "name": NATIONS[k % len(NATIONS)],
            "regionkey": str(NATION_REGION[k % len(NATION_REGION)] % max(n["REGION"], 1)),
            "comment": " ".join(words),
        })
    data["NATION"] = nations
    data["REGION"] = [
        {"regionkey": str(k), "name": REGIONS[k % len(REGIONS)], "comment": _comment(rng)}
        for k in range(n["REGION"])
    ]

    suppliers = []
    for k in range(1, n["SUPPLIER"] + 1):
        nk = rng.randrange(nn) if nn else 0
        suppliers.append({
            "id": {"suppkey": str(k)},
            "name": f"Supplier#{k:09d}",
            "contact": {
                "phone": _phone(rng, nk),
                "address": _comment(rng, 2),
                "localisation": {"nationkey": str(nk)},
            },
            "acctbal": _money(rng, -999, 9999),
            "comment": _comment(rng),
        })
    data["SUPPLIER"] = suppliers

    data["PART"] = [
        {
            "partkey": str(k),
            "name": _comment(rng, 3),
            "mfgr": f"Manufacturer#{rng.randint(1, 5)}",
            "brand": f"Brand#{rng.randint(1, 5)}{rng.randint(1, 5)}",
            "type": rng.choice(["STANDARD", "SMALL", "MEDIUM", "LARGE", "ECONOMY", "PROMO"]),
            "size": str(rng.randint(1, 50)),
            "retailprice": _money(rng, 900, 2000),
            "comment": _comment(rng, 3),
        }
        for k in range(1, n["PART"] + 1)
    ]

    ns, np_ = n["SUPPLIER"], n["PART"]
    partsupp = []
    for i in range(n["PARTSUPP"]):
        if not ns or not np_:
            break
        pk = i % np_ + 1
        j = i // np_
        sk = (pk + j * (ns // 4 + (pk - 1) // ns)) % ns + 1
        partsupp.append({
            "partkey": str(pk),
            "suppkey": str(sk),
            "availqty": str(rng.randint(1, 100)),
            "supplycost": _money(rng, 1, 1000),
            "comment": _comment(rng),
        })
    data["PARTSUPP"] = partsupp

    data["CUSTOMER"] = []
    for k in range(1, n["CUSTOMER"] + 1):
        nk = rng.randrange(nn) if nn else 0
        data["CUSTOMER"].append({
            "custkey": str(k),
            "name": f"Customer#{k:09d}",
            "address": _comment(rng, 2),
            "nationkey": str(nk),
            "phone": _phone(rng, nk),
            "acctbal": _money(rng, -999, 9999),
            "mktsegment": rng.choice(SEGMENTS),
            "comment": _comment(rng),
        })

    nc = n["CUSTOMER"]
    data["ORDERS"] = [
        {
            "orderkey": str(k),
            "custkey": str(rng.randint(1, nc)) if nc else "",
            "orderstatus": rng.choice("OFP"),
            "totalprice": _money(rng, 100, 50000),
            "orderdate": _date(rng),
            "comment": _comment(rng),
        }
        for k in range(n["ORDERS"])
    ]

    no = n["ORDERS"]
    lines = []
    per_order = {}
    # orderkeys start at 0 so "orderkey < N" selects exactly N orders; order 0
    # owns exactly one lineitem, making the N=1 cross-site join a single document
    for i in range(n["LINEITEM"]):
        if not no:
            break
        ok = 0 if i == 0 or no == 1 else rng.randint(1, no - 1)
        per_order[ok] = per_order.get(ok, 0) + 1
        lines.append({
            "orderkey": str(ok),
            "partkey": str(rng.randint(1, np_)) if np_ else "",
            "suppkey": str(rng.randint(1, ns)) if ns else "",
            "linenumber": str(per_order[ok]),
            "quantity": str(rng.randint(1, 50)),
            "extendedprice": _money(rng, 900, 100000),
            "discount": f"0.{rng.randint(0, 10):02d}",
            "shipdate": _date(rng),
            "comment": _comment(rng),
        })
    lines.sort(key=lambda r: (int(r["orderkey"]), int(r["linenumber"])))
    data["LINEITEM"] = lines
    return data


def _xml(label, value, out):
    if isinstance(value, dict):
        out.append(f"<{label}>")
        for k, v in value.items():
            _xml(k, v, out)
        out.append(f"</{label}>")
    elif value != "":
        out.append(f"<{label}>{escape_text(value)}</{label}>")


def _write_xml(path, name, records):
    root = TREES[name][0]
    out = [f"<{name}>\n"]
    for r in records:
        parts = []
        _xml(root, r, parts)
        out.append("".join(parts) + "\n")
    out.append(f"</{name}>\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(out))


def write_dataset(spec: DatasetSpec, out_dir) -> dict:
    """Write every store; returns the in-memory records for oracles."""
    data = generate(spec)
    for a in ("A1", "A2", "A3", "A4", "A5", "A6", "A7"):
        os.makedirs(os.path.join(out_dir, a), exist_ok=True)
    for name, cols in COLUMNS.items():
        rows = [[r[c] for c in cols] for r in data[name]]
        for a in PLACEMENT[name]:
            write_table(os.path.join(out_dir, a, name + ".tbl"), cols, rows)
    sup = data["SUPPLIER"]
    half = (len(sup) + 1) // 2
    _write_xml(os.path.join(out_dir, "A4", "SUPPLIER.xml"), "SUPPLIER", sup[:half])
    _write_xml(os.path.join(out_dir, "A6", "SUPPLIER.xml"), "SUPPLIER", sup[half:])
    _write_xml(os.path.join(out_dir, "A5", "PART.xml"), "PART", data["PART"])
    _write_xml(os.path.join(out_dir, "A6", "NATION.xml"), "NATION", data["NATION"])
    _write_xml(os.path.join(out_dir, "A6", "REGION.xml"), "REGION", data["REGION"])
    return data
