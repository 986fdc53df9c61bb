"""Measurement harness: mediation overhead, per-phase cost, cross-site join."""

from __future__ import annotations

import csv
import gc
import statistics
import time
from dataclasses import dataclass, field

from .. import events as ev
from ..xalgebra.model import escape_text

EXPERIMENTS = ("overhead", "phases", "xjoin")
PHASES = ("parse", "plan", "first_result", "local_exec", "global_exec", "total", "init")
DEFAULT_SWEEP = (1, 10, 100, 1000)


def overhead_query(n) -> str:
    return f'for $O in collection("ORDERS") where $O/orderkey < {n} return <result><O>{{$O/comment}}</O></result>'


def direct_query(n) -> str:
    return f'for $O in Collection("ORDERS")/orders where $O/orderkey < {n} return ($O/comment)'


def xjoin_query(n) -> str:
    return (
        'for $L in collection("LINEITEM") for $O in collection("ORDERS") '
        f"where $O/orderkey = $L/orderkey and $L/orderkey < {n} "
        "return <result><lcom>{$L/comment}</lcom><ocom>{$O/comment}</ocom></result>"
    )


@dataclass(frozen=True)
class Row:
    experiment: str
    topology: str
    n: int
    phase: str
    ms: float
    results: int


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    documents: dict = field(default_factory=dict)  # (topology, n) -> sorted result documents

    HEADER = ("experiment", "topology", "n", "phase", "median_ms", "results")

    def value(self, topology, n, phase):
        for r in self.rows:
            if r.topology == topology and r.n == n and r.phase == phase:
                return r.ms
        raise KeyError((topology, n, phase))

    def topologies(self) -> list:
        return list(dict.fromkeys(r.topology for r in self.rows))

    def sweep(self) -> list:
        return sorted({r.n for r in self.rows})

    def write(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(self.HEADER)
            for r in self.rows:
                w.writerow((r.experiment, r.topology, r.n, r.phase, repr(r.ms), r.results))

    @classmethod
    def read(cls, path) -> "BenchReport":
        with open(path, newline="", encoding="utf-8") as fh:
            rd = csv.reader(fh, delimiter="\t")
            head = next(rd)
            if tuple(head) != cls.HEADER:
                raise ValueError(f"not a report file: {path}")
            rows = [Row(e, t, int(n), p, float(ms), int(k)) for e, t, n, p, ms, k in rd]
        return cls(rows)

    def write_series(self, path, phase="total"):
        """Wide table: one line per N, one column per topology."""
        tops = self.topologies()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["n"] + [f"{t}:{phase}" for t in tops])
            for n in self.sweep():
                line = [n]
                for t in tops:
                    try:
                        line.append(repr(self.value(t, n, phase)))
                    except KeyError:
                        line.append("")
                w.writerow(line)


def _median_rows(experiment, topology, n, samples, results):
    rows = []
    for phase in PHASES:
        vals = [s[phase] for s in samples if phase in s]
        if vals:
            rows.append(Row(experiment, topology, n, phase, statistics.median(vals), results))
    return rows


def run_mediator(mediator, text):
    """(sorted documents, timing dict) for one execution."""
    r = mediator.execute_query(text)
    docs = r.documents()
    t = r.timings.as_dict()
    t["init"] = r.timings.init
    return docs, t


def run_direct(adapter, n):
    """The ORDERS selection straight on the adapter, wrapped like the mediator's template."""
    t0 = time.perf_counter()
    docs = []
    first = None
    for d in ev.split_documents(adapter.execute(direct_query(n))):
        if first is None:
            first = time.perf_counter() - t0
        inner = d[len("<orders>") : -len("</orders>")]
        docs.append(f"<result><O>{inner}</O></result>")
    total = (time.perf_counter() - t0) * 1000.0
    return docs, {"total": total, "first_result": (first or 0.0) * 1000.0}


def _timed(fn):
    gc.collect()
    enabled = gc.isenabled()
    gc.disable()
    try:
        return fn()
    finally:
        if enabled:
            gc.enable()


def run_experiment(name, sweep, topology, reps=5) -> BenchReport:
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    report = BenchReport()
    if name == "overhead":
        targets = [
            ("M0", lambda n: run_mediator(topology["M0"], overhead_query(n))),
            ("M1", lambda n: run_mediator(topology["M1"], overhead_query(n))),
            ("A3", lambda n: run_direct(topology["A3"], n)),
        ]
    elif name == "phases":
        targets = [("M0", lambda n: run_mediator(topology["M0"], overhead_query(n)))]
    else:
        targets = [
            ("M2", lambda n: run_mediator(topology["M2"], xjoin_query(n))),
            ("M4", lambda n: run_mediator(topology["M4"], xjoin_query(n))),
        ]
    # warm every configuration, then interleave repetitions so drift hits all alike
    docs = {}
    for n in sweep:
        for label, fn in targets:
            docs[(label, n)] = sorted(fn(n)[0])
    samples = {key: [] for key in docs}
    for _ in range(reps):
        for n in sweep:
            for label, fn in targets:
                d, t = _timed(lambda: fn(n))
                if sorted(d) != docs[(label, n)]:
                    raise AssertionError(f"{label} N={n}: repeated runs returned different results")
                samples[(label, n)].append(t)
    for n in sweep:
        for label, _ in targets:
            report.documents[(label, n)] = docs[(label, n)]
            report.rows.extend(_median_rows(name, label, n, samples[(label, n)], len(docs[(label, n)])))
    return report


def brute_force_orders(data, n) -> list:
    """Oracle for the ORDERS selection over generator records."""
    return sorted(
        f"<result><O><comment>{escape_text(o['comment'])}</comment></O></result>"
        for o in data["ORDERS"]
        if int(o["orderkey"]) < n
    )
