"""Adapter over delimited row stores, one file per table.

A table file NAME.tbl has a header row of column names and '|'-separated
rows. Rows become <name> documents with one leaf per non-empty column, both
lower-cased. Queries may select, project and join tables of this store.
"""

from __future__ import annotations

import bisect
import csv
import os
import threading
from decimal import Decimal

from .. import events as ev
from ..catalog import TABULAR, CollectionMetadata, SourceDescriptor
from ..frontend.ast import VarPath
from ..xalgebra.model import Path
from ..xalgebra.predicate import Compare, conjuncts
from ..xalgebra.values import parse_decimal
from .base import Adapter, check_capability, parse_adapter_query
from .local import DocAccess, evaluate

DELIMITER = "|"
SUFFIX = ".tbl"


class Table:
    def __init__(self, name, columns, rows):
        self.name = name
        self.root = name.lower()
        self.columns = [c.lower() for c in columns]
        self.col_index = {c: i for i, c in enumerate(self.columns)}
        self.rows = rows

    @classmethod
    def load(cls, path):
        name = os.path.basename(path)[: -len(SUFFIX)]
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh, delimiter=DELIMITER, quoting=csv.QUOTE_NONE, escapechar="\\")
            header = next(reader, None) or []
            rows = [tuple(r) for r in reader if r]
        return cls(name, header, rows)

    def guide(self):
        return frozenset([Path(self.root)] + [Path((self.root, c)) for c in self.columns])

    def sorted_keys(self, column):
        """Decimal values of column if every row has one and they never decrease, else None."""
        cache = self.__dict__.setdefault("_sorted", {})
        if column not in cache:
            i = self.col_index.get(column)
            keys = None
            if i is not None:
                keys = [parse_decimal(r[i]) if i < len(r) else None for r in self.rows]
                if None in keys:
                    keys = None
                elif any(a > b for a, b in zip(keys, keys[1:])):
                    keys = None
            cache[column] = keys
        return cache[column]

    def row_range(self, where, var):
        """Rows [lo, hi) that can satisfy the range atoms of where on a sorted column."""
        lo, hi = 0, len(self.rows)
        for a in conjuncts(where):
            if not (isinstance(a, Compare) and isinstance(a.attr, VarPath) and a.attr.var == var):
                continue
            if a.attr.path is None or len(a.attr.path) != 1 or not isinstance(a.rhs, Decimal):
                continue
            c = a.rhs
            keys = self.sorted_keys(a.attr.path.steps[0])
            if keys is None:
                continue
            if a.op == "<":
                hi = min(hi, bisect.bisect_left(keys, c))
            elif a.op == "<=":
                hi = min(hi, bisect.bisect_right(keys, c))
            elif a.op == ">":
                lo = max(lo, bisect.bisect_right(keys, c))
            elif a.op == ">=":
                lo = max(lo, bisect.bisect_left(keys, c))
            elif a.op == "=":
                lo = max(lo, bisect.bisect_left(keys, c))
                hi = min(hi, bisect.bisect_right(keys, c))
        return lo, max(lo, hi)


class _RowAccess(DocAccess):
    def __init__(self, table_of):
        self.table_of = table_of  # row -> Table

    def values(self, row, rel):
        table = row[0]
        if rel is None or len(rel) != 1:
            return []
        i = table.col_index.get(rel.steps[0])
        if i is None or i >= len(row[1]):
            return []
        v = row[1][i]
        return [v] if v != "" else []

    def emit(self, row, root, rels, whole):
        table, values = row
        wanted = None if whole else {r.steps[0] for r in rels}
        out = [ev.Event(ev.START, table.root)]
        for c, v in zip(table.columns, values):
            if v != "" and (wanted is None or c in wanted):
                out.append(ev.Event(ev.START, c))
                out.append(ev.Event(ev.TEXT, v))
                out.append(ev.Event(ev.END, c))
        out.append(ev.Event(ev.END, table.root))
        return out


class TabularAdapter(Adapter):
    capability = TABULAR

    def __init__(self, source_id, directory, transport="in-process", tables=None):
        super().__init__(source_id)
        self.directory = directory
        self.transport = transport
        self.only = None if tables is None else {t.upper() for t in tables}
        self._tables = None
        self._lock = threading.Lock()
        self.access = _RowAccess(None)

    def tables(self) -> dict:
        with self._lock:
            if self._tables is None:
                if not os.path.isdir(self.directory):
                    raise OSError(f"not a directory: {self.directory}")
                found = {}
                for f in sorted(os.listdir(self.directory)):
                    if f.endswith(SUFFIX) and (self.only is None or f[: -len(SUFFIX)].upper() in self.only):
                        t = Table.load(os.path.join(self.directory, f))
                        found[t.name] = t
                self._tables = found
            return self._tables

    def descriptor(self):
        cols = tuple(CollectionMetadata(t.name, t.guide(), len(t.rows)) for t in self.tables().values())
        return SourceDescriptor(self.source_id, self.capability, self.transport, cols)

    def prepare(self, text, param=False):
        pq = parse_adapter_query(text, {t.name: t.root for t in self.tables().values()})
        check_capability(pq, self.capability)
        return pq

    def run(self, pq, keys):
        by_name = {n.lower(): t for n, t in self.tables().items()}
        tables = [by_name[name.lower()] for _, name, _ in pq.vars]

        where = pq.where if keys is None else None

        def docs_for(i):
            t = tables[i]
            if pq.vars[i][2] != t.root:
                return iter(())
            # a range atom on a sorted column narrows the scan; the full
            # predicate is still checked on every row read
            lo, hi = t.row_range(where, pq.vars[i][0]) if where is not None else (0, len(t.rows))
            return ((t, r) for r in t.rows[lo:hi])

        return evaluate(pq, docs_for, self.access, keys)


def write_table(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=DELIMITER, quoting=csv.QUOTE_NONE, escapechar="\\", lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(r)
