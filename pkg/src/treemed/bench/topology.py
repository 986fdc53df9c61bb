"""The mediator/adapter arrangements used by the experiments.

    M0 -> A1 .. A6          M2 -> A1, A2, A3        M3 -> A4, A5, A6
    M1 -> M2, M3            M4 -> A7 (relational copy of A1-A3)
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

from ..adapters.base import Adapter
from ..adapters.files import FileAdapter
from ..adapters.tabular import TabularAdapter
from ..mediator import Mediator, MediatorConfig
from .dataset import guides


class DelayedAdapter(Adapter):
    """Wraps an adapter and sleeps a fixed time per document boundary."""

    def __init__(self, inner, delay):
        super().__init__(inner.source_id)
        self.inner = inner
        self.delay = delay
        self.capability = inner.capability

    def descriptor(self):
        return self.inner.descriptor()

    def get_metadata(self):
        return self.inner.get_metadata()

    def prepare(self, text, param=False):
        return self.inner.prepare(text, param)

    def execute(self, text):
        return self._slow(self.inner.execute(text))

    def execute_batched(self, text, keys):
        return self._slow(self.inner.execute_batched(text, keys))

    def _slow(self, events):
        for e in events:
            if e.kind == "doc":
                time.sleep(self.delay)
            yield e


@dataclass
class Topology:
    adapters: dict = field(default_factory=dict)
    mediators: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.mediators.get(name) or self.adapters[name]


def build_adapters(data_dir, delay=0.0) -> dict:
    g = guides()
    tree_guides = {k: g[k] for k in ("SUPPLIER", "PART", "NATION", "REGION")}
    out = {}
    for a in ("A1", "A2", "A3", "A7"):
        out[a] = TabularAdapter(a, os.path.join(data_dir, a))
    for a in ("A4", "A5", "A6"):
        d = os.path.join(data_dir, a)
        names = {f[:-4] for f in os.listdir(d) if f.endswith(".xml")} if os.path.isdir(d) else set()
        out[a] = FileAdapter(a, d, {k: v for k, v in tree_guides.items() if k in names})
    if delay:
        out = {k: DelayedAdapter(v, delay) for k, v in out.items()}
    return out


def build_topology(data_dir, delay=0.0, config=None) -> Topology:
    adapters = build_adapters(data_dir, delay)

    def mediator(name, sources):
        m = Mediator(name, config or MediatorConfig())
        for s in sources:
            m.register(s)
        return m

    m0 = mediator("M0", [adapters[a] for a in ("A1", "A2", "A3", "A4", "A5", "A6")])
    m2 = mediator("M2", [adapters[a] for a in ("A1", "A2", "A3")])
    m3 = mediator("M3", [adapters[a] for a in ("A4", "A5", "A6")])
    m1 = mediator("M1", [m2.as_adapter(), m3.as_adapter()])
    m4 = mediator("M4", [adapters["A7"]])
    return Topology(adapters, {"M0": m0, "M1": m1, "M2": m2, "M3": m3, "M4": m4})
