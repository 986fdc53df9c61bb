"""A mediator seen as a query-language source by another mediator."""

from __future__ import annotations

from .. import events as ev
from ..catalog import QUERY_LANGUAGE, CollectionMetadata, SourceDescriptor
from .base import Adapter, parse_adapter_query


class MediatorAdapter(Adapter):
    capability = QUERY_LANGUAGE

    def __init__(self, mediator, source_id):
        super().__init__(source_id)
        self.mediator = mediator

    def descriptor(self):
        merged = {}
        for _, c in self.mediator.catalog.collections():
            key = c.name.upper()
            if key in merged:
                name, guide, card = merged[key]
                merged[key] = (name, guide | c.guide, card + c.cardinality)
            else:
                merged[key] = (c.name, frozenset(c.guide), c.cardinality)
        cols = tuple(CollectionMetadata(n, g, k) for n, g, k in merged.values())
        return SourceDescriptor(self.source_id, self.capability, "in-process", cols)

    def prepare(self, text, param=False):
        roots = {}
        for _, c in self.mediator.catalog.collections():
            roots.setdefault(c.name, c.root)
        parse_adapter_query(text, roots)
        return text

    def run(self, text, keys):
        result = self.mediator.execute_query(text, keys=keys)
        for e in result:
            if e.kind == ev.EOS:
                return
            yield e
