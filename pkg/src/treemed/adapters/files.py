"""Adapter over XML files: one file per collection, documents under a wrapper element."""

from __future__ import annotations

import os
import threading

from .. import events as ev
from ..catalog import XML_FILE, CollectionMetadata, SourceDescriptor, infer_default_guide
from ..errors import StreamError
from ..xalgebra.model import Path, TreeBuilder, prefix_close
from ..xalgebra.trees import prune
from ..xalgebra.model import NodeRef
from .base import Adapter, check_capability, parse_adapter_query
from .local import DocAccess, evaluate


def read_documents(path) -> list:
    """Parse a collection file (documents wrapped in one outer element) into XTrees."""
    trees = []
    stack = []
    b = None
    with open(path, "rb") as fh:
        for e in ev.parse_xml(fh, skip_outer=True):
            if e.kind == ev.START:
                if not stack:
                    b = TreeBuilder()
                    stack.append(b.add(e.value))
                else:
                    stack.append(b.add(e.value, stack[-1]))
            elif e.kind == ev.TEXT:
                b.set_text(stack[-1], e.value)
            elif e.kind == ev.END:
                stack.pop()
                if not stack:
                    trees.append(b.build())
    if stack:
        raise StreamError(f"{path}: truncated document")
    return trees


class _TreeAccess(DocAccess):
    def values(self, tree, rel):
        idx = _path_index(tree)
        target = tree.paths[0] if rel is None else Path(tree.paths[0].steps + rel.steps)
        return [tree.string_value(n) for n in idx.get(target, ())]

    def emit(self, tree, root, rels, whole):
        if whole:
            return ev.tree_events(tree)
        idx = _path_index(tree)
        refs = []
        for rel in rels:
            target = Path(tree.paths[0].steps + rel.steps)
            refs.extend(NodeRef(0, n) for n in idx.get(target, ()))
        if not refs:
            return ev.tree_events(_root_only(tree))
        forest, _ = prune((tree,), [refs])
        return ev.tree_events(forest[0])


def _root_only(tree):
    b = TreeBuilder()
    b.add(tree.labels[0])
    return b.build()


_INDEX = {}
_INDEX_LOCK = threading.Lock()


def _path_index(tree):
    key = id(tree)
    hit = _INDEX.get(key)
    if hit is not None and hit[0] is tree:
        return hit[1]
    idx = {}
    for n, p in enumerate(tree.paths):
        idx.setdefault(p, []).append(n)
    # in preorder node ids already follow document order
    with _INDEX_LOCK:
        if len(_INDEX) > 100_000:
            _INDEX.clear()
        _INDEX[key] = (tree, idx)
    return idx


class FileAdapter(Adapter):
    """xml-file capability: selection over whole documents, no projection.

    directory holds NAME.xml files; each file is one collection named NAME.
    guides maps a collection name to a configured dataguide; otherwise the
    guide is inferred from the documents.
    """

    capability = XML_FILE

    def __init__(self, source_id, directory, guides=None, transport="in-process"):
        super().__init__(source_id)
        self.directory = directory
        self.guides = {k: prefix_close(Path(p) for p in v) for k, v in (guides or {}).items()}
        self.transport = transport
        self._docs = {}
        self._lock = threading.Lock()
        self.access = _TreeAccess()

    def collection_names(self):
        if not os.path.isdir(self.directory):
            raise OSError(f"not a directory: {self.directory}")
        return sorted(f[:-4] for f in os.listdir(self.directory) if f.endswith(".xml"))

    def documents(self, name) -> list:
        with self._lock:
            docs = self._docs.get(name)
            if docs is None:
                docs = read_documents(os.path.join(self.directory, name + ".xml"))
                self._docs[name] = docs
            return docs

    def descriptor(self):
        cols = []
        for name in self.collection_names():
            docs = self.documents(name)
            guide = self.guides.get(name)
            if guide is None:
                if not docs:
                    continue
                guide = infer_default_guide(ev.tree_events(t) for t in docs)
            cols.append(CollectionMetadata(name, guide, len(docs)))
        return SourceDescriptor(self.source_id, self.capability, self.transport, tuple(cols))

    def _roots(self):
        out = {}
        for name in self.collection_names():
            docs = self.documents(name)
            if name in self.guides:
                out[name] = next(iter(self.guides[name])).root
            elif docs:
                out[name] = docs[0].labels[0]
        return out

    def prepare(self, text, param=False):
        pq = parse_adapter_query(text, self._roots())
        check_capability(pq, self.capability)
        return pq

    def run(self, pq, keys):
        name = pq.vars[0][1]
        root = pq.vars[0][2]
        real = {n.lower(): n for n in self.collection_names()}[name.lower()]

        def docs_for(i):
            return (d for d in self.documents(real) if d.labels[0] == root)

        return evaluate(pq, docs_for, self.access, keys)
