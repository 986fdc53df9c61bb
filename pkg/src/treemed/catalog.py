"""Source metadata: registration, dataguides and path lookup.

Descriptor documents look like::

    <source id="A6">
      <capability>xml-file</capability>
      <transport>in-process</transport>
      <collection name="NATION" cardinality="25">
        <path>nation</path><path>nation/name</path>...
      </collection>
    </source>
"""

from __future__ import annotations

import itertools
import logging
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable

from .errors import CatalogError
from .events import END, START, parse_xml
from .xalgebra.model import Path, is_prefix_closed, prefix_close

log = logging.getLogger(__name__)

QUERY_LANGUAGE = "query-language"
TABULAR = "tabular"
XML_FILE = "xml-file"
CAPABILITIES = (QUERY_LANGUAGE, TABULAR, XML_FILE)
MAX_EXPANSIONS = 32


@dataclass(frozen=True)
class CollectionMetadata:
    name: str
    guide: frozenset
    cardinality: int = 0

    @property
    def root(self):
        return next(iter(self.guide)).root if self.guide else None


@dataclass(frozen=True)
class SourceDescriptor:
    source_id: str
    capability: str
    transport: str = "in-process"
    collections: tuple = ()
    warnings: tuple = field(default=(), compare=False)

    def collection(self, name):
        for c in self.collections:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class Match:
    source_id: str
    collection: str
    expanded: tuple  # required paths with jokers filled in, same order


def descriptor_xml(d: SourceDescriptor) -> str:
    root = ET.Element("source", id=d.source_id)
    ET.SubElement(root, "capability").text = d.capability
    ET.SubElement(root, "transport").text = d.transport
    for c in d.collections:
        ce = ET.SubElement(root, "collection", name=c.name, cardinality=str(c.cardinality))
        for p in sorted(c.guide, key=lambda p: p.text):
            ET.SubElement(ce, "path").text = p.text
    return ET.tostring(root, encoding="unicode")


def parse_descriptor(text) -> SourceDescriptor:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise CatalogError(f"malformed descriptor: {exc}") from None
    if root.tag != "source" or not root.get("id"):
        raise CatalogError("descriptor root must be <source id=...>")
    cap = (root.findtext("capability") or "").strip()
    if cap not in CAPABILITIES:
        raise CatalogError(f"unknown capability {cap!r}")
    transport = (root.findtext("transport") or "in-process").strip()
    warnings = []
    collections = []
    for ce in root.findall("collection"):
        name = ce.get("name")
        if not name:
            raise CatalogError("collection without a name")
        try:
            card = int(ce.get("cardinality", "0"))
        except ValueError:
            raise CatalogError(f"bad cardinality for {name}") from None
        if card < 0:
            raise CatalogError(f"negative cardinality for {name}")
        try:
            paths = [Path(p.text.strip()) for p in ce.findall("path") if p.text and p.text.strip()]
        except ValueError as exc:
            raise CatalogError(f"bad path in {name}: {exc}") from None
        if not paths:
            raise CatalogError(f"collection {name} has an empty dataguide")
        if len({p.root for p in paths}) != 1:
            raise CatalogError(f"collection {name} mixes root elements")
        if not is_prefix_closed(paths):
            warnings.append(f"dataguide of {name} was not prefix-closed; closed automatically")
            log.warning("%s: %s", root.get("id"), warnings[-1])
        collections.append(CollectionMetadata(name, prefix_close(paths), card))
    return SourceDescriptor(root.get("id"), cap, transport, tuple(collections), tuple(warnings))


def infer_default_guide(samples: Iterable) -> frozenset:
    """Union of root-to-node paths over sample documents (XML text or event lists)."""
    out = set()
    any_doc = False
    for doc in samples:
        events = parse_xml(doc) if isinstance(doc, (str, bytes)) else doc
        stack = []
        for e in events:
            if e.kind == START:
                stack.append(e.value)
                out.add(Path(tuple(stack)))
                any_doc = True
            elif e.kind == END:
                stack.pop()
    if not any_doc:
        raise CatalogError("at least one sample document is needed")
    return frozenset(out)


def _expand(path: Path, guide) -> list:
    if not path.has_joker:
        return [path] if path in guide else []
    n = len(path)
    out = []
    for g in guide:
        if len(g) == n and all(s == "*" or s == t for s, t in zip(path.steps, g.steps)):
            out.append(g)
    return sorted(out, key=lambda p: p.text)


class Catalog:
    """Thread-safe index by source, collection and path."""

    def __init__(self):
        self._lock = threading.RLock()
        self._sources = {}  # id -> descriptor, in registration order
        self.warnings = []

    def register_source(self, descriptor) -> str:
        if isinstance(descriptor, (str, bytes)):
            descriptor = parse_descriptor(descriptor)
        with self._lock:
            self._sources.pop(descriptor.source_id, None)
            self._sources[descriptor.source_id] = descriptor
            self.warnings.extend(descriptor.warnings)
        return descriptor.source_id

    def unregister(self, source_id):
        with self._lock:
            self._sources.pop(source_id, None)

    def source(self, source_id) -> SourceDescriptor:
        with self._lock:
            try:
                return self._sources[source_id]
            except KeyError:
                raise CatalogError(f"unknown source {source_id}") from None

    def sources(self) -> list:
        with self._lock:
            return list(self._sources.values())

    def collections(self, pattern="*"):
        """(source_id, CollectionMetadata) pairs whose name matches pattern."""
        out = []
        for d in self.sources():
            for c in d.collections:
                if pattern == "*" or c.name.lower() == pattern.lower():
                    out.append((d.source_id, c))
        return out

    def root_of(self, collection):
        roots = {c.root for _, c in self.collections(collection)}
        return roots.pop() if len(roots) == 1 else None

    def lookup(self, pattern, required) -> list:
        required = [Path(p) for p in required]
        out = []
        for sid, c in self.collections(pattern):
            options = []
            for p in required:
                exp = _expand(p, c.guide)
                if len(exp) > MAX_EXPANSIONS:
                    raise CatalogError(f"joker in {p} expands to {len(exp)} paths")
                if not exp:
                    break
                options.append(exp)
            else:
                if not required:
                    out.append(Match(sid, c.name, ()))
                    continue
                combos = list(itertools.islice(itertools.product(*options), MAX_EXPANSIONS + 1))
                if len(combos) > MAX_EXPANSIONS:
                    raise CatalogError(f"joker expansion over {c.name} exceeds {MAX_EXPANSIONS}")
                for combo in combos:
                    out.append(Match(sid, c.name, tuple(combo)))
        return out

    def metadata_xml(self) -> list:
        return [descriptor_xml(d) for d in self.sources()]
