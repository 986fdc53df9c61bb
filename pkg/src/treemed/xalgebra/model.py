"""Tree-tuple data model.

An XTuple binds attribute paths to node references inside a small forest of
ordered labeled trees that the tuple owns. An XRelation is an ordered stream
of XTuples sharing one schema: attribute paths plus a prefix-closed guide of
every path that may occur in the forests.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional

from ..errors import PlanError

STEP_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*$")


class Path:
    """Root-to-node label sequence. Interned; compares and hashes by text."""

    __slots__ = ("steps", "text", "_hash")
    _interned: dict = {}

    def __new__(cls, steps):
        if isinstance(steps, Path):
            return steps
        if isinstance(steps, str):
            steps = tuple(steps.strip("/").split("/")) if steps.strip("/") else ()
        else:
            steps = tuple(steps)
        cached = cls._interned.get(steps)
        if cached is not None:
            return cached
        if not steps:
            raise ValueError("a path needs at least one step")
        for step in steps:
            if step != "*" and not STEP_RE.match(step):
                raise ValueError(f"invalid path step {step!r}")
        self = object.__new__(cls)
        self.steps = steps
        self.text = "/".join(steps)
        self._hash = hash(self.text)
        cls._interned[steps] = self
        return self

    def __reduce__(self):
        return (Path, (self.text,))

    def __eq__(self, other):
        if self is other:
            return True
        if isinstance(other, Path):
            return self.text == other.text
        return NotImplemented

    def __lt__(self, other):
        return self.text < other.text

    def __hash__(self):
        return self._hash

    def __str__(self):
        return self.text

    def __repr__(self):
        return f"Path({self.text!r})"

    def __len__(self):
        return len(self.steps)

    @property
    def root(self) -> str:
        return self.steps[0]

    @property
    def label(self) -> str:
        return self.steps[-1]

    @property
    def parent(self) -> Optional["Path"]:
        return Path(self.steps[:-1]) if len(self.steps) > 1 else None

    def child(self, label: str) -> "Path":
        return Path(self.steps + (label,))

    def prefixes(self):
        """Every prefix including the path itself, shortest first."""
        return [Path(self.steps[:i]) for i in range(1, len(self.steps) + 1)]

    def is_prefix_of(self, other: "Path") -> bool:
        n = len(self.steps)
        return n <= len(other.steps) and other.steps[:n] == self.steps

    def with_root(self, root: str) -> "Path":
        return Path((root,) + self.steps[1:])

    @property
    def has_joker(self) -> bool:
        return "*" in self.steps


def prefix_close(paths: Iterable[Path]) -> frozenset:
    out = set()
    for p in paths:
        out.update(Path(p).prefixes())
    return frozenset(out)


def is_prefix_closed(paths) -> bool:
    paths = set(paths)
    return all(p.parent is None or p.parent in paths for p in paths)


class XTree:
    """Immutable arena tree; node 0 is the root, ids follow preorder."""

    __slots__ = ("labels", "texts", "children", "parents", "paths")

    def __init__(self, labels, texts, children, parents):
        self.labels = tuple(labels)
        self.texts = tuple(texts)
        self.children = tuple(tuple(c) for c in children)
        self.parents = tuple(parents)
        paths = [None] * len(self.labels)
        for i, label in enumerate(self.labels):
            par = self.parents[i]
            paths[i] = Path((label,)) if par is None else paths[par].child(label)
        self.paths = tuple(paths)

    def __len__(self):
        return len(self.labels)

    @property
    def root_label(self) -> str:
        return self.labels[0]

    def path(self, node: int) -> Path:
        return self.paths[node]

    def text(self, node: int):
        return self.texts[node]

    def string_value(self, node: int) -> str:
        text = self.texts[node]
        if text is not None:
            return text
        return "".join(self.string_value(c) for c in self.children[node])

    def descendants(self, node: int) -> Iterator[int]:
        """Preorder over the subtree rooted at node, node included."""
        stack = [node]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(self.children[n]))

    def path_set(self) -> frozenset:
        return frozenset(self.paths)

    def serialize(self, node: int = 0, rename=None) -> str:
        return "".join(_serialize(self, node, rename))

    def __repr__(self):
        return f"XTree({self.serialize()})"

    def __eq__(self, other):
        return isinstance(other, XTree) and self.serialize() == other.serialize()

    def __hash__(self):
        return hash(self.serialize())


def escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _serialize(tree: XTree, node: int, rename):
    label = tree.labels[node]
    if rename:
        label = rename.get(label, label)
    text = tree.texts[node]
    kids = tree.children[node]
    if text is None and not kids:
        yield f"<{label}/>"
        return
    yield f"<{label}>"
    if text is not None:
        yield escape_text(text)
    for c in kids:
        yield from _serialize(tree, c, rename)
    yield f"</{label}>"


class TreeBuilder:
    """Append-only builder; callers add nodes in preorder."""

    __slots__ = ("labels", "texts", "children", "parents")

    def __init__(self):
        self.labels = []
        self.texts = []
        self.children = []
        self.parents = []

    def add(self, label: str, parent: Optional[int] = None, text: Optional[str] = None) -> int:
        if parent is None and self.labels:
            raise ValueError("tree already has a root")
        if text == "":
            text = None
        nid = len(self.labels)
        self.labels.append(label)
        self.texts.append(text)
        self.children.append([])
        self.parents.append(parent)
        if parent is not None:
            if self.texts[parent] is not None:
                raise ValueError("a node carrying text cannot have children")
            self.children[parent].append(nid)
        return nid

    def set_text(self, node: int, text: Optional[str]):
        if text == "":
            text = None
        if text is not None and self.children[node]:
            raise ValueError("a node with children cannot carry text")
        self.texts[node] = text

    def copy_subtree(self, tree: XTree, node: int, parent: Optional[int], mapping: dict) -> int:
        new = self.add(tree.labels[node], parent, tree.texts[node])
        mapping[node] = new
        for c in tree.children[node]:
            self.copy_subtree(tree, c, new, mapping)
        return new

    def build(self) -> XTree:
        if not self.labels:
            raise ValueError("empty tree")
        return XTree(self.labels, self.texts, self.children, self.parents)


def leaf_tree(label: str, text: Optional[str]) -> XTree:
    b = TreeBuilder()
    b.add(label, None, text)
    return b.build()


def tree_from_nested(spec) -> XTree:
    """Build from ('label', 'text') or ('label', [children...]) tuples."""
    b = TreeBuilder()

    def rec(s, parent):
        label, body = s
        if isinstance(body, (list, tuple)):
            n = b.add(label, parent)
            for c in body:
                rec(c, n)
        else:
            b.add(label, parent, body)

    rec(spec, None)
    return b.build()


class NodeRef(NamedTuple):
    tree: int
    node: int


@dataclass(frozen=True)
class NestLevel:
    """Member boundaries recorded by XNest.

    spans[m][slot] is the number of refs member m contributed to binding slot,
    so a template can iterate members of a group without losing alignment.
    """

    name: str
    spans: tuple


@dataclass(frozen=True)
class XTuple:
    bindings: tuple  # ((Path, (NodeRef, ...)), ...)
    forest: tuple  # (XTree, ...)
    members: tuple = ()  # (NestLevel, ...)

    @property
    def attributes(self):
        return tuple(p for p, _ in self.bindings)

    def slot(self, path: Path, last: bool = False) -> Optional[int]:
        idx = None
        for i, (p, _) in enumerate(self.bindings):
            if p == path:
                idx = i
                if not last:
                    break
        return idx

    def refs(self, path: Path, last: bool = False) -> tuple:
        i = self.slot(path, last)
        return () if i is None else self.bindings[i][1]

    def node(self, ref: NodeRef):
        return self.forest[ref.tree], ref.node

    def text_values(self, refs) -> list:
        return [self.forest[r.tree].string_value(r.node) for r in refs]

    def values(self, path: Path, last: bool = False) -> list:
        return self.text_values(self.refs(path, last))

    def serialize_refs(self, refs, rename=None) -> str:
        return "".join(self.forest[r.tree].serialize(r.node, rename) for r in refs)

    def level(self, name: str) -> Optional[NestLevel]:
        for lv in self.members:
            if lv.name == name:
                return lv
        return None


def canonical_tuple(t: XTuple) -> str:
    """Set-operator identity: attribute subtrees in schema order."""
    return "\x1e".join(str(p) + "=" + t.serialize_refs(refs) for p, refs in t.bindings)


def _preorder_ordinals(forest):
    out = {}
    k = 0
    for ti, tree in enumerate(forest):
        for n in tree.descendants(0):
            out[(ti, n)] = k
            k += 1
    return out


def canonical_full(t: XTuple) -> str:
    """Forest text plus ref positions and nest spans; used for round trips."""
    ords = _preorder_ordinals(t.forest)
    forest = "".join(tree.serialize() for tree in t.forest)
    binds = ";".join(
        str(p) + ":" + ",".join(str(ords[(r.tree, r.node)]) for r in refs) for p, refs in t.bindings
    )
    members = ";".join(f"{lv.name}:{lv.spans!r}" for lv in t.members)
    return f"{forest}|{binds}|{members}"


@dataclass(frozen=True)
class XRelationSchema:
    attributes: tuple
    guide: frozenset

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(Path(a) for a in self.attributes))
        object.__setattr__(self, "guide", frozenset(Path(g) for g in self.guide))

    @classmethod
    def of(cls, attributes, guide=()):
        attributes = [Path(a) for a in attributes]
        return cls(tuple(attributes), prefix_close(list(guide) + attributes))

    def index(self, path: Path) -> int:
        try:
            return self.attributes.index(Path(path))
        except ValueError:
            raise PlanError(f"unknown attribute {path}") from None

    def __contains__(self, path) -> bool:
        return Path(path) in self.attributes

    def text(self, name: str = "R") -> str:
        attrs = ", ".join(str(a) for a in self.attributes)
        guide = ", ".join(str(g) for g in sorted(self.guide, key=lambda p: p.text))
        return f"{name}({attrs} [{guide}])"


class Diagnostics:
    """Counters shared along a pipeline; binary operators link both inputs."""

    def __init__(self, *parents):
        self.counts = Counter()
        self.parents = [p for p in parents if p is not None]

    def incr(self, key: str, n: int = 1):
        self.counts[key] += n

    def total(self) -> Counter:
        out = Counter(self.counts)
        seen = {id(self)}
        stack = list(self.parents)
        while stack:
            d = stack.pop()
            if id(d) in seen:
                continue
            seen.add(id(d))
            out.update(d.counts)
            stack.extend(d.parents)
        return out

    def __getitem__(self, key):
        return self.total()[key]


@dataclass
class XRelation:
    schema: XRelationSchema
    tuples: Iterable
    ordered: bool = True
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def __iter__(self) -> Iterator[XTuple]:
        return iter(self.tuples)

    def materialize(self) -> "XRelation":
        return XRelation(self.schema, list(self.tuples), self.ordered, self.diagnostics)

    @classmethod
    def from_tuples(cls, attributes, tuples, guide=(), ordered=True):
        tuples = list(tuples)
        paths = set(guide)
        for t in tuples:
            for tree in t.forest:
                paths.update(tree.paths)
        return cls(XRelationSchema.of(attributes, paths), tuples, ordered)


def make_tuple(attributes, forest, members=()) -> XTuple:
    """Bind each attribute to every node whose path equals it, in forest order."""
    attributes = [Path(a) for a in attributes]
    wanted = {a: [] for a in attributes}
    for ti, tree in enumerate(forest):
        for n in tree.descendants(0):
            lst = wanted.get(tree.paths[n])
            if lst is not None:
                lst.append(NodeRef(ti, n))
    return XTuple(tuple((a, tuple(wanted[a])) for a in attributes), tuple(forest), tuple(members))
