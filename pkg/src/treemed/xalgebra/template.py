"""Result construction: turn tuples into XML event streams via a template."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .. import events as ev
from ..errors import PlanError
from .model import Path, XRelation, XTuple


@dataclass(frozen=True)
class Element:
    tag: str
    children: tuple = ()


@dataclass(frozen=True)
class Text:
    value: str


COPY = "copy"  # the bound subtrees, element and all
VALUE = "value"  # text of the bound nodes only
ROOT = "root"  # every forest tree with this root label


@dataclass(frozen=True)
class Placeholder:
    path: Path
    mode: str = COPY

    def __post_init__(self):
        # the frontend stores variable paths here before they are resolved
        if isinstance(self.path, str):
            object.__setattr__(self, "path", Path(self.path))
        if self.mode not in (COPY, VALUE, ROOT):
            raise ValueError(f"bad placeholder mode {self.mode!r}")


@dataclass(frozen=True)
class Repeat:
    """Render children once per member of a nest level."""

    level: str
    children: tuple = ()


def template_paths(node) -> list:
    out = []

    def rec(n):
        if isinstance(n, Placeholder):
            if n.mode != ROOT and n.path not in out:
                out.append(n.path)
        elif isinstance(n, (Element, Repeat)):
            for c in n.children:
                rec(c)
        elif isinstance(n, (list, tuple)):
            for c in n:
                rec(c)

    rec(node)
    return out


def template_text(node) -> str:
    """Compact printable form, used in plan listings."""
    if isinstance(node, (list, tuple)):
        return "".join(template_text(c) for c in node)
    if isinstance(node, Element):
        return f"<{node.tag}>" + template_text(node.children) + f"</{node.tag}>"
    if isinstance(node, Text):
        return node.value
    if isinstance(node, Placeholder):
        return "{" + str(node.path) + ("" if node.mode == COPY else ":" + node.mode) + "}"
    if isinstance(node, Repeat):
        return "[" + node.level + ":" + template_text(node.children) + "]"
    raise TypeError(node)


class _Renderer:
    def __init__(self, t: XTuple, rename):
        self.t = t
        self.rename = rename or {}
        self.slots = {}
        for i, (p, _) in enumerate(t.bindings):
            self.slots.setdefault(p, i)

    def full_view(self):
        return [refs for _, refs in self.t.bindings]

    def member_views(self, level, view):
        lv = self.t.level(level)
        if lv is None:
            return [view]
        nslots = len(view)
        sums = [sum(span[s] for span in lv.spans) for s in range(nslots)]
        offsets = [0] * nslots
        out = []
        for span in lv.spans:
            v = []
            for s in range(nslots):
                if sums[s] != len(view[s]):
                    v.append(view[s])  # shared by every member (grouping slot)
                else:
                    v.append(view[s][offsets[s] : offsets[s] + span[s]])
                    offsets[s] += span[s]
            out.append(v)
        return out

    def render(self, nodes, view, out) -> bool:
        """Append events for nodes; False when a placeholder came up empty."""
        complete = True
        for n in nodes:
            if isinstance(n, Text):
                out.append(ev.text(n.value))
            elif isinstance(n, Element):
                buf = []
                if self.render(n.children, view, buf):
                    out.append(ev.start(n.tag))
                    out.extend(buf)
                    out.append(ev.end(n.tag))
            elif isinstance(n, Repeat):
                for mv in self.member_views(n.level, view):
                    self.render(n.children, mv, out)
            elif isinstance(n, Placeholder):
                if not self.placeholder(n, view, out):
                    complete = False
            else:
                raise TypeError(n)
        return complete

    def placeholder(self, p: Placeholder, view, out) -> bool:
        if p.mode == ROOT:
            found = False
            for tree in self.t.forest:
                if tree.labels[0] == p.path.root:
                    out.extend(ev.tree_events(tree, 0, self.rename))
                    found = True
            return found
        slot = self.slots.get(p.path)
        if slot is None:
            raise PlanError(f"template refers to unknown attribute {p.path}")
        refs = view[slot]
        if not refs:
            return False
        for r in refs:
            tree = self.t.forest[r.tree]
            if p.mode == VALUE:
                out.append(ev.text(tree.string_value(r.node)))
            else:
                out.extend(ev.tree_events(tree, r.node, self.rename))
        return True


def check_template(template, schema):
    for p in template_paths(template):
        if p not in schema.attributes:
            raise PlanError(f"template refers to unknown attribute {p}")


def reconstruct_tuple(t: XTuple, template, rename=None) -> list:
    r = _Renderer(t, rename)
    out = []
    r.render(template if isinstance(template, (list, tuple)) else (template,), r.full_view(), out)
    return out


def x_reconstruct(rel: XRelation, template, rename=None) -> Iterator:
    """Events for every tuple followed by a DOC event; no EOS is added."""
    check_template(template, rel.schema)
    for t in rel:
        yield from reconstruct_tuple(t, template, rename)
        yield ev.DOC_EVENT
