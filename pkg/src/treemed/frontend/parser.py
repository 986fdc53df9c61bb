"""Recursive-descent parser for the FLWR query subset.

    query    := flwr
    flwr     := (for | let)+ [where cond] return items
    for      := 'for' $v 'in' source (',' $v 'in' source)*
    source   := (Collection("name") | $u) ['/' path]
    let      := 'let' $v ':=' (varpath | literal)
    cond     := and ('or' and)*          and := unary ('and' unary)*
    unary    := 'not' '(' cond ')' | '(' cond ')' | atom
    atom     := operand op operand | contains(varpath, "lit")
    items    := item (','? item)*
    item     := <tag>content</tag> | <tag/> | '(' items ')' | '{' items '}'
              | varpath | aggregate(fn, varpath) | flwr | "lit"

A nested flwr inside element content runs up to the enclosing close tag.
Comments are (: ... :); hints are (:: hint join=tA-tB algo=name ::).
"""

from __future__ import annotations

import re
from decimal import Decimal

from ..errors import DuplicateVariable, QuerySyntaxError, UnknownVariable, UnsupportedFeature
from ..xalgebra.model import Path
from ..xalgebra.predicate import And, Compare, Contains, Member, Not, Or
from .ast import (
    PARAM,
    PARAM_NAME,
    Aggregate,
    CollectionRef,
    Constructor,
    ForClause,
    Hint,
    LetClause,
    Query,
    Sequence,
    TextLit,
    VarPath,
)

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")
VAR_RE = re.compile(r"\$([A-Za-z_][A-Za-z0-9_]*)")
STEP_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*|\*")
NUMBER_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)")
HINT_RE = re.compile(r"^\s*hint((?:\s+[A-Za-z_]+=[^\s]+)*)\s*$")
AGG_FNS = ("MIN", "MAX", "COUNT", "AVG", "SUM")


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.hints = []
        self.scopes = []

    # -- low level -----------------------------------------------------------

    def where(self, pos=None):
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, msg, pos=None, cls=QuerySyntaxError):
        line, col = self.where(pos)
        return cls(msg, line, col)

    def skip_comment(self) -> bool:
        if not self.text.startswith("(:", self.pos):
            return False
        is_hint = self.text.startswith("(::", self.pos)
        close = "::)" if is_hint else ":)"
        end = self.text.find(close, self.pos + (3 if is_hint else 2))
        if end < 0:
            raise self.error("unterminated comment")
        body = self.text[self.pos + (3 if is_hint else 2) : end]
        if is_hint:
            self.hint(body)
        self.pos = end + len(close)
        return True

    def hint(self, body):
        m = HINT_RE.match(body)
        if not m:
            return  # an ordinary comment written with double colons
        fields = dict(kv.split("=", 1) for kv in m.group(1).split())
        if "join" not in fields or "algo" not in fields:
            raise self.error("a hint needs join= and algo=")
        self.hints.append(Hint(fields["join"], fields["algo"]))

    def ws(self):
        while True:
            while self.pos < len(self.text) and self.text[self.pos].isspace():
                self.pos += 1
            if not self.skip_comment():
                return

    def peek(self, s) -> bool:
        self.ws()
        return self.text.startswith(s, self.pos)

    def accept(self, s) -> bool:
        if self.peek(s):
            self.pos += len(s)
            return True
        return False

    def expect(self, s):
        if not self.accept(s):
            raise self.error(f"expected {s!r}, found {self.snippet()}")

    def snippet(self):
        if self.pos >= len(self.text):
            return "end of query"
        return repr(self.text[self.pos : self.pos + 12])

    def peek_keyword(self, kw) -> bool:
        self.ws()
        if not self.text.startswith(kw, self.pos):
            return False
        after = self.pos + len(kw)
        return after >= len(self.text) or not (self.text[after].isalnum() or self.text[after] in "_-")

    def accept_keyword(self, kw) -> bool:
        if self.peek_keyword(kw):
            self.pos += len(kw)
            return True
        return False

    def expect_keyword(self, kw):
        if not self.accept_keyword(kw):
            raise self.error(f"expected '{kw}', found {self.snippet()}")

    def match(self, regex):
        self.ws()
        m = regex.match(self.text, self.pos)
        if m:
            self.pos = m.end()
        return m

    def starts_flwr(self) -> bool:
        self.ws()
        return re.compile(r"(for|let)\s+\$").match(self.text, self.pos) is not None

    # -- scopes --------------------------------------------------------------

    def declare(self, var, pos):
        for scope in self.scopes:
            if var in scope:
                raise self.error(f"variable ${var} is already declared", pos, DuplicateVariable)
        if var == PARAM_NAME:
            raise self.error(f"${PARAM_NAME} is reserved", pos, DuplicateVariable)
        self.scopes[-1].add(var)

    def check_var(self, var, pos):
        if not any(var in s for s in self.scopes):
            raise self.error(f"unknown variable ${var}", pos, UnknownVariable)

    # -- grammar -------------------------------------------------------------

    def parse(self) -> Query:
        self.ws()
        if not self.starts_flwr():
            raise self.error(f"a query starts with 'for' or 'let', found {self.snippet()}")
        q = self.flwr()
        self.ws()
        if self.pos != len(self.text):
            raise self.error(f"unexpected {self.snippet()} after the query")
        return q.with_(hints=tuple(self.hints))

    def flwr(self) -> Query:
        self.scopes.append(set())
        clauses = []
        while True:
            if self.accept_keyword("for"):
                while True:
                    clauses.append(self.for_binding())
                    if not self.accept(","):
                        break
            elif self.accept_keyword("let"):
                clauses.append(self.let_binding())
            else:
                break
        where = None
        if self.accept_keyword("where"):
            where = self.cond()
        self.expect_keyword("return")
        ret = self.items()
        if not ret:
            raise self.error("empty return clause")
        self.scopes.pop()
        return Query(tuple(clauses), where, ret)

    def var(self):
        self.ws()
        pos = self.pos
        m = self.match(VAR_RE)
        if not m:
            raise self.error(f"expected a variable, found {self.snippet()}")
        return m.group(1), pos

    def rel_path(self, allow_joker=True):
        """Optional '/step/step...' continuation; None when absent."""
        steps = []
        while self.text.startswith("/", self.pos) and not self.text.startswith("/>", self.pos):
            save = self.pos
            self.pos += 1
            m = STEP_RE.match(self.text, self.pos)
            if not m or (m.group(0) == "*" and not allow_joker):
                self.pos = save
                raise self.error("expected a path step after '/'")
            steps.append(m.group(0))
            self.pos = m.end()
        return Path(tuple(steps)) if steps else None

    def for_binding(self) -> ForClause:
        var, pos = self.var()
        self.expect_keyword("in")
        self.ws()
        if self.text.startswith("$", self.pos):
            src, spos = self.var()
            self.check_var(src, spos)
            source = VarPath(src)
        else:
            m = self.match(re.compile(r"(Collection|collection)\s*\("))
            if not m:
                raise self.error(f"expected Collection(\"name\") or a variable, found {self.snippet()}")
            name = self.string()
            self.expect(")")
            source = CollectionRef(name, m.group(1))
        path = self.rel_path()
        if isinstance(source, CollectionRef) and path is not None and len(path) != 1:
            raise self.error("a collection path must be a single root step", pos)
        self.declare(var, pos)
        return ForClause(var, source, path)

    def let_binding(self) -> LetClause:
        var, pos = self.var()
        self.expect(":=")
        if self.starts_flwr():
            # the nested query would swallow the rest of the text; refuse before trying
            raise UnsupportedFeature(f"let ${var} is bound to a FLWR expression")
        if self.peek("$"):
            expr = self.varpath()
        else:
            expr = self.literal()
            if expr is None:
                raise self.error(f"unsupported let expression at {self.snippet()}")
        self.declare(var, pos)
        return LetClause(var, expr)

    def string(self) -> str:
        self.ws()
        if not self.text.startswith('"', self.pos):
            raise self.error(f"expected a string literal, found {self.snippet()}")
        i = self.pos + 1
        out = []
        while True:
            j = self.text.find('"', i)
            if j < 0:
                raise self.error("unterminated string literal")
            out.append(self.text[i:j])
            if self.text.startswith('""', j):
                out.append('"')
                i = j + 2
                continue
            self.pos = j + 1
            return "".join(out)

    def literal(self):
        self.ws()
        if self.text.startswith('"', self.pos):
            return self.string()
        m = self.match(NUMBER_RE)
        if m:
            return Decimal(m.group(0))
        return None

    def varpath(self) -> VarPath:
        var, pos = self.var()
        if var == PARAM_NAME:
            return PARAM
        self.check_var(var, pos)
        return VarPath(var, self.rel_path())

    # conditions

    def cond(self):
        items = [self.conj()]
        while self.accept_keyword("or"):
            items.append(self.conj())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conj(self):
        items = [self.unary()]
        while self.accept_keyword("and"):
            items.append(self.unary())
        return items[0] if len(items) == 1 else And(tuple(items))

    def unary(self):
        if self.accept_keyword("not"):
            self.expect("(")
            c = self.cond()
            self.expect(")")
            return Not(c)
        if self.peek("(") and not self.text.startswith("(:", self.pos):
            self.expect("(")
            c = self.cond()
            self.expect(")")
            return c
        return self.atom()

    def atom(self):
        pos = self.pos
        if self.accept_keyword("contains"):
            self.expect("(")
            attr = self.varpath()
            self.expect(",")
            needle = self.string()
            self.expect(")")
            return Contains(attr, needle)
        lhs = self.operand()
        op = self.op()
        if self.peek("(") and op in ("=", "!="):
            values = self.sequence_literal()
            if not isinstance(lhs, VarPath):
                raise self.error("a sequence comparison needs a path on the left", pos)
            m = Member(lhs, values)
            return m if op == "=" else Not(m)
        rhs = self.operand()
        if not isinstance(lhs, VarPath):
            if not isinstance(rhs, VarPath):
                raise self.error("a comparison needs at least one path", pos)
            lhs, rhs, op = rhs, lhs, _flip(op)
        return Compare(lhs, op, rhs)

    def operand(self):
        if self.peek("$"):
            return self.varpath()
        v = self.literal()
        if v is None:
            raise self.error(f"expected a path or literal, found {self.snippet()}")
        return v

    def op(self):
        self.ws()
        for o in ("!=", "<=", ">=", "=", "<", ">"):
            if self.text.startswith(o, self.pos):
                self.pos += len(o)
                return o
        raise self.error(f"expected a comparison operator, found {self.snippet()}")

    def sequence_literal(self):
        self.expect("(")
        values = []
        if not self.accept(")"):
            while True:
                v = self.literal()
                if v is None:
                    raise self.error(f"expected a literal, found {self.snippet()}")
                values.append(str(v) if isinstance(v, Decimal) else v)
                if self.accept(")"):
                    break
                self.expect(",")
        return tuple(values)

    # return content

    def items(self) -> tuple:
        out = []
        while True:
            self.ws()
            if self.pos >= len(self.text) or self.text[self.pos] in ")}" or self.text.startswith("</", self.pos):
                break
            out.append(self.item())
            self.accept(",")
        return tuple(out)

    def item(self):
        self.ws()
        if self.text.startswith("<", self.pos):
            return self.constructor()
        if self.text.startswith("(", self.pos):
            self.pos += 1
            inner = self.items()
            self.expect(")")
            return Sequence(inner)
        if self.text.startswith("{", self.pos):
            self.pos += 1
            inner = self.items()
            self.expect("}")
            return inner[0] if len(inner) == 1 else Sequence(inner)
        if self.text.startswith("$", self.pos):
            return self.varpath()
        if self.starts_flwr():
            return self.flwr()
        if self.peek_keyword("aggregate"):
            return self.aggregate()
        if self.text.startswith('"', self.pos):
            return TextLit(self.string())
        raise self.error(f"unexpected {self.snippet()} in return clause")

    def aggregate(self):
        self.expect_keyword("aggregate")
        self.expect("(")
        m = self.match(NAME_RE)
        if not m or m.group(0).upper() not in AGG_FNS:
            raise self.error(f"expected one of {', '.join(AGG_FNS)}")
        self.expect(",")
        arg = self.varpath()
        self.expect(")")
        return Aggregate(m.group(0).upper(), arg)

    def constructor(self):
        start = self.pos
        self.expect("<")
        m = NAME_RE.match(self.text, self.pos)
        if not m:
            raise self.error("expected an element name after '<'")
        tag = m.group(0)
        self.pos = m.end()
        if self.accept("/>"):
            return Constructor(tag, ())
        self.expect(">")
        content = self.content()
        if not self.text.startswith("</", self.pos):
            raise self.error(f"unclosed <{tag}>", start)
        close_pos = self.pos
        self.pos += 2
        m = NAME_RE.match(self.text, self.pos)
        if not m or m.group(0) != tag:
            raise self.error(f"</{m.group(0) if m else ''}> does not close <{tag}>", close_pos)
        self.pos = m.end()
        self.expect(">")
        return Constructor(tag, content)

    def content(self) -> tuple:
        out = []
        text = []

        def flush():
            s = "".join(text).strip()
            if s:
                out.append(TextLit(s))
            text.clear()

        while True:
            if self.pos >= len(self.text):
                return tuple(out)
            if self.text.startswith("</", self.pos):
                flush()
                return tuple(out)
            if self.text.startswith("(:", self.pos):
                self.skip_comment()
                continue
            c = self.text[self.pos]
            if c in "<{$":
                flush()
                out.append(self.item())
                continue
            if (c.isalpha() and (self.pos == 0 or not self.text[self.pos - 1].isalnum())) and (
                self.starts_flwr() or self.peek_keyword("aggregate")
            ):
                flush()
                out.append(self.item())
                continue
            text.append(c)
            self.pos += 1


def _flip(op):
    return {"<": ">", ">": "<", "<=": ">=", ">=": "<="}.get(op, op)


def parse(text: str) -> Query:
    return Parser(text).parse()

