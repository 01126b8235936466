"""Concrete syntax for programs and goals.

Rules end with ``.``; ``\\`` separates kept from removed heads; ``<=>`` and
``==>`` choose simplification/simpagation or propagation; ``|`` ends the
guard; ``%`` starts a line comment.  Directives::

    #const n = 3.
    #data balance/2.
    #operation deposit/2, withdraw/2.
    #dialect chre.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import count

from .errors import ParseError
from .syntax import GUARD_SYMBOLS, Program, Rule
from .terms import (INFIX_OPS, NIL, Atomic, Compound, Constraint, Term, Var,
                    make_list)

_SYMBOLS = sorted(
    ["<=>", "==>", "=:=", "=\\=", "\\==", "\\=", "==", "=<", ">=", "->", "=>",
     "//", "=", "<", ">", "+", "-", "*", "\\", "|", ",", ".", "(", ")", "[",
     "]", ":", "#", "@", "/"],
    key=len, reverse=True)

_TOKEN = re.compile(
    r"(?P<ws>\s+|%[^\n]*)"
    r"|(?P<int>\d+)"
    r"|(?P<var>[A-Z_][A-Za-z0-9_]*)"
    r"|(?P<atom>[a-z][A-Za-z0-9_]*)"
    r"|(?P<quoted>'(?:[^'\\]|\\.)*')"
    r"|(?P<sym>" + "|".join(re.escape(s) for s in _SYMBOLS) + ")"
)

_WORD_OPS = {"mod", "in"}
_CONST = re.compile(r"^\s*#const\s+([a-z][A-Za-z0-9_]*)\s*=\s*(-?\d+)\s*\.", re.M)


@dataclass
class Token:
    kind: str       # int | var | atom | sym | eof
    value: object
    line: int
    column: int
    spaced: bool    # preceded by whitespace

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(str(self.value))


def tokenize(text: str) -> list[Token]:
    tokens, pos, line, line_start = [], 0, 1, 0
    spaced = True
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind == "ws":
            spaced = True
        else:
            if kind == "int":
                tokens.append(Token("int", int(value), line, col, spaced))
            elif kind == "quoted":
                body = re.sub(r"\\(.)", r"\1", value[1:-1])
                tokens.append(Token("atom", body, line, col, spaced))
            else:
                tokens.append(Token(kind, value, line, col, spaced))
            spaced = False
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", None, line, pos - line_start + 1, spaced))
    return tokens


class _Parser:
    def __init__(self, text: str, constants: dict[str, int] | None = None):
        self.tokens = tokenize(text)
        self.pos = 0
        self.constants = dict(constants or {})
        for name, value in _CONST.findall(text):
            self.constants.setdefault(name, int(value))
        self.fresh = count()

    # -- token helpers --
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset=1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, *values) -> bool:
        t = self.tok
        return t.kind in ("sym", "atom") and t.value in values

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def fail(self, message: str, expected=()):
        t = self.tok
        raise ParseError(f"{message}, found {t.describe()}", t.line, t.column, expected)

    def expect(self, value: str) -> Token:
        if not (self.tok.kind == "sym" and self.tok.value == value):
            self.fail(f"expected {value!r}", [value])
        return self.advance()

    # -- terms --
    def term(self, max_prio: int = 999) -> Term:
        left, left_prio = self.primary()
        while True:
            t = self.tok
            op = t.value if (t.kind == "sym" or (t.kind == "atom" and t.value in _WORD_OPS)) else None
            if op not in INFIX_OPS:
                break
            prio, kind = INFIX_OPS[op]
            left_max = prio if kind == "yfx" else prio - 1
            if prio > max_prio or left_prio > left_max:
                break
            self.advance()
            right = self.term(prio - 1)
            left, left_prio = Compound(op, (left, right)), prio
        return left

    def primary(self) -> tuple[Term, int]:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return t.value, 0
        if t.kind == "var":
            self.advance()
            if t.value == "_":
                return Var(f"_G{next(self.fresh)}"), 0
            return Var(t.value), 0
        if t.kind == "sym" and t.value == "-":
            self.advance()
            nxt = self.tok
            if nxt.kind == "int" and not nxt.spaced:
                self.advance()
                return -nxt.value, 0
            return Compound("-", (self.term(200),)), 200
        if t.kind == "sym" and t.value == "(":
            self.advance()
            inner = self.term(1200)
            self.expect(")")
            return inner, 0
        if t.kind == "sym" and t.value == "[":
            return self.list_term(), 0
        if t.kind == "atom":
            self.advance()
            if self.tok.kind == "sym" and self.tok.value == "(" and not self.tok.spaced:
                self.advance()
                args = [self.term(999)]
                while self.at(","):
                    self.advance()
                    args.append(self.term(999))
                self.expect(")")
                return Compound(t.value, args), 0
            return self.constants.get(t.value, t.value), 0
        self.fail("expected a term", ["term"])

    def list_term(self) -> Term:
        self.expect("[")
        if self.at("]"):
            self.advance()
            return NIL
        items = [self.term(999)]
        while self.at(","):
            self.advance()
            items.append(self.term(999))
        tail: Term = NIL
        if self.at("|"):
            self.advance()
            tail = self.term(999)
        self.expect("]")
        return make_list(items, tail)

    # -- constraints --
    def constraint(self, where: str):
        location = None
        start = self.tok
        if self.at("["):
            self.advance()
            location = self.term(999)
            self.expect("]")
        term = self.term(999)
        return self.to_constraint(term, location, where, start)

    def to_constraint(self, term: Term, location, where: str, start: Token):
        def err(msg):
            raise ParseError(msg, start.line, start.column)

        if isinstance(term, (int, Var)):
            err(f"{term!r} is not a constraint")
        if isinstance(term, str):
            if term == "true":
                return Constraint("true", (), "builtin", location)
            return Constraint(term, (), "user", location)
        if term.functor == "atomic":
            if where != "goal":
                err("atomic(...) may only appear in goals")
            if location is not None:
                err("atomic(...) cannot be localized")
            inner = []
            for arg in term.args:
                inner.append(self.to_constraint(arg, None, "atomic", start))
            return Atomic(inner)
        if term.functor in GUARD_SYMBOLS and len(term.args) == 2:
            if location is not None:
                err("built-in constraints cannot be localized")
            return Constraint(term.functor, term.args, "builtin")
        return Constraint(term.functor, term.args, "user", location)

    def conjunction(self, where: str) -> list:
        items = [self.constraint(where)]
        while self.at(","):
            self.advance()
            items.append(self.constraint(where))
        return items

    # -- rules and directives --
    def rule(self, index: int) -> tuple[str | None, list, list, list, list, str]:
        name = None
        if self.tok.kind in ("atom", "var") and self.peek().kind == "sym" and self.peek().value in (":", "@"):
            name = self.advance().value
            self.advance()
        first = self.conjunction("head")
        second = None
        if self.at("\\"):
            self.advance()
            second = self.conjunction("head")
        if self.at("<=>"):
            arrow = self.advance().value
        elif self.at("==>"):
            arrow = self.advance().value
        else:
            self.fail("expected rule arrow", ["<=>", "==>"] + ([] if second else ["\\", ","]))
        if self.at("."):
            self.fail("empty rule body (write `true`)", ["true"])
        part = self.conjunction("body")
        guard, body = [], part
        if self.at("|"):
            self.advance()
            guard = part
            body = self.conjunction("body")
        self.expect(".")
        if arrow == "==>":
            if second is not None:
                raise ParseError("propagation rules cannot have removed heads",
                                 self.tok.line, self.tok.column)
            kept, removed = first, []
        elif second is None:
            kept, removed = [], first
        else:
            kept, removed = first, second
        for h in kept + removed:
            if h.is_builtin:
                raise ParseError(f"built-in {h!r} in rule head", self.tok.line, self.tok.column)
        for g in guard:
            if not g.is_builtin:
                raise ParseError(f"user constraint {g!r} in guard", self.tok.line, self.tok.column)
        body = [b for b in body if not (b.is_builtin and b.symbol == "true")]
        return name, kept, removed, guard, body, arrow

    def pred_list(self) -> list[tuple[str, int]]:
        preds = []
        while True:
            t = self.tok
            if t.kind not in ("atom", "sym"):
                self.fail("expected predicate name", ["name/arity"])
            self.advance()
            self.expect("/")
            if self.tok.kind != "int":
                self.fail("expected arity", ["integer"])
            preds.append((t.value, self.advance().value))
            if not self.at(","):
                break
            self.advance()
        return preds

    def program(self) -> Program:
        raw = []
        data, ops = set(), set()
        dialect = None
        while self.tok.kind != "eof":
            if self.at("#"):
                self.advance()
                if self.tok.kind != "atom":
                    self.fail("expected directive name", ["const", "data", "operation", "dialect"])
                directive = self.advance().value
                if directive == "const":
                    if self.tok.kind != "atom":
                        self.fail("expected constant name", ["name"])
                    cname = self.advance().value
                    self.expect("=")
                    value = self.term(999)
                    if not isinstance(value, int):
                        self.fail("constant must be an integer", ["integer"])
                    self.constants.setdefault(cname, value)
                elif directive == "data":
                    data.update(self.pred_list())
                elif directive == "operation":
                    ops.update(self.pred_list())
                elif directive == "dialect":
                    if not (self.tok.kind == "atom" and self.tok.value in ("plain", "chrt", "chre")):
                        self.fail("unknown dialect", ["plain", "chrt", "chre"])
                    dialect = self.advance().value
                else:
                    raise ParseError(f"unknown directive #{directive}", self.tok.line, self.tok.column)
                self.expect(".")
                continue
            start = self.tok
            raw.append((start, self.rule(len(raw))))
        if dialect is None:
            dialect = "chrt" if (data or ops) else "plain"
        taken = {r[1][0] for r in raw if r[1][0]}
        rules = []
        for index, (start, (name, kept, removed, guard, body, _)) in enumerate(raw):
            if name is None:
                name = f"r{index}"
                while name in taken:
                    name += "_"
                taken.add(name)
            if dialect != "chre":
                for c in kept + removed + body:
                    if c.location is not None:
                        raise ParseError("located constraints require #dialect chre", start.line, start.column)
            rules.append(Rule(name, tuple(kept), tuple(removed), tuple(guard), tuple(body)))
        names = [r.name for r in rules]
        for n in names:
            if names.count(n) > 1:
                raise ParseError(f"duplicate rule name {n}", 0, 0)
        return Program(tuple(rules), dict(self.constants), frozenset(data), frozenset(ops), dialect)


def parse_program(text: str, constants: dict[str, int] | None = None) -> Program:
    """Parse program text.  ``constants`` override ``#const`` directives."""
    program = _Parser(text, constants).program()
    if constants:
        program.constants.update(constants)
    return program


def parse_goal(text: str, program: Program | None = None) -> list:
    """Parse a comma-separated goal.  ``atomic(...)`` wrappers come back as
    :class:`Atomic`; they are rejected when ``program`` is not transactional."""
    parser = _Parser(text, program.constants if program else None)
    if parser.tok.kind == "eof":
        return []
    items = parser.conjunction("goal")
    if parser.at("."):
        parser.advance()
    if parser.tok.kind != "eof":
        parser.fail("unexpected token after goal", [",", "."])
    for item in items:
        if program is not None:
            if isinstance(item, Atomic) and program.dialect != "chrt":
                raise ParseError("atomic(...) requires a transactional program", 1, 1)
            if isinstance(item, Constraint) and item.location is not None and program.dialect != "chre":
                raise ParseError("located constraints require #dialect chre", 1, 1)
    return items
