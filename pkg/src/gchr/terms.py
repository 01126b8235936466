"""Terms and constraints.

Ground values use native Python types where possible: integers are ``int``,
atoms are ``str``.  Compound terms and rule variables get small classes.
Lists are built from ``'.'/2`` cells terminated by the atom ``'[]'``.
"""

from __future__ import annotations

import re
from typing import Iterable, Iterator, Union

NIL = "[]"
CONS = "."


class Var:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __eq__(self, other):
        return isinstance(other, Var) and other.name == self.name

    def __hash__(self):
        return hash(("$var", self.name))

    def __repr__(self):
        return self.name


class Compound:
    __slots__ = ("functor", "args", "_hash")

    def __init__(self, functor: str, args: Iterable["Term"]):
        self.functor = functor
        self.args = tuple(args)
        self._hash = hash((functor, self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, Compound)
            and self._hash == other._hash
            and self.functor == other.functor
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return format_term(self)


Term = Union[int, str, Var, Compound]


class Constraint:
    """A user-defined or built-in constraint, optionally localized (``[l]c``)."""

    __slots__ = ("symbol", "args", "kind", "location", "_hash")

    def __init__(self, symbol: str, args: Iterable[Term] = (), kind: str = "user",
                 location: Term | None = None):
        self.symbol = symbol
        self.args = tuple(args)
        self.kind = kind
        self.location = location
        self._hash = hash((symbol, self.args, location))

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def predicate(self) -> tuple[str, int]:
        return (self.symbol, len(self.args))

    @property
    def is_builtin(self) -> bool:
        return self.kind == "builtin"

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, Constraint)
            and self._hash == other._hash
            and self.symbol == other.symbol
            and self.args == other.args
            and self.location == other.location
            and self.kind == other.kind
        )

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return constraint_key(self) < constraint_key(other)

    def with_location(self, location: Term | None) -> "Constraint":
        return Constraint(self.symbol, self.args, self.kind, location)

    def __repr__(self):
        return format_constraint(self)


class Atomic:
    """The ``atomic(C1, ..., Cn)`` goal wrapper of transactional programs."""

    __slots__ = ("body",)

    def __init__(self, body: Iterable[Constraint]):
        self.body = tuple(body)

    def __eq__(self, other):
        return isinstance(other, Atomic) and other.body == self.body

    def __hash__(self):
        return hash(("atomic", self.body))

    def __repr__(self):
        return "atomic(" + ",".join(format_constraint(c) for c in self.body) + ")"


# -- structural helpers ------------------------------------------------------

def make_list(items: Iterable[Term], tail: Term = NIL) -> Term:
    result = tail
    for item in reversed(list(items)):
        result = Compound(CONS, (item, result))
    return result


def list_items(term: Term) -> list[Term] | None:
    """Elements of a proper list, or None when ``term`` is not one."""
    items = []
    while isinstance(term, Compound) and term.functor == CONS and len(term.args) == 2:
        items.append(term.args[0])
        term = term.args[1]
    return items if term == NIL else None


def term_vars(term: Term) -> Iterator[str]:
    if isinstance(term, Var):
        yield term.name
    elif isinstance(term, Compound):
        for arg in term.args:
            yield from term_vars(arg)


def constraint_vars(c: Constraint) -> list[str]:
    """Variable names of ``c`` (location included) in first-occurrence order."""
    seen: dict[str, None] = {}
    if c.location is not None:
        for name in term_vars(c.location):
            seen.setdefault(name)
    for arg in c.args:
        for name in term_vars(arg):
            seen.setdefault(name)
    return list(seen)


def is_ground(term: Term) -> bool:
    if isinstance(term, Var):
        return False
    if isinstance(term, Compound):
        return all(is_ground(a) for a in term.args)
    return True


def substitute(term: Term, bindings: dict) -> Term:
    if isinstance(term, Var):
        return bindings.get(term.name, term)
    if isinstance(term, Compound):
        return Compound(term.functor, [substitute(a, bindings) for a in term.args])
    return term


def substitute_constraint(c: Constraint, bindings: dict) -> Constraint:
    loc = None if c.location is None else substitute(c.location, bindings)
    return Constraint(c.symbol, [substitute(a, bindings) for a in c.args], c.kind, loc)


# -- total structural order ---------------------------------------------------

def term_key(term: Term) -> tuple:
    if isinstance(term, bool):
        term = int(term)
    if isinstance(term, int):
        return (0, term)
    if isinstance(term, str):
        return (1, term)
    if isinstance(term, Compound):
        return (2, len(term.args), term.functor, tuple(term_key(a) for a in term.args))
    return (3, term.name)


def constraint_key(c: Constraint) -> tuple:
    loc = () if c.location is None else term_key(c.location)
    return (c.symbol, len(c.args), tuple(term_key(a) for a in c.args), loc)


def sort_constraints(cs: Iterable[Constraint]) -> list[Constraint]:
    return sorted(cs, key=constraint_key)


# -- printing -----------------------------------------------------------------

# name -> (priority, type) for infix operators; mirrors the parser table.
INFIX_OPS = {
    "=": (700, "xfx"), "\\=": (700, "xfx"), "==": (700, "xfx"), "\\==": (700, "xfx"),
    "=:=": (700, "xfx"), "=\\=": (700, "xfx"), "<": (700, "xfx"), ">": (700, "xfx"),
    "=<": (700, "xfx"), ">=": (700, "xfx"), "->": (700, "xfx"), "=>": (700, "xfx"),
    "in": (700, "xfx"),
    "+": (500, "yfx"), "-": (500, "yfx"),
    "*": (400, "yfx"), "//": (400, "yfx"), "mod": (400, "yfx"),
}
PREFIX_OPS = {"-": (200, "fy")}

_PLAIN_ATOM = re.compile(r"^[a-z][A-Za-z0-9_]*$")


def format_atom(name: str) -> str:
    if _PLAIN_ATOM.match(name) or name == NIL:
        return name
    if name in INFIX_OPS or name in ("true",):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _format(term: Term, max_prio: int) -> str:
    if isinstance(term, bool):
        term = int(term)
    if isinstance(term, int):
        text = str(term)
        return f"({text})" if term < 0 and max_prio < 200 else text
    if isinstance(term, str):
        return format_atom(term)
    if isinstance(term, Var):
        return term.name
    functor, args = term.functor, term.args
    if functor == CONS and len(args) == 2:
        items, tail = [], term
        while isinstance(tail, Compound) and tail.functor == CONS and len(tail.args) == 2:
            items.append(_format(tail.args[0], 999))
            tail = tail.args[1]
        body = ",".join(items)
        if tail != NIL:
            body += "|" + _format(tail, 999)
        return "[" + body + "]"
    if len(args) == 2 and functor in INFIX_OPS:
        prio, kind = INFIX_OPS[functor]
        left_max = prio if kind == "yfx" else prio - 1
        sep = f" {functor} " if functor.isalpha() else functor
        text = _format(args[0], left_max) + sep + _format(args[1], prio - 1)
        return f"({text})" if prio > max_prio else text
    if len(args) == 1 and functor in PREFIX_OPS:
        prio, _ = PREFIX_OPS[functor]
        inner = _format(args[0], prio)
        if isinstance(args[0], int) or inner.startswith("-"):
            inner = f"({inner})"
        text = "-" + inner
        return f"({text})" if prio > max_prio else text
    return format_atom(functor) + "(" + ",".join(_format(a, 999) for a in args) + ")"


def format_term(term: Term) -> str:
    return _format(term, 1200)


def format_constraint(c: Constraint) -> str:
    if not c.args:
        body = format_atom(c.symbol)
    else:
        body = _format(Compound(c.symbol, c.args), 999)
    if c.location is not None:
        return "[" + _format(c.location, 999) + "]" + body
    return body
