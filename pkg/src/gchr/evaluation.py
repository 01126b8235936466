"""Evaluation of built-ins over ground bindings.

Two routes are provided: ``eval_expr``/``eval_guard`` interpret terms
directly (used by the brute-force oracle), while the ``compile_*`` functions
turn rule fragments into closures for the engines.
"""

from __future__ import annotations

from typing import Callable

from .errors import EvalError
from .syntax import ARITH_FUNCTORS, is_binder
from .terms import (Compound, Constraint, Term, Var, format_constraint,
                    format_term, list_items)

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1

Bindings = dict


def _check(value: int) -> int:
    if value < INT_MIN or value > INT_MAX:
        raise EvalError(f"integer overflow: {value}")
    return value


def _div(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return _check(q if (a >= 0) == (b >= 0) else -q)


def _mod(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    return a % b


_BINARY = {
    "+": lambda a, b: _check(a + b),
    "-": lambda a, b: _check(a - b),
    "*": lambda a, b: _check(a * b),
    "//": _div,
    "mod": _mod,
    "min": min,
    "max": max,
}


def is_arith(term: Term) -> bool:
    return isinstance(term, Compound) and (term.functor, len(term.args)) in ARITH_FUNCTORS


def eval_expr(t: Term, b: Bindings) -> int:
    """Exact integer value of arithmetic expression ``t``."""
    if isinstance(t, bool):
        return int(t)
    if isinstance(t, int):
        return _check(t)
    if isinstance(t, Var):
        if t.name not in b:
            raise EvalError(f"unbound variable {t.name}")
        return eval_expr(b[t.name], {})
    if isinstance(t, str):
        raise EvalError(f"non-numeric atom {t}")
    if (t.functor, len(t.args)) not in ARITH_FUNCTORS:
        raise EvalError(f"not an arithmetic expression: {format_term(t)}")
    if len(t.args) == 1:
        return _check(-eval_expr(t.args[0], b))
    return _BINARY[t.functor](eval_expr(t.args[0], b), eval_expr(t.args[1], b))


def ground_value(t: Term, b: Bindings) -> Term:
    """Instantiate ``t`` under ``b``, evaluating arithmetic subterms."""
    if isinstance(t, Var):
        if t.name not in b:
            raise EvalError(f"unbound variable {t.name}")
        return b[t.name]
    if isinstance(t, Compound):
        if is_arith(t):
            return eval_expr(t, b)
        return Compound(t.functor, [ground_value(a, b) for a in t.args])
    return t


def instantiate(c: Constraint, b: Bindings) -> Constraint:
    loc = None if c.location is None else ground_value(c.location, b)
    return Constraint(c.symbol, [ground_value(a, b) for a in c.args], c.kind, loc)


_COMPARE = {
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "=<": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "=:=": lambda a, b: a == b,
    "=\\=": lambda a, b: a != b,
}


def _structural(t: Term, b: Bindings) -> Term:
    if isinstance(t, Var):
        if t.name not in b:
            raise EvalError(f"unbound variable {t.name}")
        return b[t.name]
    if isinstance(t, Compound):
        return Compound(t.functor, [_structural(a, b) for a in t.args])
    return t


def eval_guard(g: Constraint, b: Bindings) -> tuple[bool, Bindings]:
    """Evaluate built-in ``g``; binders return extended bindings."""
    sym = g.symbol
    if sym == "true":
        return True, b
    if len(g.args) != 2:
        raise EvalError(f"unknown built-in {format_constraint(g)}")
    lhs, rhs = g.args
    if is_binder(g, set(b)):
        value = eval_expr(rhs, b) if sym == "=:=" else _structural(rhs, b)
        extended = dict(b)
        extended[lhs.name] = value
        return True, extended
    if sym in _COMPARE:
        return _COMPARE[sym](eval_expr(lhs, b), eval_expr(rhs, b)), b
    if sym in ("==", "="):
        return _structural(lhs, b) == _structural(rhs, b), b
    if sym in ("\\==", "\\="):
        return _structural(lhs, b) != _structural(rhs, b), b
    if sym == "in":
        items = list_items(_structural(rhs, b))
        if items is None:
            raise EvalError(f"right side of `in` is not a list: {format_constraint(g)}")
        return _structural(lhs, b) in items, b
    raise EvalError(f"unknown built-in {format_constraint(g)}")


# -- compiled closures --------------------------------------------------------

def compile_expr(t: Term) -> Callable[[Bindings], int]:
    if isinstance(t, int):
        value = _check(int(t))
        return lambda b: value
    if isinstance(t, Var):
        name = t.name

        def var(b):
            v = b[name]
            if type(v) is not int:
                raise EvalError(f"non-numeric value for {name}: {format_term(v)}")
            return v
        return var
    if isinstance(t, str):
        def atom(b, t=t):
            raise EvalError(f"non-numeric atom {t}")
        return atom
    if (t.functor, len(t.args)) not in ARITH_FUNCTORS:
        def bad(b, t=t):
            raise EvalError(f"not an arithmetic expression: {format_term(t)}")
        return bad
    if len(t.args) == 1:
        inner = compile_expr(t.args[0])
        return lambda b: _check(-inner(b))
    left, right = compile_expr(t.args[0]), compile_expr(t.args[1])
    op = t.functor
    if op == "+":
        return lambda b: _check(left(b) + right(b))
    if op == "-":
        return lambda b: _check(left(b) - right(b))
    if op == "mod":
        return lambda b: _mod(left(b), right(b))
    fn = _BINARY[op]
    return lambda b: fn(left(b), right(b))


def compile_value(t: Term) -> Callable[[Bindings], Term]:
    """Closure building the ground instance of ``t`` (arithmetic evaluated)."""
    if isinstance(t, Var):
        name = t.name
        return lambda b: b[name]
    if isinstance(t, Compound):
        if is_arith(t):
            return compile_expr(t)
        parts = [compile_value(a) for a in t.args]
        functor = t.functor
        return lambda b: Compound(functor, [p(b) for p in parts])
    return lambda b: t


def compile_structural(t: Term) -> Callable[[Bindings], Term]:
    if isinstance(t, Var):
        name = t.name
        return lambda b: b[name]
    if isinstance(t, Compound):
        parts = [compile_structural(a) for a in t.args]
        functor = t.functor
        return lambda b: Compound(functor, [p(b) for p in parts])
    return lambda b: t


def compile_builtin(g: Constraint, bound: set[str]):
    """Compile a built-in given the statically bound variables.

    Returns ``("test", fn)`` with ``fn(b) -> bool`` or ``("bind", name, fn)``
    with ``fn(b) -> value``.
    """
    sym = g.symbol
    if sym == "true":
        return ("test", lambda b: True)
    lhs, rhs = g.args
    if is_binder(g, bound):
        fn = compile_expr(rhs) if sym == "=:=" else compile_structural(rhs)
        return ("bind", lhs.name, fn)
    if sym in _COMPARE:
        left, right = compile_expr(lhs), compile_expr(rhs)
        cmp = _COMPARE[sym]
        return ("test", lambda b: cmp(left(b), right(b)))
    left, right = compile_structural(lhs), compile_structural(rhs)
    if sym in ("==", "="):
        return ("test", lambda b: left(b) == right(b))
    if sym in ("\\==", "\\="):
        return ("test", lambda b: left(b) != right(b))
    if sym == "in":
        def member(b):
            items = list_items(right(b))
            if items is None:
                raise EvalError(f"right side of `in` is not a list: {format_constraint(g)}")
            return left(b) in items
        return ("test", member)
    raise EvalError(f"unknown built-in {format_constraint(g)}")
