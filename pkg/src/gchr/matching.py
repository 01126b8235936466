"""Compiled head matching.

For every rule head position that an active constraint can occupy, a join
plan fixes the order in which the remaining heads are searched (most shared
variables first, ties by textual position), the index key used for each
partner lookup, and the earliest point at which each guard conjunct can be
evaluated.  Plans are then turned into Python source: one nested loop per
partner head with head matching and guard tests inlined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import evaluation as ev
from .errors import EvalError, StuckBuiltin
from .store import ALIVE, LOCATION, Store
from .syntax import ARITH_FUNCTORS, Program, Rule, is_binder
from .terms import (Compound, Constraint, Term, Var, constraint_vars,
                    list_items, term_vars)


@dataclass
class Match:
    rule: Rule
    ids: tuple[int, ...]                 # one id per head, textual order
    constraints: tuple[Constraint, ...]  # the matched constraints, same order
    bindings: dict

    @property
    def kept(self) -> tuple[int, ...]:
        return self.ids[:len(self.rule.kept)]

    @property
    def removed(self) -> tuple[int, ...]:
        return self.ids[len(self.rule.kept):]


@dataclass
class HeadStep:
    position: int
    head: Constraint
    key: tuple[int, Term] | None     # (argument position, pattern fixing the key)


@dataclass
class GuardStep:
    guard: Constraint
    binds: str | None                # variable bound by this step, if any


@dataclass
class Plan:
    rule: Rule
    active: int                      # head position of the active constraint
    steps: list = field(default_factory=list)
    fn: Callable | None = None
    source: str = ""


def _key_for(head: Constraint, bound: set[str], prefer_location: bool = False):
    """First argument position whose value is fixed by ``bound``."""
    positions = list(enumerate(head.args))
    if head.location is not None:
        if prefer_location:
            positions.insert(0, (LOCATION, head.location))
        else:
            positions.append((LOCATION, head.location))
    for pos, arg in positions:
        if all(v in bound for v in term_vars(arg)):
            return pos, arg
    return None


def compile_plan(rule: Rule, active: int, prefer_location: bool = False) -> Plan:
    heads = [c for c, _ in rule.heads]
    plan = Plan(rule, active)
    bound = set(constraint_vars(heads[active]))

    # Whether a guard binds or tests follows the textual guard order.
    static_bound = rule.head_vars()
    pending = []
    for g in rule.guard:
        if is_binder(g, static_bound):
            static_bound.add(g.args[0].name)
            needs = set(term_vars(g.args[1]))
        else:
            needs = set(constraint_vars(g))
        pending.append((g, needs))

    def schedule_guards():
        progress = True
        while progress:
            progress = False
            for item in pending:
                g, needs = item
                early = (g.symbol in ("=:=", "=") and isinstance(g.args[0], Var)
                         and g.args[0].name not in bound
                         and set(term_vars(g.args[1])) <= bound)
                if not (needs <= bound or early):
                    continue
                binds = g.args[0].name if is_binder(g, bound) else None
                plan.steps.append(GuardStep(g, binds))
                if binds:
                    bound.add(binds)
                pending.remove(item)
                progress = True
                break

    schedule_guards()
    remaining = [i for i in range(len(heads)) if i != active]
    while remaining:
        best = max(remaining, key=lambda i: (len(set(constraint_vars(heads[i])) & bound), -i))
        remaining.remove(best)
        plan.steps.append(HeadStep(best, heads[best], _key_for(heads[best], bound, prefer_location)))
        bound.update(constraint_vars(heads[best]))
        schedule_guards()
    for g, _ in pending:   # only for programs that fail validation: errors at run time
        plan.steps.append(GuardStep(g, None))
    plan.fn, plan.source = _generate(plan)
    return plan


# -- code generation ------------------------------------------------------------

def _nonnum(v):
    raise EvalError(f"non-numeric value {v!r}")


def _unbound(name):
    raise EvalError(f"unbound variable {name}")


def _member(x, lst):
    items = list_items(lst)
    if items is None:
        raise EvalError(f"right side of `in` is not a list: {lst!r}")
    return x in items


_RUNTIME = {
    "Compound": Compound, "_chk": ev._check, "_div": ev._div, "_mod": ev._mod,
    "_nonnum": _nonnum, "_member": _member, "_unbound": _unbound,
}


class _Gen:
    def __init__(self):
        self.lines: list[str] = []
        self.consts: dict[str, object] = {}
        self.tmp = 0

    def const(self, value) -> str:
        if isinstance(value, (int, str)) and not isinstance(value, bool):
            return repr(value)
        name = f"K{len(self.consts)}"
        self.consts[name] = value
        return name

    def fresh(self, prefix="t") -> str:
        self.tmp += 1
        return f"{prefix}{self.tmp}"

    def emit(self, depth: int, line: str):
        self.lines.append("    " * depth + line)

    # structural value of a term whose variables are all bound
    def value(self, t: Term, bound: set[str]) -> str:
        if isinstance(t, Var):
            return f"v_{t.name}" if t.name in bound else f"_unbound({t.name!r})"
        if isinstance(t, Compound):
            if any(True for _ in term_vars(t)):
                return f"Compound({t.functor!r}, (" + "".join(self.value(a, bound) + ", " for a in t.args) + "))"
            return self.const(t)
        return self.const(t)

    # integer value of an arithmetic expression
    def arith(self, t: Term, bound: set[str]) -> str:
        if isinstance(t, bool):
            t = int(t)
        if isinstance(t, int):
            return repr(ev._check(t))
        if isinstance(t, Var):
            if t.name not in bound:
                return f"_unbound({t.name!r})"
            v = f"v_{t.name}"
            return f"({v} if {v}.__class__ is int else _nonnum({v}))"
        if isinstance(t, str):
            return f"_nonnum({t!r})"
        if (t.functor, len(t.args)) not in ARITH_FUNCTORS:
            return f"_nonnum({self.const(t)})"
        if len(t.args) == 1:
            return f"_chk(-{self.arith(t.args[0], bound)})"
        a, b = (self.arith(x, bound) for x in t.args)
        op = t.functor
        if op in ("+", "-", "*"):
            return f"_chk({a} {op} {b})"
        if op == "//":
            return f"_div({a}, {b})"
        if op == "mod":
            return f"_mod({a}, {b})"
        return f"{op}({a}, {b})"

    def test(self, g: Constraint, bound: set[str]) -> str:
        sym = g.symbol
        if sym == "true":
            return "True"
        lhs, rhs = g.args
        ops = {"<": "<", ">": ">", "=<": "<=", ">=": ">=", "=:=": "==", "=\\=": "!="}
        if sym in ops:
            return f"{self.arith(lhs, bound)} {ops[sym]} {self.arith(rhs, bound)}"
        if sym in ("==", "="):
            return f"{self.value(lhs, bound)} == {self.value(rhs, bound)}"
        if sym in ("\\==", "\\="):
            return f"{self.value(lhs, bound)} != {self.value(rhs, bound)}"
        if sym == "in":
            return f"_member({self.value(lhs, bound)}, {self.value(rhs, bound)})"
        raise EvalError(f"unknown built-in {g!r}")

    def match(self, pattern: Term, expr: str, bound: set[str], depth: int, fail: str):
        if isinstance(pattern, Var):
            if pattern.name in bound:
                self.emit(depth, f"if {expr} != v_{pattern.name}: {fail}")
            else:
                self.emit(depth, f"v_{pattern.name} = {expr}")
                bound.add(pattern.name)
            return
        if isinstance(pattern, Compound):
            if not any(True for _ in term_vars(pattern)):
                self.emit(depth, f"if {expr} != {self.const(pattern)}: {fail}")
                return
            t = self.fresh()
            self.emit(depth, f"{t} = {expr}")
            self.emit(depth, f"if {t}.__class__ is not Compound or {t}.functor != {pattern.functor!r} "
                             f"or len({t}.args) != {len(pattern.args)}: {fail}")
            for i, arg in enumerate(pattern.args):
                self.match(arg, f"{t}.args[{i}]", bound, depth, fail)
            return
        self.emit(depth, f"if {expr} != {self.const(pattern)}: {fail}")

    def head(self, head: Constraint, c: str, bound: set[str], depth: int, fail: str):
        if head.location is not None:
            self.emit(depth, f"if {c}.location is None: {fail}")
            self.match(head.location, f"{c}.location", bound, depth, fail)
        if head.args:
            a = self.fresh("a")
            self.emit(depth, f"{a} = {c}.args")
            for i, arg in enumerate(head.args):
                self.match(arg, f"{a}[{i}]", bound, depth, fail)


def _generate(plan: Plan):
    g = _Gen()
    rule = plan.rule
    n = len(rule.heads)
    id_names = [None] * n
    c_names = [None] * n
    id_names[plan.active], c_names[plan.active] = "active_id", "active"
    bound: set[str] = set()
    g.emit(0, "def plan(active_id, active, lookup, accept, emit):")
    g.head(rule.heads[plan.active][0], "active", bound, 1, "return False")
    depth = 1
    fail = "return False"
    for step in plan.steps:
        if isinstance(step, GuardStep):
            if step.binds:
                expr = (g.arith(step.guard.args[1], bound) if step.guard.symbol == "=:="
                        else g.value(step.guard.args[1], bound))
                g.emit(depth, f"v_{step.binds} = {expr}")
                bound.add(step.binds)
            else:
                g.emit(depth, f"if not ({g.test(step.guard, bound)}): {fail}")
            continue
        k = step.position
        ident, c = f"i{k}", f"c{k}"
        key = "None"
        if step.key is not None:
            key = f"({step.key[0]}, {g.value(step.key[1], bound)})"
        head = step.head
        g.emit(depth, f"for {ident}, {c} in lookup({head.symbol!r}, {len(head.args)}, {key}):")
        depth += 1
        taken = [x for x in id_names if x is not None]
        g.emit(depth, "if " + " or ".join(f"{ident} == {x}" for x in taken) + ": continue")
        id_names[k], c_names[k] = ident, c
        fail = "continue"
        g.head(head, c, bound, depth, fail)
    ids = "(" + "".join(f"{x}, " for x in id_names) + ")"
    cs = "(" + "".join(f"{x}, " for x in c_names) + ")"
    b = "{" + ", ".join(f"{name!r}: v_{name}" for name in sorted(bound)) + "}"
    g.emit(depth, f"ids = {ids}")
    g.emit(depth, f"if (accept is None or accept(ids)) and emit(ids, {cs}, {b}): return True")
    g.emit(1, "return False")
    source = "\n".join(g.lines)
    namespace = dict(_RUNTIME)
    namespace.update(g.consts)
    exec(compile(source, f"<plan {rule.name}/{plan.active}>", "exec"), namespace)
    return namespace["plan"], source


# -- running plans ----------------------------------------------------------------

Lookup = Callable[[str, int, tuple | None], Iterable[tuple[int, Constraint]]]
Accept = Callable[[tuple], bool]


def store_lookup(store: Store, rotation: int = 0) -> Lookup:
    entries = store._entries

    def lookup(symbol: str, arity: int, key):
        ids = store.id_list(symbol, arity, key)
        if not ids:
            return ()
        if rotation:
            k = rotation % len(ids)
            ids = ids[k:] + ids[:k]
        return [(i, e.constraint) for i in ids if (e := entries[i]).state == ALIVE]
    return lookup


def run_plan(plan: Plan, active_id: int, active: Constraint, lookup: Lookup,
             accept: Accept | None = None) -> Match | None:
    """First complete head match with true guard, or None."""
    found = []

    def emit(ids, cs, b):
        found.append(Match(plan.rule, ids, cs, b))
        return True
    plan.fn(active_id, active, lookup, accept, emit)
    return found[0] if found else None


def all_matches(plan: Plan, active_id: int, active: Constraint, lookup: Lookup,
                accept: Accept | None = None) -> list[Match]:
    found = []

    def emit(ids, cs, b):
        found.append(Match(plan.rule, ids, cs, b))
        return False
    plan.fn(active_id, active, lookup, accept, emit)
    return found


class Matcher:
    """Plans for every occurrence of every predicate in a program."""

    def __init__(self, program: Program, prefer_location: bool = False):
        self.program = program
        self.occurrences: dict[tuple[str, int], list[Plan]] = {}
        self.first: dict[str, Plan] = {}
        for rule in program.rules:
            for pos, (head, _) in enumerate(rule.heads):
                plan = compile_plan(rule, pos, prefer_location)
                self.occurrences.setdefault(head.predicate, []).append(plan)
                if pos == 0:
                    self.first[rule.name] = plan
        self.bodies = {rule.name: compile_body(rule) for rule in program.rules}

    def plans(self, c: Constraint) -> list[Plan]:
        return self.occurrences.get(c.predicate, [])


def compile_body(rule: Rule):
    """Closure instantiating the body: built-ins are evaluated in order
    (binders extend the bindings), user constraints come back ground."""
    bound = rule.head_vars()
    for g in rule.guard:
        if is_binder(g, bound):
            bound.add(g.args[0].name)
    steps = []
    for c in rule.body:
        if c.is_builtin:
            kind, *rest = ev.compile_builtin(c, bound)
            if kind == "bind":
                bound.add(rest[0])
            steps.append((kind, rest, c))
        else:
            loc = None if c.location is None else ev.compile_value(c.location)
            args = [ev.compile_value(a) for a in c.args]
            steps.append(("user", (c.symbol, args, loc), c))

    def instantiate(b: dict) -> list[Constraint]:
        b = dict(b)
        out = []
        for kind, rest, c in steps:
            if kind == "user":
                symbol, args, loc = rest
                out.append(Constraint(symbol, [a(b) for a in args], "user",
                                      None if loc is None else loc(b)))
            elif kind == "bind":
                name, fn = rest
                b[name] = fn(b)
            elif not rest[0](b):
                raise StuckBuiltin(f"rule {rule.name}: body built-in {c!r} is false")
        return out
    return instantiate
