"""Rules, programs and their static analyses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .terms import (Constraint, Var, constraint_vars, format_atom,
                    format_constraint, term_vars)

# Built-in constraint symbols.  ``\=`` is accepted as ground disequality
# (same meaning as ``\==`` once both sides are ground).
GUARD_SYMBOLS = frozenset(
    ["<", "=<", ">", ">=", "=:=", "=\\=", "==", "\\==", "\\=", "=", "in"])
BUILTIN_SYMBOLS = GUARD_SYMBOLS | {"true"}
BINDER_SYMBOLS = frozenset(["=:=", "="])
ARITH_FUNCTORS = {("+", 2), ("-", 2), ("*", 2), ("//", 2), ("mod", 2),
                  ("min", 2), ("max", 2), ("-", 1)}

ENGINES = ("seq", "par", "mp", "chrt", "chre")


@dataclass(frozen=True, eq=False)
class Rule:
    name: str
    kept: tuple[Constraint, ...]
    removed: tuple[Constraint, ...]
    guard: tuple[Constraint, ...] = ()
    body: tuple[Constraint, ...] = ()

    def __post_init__(self):
        if not self.kept and not self.removed:
            raise ValueError(f"rule {self.name}: empty head")

    @property
    def kind(self) -> str:
        if not self.removed:
            return "propagation"
        if not self.kept:
            return "simplification"
        return "simpagation"

    @property
    def heads(self) -> list[tuple[Constraint, bool]]:
        """Head constraints in textual order paired with their removed flag."""
        return [(c, False) for c in self.kept] + [(c, True) for c in self.removed]

    def head_vars(self) -> set[str]:
        names: set[str] = set()
        for c in self.kept + self.removed:
            names.update(constraint_vars(c))
        return names

    def __repr__(self):
        return format_rule(self)


@dataclass(eq=False)
class Program:
    rules: tuple[Rule, ...]
    constants: dict[str, int] = field(default_factory=dict)
    data_preds: frozenset = frozenset()
    op_preds: frozenset = frozenset()
    dialect: str = "plain"

    def __post_init__(self):
        self.rules = tuple(self.rules)
        names = [r.name for r in self.rules]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"duplicate rule names: {sorted(dupes)}")
        overlap = set(self.data_preds) & set(self.op_preds)
        if overlap:
            raise ValueError(f"predicates declared both data and operation: {sorted(overlap)}")

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def has_propagation(self) -> bool:
        return any(r.kind == "propagation" for r in self.rules)

    def user_predicates(self) -> list[tuple[str, int]]:
        """User predicates mentioned anywhere in the program, in first-seen order."""
        seen: dict[tuple[str, int], None] = {}
        for r in self.rules:
            for c in r.kept + r.removed + r.body:
                if not c.is_builtin:
                    seen.setdefault(c.predicate)
        return list(seen)

    def replace(self, **changes) -> "Program":
        values = dict(rules=self.rules, constants=dict(self.constants),
                      data_preds=self.data_preds, op_preds=self.op_preds,
                      dialect=self.dialect)
        values.update(changes)
        return Program(**values)

    def __str__(self):
        return format_program(self)


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    message: str
    variable: str | None = None
    severity: str = "error"

    def __str__(self):
        where = f"rule {self.rule}" if self.rule else "program"
        return f"{self.severity}: {where}: {self.message}"


# -- printing -----------------------------------------------------------------

def _conj(cs: Iterable[Constraint]) -> str:
    return ", ".join(format_constraint(c) for c in cs)


def format_rule(r: Rule) -> str:
    text = f"{r.name} : "
    if r.kind == "propagation":
        text += _conj(r.kept) + " ==> "
    elif r.kind == "simplification":
        text += _conj(r.removed) + " <=> "
    else:
        text += _conj(r.kept) + " \\ " + _conj(r.removed) + " <=> "
    if r.guard:
        text += _conj(r.guard) + " | "
    text += _conj(r.body) if r.body else "true"
    return text + "."


def format_program(p: Program) -> str:
    lines = []
    if p.dialect != "plain":
        lines.append(f"#dialect {p.dialect}.")
    for name, value in p.constants.items():
        lines.append(f"#const {name} = {value}.")
    if p.data_preds:
        lines.append("#data " + ", ".join(f"{format_atom(s)}/{n}" for s, n in sorted(p.data_preds)) + ".")
    if p.op_preds:
        lines.append("#operation " + ", ".join(f"{format_atom(s)}/{n}" for s, n in sorted(p.op_preds)) + ".")
    lines.extend(format_rule(r) for r in p.rules)
    return "\n".join(lines) + "\n"


# -- ground-range analysis ----------------------------------------------------

def is_binder(c: Constraint, bound: set[str]) -> bool:
    """True when built-in ``c`` binds a fresh variable instead of testing."""
    if c.symbol not in BINDER_SYMBOLS or len(c.args) != 2:
        return False
    lhs = c.args[0]
    return isinstance(lhs, Var) and lhs.name not in bound


def _builtin_diagnostics(rule_name: str, c: Constraint, bound: set[str], where: str):
    diags = []
    if is_binder(c, bound):
        target, rest = c.args[0].name, [c.args[1]]
    else:
        target, rest = None, list(c.args)
    for arg in rest:
        for name in term_vars(arg):
            if name not in bound:
                diags.append(Diagnostic(rule_name, f"variable {name} unbound in {where} {format_constraint(c)}", name))
    if target is not None:
        bound.add(target)
    return diags


def validate_ground(p: Program) -> list[Diagnostic]:
    """Range-restriction check: every variable must be bound by the head or
    by a binding built-in that precedes its use."""
    diags: list[Diagnostic] = []
    for r in p.rules:
        bound = r.head_vars()
        for g in r.guard:
            diags.extend(_builtin_diagnostics(r.name, g, bound, "guard"))
        for b in r.body:
            if b.is_builtin:
                diags.extend(_builtin_diagnostics(r.name, b, bound, "body"))
                continue
            for name in constraint_vars(b):
                if name not in bound:
                    diags.append(Diagnostic(r.name, f"variable {name} unbound in body {format_constraint(b)}", name))
    return diags


# -- matching graph / direct indexing ----------------------------------------

@dataclass
class Graph:
    vertices: list[Constraint]
    edges: set[tuple[int, int]]

    def connected(self) -> bool:
        if len(self.vertices) <= 1:
            return True
        adjacency: dict[int, set[int]] = {i: set() for i in range(len(self.vertices))}
        for a, b in self.edges:
            adjacency[a].add(b)
            adjacency[b].add(a)
        seen, todo = {0}, [0]
        while todo:
            for nxt in adjacency[todo.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        return len(seen) == len(self.vertices)


def matching_graph(r: Rule) -> Graph:
    heads = list(r.kept + r.removed)
    var_sets = [set(constraint_vars(c)) for c in heads]
    edges = {(i, j) for i in range(len(heads)) for j in range(i + 1, len(heads))
             if var_sets[i] & var_sets[j]}
    return Graph(heads, edges)


def is_direct_indexed(r: Rule) -> bool:
    return matching_graph(r).connected()


# -- n-neighbor restriction (CHRe) ------------------------------------------

@dataclass(frozen=True)
class NeighborInfo:
    primary: object          # location term (Var or ground term)
    neighbors: tuple
    n: int


def _loc_key(loc):
    return ("var", loc.name) if isinstance(loc, Var) else ("const", loc)


def neighbor_info(r: Rule) -> NeighborInfo | None:
    """Primary location and neighbors when ``r`` is n-neighbor restricted."""
    heads = r.kept + r.removed
    if any(c.location is None for c in heads):
        return None
    groups: dict[tuple, list[Constraint]] = {}
    locs: dict[tuple, object] = {}
    for c in heads:
        key = _loc_key(c.location)
        groups.setdefault(key, []).append(c)
        locs[key] = c.location
    keys = list(groups)
    if len(keys) == 1:
        return NeighborInfo(locs[keys[0]], (), 0)

    def group_vars(key):
        names = set()
        for c in groups[key]:
            names.update(constraint_vars(c))
        return names

    def arg_vars(key):
        names = set()
        for c in groups[key]:
            for a in c.args:
                names.update(term_vars(a))
        return names

    for primary in keys:
        others = [k for k in keys if k != primary]
        # primary must be directly connected to every neighbor
        pargs = arg_vars(primary)
        if not all(k[0] == "var" and k[1] in pargs for k in others):
            continue
        pvars = group_vars(primary)
        ok = True
        for i, a in enumerate(others):
            for b in others[i + 1:]:
                if (group_vars(a) & group_vars(b)) - pvars:
                    ok = False
        if not ok:
            continue
        for g in r.guard:
            gv = set(constraint_vars(g))
            touched = [k for k in others if gv & (group_vars(k) - pvars)]
            if len(touched) > 1:
                ok = False
        if ok:
            return NeighborInfo(locs[primary], tuple(locs[k] for k in others), len(others))
    return None


class FragmentReport(list):
    """Diagnostics list that also carries per-rule neighbor information."""

    def __init__(self, diagnostics=(), locations=None):
        super().__init__(diagnostics)
        self.locations: dict[str, NeighborInfo] = locations or {}

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self if d.severity == "error"]


def _head_ops(p: Program, r: Rule) -> list[Constraint]:
    return [c for c in r.kept + r.removed if c.predicate in p.op_preds]


def check_fragment(p: Program, engine: str) -> FragmentReport:
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    report = FragmentReport()
    for r in p.rules:
        if engine in ("par", "mp") and r.kind == "propagation":
            report.append(Diagnostic(r.name, f"propagation rules are not supported by engine {engine}"))
        if engine in ("par", "mp"):
            added = sum(1 for b in r.body if not b.is_builtin)
            if added > len(r.removed):
                report.append(Diagnostic(r.name, f"rule increases store size ({len(r.removed)} removed, {added} added)",
                                         severity="info"))
        if engine == "chrt":
            if not p.op_preds:
                report.append(Diagnostic("", "transactional programs need #operation declarations"))
                break
            ops = _head_ops(p, r)
            if len(ops) != 1:
                report.append(Diagnostic(r.name, f"head must contain exactly one operation constraint, found {len(ops)}"))
        if engine == "chre":
            info = neighbor_info(r)
            if info is None:
                report.append(Diagnostic(r.name, "rule is not n-neighbor restricted"))
            else:
                report.locations[r.name] = info
                if info.n > 1:
                    report.append(Diagnostic(r.name, f"{info.n}-neighbor rule cannot be encoded into local rules",
                                             severity="warning"))
    if engine != "chre":
        for r in p.rules:
            for c in r.kept + r.removed + r.body:
                if c.location is not None:
                    report.append(Diagnostic(r.name, f"located constraint {format_constraint(c)} outside chre"))
                    break
    return report

