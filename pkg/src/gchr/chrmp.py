"""Massively parallel set-based execution.

The state is a set.  One step collects every applicable rule instance,
applies a chosen subset of them at once (all of them under the exhaustive
policy), removes the union of their removed heads and adds the union of their
bodies.  A step is sound when the relation "kept constraint c is needed to
remove d" over the applied instances is acyclic; cyclic steps are executed
anyway but reported.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from itertools import product

from .engine_seq import DEFAULT_FUEL, matcher_for
from .errors import FragmentError, NonTermination, StuckBuiltin
from .matching import all_matches, store_lookup
from .oracle import Instance, reachable_finals
from .store import Store
from .syntax import Program, Rule, check_fragment
from .terms import Constraint, Var, sort_constraints

SetState = frozenset


@dataclass(frozen=True)
class MpInstance:
    rule: Rule
    kept: tuple[Constraint, ...]
    removed: tuple[Constraint, ...]
    added: tuple[Constraint, ...]

    def __str__(self):
        kept = ", ".join(map(str, self.kept))
        removed = ", ".join(map(str, self.removed))
        return f"{self.rule.name}: {kept} \\ {removed}"


def collect_instances(p: Program, s) -> list[MpInstance]:
    """All rule instances whose heads are distinct members of ``s``.

    Every instance is enumerated once, from the first head position, against a
    scratch store holding one copy of each element.
    """
    matcher = matcher_for(p)
    store = Store()
    items = [(store.insert(c), c) for c in sort_constraints(set(s))]
    lookup = store_lookup(store)
    out = []
    seen = set()
    for rule in p.rules:
        plan = matcher.first[rule.name]
        body = matcher.bodies[rule.name]
        symbol, arity = rule.heads[0][0].predicate
        for ident, c in items:
            if c.predicate != (symbol, arity):
                continue
            for m in all_matches(plan, ident, c, lookup):
                k = len(rule.kept)
                key = (rule.name, m.constraints)
                if key in seen:
                    continue
                seen.add(key)
                try:
                    added = body(m.bindings)
                except StuckBuiltin:
                    continue
                out.append(MpInstance(rule, m.constraints[:k], m.constraints[k:], tuple(added)))
    return out


def massive_step(s, instances) -> SetState:
    instances = list(instances)
    if not instances:
        raise ValueError("a massive step needs at least one rule instance")
    deleted = {c for inst in instances for c in inst.removed}
    added = {c for inst in instances for c in inst.added}
    return SetState((set(s) - deleted) | added)


def deletion_dependency(s, instances) -> set[tuple[Constraint, Constraint]]:
    """Pairs (c, d): kept head c of some instance is needed to remove d."""
    return {(c, d) for inst in instances for c in inst.kept for d in inst.removed}


def is_acyclic_step(relation) -> bool:
    """True iff the transitive closure of ``relation`` is irreflexive."""
    graph: dict = {}
    for a, b in relation:
        if a == b:
            return False
        graph.setdefault(b, set()).add(a)
    try:
        tuple(TopologicalSorter(graph).static_order())
    except CycleError:
        return False
    return True


@dataclass
class MpResult:
    final: SetState
    steps: int
    acyclic: list[bool] = field(default_factory=list)
    history: list[SetState] = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return all(self.acyclic)

    @property
    def report(self) -> str:
        return "ACYCLIC" if self.sound else "CYCLIC"

    def sorted(self) -> list[Constraint]:
        return sort_constraints(self.final)

    @property
    def alive(self) -> Counter:
        return Counter(self.final)


def _chooser(policy: str):
    if policy == "exhaustive":
        return lambda instances: instances
    if policy.startswith("random:"):
        rng = random.Random(int(policy.split(":", 1)[1]))

        def choose(instances):
            picked = [inst for inst in instances if rng.random() < 0.5]
            return picked or [rng.choice(instances)]
        return choose
    raise ValueError(f"unknown policy {policy!r}; use exhaustive or random:<seed>")


def run_mp(p: Program, goal, policy: str = "exhaustive", fuel: int = DEFAULT_FUEL,
           keep_history: bool = False) -> MpResult:
    errors = check_fragment(p, "mp").errors
    if errors:
        raise FragmentError(errors)
    choose = _chooser(policy)
    state = SetState(goal)
    result = MpResult(state, 0)
    if keep_history:
        result.history.append(state)
    while True:
        instances = collect_instances(p, state)
        if not instances:
            break
        if result.steps >= fuel:
            raise NonTermination(result.steps)
        chosen = choose(instances)
        result.acyclic.append(is_acyclic_step(deletion_dependency(state, chosen)))
        state = massive_step(state, chosen)
        result.steps += 1
        if keep_history:
            result.history.append(state)
    result.final = state
    return result


# -- set-rules and soundness replay --------------------------------------------

def set_rule_name(symbol: str, arity: int) -> str:
    return f"set_{symbol}_{arity}"


def add_set_rules(p: Program) -> Program:
    """Prepend ``c(X1..Xn) \\ c(X1..Xn) <=> true`` for every user predicate."""
    existing = {r.name for r in p.rules}
    new = []
    for symbol, arity in p.user_predicates():
        name = set_rule_name(symbol, arity)
        if name in existing:
            continue
        head = Constraint(symbol, [Var(f"X{i + 1}") for i in range(arity)])
        new.append(Rule(name, (head,), (head,)))
    return p.replace(rules=tuple(new) + p.rules) if new else p


def predicate_lint(p: Program) -> bool:
    """Conservative static check: no cycle among "may keep to remove" edges
    between predicates.  True means every step is guaranteed acyclic."""
    edges = set()
    for r in p.rules:
        for k in r.kept:
            for d in r.removed:
                edges.add((k.predicate, d.predicate))
    return is_acyclic_step(edges)


def replay_with_set_rules(p: Program, goal, final, max_copies: int = 2,
                          max_states: int = 10 ** 4) -> Counter | None:
    """A multiset goal with the support of ``goal`` whose run under ``p`` plus
    set-rules can end in a state with the support of ``final``.

    Multiplicities from 1 to ``max_copies`` are tried per goal constraint;
    returns the first witness, or None.
    """
    q = add_set_rules(p)
    support = sort_constraints(set(goal))
    target = set(final)
    for counts in product(range(1, max_copies + 1), repeat=len(support)):
        start = Counter(dict(zip(support, counts)))
        finals = reachable_finals(q, start, max_states)
        if any(set(f) == target for f in finals):
            return start
    return None


def oracle_instance(inst: Instance) -> MpInstance:
    body = inst.body() or []
    return MpInstance(inst.rule, inst.kept, inst.removed, tuple(body))
