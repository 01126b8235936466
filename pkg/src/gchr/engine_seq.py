"""Sequential refined execution.

A goal constraint is activated (stored under a fresh id) and then tries the
occurrences of its predicate in program order.  The first occurrence with a
complete partner match and a true guard fires; otherwise the constraint moves
on to the next occurrence and finally stays suspended in the store.  Since
all constraints are ground, a suspended constraint never needs waking up: any
later rule instance that involves it is found by the newer constraint's own
activation.
"""

from __future__ import annotations

import weakref
from collections import Counter, deque
from dataclasses import dataclass, field

from .errors import NonTermination
from .matching import Match, Matcher, run_plan, store_lookup
from .store import Store
from .syntax import Program, Rule
from .terms import Constraint, format_constraint, sort_constraints

DEFAULT_FUEL = 10 ** 7
_MATCHERS: "weakref.WeakKeyDictionary[Program, Matcher]" = weakref.WeakKeyDictionary()


def matcher_for(p: Program) -> Matcher:
    m = _MATCHERS.get(p)
    if m is None:
        m = _MATCHERS[p] = Matcher(p)
    return m


@dataclass
class Delta:
    """One rule application: which stored constraints were kept and removed."""

    rule: str
    kept: tuple[int, ...]
    removed: tuple[int, ...]
    kept_constraints: tuple[Constraint, ...] = ()
    removed_constraints: tuple[Constraint, ...] = ()
    bindings: dict = field(default_factory=dict)
    added: tuple[Constraint, ...] = ()
    worker: int | None = None
    seq: int | None = None

    @property
    def heads(self) -> tuple[Constraint, ...]:
        return self.kept_constraints + self.removed_constraints

    @classmethod
    def from_match(cls, m: Match, added=()) -> "Delta":
        k = len(m.rule.kept)
        return cls(m.rule.name, m.ids[:k], m.ids[k:], m.constraints[:k], m.constraints[k:],
                   m.bindings, tuple(added))

    def format(self, step: int) -> str:
        def ids(xs):
            return "[" + ",".join(str(i) for i in xs) + "]"

        def cs(xs):
            return "[" + ",".join(format_constraint(c) for c in xs) + "]"
        text = (f"step={step} rule={self.rule} kept={ids(self.kept)} removed={ids(self.removed)} "
                f"added={cs(self.added)} heads={cs(self.heads)}")
        if self.worker is not None:
            text += f" worker={self.worker} seq={self.seq}"
        return text


@dataclass
class FinalResult:
    alive: Counter
    trace: list[Delta]
    steps: int

    def sorted(self) -> list[Constraint]:
        return sort_constraints(self.alive.elements())


@dataclass
class Active:
    """An activated goal ``c#id`` about to try its ``occ``-th occurrence."""

    id: int
    constraint: Constraint
    occ: int = 0


class ExecState:
    def __init__(self, goal=(), goal_order: str = "stack", store: Store | None = None):
        if goal_order not in ("stack", "queue"):
            raise ValueError(f"goal order must be stack or queue, not {goal_order!r}")
        self.goals: deque = deque(goal)
        self.store = store if store is not None else Store()
        self.lookup = store_lookup(self.store)
        self.history: set[tuple[str, tuple[int, ...]]] = set()
        self.mode = goal_order
        self.steps = 0

    def push_body(self, body: list[Constraint]) -> None:
        if self.mode == "stack":
            self.goals.extendleft(reversed(body))
        else:
            self.goals.extend(body)


class Done:
    """Returned by :func:`step` when no transition applies."""

    def __repr__(self):
        return "Done"


DONE = Done()


def match_occurrence(p: Program, s: Store, active: tuple[int, Constraint], rule: Rule,
                     occ: int, history: set | None = None) -> Delta | None:
    """Try ``active`` at head position ``occ`` of ``rule``; δ of the first match."""
    plan = next(pl for pl in matcher_for(p).plans(active[1]) if pl.rule is rule and pl.active == occ)
    m = run_plan(plan, active[0], active[1], store_lookup(s), _history_filter(history, rule))
    return None if m is None else Delta.from_match(m)


def _history_filter(history, rule: Rule):
    """Propagation rules fire at most once per tuple of ids."""
    if history is None or rule.removed:
        return None
    name = rule.name

    def accept(ids: tuple) -> bool:
        return (name, ids) not in history
    return accept


def apply_match(st: ExecState, matcher: Matcher, m: Match) -> Delta:
    """Commit a match found on ``st.store``: kill removed ids, record history,
    instantiate the body."""
    rule = m.rule
    added = matcher.bodies[rule.name](m.bindings)
    for ident in m.removed:
        st.store.try_kill(ident)
    if not rule.removed:
        st.history.add((rule.name, m.ids))
    return Delta.from_match(m, added)


def step(p: Program, st: ExecState):
    """Apply exactly one transition.  Returns ``(st, delta_or_None)`` or DONE."""
    if not st.goals:
        return DONE
    matcher = matcher_for(p)
    item = st.goals.popleft()
    st.steps += 1
    if isinstance(item, Constraint):                        # Activate
        ident = st.store.insert(item)
        st.goals.appendleft(Active(ident, item, 0))
        return st, None
    if not st.store.is_alive(item.id):                      # removed meanwhile
        return st, None
    plans = matcher.plans(item.constraint)
    if item.occ >= len(plans):                              # Drop: stays suspended
        return st, None
    plan = plans[item.occ]
    m = run_plan(plan, item.id, item.constraint, st.lookup, _history_filter(st.history, plan.rule))
    if m is None:                                           # Default
        item.occ += 1
        st.goals.appendleft(item)
        return st, None
    delta = apply_match(st, matcher, m)
    if item.id not in m.removed:                            # Apply-Keep
        st.goals.appendleft(item)
    st.push_body(list(delta.added))
    return st, delta


def run(p: Program, goal, goal_order: str = "stack", fuel: int = DEFAULT_FUEL,
        trace: bool = True, store: Store | None = None) -> FinalResult:
    st = ExecState(goal, goal_order, store)
    log: list[Delta] = []
    while True:
        if st.steps >= fuel:
            raise NonTermination(st.steps)
        out = step(p, st)
        if out is DONE:
            break
        delta = out[1]
        if delta is not None and trace:
            log.append(delta)
    return FinalResult(st.store.alive(), log, st.steps)

