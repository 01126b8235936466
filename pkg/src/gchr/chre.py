"""Simulated distributed execution over an ensemble of locations.

Every location owns a buffer of delivered constraints, a goal stack, a local
store and a propagation history.  A location steps through the localized
refined transitions: Flush (an empty goal stack takes the whole buffer),
MoveLoc and DropLoc (a goal addressed to another location is sent there, one
addressed here loses its address), Activate, Remove, Keep, Suspend and Drop.

Rules whose heads all sit at one location run natively.  Rules spanning a
primary location and one neighbor either run natively as well, reading the
neighbor's store directly, or are first compiled into local rules that agree
through a two-phase commit exchange of protocol constraints.
"""

from __future__ import annotations

import random
import threading
from collections import Counter, deque
from dataclasses import dataclass, field
from itertools import count

from .engine_seq import DEFAULT_FUEL, Active, _history_filter
from .errors import CHRError, FragmentError, NonTermination, NotOneNeighbor, UnknownLocation
from .matching import Matcher, run_plan, store_lookup
from .store import LOCATION, Store
from .syntax import Program, Rule, check_fragment, neighbor_info
from .terms import (Constraint, Term, Var, constraint_vars, format_constraint,
                    format_term, sort_constraints, term_key)

SCHEDULES = ("rr", "rand:<seed>", "par")


class LocalState:
    def __init__(self, location: Term, ids):
        self.location = location
        self.buffer: deque[Constraint] = deque()
        self.goals: deque = deque()
        self.store = Store(ids)
        self.history: set = set()

    @property
    def busy(self) -> bool:
        return bool(self.goals or self.buffer)


class Transport:
    """FIFO delivery into destination buffers, with audit counters."""

    def __init__(self, ensemble: "Ensemble"):
        self.ensemble = ensemble
        self.lock = threading.Condition()
        self.sent = 0
        self.flushed = 0
        self.on_send = None

    def send(self, dest: Term, c: Constraint) -> None:
        target = self.ensemble.locations.get(dest)
        if target is None:
            raise UnknownLocation(f"no location {format_term(dest)} for {format_constraint(c)}")
        with self.lock:
            target.buffer.append(c)
            self.sent += 1
            if self.on_send is not None:
                self.on_send(dest)
            self.lock.notify_all()

    def take_all(self, loc: LocalState) -> list[Constraint]:
        with self.lock:
            items = list(loc.buffer)
            loc.buffer.clear()
            self.flushed += len(items)
            return items


class Ensemble:
    def __init__(self, p: Program, locations):
        self.program = p
        self.ids = count()
        self.locations: dict = {k: LocalState(k, self.ids) for k in locations}
        self.order = sorted(self.locations, key=term_key)
        self.transport = Transport(self)
        self.matcher = Matcher(p, prefer_location=True)
        report = check_fragment(p, "chre")
        self.native_neighbors = any(info.n > 0 for info in report.locations.values())
        self.owner: dict[int, LocalState] = {}
        self.kinds: Counter = Counter()
        self.steps = 0
        self._lookups = {k: self._make_lookup(loc) for k, loc in self.locations.items()}

    def _make_lookup(self, loc: LocalState):
        if not self.native_neighbors:
            return store_lookup(loc.store)
        views = {k: store_lookup(other.store) for k, other in self.locations.items()}
        ordered = [views[k] for k in self.order]

        def lookup(symbol, arity, key):
            if key is not None and key[0] == LOCATION:
                view = views.get(key[1])
                return view(symbol, arity, key) if view is not None else ()
            out = []
            for view in ordered:
                out.extend(view(symbol, arity, key))
            return out
        return lookup

    def kill(self, ident: int) -> None:
        self.owner[ident].store.try_kill(ident)


class _Dropped:
    """A goal constraint whose address matched the executing location."""

    __slots__ = ("constraint",)

    def __init__(self, c: Constraint):
        self.constraint = c


def local_step(ens: Ensemble, loc: LocalState) -> str | None:
    """Apply one transition at ``loc``; returns its name, or None when idle."""
    k = loc.location
    if not loc.goals:
        if not loc.buffer:
            return None
        loc.goals.extend(ens.transport.take_all(loc))
        return "Flush"
    item = loc.goals.popleft()
    if isinstance(item, Constraint):
        if item.location is not None:
            if item.location == k:
                loc.goals.appendleft(_Dropped(item.with_location(None)))
                return "DropLoc"
            ens.transport.send(item.location, item.with_location(None))
            return "MoveLoc"
        item = _Dropped(item)
    if isinstance(item, _Dropped):
        c = item.constraint.with_location(k)
        ident = loc.store.insert(c)
        ens.owner[ident] = loc
        loc.goals.appendleft(Active(ident, c, 0))
        return "Activate"
    if not loc.store.is_alive(item.id):
        return "Drop"
    plans = ens.matcher.plans(item.constraint)
    if item.occ >= len(plans):
        return "Drop"
    plan = plans[item.occ]
    m = run_plan(plan, item.id, item.constraint, ens._lookups[k], _history_filter(loc.history, plan.rule))
    if m is None:
        item.occ += 1
        loc.goals.appendleft(item)
        return "Suspend"
    body = ens.matcher.bodies[m.rule.name](m.bindings)
    for ident in m.removed:
        ens.kill(ident)
    if not m.rule.removed:
        loc.history.add((m.rule.name, m.ids))
    removed = item.id in m.removed
    if not removed:
        loc.goals.appendleft(item)
    loc.goals.extendleft(reversed(body))
    return "Remove" if removed else "Keep"


@dataclass
class EnsembleResult:
    stores: dict                 # location -> Counter of constraints without address
    quiescent: bool
    steps: int
    sent: int
    flushed: int
    kinds: Counter = field(default_factory=Counter)
    collected: int = 0

    def without(self, symbols) -> dict:
        symbols = set(symbols)
        return {k: Counter({c: n for c, n in s.items() if c.symbol not in symbols})
                for k, s in self.stores.items()}

    def dump(self, symbols=()) -> str:
        stores = self.without(symbols) if symbols else self.stores
        lines = []
        for k in sorted(stores, key=term_key):
            lines.append(f"[{format_term(k)}]")
            lines.extend(format_constraint(c) for c in sort_constraints(stores[k].elements()))
        return "\n".join(lines)


def goal_locations(goal) -> list:
    locs = {}
    for c in goal:
        if c.location is None:
            raise ValueError(f"goal constraint {format_constraint(c)} has no location")
        locs.setdefault(c.location)
    return list(locs)


def _schedule_sequential(ens: Ensemble, pick, fuel: int) -> None:
    while True:
        busy = [k for k in ens.order if ens.locations[k].busy]
        if not busy:
            return
        for k in pick(busy):
            if ens.steps >= fuel:
                raise NonTermination(ens.steps)
            kind = local_step(ens, ens.locations[k])
            if kind is not None:
                ens.steps += 1
                ens.kinds[kind] += 1


def _schedule_parallel(ens: Ensemble, fuel: int) -> None:
    cond = ens.transport.lock
    idle: set = set()
    state = {"done": False, "error": None}
    counter = threading.Lock()

    def wake(dest):
        idle.discard(dest)

    ens.transport.on_send = wake

    def worker(k):
        loc = ens.locations[k]
        try:
            while True:
                with cond:
                    while not loc.busy and not state["done"]:
                        idle.add(k)
                        if len(idle) == len(ens.locations):
                            state["done"] = True
                            cond.notify_all()
                            break
                        cond.wait()
                    if state["done"]:
                        return
                    idle.discard(k)
                kind = local_step(ens, loc)
                with counter:
                    ens.steps += 1
                    if kind is not None:
                        ens.kinds[kind] += 1
                    if ens.steps > fuel:
                        raise NonTermination(ens.steps)
        except BaseException as exc:     # stop every location on the first failure
            with cond:
                state["error"] = state["error"] or exc
                state["done"] = True
                cond.notify_all()

    threads = [threading.Thread(target=worker, args=(k,), daemon=True) for k in ens.order]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    ens.transport.on_send = None
    if state["error"] is not None:
        err = state["error"]
        raise err if isinstance(err, CHRError) else CHRError(f"location failed: {err!r}")


def run_ensemble(p: Program, goal, schedule: str = "rr", fuel: int = DEFAULT_FUEL,
                 locations="auto", gc=(), extra_locations=()) -> EnsembleResult:
    """Run located goal constraints to quiescence.

    ``schedule`` is ``rr`` (round robin, one step per busy location),
    ``rand:<seed>`` (a seeded random busy location per step) or ``par`` (one
    thread per location).  The parallel schedule only runs local rules, so
    neighbor rules are compiled with :func:`encode_program` first.  ``gc``
    names protocol predicates removed from the stores at quiescence.
    """
    report = check_fragment(p, "chre")
    if report.errors:
        raise FragmentError(report.errors)
    goal = list(goal)
    if schedule == "par" and any(info.n > 0 for info in report.locations.values()):
        enc = encode_program(p)
        p, gc = enc.program, set(gc) | enc.protocol
    locs = goal_locations(goal) if locations == "auto" else list(locations)
    locs += [k for k in extra_locations if k not in locs]
    ens = Ensemble(p, locs)
    for c in goal:
        if c.location not in ens.locations:
            raise UnknownLocation(f"goal constraint {format_constraint(c)} addresses an unknown location")
        ens.locations[c.location].goals.append(c)
    if schedule == "rr":
        _schedule_sequential(ens, lambda busy: busy, fuel)
    elif schedule.startswith("rand:"):
        rng = random.Random(int(schedule.split(":", 1)[1]))
        _schedule_sequential(ens, lambda busy: [rng.choice(busy)], fuel)
    elif schedule == "par":
        _schedule_parallel(ens, fuel)
    else:
        raise ValueError(f"unknown schedule {schedule!r}; use rr, rand:<seed> or par")
    gc = set(gc)
    stores = {}
    collected = 0
    for k, loc in ens.locations.items():
        alive = Counter()
        for _, c in loc.store.alive_items():
            if c.symbol in gc:
                collected += 1
            else:
                alive[c.with_location(None)] += 1
        stores[k] = alive
    return EnsembleResult(stores, True, ens.steps, ens.transport.sent, ens.transport.flushed,
                          ens.kinds, collected)


# -- 1-neighbor to 0-neighbor compilation ----------------------------------------------

def persistent_predicates(p: Program) -> set:
    """Predicates no rule removes."""
    removed = {c.predicate for r in p.rules for c in r.removed}
    return {pred for pred in p.user_predicates() if pred not in removed}


def _ordered_vars(cs) -> list[str]:
    seen: dict[str, None] = {}
    for c in cs:
        for name in constraint_vars(c):
            seen.setdefault(name)
    return list(seen)


def protocol_names(rule_name: str) -> tuple[str, str, str]:
    return f"{rule_name}_req", f"{rule_name}_vcom", f"{rule_name}_commit"


def encode_1neighbor(r: Rule, p: Program) -> list[Rule]:
    """Local rules realizing the 1-neighbor rule ``r`` by a two-phase commit.

    The primary location asks the neighbor (request), the neighbor votes for
    each matching part of its own (vote), the primary withdraws its
    non-persistent heads and confirms (commit), and the neighbor applies the
    rule (act) or, when its part has gone meanwhile, hands the primary's heads
    back (abort).
    """
    info = neighbor_info(r)
    if info is None or info.n > 1:
        raise NotOneNeighbor(f"rule {r.name} is not 1-neighbor restricted")
    if info.n == 0:
        return [r]
    x, y = info.primary, info.neighbors[0]
    at_x = [c for c in r.kept + r.removed if c.location == x]
    kept_x = [c for c in r.kept if c.location == x]
    removed_x = [c for c in r.removed if c.location == x]
    kept_y = [c for c in r.kept if c.location == y]
    removed_y = [c for c in r.removed if c.location == y]
    persistent = persistent_predicates(p)
    px = [c for c in kept_x if c.predicate in persistent]
    px_moving = [c for c in kept_x if c.predicate not in persistent]

    x_vars = _ordered_vars(at_x)
    guard_x = [g for g in r.guard if set(constraint_vars(g)) <= set(x_vars)]
    guard_y = [g for g in r.guard if g not in guard_x]
    all_vars = _ordered_vars(r.kept + r.removed)
    for g in r.guard:                  # values bound by the guard travel along
        if g.symbol in ("=:=", "=") and isinstance(g.args[0], Var) and g.args[0].name not in all_vars:
            all_vars.append(g.args[0].name)
    req, vcom, commit = protocol_names(r.name)
    req_c = Constraint(req, [Var(v) for v in x_vars], location=y)
    vcom_c = Constraint(vcom, [Var(v) for v in all_vars], location=x)
    commit_c = Constraint(commit, [Var(v) for v in all_vars], location=y)

    def sent_to(c, loc):
        return c.with_location(loc)
    body = tuple(c if c.is_builtin or c.location is not None else c.with_location(x) for c in r.body)
    restore = tuple(px_moving) + tuple(removed_x)
    rules = [
        Rule(f"{r.name}_request", tuple(kept_x + removed_x), (), tuple(guard_x), (req_c,)),
    ]
    if removed_x:
        rules.append(Rule(f"{r.name}_vote", tuple(kept_y + removed_y), (req_c,), tuple(guard_y),
                          (sent_to(vcom_c, x),)))
    else:
        rules.append(Rule(f"{r.name}_vote", tuple(kept_y + removed_y) + (req_c,), (), tuple(guard_y),
                          (sent_to(vcom_c, x),)))
    rules += [
        Rule(f"{r.name}_commit", tuple(px), tuple(px_moving + removed_x) + (vcom_c,), (), (commit_c,)),
        Rule(f"{r.name}_act", tuple(kept_y), tuple(removed_y) + (commit_c,), (), tuple(px_moving) + body),
        Rule(f"{r.name}_abort", (), (commit_c,), (), restore),
    ]
    return rules


@dataclass
class Encoding:
    program: Program
    protocol: frozenset          # protocol predicate symbols


def encode_program(p: Program) -> Encoding:
    rules = []
    protocol = set()
    for r in p.rules:
        out = encode_1neighbor(r, p)
        if len(out) > 1:
            protocol.update(protocol_names(r.name))
        rules.extend(out)
    return Encoding(p.replace(rules=tuple(rules)), frozenset(protocol))


def centralized_paths(arcs: dict) -> dict:
    """All-pairs shortest path lengths from ``arcs`` ((source, target) -> length),
    keeping only pairs of distinct nodes."""
    nodes = sorted({n for pair in arcs for n in pair}, key=term_key)
    inf = float("inf")
    dist = {(a, b): arcs.get((a, b), inf) for a in nodes for b in nodes}
    for k in nodes:
        for a in nodes:
            for b in nodes:
                if dist[a, k] + dist[k, b] < dist[a, b]:
                    dist[a, b] = dist[a, k] + dist[k, b]
    return {(a, b): d for (a, b), d in dist.items() if a != b and d < inf}
