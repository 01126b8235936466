"""Brute-force reference semantics over small ground states.

Everything here is deliberately naive: rule instances are found by trying
every injective assignment of state elements to head positions, guards are
interpreted term by term, and reachability is an exhaustive graph search.
None of the engines' matching or evaluation code is reused.
"""

from __future__ import annotations

import itertools
from collections import Counter, deque
from dataclasses import dataclass
from typing import Callable, Iterable

from .errors import EvalError, Unbounded
from .evaluation import eval_guard, instantiate
from .syntax import Program, Rule
from .terms import (Compound, Constraint, Term, Var, constraint_key,
                    constraint_vars, sort_constraints, substitute_constraint)

DEFAULT_MAX_STATES = 10 ** 4


def _match(pattern: Term, value: Term, b: dict) -> dict | None:
    if isinstance(pattern, Var):
        if pattern.name in b:
            return b if b[pattern.name] == value else None
        out = dict(b)
        out[pattern.name] = value
        return out
    if isinstance(pattern, Compound):
        if not (isinstance(value, Compound) and value.functor == pattern.functor
                and len(value.args) == len(pattern.args)):
            return None
        for p, v in zip(pattern.args, value.args):
            b = _match(p, v, b)
            if b is None:
                return None
        return b
    return b if (type(pattern) is type(value) and pattern == value) else None


def _match_head(h: Constraint, c: Constraint, b: dict) -> dict | None:
    if h.symbol != c.symbol or len(h.args) != len(c.args):
        return None
    if (h.location is None) != (c.location is None):
        return None
    if h.location is not None:
        b = _match(h.location, c.location, b)
        if b is None:
            return None
    for p, v in zip(h.args, c.args):
        b = _match(p, v, b)
        if b is None:
            return None
    return b


def _guard(rule: Rule, b: dict) -> dict | None:
    for g in rule.guard:
        ok, b = eval_guard(g, b)
        if not ok:
            return None
    return b


def match_heads(rule: Rule, cs: Iterable[Constraint]) -> dict | None:
    """Bindings under which ``cs`` (textual head order) match the head and
    the guard holds."""
    b: dict | None = {}
    heads = [h for h, _ in rule.heads]
    cs = list(cs)
    if len(cs) != len(heads):
        return None
    for h, c in zip(heads, cs):
        b = _match_head(h, c, b)
        if b is None:
            return None
    return _guard(rule, b)


def _assignments(rule: Rule, elems: list[Constraint]):
    """Injective index tuples (textual head order) with bindings and true guard."""
    heads = [h for h, _ in rule.heads]

    def extend(k, used, b):
        if k == len(heads):
            g = _guard(rule, b)
            if g is not None:
                yield tuple(used), g
            return
        for i, c in enumerate(elems):
            if i in used:
                continue
            nb = _match_head(heads[k], c, b)
            if nb is not None:
                yield from extend(k + 1, used + [i], nb)
    yield from extend(0, [], {})


def body_of(rule: Rule, b: dict) -> list[Constraint] | None:
    """Ground body user constraints, or None when a body built-in fails."""
    out = []
    for c in rule.body:
        if c.is_builtin:
            ok, b = eval_guard(c, b)
            if not ok:
                return None
        else:
            out.append(instantiate(c, b))
    return out


@dataclass(frozen=True)
class Instance:
    rule: Rule
    heads: tuple[Constraint, ...]      # textual head order
    positions: tuple[int, ...]         # indices into the state's element list
    bindings: tuple

    @property
    def kept(self) -> tuple[Constraint, ...]:
        return self.heads[:len(self.rule.kept)]

    @property
    def removed(self) -> tuple[Constraint, ...]:
        return self.heads[len(self.rule.kept):]

    def body(self) -> list[Constraint] | None:
        return body_of(self.rule, dict(self.bindings))

    @property
    def key(self) -> tuple:
        return (self.rule.name, self.heads)


def _elements(s) -> list[Constraint]:
    if isinstance(s, Counter):
        return sort_constraints(s.elements())
    return list(s)


def applicable(p: Program, s, rules: Iterable[Rule] | None = None) -> list[Instance]:
    """Every rule instance applicable to ``s``, duplicates by value removed."""
    elems = _elements(s)
    seen = set()
    out = []
    for rule in (p.rules if rules is None else rules):
        for pos, b in _assignments(rule, elems):
            cs = tuple(elems[i] for i in pos)
            if (rule.name, cs) in seen:
                continue
            seen.add((rule.name, cs))
            out.append(Instance(rule, cs, pos, tuple(sorted(b.items(), key=lambda kv: kv[0]))))
    return out


def apply_instance(s: Counter, inst: Instance) -> Counter | None:
    body = inst.body()
    if body is None:
        return None
    out = Counter(s)
    out.subtract(Counter(inst.removed))
    out.update(body)
    return +out


def _freeze(s: Counter) -> tuple:
    return tuple(sorted(s.elements(), key=constraint_key))


# -- states with ids, for programs with propagation rules -----------------------

@dataclass(frozen=True)
class IdState:
    items: tuple[tuple[int, Constraint], ...]
    history: frozenset
    next_id: int

    @classmethod
    def initial(cls, cs: Iterable[Constraint]) -> "IdState":
        items = tuple(enumerate(cs))
        return cls(items, frozenset(), len(items))

    def multiset(self) -> Counter:
        return Counter(c for _, c in self.items)


def _id_successors(p: Program, st: IdState):
    elems = [c for _, c in st.items]
    ids = [i for i, _ in st.items]
    for rule in p.rules:
        for pos, b in _assignments(rule, elems):
            head_ids = tuple(ids[i] for i in pos)
            history = st.history
            if not rule.removed:
                if (rule.name, head_ids) in history:
                    continue
                history = history | {(rule.name, head_ids)}
            body = body_of(rule, b)
            if body is None:
                continue
            gone = set(head_ids[len(rule.kept):])
            items = tuple(x for x in st.items if x[0] not in gone)
            items += tuple((st.next_id + k, c) for k, c in enumerate(body))
            yield rule, head_ids, IdState(items, history, st.next_id + len(body))


def _canonical(st: IdState) -> tuple:
    return (st.items, st.history)


def reachable_finals(p: Program, s, max_states: int = DEFAULT_MAX_STATES) -> set[tuple]:
    """All final states reachable from ``s`` as sorted constraint tuples.

    Raises :class:`Unbounded` if more than ``max_states`` states are visited.
    """
    elems = _elements(s)
    finals = set()
    if p.has_propagation:
        start = IdState.initial(elems)
        seen = {_canonical(start)}
        todo = deque([start])
        while todo:
            st = todo.popleft()
            final = True
            for _, _, nxt in _id_successors(p, st):
                final = False
                key = _canonical(nxt)
                if key not in seen:
                    seen.add(key)
                    if len(seen) > max_states:
                        raise Unbounded(f"more than {max_states} states")
                    todo.append(nxt)
            if final:
                finals.add(_freeze(st.multiset()))
        return finals
    start = Counter(elems)
    seen = {_freeze(start)}
    todo = deque([start])
    while todo:
        st = todo.popleft()
        final = True
        for inst in applicable(p, st):
            nxt = apply_instance(st, inst)
            if nxt is None:
                continue
            final = False
            key = _freeze(nxt)
            if key not in seen:
                seen.add(key)
                if len(seen) > max_states:
                    raise Unbounded(f"more than {max_states} states")
                todo.append(nxt)
        if final:
            finals.add(_freeze(st))
    return finals


def frozen(s) -> tuple:
    """Canonical tuple form of a multiset, comparable with reachable_finals."""
    return _freeze(Counter(_elements(s)))


# -- serializability replay ------------------------------------------------------

def check_serializable(p: Program, initial, trace, final=None) -> bool:
    """Replay the δs of ``trace`` in order as abstract Apply steps.

    Each δ must name constraints that are present at its turn, match the
    rule's head with a true guard, and add exactly the rule's body.  Ids are
    tracked so that a removed id is never used again and an id always denotes
    the same constraint.  With ``final`` given, the replay must end there.
    """
    state = Counter(_elements(initial))
    known: dict[int, Constraint] = {}
    dead: set[int] = set()
    history: set = set()
    rules = {r.name: r for r in p.rules}
    for d in trace:
        rule = rules.get(d.rule)
        if rule is None:
            return False
        ids = tuple(d.kept) + tuple(d.removed)
        heads = tuple(d.kept_constraints) + tuple(d.removed_constraints)
        if len(ids) != len(heads) or len(set(ids)) != len(ids):
            return False
        if len(d.kept) != len(rule.kept) or len(d.removed) != len(rule.removed):
            return False
        for i, c in zip(ids, heads):
            if i in dead or known.setdefault(i, c) != c:
                return False
        need = Counter(heads)
        if any(state[c] < k for c, k in need.items()):
            return False
        try:
            b = match_heads(rule, heads)
        except EvalError:
            return False
        if b is None:
            return False
        if not rule.removed:
            if (rule.name, ids) in history:
                return False
            history.add((rule.name, ids))
        body = body_of(rule, b)
        if body is None or Counter(body) != Counter(d.added):
            return False
        state.subtract(Counter(d.removed_constraints))
        state.update(body)
        state = +state
        dead.update(d.removed)
    if final is not None and +Counter(final) != state:
        return False
    return True


def check_monotonic(p: Program, s, inst: Instance, extension) -> bool:
    """The instance stays applicable after adding ``extension`` to ``s``."""
    bigger = Counter(_elements(s)) + Counter(_elements(extension))
    if any(bigger[c] < k for c, k in Counter(inst.heads).items()):
        return False
    return match_heads(inst.rule, inst.heads) is not None and any(
        other.key == inst.key for other in applicable(p, bigger, [inst.rule]))


# -- ground-domain critical pairs ---------------------------------------------------

@dataclass(frozen=True)
class CriticalPair:
    state: tuple[Constraint, ...]
    left: tuple[Constraint, ...]
    right: tuple[Constraint, ...]
    rules: tuple[str, str]
    overlap: tuple[tuple[int, int], ...]    # (head position in rule 1, in rule 2)

    def __str__(self):
        def show(cs):
            return "{" + ", ".join(map(str, cs)) + "}"
        return (f"{self.rules[0]}/{self.rules[1]} overlap={list(self.overlap)} state={show(self.state)} "
                f"-> {show(self.left)} | {show(self.right)}")


def _rename(c: Constraint, suffix: str) -> Constraint:
    names = constraint_vars(c)
    return substitute_constraint(c, {n: Var(n + suffix) for n in names})


def _rename_rule(r: Rule, suffix: str) -> Rule:
    def ren(cs):
        return tuple(_rename(c, suffix) for c in cs)
    return Rule(r.name, ren(r.kept), ren(r.removed), ren(r.guard), ren(r.body))


def _walk(t, s):
    while isinstance(t, Var) and t.name in s:
        t = s[t.name]
    return t


def _unify(a, b, s: dict) -> dict | None:
    a, b = _walk(a, s), _walk(b, s)
    if isinstance(a, Var):
        if isinstance(b, Var) and b.name == a.name:
            return s
        return {**s, a.name: b}
    if isinstance(b, Var):
        return {**s, b.name: a}
    if isinstance(a, Compound):
        if not (isinstance(b, Compound) and a.functor == b.functor and len(a.args) == len(b.args)):
            return None
        for x, y in zip(a.args, b.args):
            s = _unify(x, y, s)
            if s is None:
                return None
        return s
    return s if (type(a) is type(b) and a == b) else None


def _unify_c(a: Constraint, b: Constraint, s: dict) -> dict | None:
    if (a.location is None) != (b.location is None):
        return None
    if a.location is not None:
        s = _unify(a.location, b.location, s)
        if s is None:
            return None
    return _unify(Compound(a.symbol, a.args), Compound(b.symbol, b.args), s)


def _resolve(t, s):
    t = _walk(t, s)
    if isinstance(t, Compound):
        return Compound(t.functor, [_resolve(a, s) for a in t.args])
    return t


def _resolve_c(c: Constraint, s) -> Constraint:
    loc = None if c.location is None else _resolve(c.location, s)
    return Constraint(c.symbol, [_resolve(a, s) for a in c.args], c.kind, loc)


def _overlaps(h1: list, h2: list):
    """Non-empty partial injective maps between head positions of equal predicate."""
    n1, n2 = len(h1), len(h2)
    for size in range(1, min(n1, n2) + 1):
        for left in itertools.combinations(range(n1), size):
            for right in itertools.permutations(range(n2), size):
                if all(h1[i].predicate == h2[j].predicate for i, j in zip(left, right)):
                    yield tuple(zip(left, right))


def critical_pairs(p: Program, domain: Iterable[Term],
                   invariant: Callable[[list[Constraint]], bool] | None = None) -> list[CriticalPair]:
    """Critical pairs of ``p`` grounded over ``domain``.

    For each pair of rules and each overlap of their heads that includes a
    head removed by at least one of them, the overlapped heads are unified,
    the remaining variables range over ``domain``, and every grounding where
    both guards hold yields a pair of one-step successors.  Pairs with equal
    successors are trivially joinable and omitted.  ``invariant``, when given,
    discards overlap states the program can never reach.
    """
    domain = list(domain)
    out: list[CriticalPair] = []
    seen = set()
    rules = list(p.rules)
    for i1, r1 in enumerate(rules):
        for r2 in rules[i1:]:
            a, b = _rename_rule(r1, "_1"), _rename_rule(r2, "_2")
            ha = [c for c, _ in a.heads]
            hb = [c for c, _ in b.heads]
            ra = [rm for _, rm in a.heads]
            rb = [rm for _, rm in b.heads]
            for overlap in _overlaps(ha, hb):
                if r1 is r2 and all(x == y for x, y in overlap) and len(overlap) == len(ha):
                    continue   # identical instance
                if not any(ra[x] or rb[y] for x, y in overlap):
                    continue
                s: dict | None = {}
                for x, y in overlap:
                    s = _unify_c(ha[x], hb[y], s)
                    if s is None:
                        break
                if s is None:
                    continue
                rest_b = [j for j in range(len(hb)) if j not in {y for _, y in overlap}]
                state_pat = [_resolve_c(c, s) for c in ha] + [_resolve_c(hb[j], s) for j in rest_b]
                names: dict[str, None] = {}
                for c in state_pat:
                    for n in constraint_vars(c):
                        names.setdefault(n)
                free = list(names)
                for values in itertools.product(domain, repeat=len(free)):
                    g = dict(zip(free, values))
                    ground = [substitute_constraint(c, g) for c in state_pat]
                    if invariant is not None and not invariant(ground):
                        continue
                    heads_a = ground[:len(ha)]
                    pos_b = {y: x for x, y in overlap}
                    extra = ground[len(ha):]
                    heads_b = []
                    k = 0
                    for j in range(len(hb)):
                        if j in pos_b:
                            heads_b.append(heads_a[pos_b[j]])
                        else:
                            heads_b.append(extra[k])
                            k += 1
                    try:
                        ba, bb = match_heads(r1, heads_a), match_heads(r2, heads_b)
                    except EvalError:
                        continue
                    if ba is None or bb is None:
                        continue
                    body_a, body_b = body_of(r1, ba), body_of(r2, bb)
                    if body_a is None or body_b is None:
                        continue
                    state = Counter(ground)
                    left = state - Counter(heads_a[len(r1.kept):]) + Counter(body_a)
                    right = state - Counter(heads_b[len(r2.kept):]) + Counter(body_b)
                    cp = CriticalPair(_freeze(state), _freeze(left), _freeze(right),
                                      (r1.name, r2.name), overlap)
                    if cp.left == cp.right:
                        continue
                    key = (cp.state, frozenset([cp.left, cp.right]))
                    if key in seen:
                        continue
                    seen.add(key)
                    out.append(cp)
    return out


def joinable(p: Program, cp: CriticalPair, max_states: int = DEFAULT_MAX_STATES) -> str:
    """"yes" if both successors share a reachable final state, "no" if they
    provably do not, "unknown" when the search bound is hit."""
    try:
        left = reachable_finals(p, Counter(cp.left), max_states)
        right = reachable_finals(p, Counter(cp.right), max_states)
    except Unbounded:
        return "unknown"
    return "yes" if left & right else "no"


def non_joinable(p: Program, domain, invariant=None,
                 max_states: int = DEFAULT_MAX_STATES) -> list[CriticalPair]:
    return [cp for cp in critical_pairs(p, domain, invariant) if joinable(p, cp, max_states) == "no"]
