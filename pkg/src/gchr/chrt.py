"""Atomic transactions over shared data constraints.

Plain goal constraints run as usual against the shared store.  A run of
consecutive ``atomic(...)`` goals is one batch: every pending transaction of
the batch executes on a private copy of the current data constraints, and the
results are committed one at a time in goal order.  A commit first checks that
every shared constraint the transaction used is still there; if not, the
transaction is re-executed in the next round.  A transaction whose run still
holds an operation constraint is stuck.  It is retried while other commits keep
changing the data and rolled back once a round passes without any commit.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .engine_seq import DEFAULT_FUEL, Delta, run
from .errors import FragmentError, NotBounded, RetryExhausted
from .oracle import _resolve_c, _unify_c
from .store import Store
from .syntax import Program, Rule, check_fragment
from .terms import Atomic, Constraint, Var, constraint_vars, sort_constraints

PENDING, COMMITTED, ROLLED_BACK = "pending", "committed", "rolled-back"


@dataclass
class Transaction:
    index: int
    body: tuple[Constraint, ...]
    status: str = PENDING
    reason: str | None = None
    attempts: int = 0
    consumed: Counter = field(default_factory=Counter)
    produced: Counter = field(default_factory=Counter)
    trace: list[Delta] = field(default_factory=list)

    def __str__(self):
        text = f"txn {self.index} {self.status}"
        if self.reason:
            text += f" ({self.reason})"
        return text + f" attempts={self.attempts} body=" + str(Atomic(self.body))


@dataclass
class ChrtResult:
    alive: Counter
    transactions: list[Transaction]
    steps: int
    commit_order: list[int] = field(default_factory=list)

    def sorted(self) -> list[Constraint]:
        return sort_constraints(self.alive.elements())


@dataclass
class _Attempt:
    used: Counter        # shared constraints the run matched (kept or removed)
    consumed: Counter    # shared constraints the run removed
    produced: Counter    # constraints the run leaves behind that were not shared
    stuck: bool
    trace: list[Delta]
    steps: int


def _execute(p: Program, shared: Counter, txn: Transaction, fuel: int) -> _Attempt:
    store = Store()
    snapshot = {}
    for c in shared.elements():
        snapshot[store.insert(c)] = c
    result = run(p, list(txn.body), fuel=fuel, store=store)
    used, consumed = Counter(), Counter()
    for d in result.trace:
        for i, c in zip(d.kept + d.removed, d.heads):
            if i in snapshot:
                used[c] += 1
        for i, c in zip(d.removed, d.removed_constraints):
            if i in snapshot:
                consumed[c] += 1
    # a constraint matched several times only has to be present once
    used = Counter({c: min(k, shared[c]) for c, k in used.items()})
    produced = Counter()
    for i, c in store.alive_items():
        if i not in snapshot:
            produced[c] += 1
    stuck = any(c.predicate in p.op_preds for c in produced)
    return _Attempt(used, consumed, produced, stuck, result.trace, result.steps)


def _run_batch(p: Program, shared: Counter, batch: list[Transaction], retries: int,
               fuel: int, workers: int, commit_order: list[int]) -> tuple[Counter, int]:
    steps = 0
    pending = list(batch)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        while pending:
            snapshot = Counter(shared)
            attempts = list(pool.map(lambda t: _execute(p, snapshot, t, fuel), pending))
            committed_any = False
            still = []
            for txn, att in zip(pending, attempts):
                txn.attempts += 1
                steps += att.steps
                valid = all(shared[c] >= k for c, k in att.used.items())
                if valid and not att.stuck:
                    shared = shared - att.consumed + att.produced
                    txn.status, txn.consumed, txn.produced = COMMITTED, att.consumed, att.produced
                    txn.trace = att.trace
                    commit_order.append(txn.index)
                    committed_any = True
                    continue
                if txn.attempts > retries:
                    raise RetryExhausted(f"transaction {txn.index} gave up after {txn.attempts} attempts")
                still.append((txn, att))
            if not committed_any:
                # nothing changed the data this round: every stuck run is final
                for txn, att in still:
                    txn.status, txn.reason = ROLLED_BACK, "stuck"
                    txn.trace = att.trace
                break
            pending = [txn for txn, _ in still]
    return shared, steps


def run_chrt(p: Program, goal, retries: int = 16, fuel: int = DEFAULT_FUEL,
             workers: int = 1) -> ChrtResult:
    """Execute a goal mixing plain constraints and ``Atomic`` transactions."""
    errors = check_fragment(p, "chrt").errors
    if errors:
        raise FragmentError(errors)
    shared: Counter = Counter()
    transactions: list[Transaction] = []
    commit_order: list[int] = []
    steps = 0
    items = list(goal)
    i = 0
    while i < len(items):
        if isinstance(items[i], Atomic):
            batch = []
            while i < len(items) and isinstance(items[i], Atomic):
                batch.append(Transaction(len(transactions) + len(batch), items[i].body))
                i += 1
            transactions += batch
            shared, n = _run_batch(p, shared, batch, retries, fuel, workers, commit_order)
            steps += n
            continue
        plain = []
        while i < len(items) and not isinstance(items[i], Atomic):
            plain.append(items[i])
            i += 1
        store = Store()
        for c in shared.elements():
            store.insert(c)
        result = run(p, plain, fuel=fuel, store=store, trace=False)
        shared, steps = result.alive, steps + result.steps
    return ChrtResult(+shared, transactions, steps, commit_order)


# -- bounded transactions ------------------------------------------------------------

def entry_rule(symbol: str, arity: int) -> Rule:
    """``op(X1..Xn) <=> op(X1..Xn)``: the starting point for unfolding ``op``."""
    head = Constraint(symbol, [Var(f"X{k + 1}") for k in range(arity)])
    return Rule(f"atomic_{symbol}", (), (head,), (), (head,))


def _rename_apart(r: Rule, tag: int) -> Rule:
    def ren(c: Constraint) -> Constraint:
        names = {n: Var(f"{n}_{tag}") for n in constraint_vars(c)}
        return _resolve_c(c, names)
    return Rule(r.name, tuple(map(ren, r.kept)), tuple(map(ren, r.removed)),
                tuple(map(ren, r.guard)), tuple(map(ren, r.body)))


def unfold_bounded(p: Program, txn_rule: Rule, bound: int = 8) -> list[Rule]:
    """Replace operation constraints in the body of ``txn_rule`` by the bodies
    of the rules defining them until the body is free of operations.

    The data constraints a defining rule needs join the head of the unfolded
    rule and its guard joins the guard, so every result rule performs the
    whole transaction in one step.  An operation nested ``bound`` deep raises
    NotBounded.
    """
    ops = p.op_preds
    # (kept, removed, guard, body, nesting level per body constraint)
    work = [(txn_rule.kept, txn_rule.removed, txn_rule.guard, txn_rule.body,
             (0,) * len(txn_rule.body))]
    done = []
    tag = 0
    while work:
        kept, removed, guard, body, levels = work.pop(0)
        pos = next((k for k, c in enumerate(body) if not c.is_builtin and c.predicate in ops), None)
        if pos is None:
            done.append((kept, removed, guard, body))
            continue
        op, level = body[pos], levels[pos]
        if level >= bound:
            raise NotBounded(f"operation {op!r} still present after {bound} unfoldings")
        for r in p.rules:
            heads = [(c, rem) for c, rem in r.heads if c.predicate == op.predicate]
            if len(heads) != 1:
                continue
            tag += 1
            d = _rename_apart(r, tag)
            dhead = next(c for c, _ in d.heads if c.predicate == op.predicate)
            s = _unify_c(dhead, op, {})
            if s is None:
                continue
            keep_op = any(c is dhead for c in d.kept)
            new_body = (body[:pos] + ((op,) if keep_op else ()) + d.body + body[pos + 1:])
            new_levels = (levels[:pos] + ((level,) if keep_op else ()) + (level + 1,) * len(d.body)
                          + levels[pos + 1:])
            work.append((
                tuple(_resolve_c(c, s) for c in kept + tuple(c for c in d.kept if c is not dhead)),
                tuple(_resolve_c(c, s) for c in removed + tuple(c for c in d.removed if c is not dhead)),
                tuple(_resolve_c(c, s) for c in guard + d.guard),
                tuple(_resolve_c(c, s) for c in new_body),
                new_levels))
    out = []
    for k, (kept, removed, guard, body) in enumerate(done):
        name = txn_rule.name if len(done) == 1 else f"{txn_rule.name}_{k + 1}"
        out.append(Rule(name, kept, removed, guard, body))
    return out


def unfolded_program(p: Program, symbol: str, arity: int, bound: int = 8) -> Program:
    """``p`` with the rules for ``symbol/arity`` replaced by its unfolded,
    operation-free variants."""
    rules = unfold_bounded(p, entry_rule(symbol, arity), bound)
    rest = tuple(r for r in p.rules if not any(c.predicate == (symbol, arity) for c, _ in r.heads))
    return p.replace(rules=tuple(rules) + rest)


def erasable(p: Program, domain, max_states: int = 10 ** 4) -> bool:
    """Wrappers can be dropped when the plain program has no non-joinable
    critical pair over ``domain``."""
    from .oracle import non_joinable
    return not non_joinable(p, domain, max_states=max_states)


__all__ = ["Transaction", "ChrtResult", "run_chrt", "entry_rule", "unfold_bounded",
           "unfolded_program", "erasable", "PENDING", "COMMITTED", "ROLLED_BACK"]
