import itertools
import random
from collections import Counter

import pytest

from gchr import corpus
from gchr.chrt import (COMMITTED, ROLLED_BACK, entry_rule, erasable, run_chrt, unfold_bounded,
                       unfolded_program)
from gchr.engine_seq import run
from gchr.errors import FragmentError, NotBounded, RetryExhausted
from gchr.oracle import check_serializable
from gchr.parser import parse_goal, parse_program
from gchr.terms import Atomic

from helpers import c

BANK = corpus.load("bank_chrt")


def balances(res):
    return {x.args[0]: x.args[1] for x in res.alive if x.symbol == "balance"}


def transfer(src, dst, amount):
    return Atomic((c("transfer", src, dst, amount),))


def ledger(start, transfers):
    """Sequential oracle: a transfer happens only when the source covers it strictly."""
    bal = dict(start)
    for src, dst, amount in transfers:
        if bal[src] > amount:
            bal[src] -= amount
            bal[dst] += amount
    return bal


def test_insufficient_funds_roll_back():
    goal = parse_goal("balance(acc1,500), balance(acc2,0), atomic(transfer(acc1,acc2,1000))", BANK)
    res = run_chrt(BANK, goal)
    assert balances(res) == {"acc1": 500, "acc2": 0}
    (txn,) = res.transactions
    assert txn.status == ROLLED_BACK and txn.reason == "stuck"
    assert not any(x.symbol in ("withdraw", "deposit", "transfer") for x in res.alive)


def test_without_atomic_the_run_is_stuck():
    goal = parse_goal("balance(acc1,500), balance(acc2,0), transfer(acc1,acc2,1000)", BANK)
    res = run(BANK, goal)
    assert res.alive == Counter([c("balance", "acc1", 500), c("withdraw", "acc1", 1000),
                                 c("balance", "acc2", 1000)])


def test_disjoint_transfers_both_commit():
    goal = [c("balance", a, 100) for a in "abcd"] + [transfer("a", "b", 30), transfer("c", "d", 70)]
    res = run_chrt(BANK, goal)
    assert [t.status for t in res.transactions] == [COMMITTED, COMMITTED]
    assert balances(res) == ledger(dict.fromkeys("abcd", 100), [("a", "b", 30), ("c", "d", 70)])


def test_conflicting_transfers_retry_on_fresh_data():
    goal = [c("balance", "a", 100), c("balance", "b", 0)] + [transfer("a", "b", 10)] * 3
    res = run_chrt(BANK, goal, workers=3)
    assert balances(res) == {"a": 70, "b": 30}
    assert res.commit_order == [0, 1, 2]
    assert [t.attempts for t in res.transactions] == [1, 2, 3]


def test_retry_limit():
    goal = [c("balance", "a", 100), c("balance", "b", 0)] + [transfer("a", "b", 10)] * 2
    with pytest.raises(RetryExhausted):
        run_chrt(BANK, goal, retries=0)


def test_plain_goals_between_batches():
    goal = [c("balance", "a", 10), c("balance", "b", 0), transfer("a", "b", 50),
            c("deposit", "a", 100), transfer("a", "b", 50)]
    res = run_chrt(BANK, goal)
    assert [t.status for t in res.transactions] == [ROLLED_BACK, COMMITTED]
    assert balances(res) == {"a": 60, "b": 50}


def test_committed_traces_replay_without_wrappers():
    goal = [c("balance", a, 200) for a in "xyz"] + [transfer("x", "y", 50), transfer("y", "z", 20)]
    res = run_chrt(BANK, goal)
    state = Counter(g for g in goal if not isinstance(g, Atomic))
    for k in res.commit_order:
        txn = res.transactions[k]
        start = state + Counter(txn.body)
        assert check_serializable(BANK, start, txn.trace)
        state = state - txn.consumed + txn.produced
    assert state == res.alive


def test_unfolded_transfer_rule():
    (rule,) = unfold_bounded(BANK, entry_rule("transfer", 3))
    assert str(rule) == ("atomic_transfer : transfer(X1,X2,X3), balance(X1,Bal_2), balance(X2,Bal_3) "
                         "<=> Bal_2>X3 | balance(X1,Bal_2-X3), balance(X2,Bal_3+X3).")


def test_recursive_operation_is_not_bounded():
    p = parse_program("#data d/1.\n#operation loop/1.\nloop(X), d(Y) <=> d(Y), loop(X+1).")
    with pytest.raises(NotBounded):
        unfold_bounded(p, entry_rule("loop", 1), bound=5)


def test_two_defining_rules_give_two_variants():
    p = parse_program("#data cnt/1.\n#operation inc/0.\n"
                      "inc, cnt(N) <=> N < 9 | cnt(N+1).\ninc, cnt(N) <=> N >= 9 | cnt(0).")
    rules = unfold_bounded(p, entry_rule("inc", 0))
    assert [r.name for r in rules] == ["atomic_inc_1", "atomic_inc_2"]
    assert [str(r.guard[0]) for r in rules] == ["N_1<9", "N_2>=9"]


def _run_unfolded(program, start, transfers):
    state = [c("balance", a, v) for a, v in start.items()]
    for src, dst, amount in transfers:
        res = run(program, state + [c("transfer", src, dst, amount)])
        state = [x for x in res.alive.elements() if x.symbol == "balance"]
    return {x.args[0]: x.args[1] for x in state}


def _run_atomic(start, transfers):
    state = [c("balance", a, v) for a, v in start.items()]
    for t in transfers:
        res = run_chrt(BANK, state + [transfer(*t)])
        state = list(res.alive.elements())
    return {x.args[0]: x.args[1] for x in state}


def random_ledger(rng):
    accounts = [f"acc{k}" for k in range(rng.randint(2, 5))]
    start = {a: rng.randint(0, 1000) for a in accounts}
    transfers = [(*rng.sample(accounts, 2), rng.randint(0, 1000)) for _ in range(rng.randint(1, 6))]
    return start, transfers


def test_unfolded_agrees_with_atomic_on_random_ledgers():
    fused = unfolded_program(BANK, "transfer", 3)
    rng = random.Random(2024)
    for _ in range(40):
        start, transfers = random_ledger(rng)
        expected = ledger(start, transfers)
        assert _run_atomic(start, transfers) == expected
        assert _run_unfolded(fused, start, transfers) == expected


def test_batch_outcome_is_a_serial_order():
    rng = random.Random(11)
    for _ in range(30):
        start, transfers = random_ledger(rng)
        transfers = transfers[:4]
        goal = [c("balance", a, v) for a, v in start.items()] + [transfer(*t) for t in transfers]
        res = run_chrt(BANK, goal, workers=2)
        committed = [transfers[k] for k in range(len(transfers))
                     if res.transactions[k].status == COMMITTED]
        got = balances(res)
        serial = False
        for order in itertools.permutations(committed):
            bal = dict(start)
            ok = True
            for src, dst, amount in order:
                if not bal[src] > amount:
                    ok = False
                    break
                bal[src] -= amount
                bal[dst] += amount
            serial |= ok and bal == got
        assert serial, (start, transfers, got)


def test_fragment_rejection():
    p = parse_program("#data d/1.\n#operation o/1, q/1.\no(X), q(X) <=> true.")
    with pytest.raises(FragmentError):
        run_chrt(p, [])


def test_erasure_lint():
    assert erasable(parse_program("#data d/1.\n#operation o/1.\no(X) <=> d(X)."), [1, 2])
    assert not erasable(parse_program("#data d/1.\n#operation o/1.\no(X) <=> d(X).\no(X) <=> d(0)."), [1])


def test_transaction_report_line():
    goal = parse_goal("balance(a,5), balance(b,0), atomic(transfer(a,b,9))", BANK)
    (txn,) = run_chrt(BANK, goal).transactions
    assert str(txn) == "txn 0 rolled-back (stuck) attempts=1 body=atomic(transfer(a,b,9))"
