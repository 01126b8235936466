import threading

import pytest
from hypothesis import given, strategies as st

from gchr.errors import EvalError, UnknownId
from gchr.evaluation import INT_MAX, INT_MIN, eval_expr, eval_guard
from gchr.parser import parse_goal, parse_program
from gchr.store import Store

from helpers import c


def expr(text):
    return parse_goal(f"e({text})")[0].args[0]


def guard(text):
    return parse_program(f"g(X,Y,L) <=> {text} | true.").rules[0].guard[0]


def test_arithmetic():
    assert eval_expr(expr("(X+1) mod 3"), {"X": 2}) == 0
    assert eval_expr(expr("M-N"), {"M": 12, "N": 8}) == 4
    assert eval_expr(expr("min(X,3) + max(X,3)"), {"X": 7}) == 10


@pytest.mark.parametrize("text,env", [
    ("X//0", {"X": 1}),
    ("X mod 0", {"X": 1}),
    ("X+1", {}),
    ("X+1", {"X": "a"}),
    ("X+1", {"X": INT_MAX}),
    ("X-1", {"X": INT_MIN}),
    ("X*X", {"X": 2 ** 40}),
])
def test_eval_errors(text, env):
    with pytest.raises(EvalError):
        eval_expr(expr(text), env)


def test_division_truncates_and_mod_is_floored():
    assert eval_expr(expr("X//2"), {"X": -7}) == -3
    assert eval_expr(expr("X mod 3"), {"X": -7}) == 2


def test_guards():
    assert eval_guard(guard("X =< Y"), {"X": 0, "Y": 2}) == (True, {"X": 0, "Y": 2})
    ok, b = eval_guard(guard("Z =:= (X+1) mod 5"), {"X": 4})
    assert ok and b["Z"] == 0
    assert eval_guard(guard("X in L"), {"X": 3, "L": expr("[1,2]")}) == (False, {"X": 3, "L": expr("[1,2]")})
    assert eval_guard(guard("X in L"), {"X": 2, "L": expr("[1,2]")})[0]
    assert eval_guard(guard("X \\== Y"), {"X": "a", "Y": "b"})[0]
    assert not eval_guard(guard("X == Y"), {"X": "a", "Y": "b"})[0]
    with pytest.raises(EvalError):
        eval_guard(guard("X < Y"), {"X": "a", "Y": 1})


def test_insert_and_lookup():
    s = Store()
    first = s.insert(c("prime", 7))
    second = s.insert(c("prime", 7))
    assert first == 0 and second != first
    assert list(s.candidates("prime", 1, (0, 7))) == [first, second]
    assert s.alive()[c("prime", 7)] == 2


def test_candidates_by_key_and_liveness():
    s = Store()
    ids = [s.insert(c("arc", a, b, 1)) for a, b in [("a", "b"), ("b", "c"), ("a", "c")]]
    assert list(s.candidates("arc", 3, (0, "a"))) == [ids[0], ids[2]]
    g = [s.insert(c("gcd", 8)), s.insert(c("gcd", 12))]
    assert list(s.candidates("gcd", 1)) == g
    assert s.try_kill(g[0])
    assert list(s.candidates("gcd", 1)) == [g[1]]


def test_rotation_visits_every_id_once():
    s = Store()
    ids = [s.insert(c("p", i)) for i in range(5)]
    assert list(s.candidates("p", 1, rotation=2)) == ids[2:] + ids[:2]


def test_try_kill_once():
    s = Store()
    i = s.insert(c("a"))
    assert s.try_kill(i) and not s.try_kill(i)
    with pytest.raises(UnknownId):
        s.try_kill(99)


def test_claims():
    s = Store()
    i = s.insert(c("a"))
    assert s.claim(i, exclusive=False) and s.claim(i, exclusive=False)
    assert not s.claim(i, exclusive=True)
    assert not s.try_kill(i)
    s.release(i, False)
    s.release(i, False)
    assert s.claim(i, exclusive=True)
    assert not s.claim(i, exclusive=False)
    s.kill_claimed(i)
    assert not s.is_alive(i) and not s.claim(i, exclusive=False)


@pytest.mark.parametrize("callers", [2, 8, 64])
def test_try_kill_has_one_winner(callers):
    s = Store()
    ids = [s.insert(c("x", k)) for k in range(50)]
    wins = [0] * len(ids)
    lock = threading.Lock()
    barrier = threading.Barrier(callers)

    def hammer():
        barrier.wait()
        for i in ids:
            if s.try_kill(i):
                with lock:
                    wins[i] += 1

    threads = [threading.Thread(target=hammer) for _ in range(callers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert wins == [1] * len(ids)
    assert s.audit() and len(s) == 0


def test_sweep_keeps_alive_entries_reachable():
    s = Store(sweep_min=4)
    ids = [s.insert(c("p", k % 3, k)) for k in range(40)]
    for i in ids[:30]:
        s.try_kill(i)
    assert sorted(s.candidates("p", 2)) == ids[30:]
    for i in ids[30:]:
        con = s.get(i)
        assert i in s.candidates("p", 2, (0, con.args[0]))
        assert i in s.candidates("p", 2, (1, con.args[1]))
    assert s.audit()


@given(st.lists(st.tuples(st.sampled_from(["insert", "kill"]), st.integers(0, 5)), max_size=60))
def test_store_matches_multiset_model(ops):
    s = Store(sweep_min=2)
    model = {}
    for op, v in ops:
        if op == "insert":
            model[s.insert(c("v", v))] = v
        elif model:
            i = sorted(model)[v % len(model)]
            assert s.try_kill(i)
            del model[i]
    assert s.audit()
    assert sorted(s.candidates("v", 1)) == sorted(model)
    for i, v in model.items():
        assert i in s.candidates("v", 1, (0, v))
