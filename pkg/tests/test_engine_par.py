import threading
from collections import Counter

import pytest

from gchr import corpus
from gchr.engine_par import CommitLog, ParConfig, arv_commit, run_parallel
from gchr.engine_seq import Delta, run
from gchr.errors import EvalError, FragmentError, NonTermination
from gchr.oracle import check_serializable
from gchr.parser import parse_goal, parse_program
from gchr.store import Store

from helpers import c, sieve

WORKERS = [1, 2, 4, 8]


def delta(kept, removed):
    return Delta("r", tuple(kept), tuple(removed))


def test_arv_fresh_delta_commits():
    s = Store()
    a, b = s.insert(c("x")), s.insert(c("y"))
    assert arv_commit(s, delta([a], [b]))
    assert s.is_alive(a) and not s.is_alive(b)


def test_arv_kept_id_dead_fails_without_effect():
    s = Store()
    a, b = s.insert(c("x")), s.insert(c("y"))
    s.try_kill(a)
    assert not arv_commit(s, delta([a], [b]))
    assert s.is_alive(b)
    assert s.claim(b, exclusive=True)          # no claim was left behind


def test_arv_shared_kept_ids():
    s = Store()
    k, x, y = (s.insert(c(n)) for n in "kxy")
    assert arv_commit(s, delta([k], [x])) and arv_commit(s, delta([k], [y]))
    assert s.is_alive(k)


def test_arv_competing_commits_one_winner():
    for _ in range(50):
        s = Store()
        shared = s.insert(c("victim"))
        keepers = [s.insert(c("k", i)) for i in range(8)]
        results = []
        barrier = threading.Barrier(8)

        def attempt(k):
            barrier.wait()
            results.append(arv_commit(s, delta([k], [shared])))

        threads = [threading.Thread(target=attempt, args=(k,)) for k in keepers]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert results.count(True) == 1
        assert s.audit() and s.killed == 1


def test_commit_log_rejects_double_removal():
    log = CommitLog()
    log.record(delta([], [1]))
    with pytest.raises(AssertionError):
        log.record(delta([], [1]))


@pytest.mark.parametrize("workers", WORKERS)
def test_min(workers):
    goal = parse_goal("min(1), min(0), min(2), min(1)")
    res = run_parallel(corpus.load("min"), goal, workers=workers)
    assert res.alive == Counter({c("min", 0): 1})
    removed = [i for d in res.trace for i in d.removed]
    assert len(removed) == len(set(removed))
    assert [d.seq for d in res.trace] == list(range(1, len(res.trace) + 1))


@pytest.mark.parametrize("workers", WORKERS)
def test_primes(workers):
    res = run_parallel(corpus.load("primes"), corpus.primes_goal(100), workers=workers)
    assert sorted(x.args[0] for x in res.alive.elements()) == sieve(100)


@pytest.mark.parametrize("workers", WORKERS)
@pytest.mark.parametrize("order", ["stack", "queue"])
def test_gcd(workers, order):
    goal = [c("gcd", 12), c("gcd", 8), c("gcd", 20)]
    res = run_parallel(corpus.load("gcd"), goal, workers=workers, goal_order=order)
    assert res.alive == Counter({c("gcd", 4): 1, c("gcd", 0): 2})


def test_merge_sort_mixed_goal_order():
    values = [9, 4, 7, 1, 8, 2, 6, 3]
    cfg = ParConfig(workers=4, goal_order={"->": "stack", "=>": "queue"})
    res = run_parallel(corpus.load("merge_sort"), corpus.merge_sort_goal(values), cfg)
    assert res.alive == run(corpus.load("merge_sort"), corpus.merge_sort_goal(values)).alive


def test_worker_count_does_not_change_confluent_results():
    cases = [
        ("floyd_warshall", corpus.fw_goal({(0, 1): 3, (1, 2): 1, (2, 0): 1, (0, 2): 9}, range(3))),
        ("merge_sort", corpus.merge_sort_goal([5, 3, 8, 1])),
    ]
    for name, goal in cases:
        p = corpus.load(name)
        expected = run(p, goal).alive
        for w in WORKERS:
            assert run_parallel(p, goal, workers=w, jitter=0.3, seed=w).alive == expected, (name, w)


def test_blocks_world_with_disjoint_arms():
    p = corpus.load("blocks_world")
    goal = parse_goal("empty(r1), empty(r2), clear(a), on(a,table), clear(b), on(b,table), "
                      "clear(c), on(c,table), clear(d), on(d,table), grab(r1,a), putOn(r1,b), "
                      "grab(r2,c), putOn(r2,d)")
    expected = run(p, goal).alive
    for w in WORKERS:
        assert run_parallel(p, goal, workers=w, jitter=0.2, seed=w).alive == expected


def test_philosophers_partners_found_concurrently():
    p = parse_program(corpus.SOURCES["philosophers"], {"n": 5})
    for w in (2, 4):
        res = run_parallel(p, corpus.philosophers_goal(5, 3), workers=w, jitter=0.2, seed=w)
        assert res.alive == Counter([c("think", i, 0) for i in range(5)] + [c("fork", i) for i in range(5)])
        assert check_serializable(p, corpus.philosophers_goal(5, 3), res.trace, res.alive)


def test_trace_is_serializable():
    goal = [c("gcd", v) for v in (30, 12, 18, 42)]
    p = corpus.load("gcd")
    for seed in range(10):
        res = run_parallel(p, goal, workers=4, jitter=0.5, seed=seed)
        assert check_serializable(p, goal, res.trace, res.alive)


def test_trace_format_has_worker_and_seq():
    res = run_parallel(corpus.load("min"), [c("min", 2), c("min", 1)], workers=2)
    (d,) = res.trace
    line = d.format(1)
    assert line.startswith("step=1 rule=r0 kept=") and "worker=" in line and line.endswith("seq=1")


def test_rejects_propagation():
    with pytest.raises(FragmentError):
        run_parallel(parse_program("a ==> b."), [c("a")])


def test_worker_errors_surface():
    with pytest.raises(EvalError):
        run_parallel(parse_program("a(X) <=> b(X // 0)."), [c("a", 1)], workers=3)
    with pytest.raises(NonTermination):
        run_parallel(parse_program("a <=> a."), [c("a")], workers=2, fuel=500)


def test_config_validation():
    with pytest.raises(ValueError):
        ParConfig(workers=0)
    with pytest.raises(ValueError):
        ParConfig(goal_order="lifo")


def test_empty_goal():
    res = run_parallel(corpus.load("min"), [], workers=4)
    assert res.alive == Counter() and res.trace == []
