"""Parallel refined execution over a shared store.

Worker threads take goal constraints from a common pool, activate them and
search for rule matches concurrently.  A match found on a possibly stale view
is committed by atomic rule-head verification: every head id is claimed in
ascending id order (exclusively for removed heads, shared for kept heads), a
commit number is drawn while all claims are held, the removed ids are killed
and the claims released.  A failed claim releases everything and the worker
re-matches the same occurrence.
"""

from __future__ import annotations

import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .engine_seq import DEFAULT_FUEL, Delta, FinalResult, matcher_for
from .errors import CHRError, FragmentError, NonTermination
from .matching import Match, run_plan, store_lookup
from .store import Store
from .syntax import Program, check_fragment
from .terms import Constraint


@dataclass
class ParConfig:
    workers: int = 4
    goal_order: str | dict = "stack"
    candidate_rotation: bool = True
    fuel: int = DEFAULT_FUEL
    seed: int | None = None
    jitter: float = 0.0          # probability of yielding the GIL at a yield point

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        orders = self.goal_order.values() if isinstance(self.goal_order, dict) else [self.goal_order]
        for order in orders:
            if order not in ("stack", "queue"):
                raise ValueError(f"goal order must be stack or queue, not {order!r}")

    def order_of(self, c: Constraint) -> str:
        if isinstance(self.goal_order, dict):
            return self.goal_order.get(c.symbol, self.goal_order.get(c.predicate, "stack"))
        return self.goal_order


class CommitLog:
    """Commit numbering plus the global disjoint-removal audit."""

    def __init__(self):
        self._lock = threading.Lock()
        self.seq = 0
        self.removed_ever: set[int] = set()
        self.trace: list[Delta] = []

    def record(self, delta: Delta) -> int:
        with self._lock:
            overlap = self.removed_ever.intersection(delta.removed)
            if overlap:
                raise AssertionError(f"ids {sorted(overlap)} removed twice")
            self.removed_ever.update(delta.removed)
            self.seq += 1
            delta.seq = self.seq
            self.trace.append(delta)
            return self.seq


def arv_commit(s: Store, d: Delta, log: CommitLog | None = None) -> bool:
    """All-or-nothing verification and removal of a matched head."""
    claims = sorted([(i, True) for i in d.removed] + [(i, False) for i in d.kept])
    taken = []
    for ident, exclusive in claims:
        if not s.claim(ident, exclusive):
            for j, ex in reversed(taken):
                s.release(j, ex)
            return False
        taken.append((ident, exclusive))
    if log is not None:
        log.record(d)
    for ident, exclusive in taken:
        if exclusive:
            s.kill_claimed(ident)
        else:
            s.release(ident, False)
    return True


class GoalPool:
    """Goal items split by ordering discipline plus an in-flight counter for
    quiescence detection."""

    def __init__(self, cfg: ParConfig):
        self.cfg = cfg
        self.items: deque = deque()
        self.cond = threading.Condition()
        self.in_flight = 0
        self.failed: BaseException | None = None
        self.steps = 0

    def push(self, body: list[Constraint]) -> None:
        with self.cond:
            for c in reversed(body):
                if self.cfg.order_of(c) == "stack":
                    self.items.appendleft(c)
            for c in body:
                if self.cfg.order_of(c) == "queue":
                    self.items.append(c)
            self.in_flight += len(body)
            self.cond.notify_all()

    def pop(self) -> Constraint | None:
        with self.cond:
            while not self.items and self.in_flight and self.failed is None:
                self.cond.wait()
            if self.failed is not None or not self.items:
                return None
            return self.items.popleft()

    def done(self) -> None:
        with self.cond:
            self.in_flight -= 1
            if self.in_flight == 0:
                self.cond.notify_all()

    def fail(self, exc: BaseException) -> None:
        with self.cond:
            if self.failed is None:
                self.failed = exc
            self.cond.notify_all()

    def tick(self, n: int = 1) -> None:
        with self.cond:
            self.steps += n
            if self.steps > self.cfg.fuel and self.failed is None:
                self.failed = NonTermination(self.steps)
                self.cond.notify_all()


def worker_loop(worker: int, pool: GoalPool, store: Store, program: Program,
                log: CommitLog, rng: random.Random) -> None:
    matcher = matcher_for(program)
    cfg = pool.cfg
    rotation = worker * 7919 if cfg.candidate_rotation else 0
    lookup = store_lookup(store, rotation)

    def maybe_yield():
        if cfg.jitter and rng.random() < cfg.jitter:
            time.sleep(0)

    try:
        while True:
            c = pool.pop()
            if c is None:
                return
            try:
                ident = store.insert(c)
                pool.tick()
                plans = matcher.plans(c)
                occ = 0
                while occ < len(plans) and store.is_alive(ident) and pool.failed is None:
                    maybe_yield()
                    m: Match | None = run_plan(plans[occ], ident, c, lookup)
                    pool.tick()
                    if m is None:
                        occ += 1
                        continue
                    added = matcher.bodies[m.rule.name](m.bindings)
                    delta = Delta.from_match(m, added)
                    delta.worker = worker
                    maybe_yield()
                    if not arv_commit(store, delta, log):
                        continue       # stale match: search this occurrence again
                    pool.push(list(added))
                    if ident in delta.removed:
                        break
            finally:
                pool.done()
    except BaseException as exc:  # surface worker failures as a run failure
        pool.fail(exc)


def run_parallel(p: Program, goal, cfg: ParConfig | None = None, **options) -> FinalResult:
    cfg = cfg or ParConfig(**options)
    errors = [d for d in check_fragment(p, "par") if d.severity == "error"]
    if errors:
        raise FragmentError(errors)
    goal = list(goal)
    store = Store()
    log = CommitLog()
    pool = GoalPool(cfg)
    pool.push(goal)
    seeds = random.Random(cfg.seed)
    threads = [threading.Thread(target=worker_loop,
                                args=(w, pool, store, p, log, random.Random(seeds.random())),
                                name=f"chr-worker-{w}", daemon=True)
               for w in range(cfg.workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if pool.failed is not None:
        if isinstance(pool.failed, CHRError):
            raise pool.failed
        raise CHRError(f"worker failed: {pool.failed!r}") from pool.failed
    trace = sorted(log.trace, key=lambda d: d.seq)
    return FinalResult(store.alive(), trace, pool.steps)
