"""Shared constraint store with identified constraints and hash indexes.

Every stored constraint gets a fresh integer id.  Deletion is logical: an
entry flips from alive to dead exactly once and is physically dropped from
the index lists by a later sweep.  Besides the plain ``try_kill`` primitive
the store offers per-id claims, which the parallel engine uses to verify and
remove a whole rule head atomically.
"""

from __future__ import annotations

import threading
from collections import Counter
from itertools import count
from typing import Iterator

from .errors import UnknownId
from .evaluation import eval_expr, eval_guard  # noqa: F401  (public re-export)
from .terms import Constraint, Term

ALIVE, DEAD = 0, 1
LOCATION = -1          # index position used for the location of ``[l]c``
_STRIPES = 64


class Entry:
    __slots__ = ("id", "constraint", "state", "exclusive", "shared")

    def __init__(self, ident: int, constraint: Constraint):
        self.id = ident
        self.constraint = constraint
        self.state = ALIVE
        self.exclusive = False
        self.shared = 0

    @property
    def alive(self) -> bool:
        return self.state == ALIVE

    def __repr__(self):
        return f"{self.constraint!r}#{self.id}"


class Store:
    """Multiset of identified ground user constraints."""

    def __init__(self, ids: Iterator[int] | None = None, sweep_min: int = 64):
        self._entries: dict[int, Entry] = {}
        self._all: dict[tuple, list[int]] = {}
        self._index: dict[tuple, dict[tuple[int, Term], list[int]]] = {}
        self._ids = ids if ids is not None else count()
        self._mutate = threading.Lock()
        self._stripes = [threading.Lock() for _ in range(_STRIPES)]
        self._sweep_min = sweep_min
        self._listed = 0       # ids currently present in the index lists
        self._dead_listed = 0  # of which dead
        self.inserted = 0
        self.killed = 0

    # -- updates -------------------------------------------------------------
    def insert(self, c: Constraint) -> int:
        pred = c.predicate
        with self._mutate:
            ident = next(self._ids)
            self._entries[ident] = Entry(ident, c)
            self._all.setdefault(pred, []).append(ident)
            index = self._index.setdefault(pred, {})
            for pos, arg in enumerate(c.args):
                index.setdefault((pos, arg), []).append(ident)
            if c.location is not None:
                index.setdefault((LOCATION, c.location), []).append(ident)
            self.inserted += 1
            self._listed += 1
        return ident

    def _entry(self, ident: int) -> Entry:
        try:
            return self._entries[ident]
        except KeyError:
            raise UnknownId(ident) from None

    def try_kill(self, ident: int) -> bool:
        """Alive and unclaimed -> dead.  True only for the one winning caller."""
        entry = self._entry(ident)
        with self._stripes[ident % _STRIPES]:
            if entry.state != ALIVE or entry.exclusive or entry.shared:
                return False
            entry.state = DEAD
        self._note_dead()
        return True

    def claim(self, ident: int, exclusive: bool) -> bool:
        """Non-blocking reservation of an alive id.

        Exclusive claims are taken for constraints a rule removes, shared claims
        for constraints it keeps; an exclusive claim excludes every other claim.
        """
        entry = self._entry(ident)
        with self._stripes[ident % _STRIPES]:
            if entry.state != ALIVE or entry.exclusive:
                return False
            if exclusive:
                if entry.shared:
                    return False
                entry.exclusive = True
            else:
                entry.shared += 1
            return True

    def release(self, ident: int, exclusive: bool) -> None:
        entry = self._entries[ident]
        with self._stripes[ident % _STRIPES]:
            if exclusive:
                entry.exclusive = False
            else:
                entry.shared -= 1

    def kill_claimed(self, ident: int) -> None:
        """Kill an id the caller holds exclusively."""
        entry = self._entries[ident]
        with self._stripes[ident % _STRIPES]:
            assert entry.exclusive and entry.state == ALIVE
            entry.state = DEAD
            entry.exclusive = False
        self._note_dead()

    def _note_dead(self):
        with self._mutate:
            self.killed += 1
            self._dead_listed += 1
            if self._listed >= self._sweep_min and 2 * self._dead_listed > self._listed:
                self._sweep()

    def _sweep(self):
        # Rebuild the lists instead of mutating them: readers iterate over the
        # old lists undisturbed.
        entries = self._entries

        def keep(ids):
            return [i for i in ids if entries[i].state == ALIVE]

        self._all = {pred: keep(ids) for pred, ids in self._all.items()}
        self._index = {pred: {k: kept for k, ids in index.items() if (kept := keep(ids))}
                       for pred, index in self._index.items()}
        self._listed = sum(len(ids) for ids in self._all.values())
        self._dead_listed = 0

    # -- queries -------------------------------------------------------------
    def get(self, ident: int) -> Constraint:
        return self._entry(ident).constraint

    def entry(self, ident: int) -> Entry:
        return self._entry(ident)

    def is_alive(self, ident: int) -> bool:
        return self._entry(ident).state == ALIVE

    def id_list(self, symbol: str, arity: int, key: tuple[int, Term] | None = None) -> list[int]:
        """Snapshot of the listed ids (alive or not yet swept) for a lookup."""
        if key is None:
            return self._all.get((symbol, arity))
        index = self._index.get((symbol, arity))
        return index.get(key) if index is not None else None

    def candidates(self, symbol: str, arity: int, key: tuple[int, Term] | None = None,
                   rotation: int = 0) -> Iterator[int]:
        """Alive ids of ``symbol/arity`` in ascending id order, optionally only
        those whose argument at ``key[0]`` equals ``key[1]`` and optionally
        starting at a rotated offset."""
        if key is None:
            ids = self._all.get((symbol, arity))
        else:
            index = self._index.get((symbol, arity))
            ids = index.get(key) if index is not None else None
        if not ids:
            return
        n = len(ids)
        start = rotation % n if rotation else 0
        entries = self._entries
        for k in range(n):
            ident = ids[(start + k) % n] if start else ids[k]
            if entries[ident].state == ALIVE:
                yield ident

    def alive_items(self) -> list[tuple[int, Constraint]]:
        return [(i, e.constraint) for i, e in sorted(self._entries.items()) if e.state == ALIVE]

    def alive(self) -> Counter:
        return Counter(e.constraint for e in self._entries.values() if e.state == ALIVE)

    def __len__(self):
        return self.inserted - self.killed

    def audit(self) -> bool:
        """Inserted minus killed equals the number of alive entries."""
        alive = sum(1 for e in self._entries.values() if e.state == ALIVE)
        return self.inserted - self.killed == alive
