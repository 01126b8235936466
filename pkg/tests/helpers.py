"""Reference implementations shared by the tests."""

from gchr.terms import Constraint


def c(symbol, *args, location=None):
    return Constraint(symbol, args, "user", location)


def sieve(n):
    """Primes up to n by the sieve of Eratosthenes."""
    flags = [True] * (n + 1)
    for i in range(min(2, n + 1)):
        flags[i] = False
    for i in range(2, int(n ** 0.5) + 1):
        if flags[i]:
            flags[i * i::i] = [False] * len(flags[i * i::i])
    return [i for i, f in enumerate(flags) if f]


def shortest_paths(arcs, nodes):
    """Floyd-Warshall over a dict (i, j) -> length."""
    inf = float("inf")
    d = {(i, j): 0 if i == j else arcs.get((i, j), inf) for i in nodes for j in nodes}
    for k in nodes:
        for i in nodes:
            for j in nodes:
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


def turing(program, tape, state="q0", head=0, blanks=1):
    """Direct simulation of the rule table used by the turing corpus program."""
    table = {(q, s): (w, m, nxt) for q, s, w, m, nxt in program}
    cells = dict(enumerate(list(tape) + ["b"] * blanks))
    while (state, cells.get(head)) in table:
        write, move, state = table[state, cells[head]]
        cells[head] = write
        head += move
    return cells, head, state
