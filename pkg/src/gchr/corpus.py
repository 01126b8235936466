"""Embedded example programs and goal generators."""

from __future__ import annotations

import random
from functools import lru_cache

from .parser import parse_goal, parse_program
from .syntax import Program
from .terms import Constraint, make_list

SOURCES: dict[str, str] = {}

SOURCES["min"] = """
% keeps the minimum of all min/1 values
min(N) \\ min(M) <=> N =< M | true.
"""

SOURCES["primes"] = """
sift : prime(I) \\ prime(J) <=> J mod I =:= 0 | true.
"""

SOURCES["gcd"] = """
gcd(N) \\ gcd(M) <=> 0 < N, N =< M | gcd(M-N).
"""

SOURCES["merge_sort"] = """
% N=>A: a sorted chain of length N starts at A; A->B: B follows A
msort : A->B \\ A->C <=> A < B, B < C | B->C.
merge : N=>A, N=>B <=> A < B | N+N=>A, A->B.
"""

SOURCES["floyd_warshall"] = """
shorten : arc(I,K,D1), arc(K,J,D2) \\ arc(I,J,D3) <=> D3 > D1+D2 | arc(I,J,D1+D2).
"""

SOURCES["turing"] = """
% st(State, Read, Write, Move, Next); the tape is a set of cell(Pos, Symbol)
st(QI,SI,SJ,D,QJ) \\ state(I,QI), cell(I,SI) <=> state(I+D,QJ), cell(I,SJ).
"""

SOURCES["philosophers"] = """
#const n = 5.
% the second arguments count down the remaining meals
think_eat : think(X,T), fork(X), fork(Y) <=> T > 0, Y =:= (X+1) mod n | eat(X,T).
eat_think : eat(X,T) <=> Y =:= (X+1) mod n | think(X,T-1), fork(X), fork(Y).
"""

SOURCES["blocks_world"] = """
grab  : grab(R,X), empty(R), clear(X), on(X,Y) <=> hold(R,X), clear(Y).
putOn : putOn(R,Y), hold(R,X), clear(Y) <=> empty(R), clear(X), on(X,Y).
"""

# The find identifiers are ground terms built from the union arguments.
_UNION_FIND = """
union    : union(A,B) <=> find(A,x(A,B)), find(B,y(A,B)), link(x(A,B),y(A,B)).
findNode : A->B \\ find(A,X) <=> find(B,X).
findRoot : root(A) \\ find(A,X) <=> found(A,X).
linkEq   : link(X,Y), found(A,X), found(A,Y) <=> true.
linkRoot : link(X,Y), found(A,X), found(B,Y), root(A) \\ root(B) <=> B->A.
"""
SOURCES["union_find_basic"] = _UNION_FIND
SOURCES["union_find_parallel"] = _UNION_FIND + """
foundUpdate : A->B \\ found(A,X) <=> found(B,X).
"""

SOURCES["preflow_push"] = """
lift : n(U,N), e(U,E) \\ h(U,_), m(U,M,C)
       <=> U \\= source, U \\= sink, 0 < E, C =:= N+E | h(U,M+1).
up   : h(U,HU), h(V,HV) \\ r(U,V,K)
       <=> HU =< HV, K < HU | m(U,HV,1), r(U,V,HU).
push : h(U,HU), h(V,HV) \\ e(U,EU), e(V,EV), r(U,V,_)
       <=> 0 < EU, HV < HU | e(U,EU-1), e(V,EV+1), m(V,HU,1), r(V,U,HV).
min  : m(U,M1,C1), m(U,M2,C2) <=> m(U,min(M1,M2),C1+C2).
"""

# Truth values are 0/1 so negation, conjunction and disjunction are
# arithmetic: 1-S, min and max.
SOURCES["sat_mp"] = """
generate : f([X|Xs],A) <=> f(Xs,[true(X)|A]), f(Xs,[false(X)|A]).
assign_t : f([],A) \\ eq(T,v(X)) <=> true(X) in A | sat(T,A,1).
assign_f : f([],A) \\ eq(T,v(X)) <=> false(X) in A | sat(T,A,0).
neg : sat(T1,A,S) \\ eq(T,neg(T1)) <=> sat(T,A,1-S).
and : sat(T1,A,S1), sat(T2,A,S2) \\ eq(T,and(T1,T2)) <=> sat(T,A,min(S1,S2)).
or  : sat(T1,A,S1), sat(T2,A,S2) \\ eq(T,or(T1,T2)) <=> sat(T,A,max(S1,S2)).
"""

SOURCES["bank_chrt"] = """
#data balance/2.
#operation deposit/2, withdraw/2, transfer/3.
deposit  : balance(Acc,Bal), deposit(Acc,Amt) <=> balance(Acc,Bal+Amt).
withdraw : balance(Acc,Bal), withdraw(Acc,Amt) <=> Bal > Amt | balance(Acc,Bal-Amt).
transfer : transfer(Acc1,Acc2,Amt) <=> withdraw(Acc1,Amt), deposit(Acc2,Amt).
"""

# Shared cells with per-transaction read and write logs; commit_right is the
# token a committing transaction holds while it publishes its write log.
SOURCES["stm_cells"] = """
read    : cell(L,V) \\ read(T,L) <=> rlog(T,L,V).
w1      : wlog(T,L,V1), write(T,L,V2) <=> wlog(T,L,V2).
w2      : write(T,L,V) <=> wlog(T,L,V).
acquire : commit_right, validate(T) <=> commit(T).
c1      : commit(T) \\ wlog(T,L,V), cell(L,W) <=> cell(L,V).
c2      : commit(T) <=> commit_right.
"""

SOURCES["fw_distributed"] = """
#dialect chre.
base  : [X]arc(Y,D) ==> [X]path(Y,D).
elim  : [X]path(Y,D1) \\ [X]path(Y,D2) <=> D1 < D2 | true.
trans : [X]arc(Y,D1), [Y]path(Z,D2) ==> X \\= Z | [X]path(Z,D1+D2).
"""

NAMES = tuple(SOURCES)


@lru_cache(maxsize=None)
def load(name: str) -> Program:
    if name.startswith("corpus:"):
        name = name[len("corpus:"):]
    if name == "union_find":
        name = "union_find_basic"
    try:
        return parse_program(SOURCES[name])
    except KeyError:
        raise KeyError(f"unknown corpus program {name!r}; known: {', '.join(NAMES)}") from None


# -- goal generators ---------------------------------------------------------

def c(symbol: str, *args, location=None) -> Constraint:
    return Constraint(symbol, args, "user", location)


def primes_goal(n: int) -> list[Constraint]:
    return [c("prime", i) for i in range(2, n + 1)]


def gcd_goal(k: int, seed: int = 0, high: int = 1000) -> list[Constraint]:
    rng = random.Random(seed)
    return [c("gcd", rng.randint(1, high)) for _ in range(k)]


def philosophers_goal(n: int, meals: int) -> list[Constraint]:
    goal = []
    for i in range(n):
        goal += [c("think", i, meals), c("fork", i)]
    return goal


def merge_sort_goal(values) -> list[Constraint]:
    return [c("=>", 1, v) for v in values]


def unit_cycle(nodes) -> list[Constraint]:
    """Localized arcs of a directed cycle with unit lengths."""
    nodes = list(nodes)
    return [c("arc", nodes[(i + 1) % len(nodes)], 1, location=x) for i, x in enumerate(nodes)]


def fw_goal(edges: dict, nodes) -> list[Constraint]:
    """Complete arc set for ``floyd_warshall``; missing edges get a large length."""
    big = 10 ** 9
    return [c("arc", i, j, 0 if i == j else edges.get((i, j), big)) for i in nodes for j in nodes]


def turing_goal(program: list[tuple], tape, state="q0", head=0, blanks=1) -> list[Constraint]:
    goal = [c("st", *t) for t in program]
    cells = list(tape) + ["b"] * blanks
    goal += [c("cell", i, s) for i, s in enumerate(cells)]
    goal.append(c("state", head, state))
    return goal


UNARY_SUCCESSOR = [("q0", 1, 1, 1, "q0"), ("q0", "b", 1, 0, "halt")]


def sat_goal(variables, nodes: dict) -> list[Constraint]:
    """``nodes`` maps node ids to ``v(X)`` / ``neg(T)`` / ``and(T1,T2)`` /
    ``or(T1,T2)`` given as tuples, e.g. ``("and", "t1", "t2")``."""
    from .terms import Compound
    goal = [c("f", make_list(list(variables)), "[]")]
    for ident, node in nodes.items():
        goal.append(c("eq", ident, Compound(node[0], node[1:])))
    return goal


GENERATORS = {
    "primes": lambda n: primes_goal(int(n)),
    "gcd": lambda k, seed="0", high="1000": gcd_goal(int(k), int(seed), int(high)),
    "philosophers": lambda n, meals: philosophers_goal(int(n), int(meals)),
}


def goal_from_spec(text: str, program: Program | None = None) -> list:
    """Goal text, or ``gen:<name>:<args...>`` for a generated goal."""
    if text.startswith("gen:"):
        name, *args = text[4:].split(":")
        if name not in GENERATORS:
            raise ValueError(f"unknown goal generator {name!r}; known: {', '.join(GENERATORS)}")
        return GENERATORS[name](*args)
    return parse_goal(text, program)


def union_find_invariant(state: list[Constraint]) -> bool:
    """Shape of states the union-find programs can reach from ``union`` goals:
    the arcs form a forest whose roots carry ``root``, and every find or link
    identifier is used once."""
    parent: dict = {}
    roots = set()
    ids = []
    links = []
    for con in state:
        if con.symbol == "->":
            child, par = con.args
            if child in parent or child == par:
                return False
            parent[child] = par
        elif con.symbol == "root":
            if con.args[0] in roots:
                return False
            roots.add(con.args[0])
        elif con.symbol in ("find", "found"):
            ids.append(con.args[1])
        elif con.symbol == "link":
            if con.args[0] == con.args[1]:
                return False
            links.extend(con.args)
    if roots & parent.keys() or len(set(ids)) != len(ids) or len(set(links)) != len(links):
        return False
    for node in parent:
        seen = {node}
        while node in parent:
            node = parent[node]
            if node in seen:
                return False
            seen.add(node)
    return True


INVARIANTS = {
    "union_find_basic": union_find_invariant,
    "union_find_parallel": union_find_invariant,
}
