import pytest

from gchr import corpus
from gchr.errors import ParseError
from gchr.parser import parse_goal, parse_program
from gchr.syntax import (check_fragment, is_direct_indexed, matching_graph,
                         neighbor_info, validate_ground)
from gchr.terms import NIL, Atomic, Compound, Var, format_term, list_items, make_list

from helpers import c


def test_min_rule_parts():
    p = parse_program("min(N) \\ min(M) <=> N=<M | true.")
    (r,) = p.rules
    assert r.kind == "simpagation"
    assert [str(h) for h in r.kept] == ["min(N)"]
    assert [str(h) for h in r.removed] == ["min(M)"]
    assert [str(g) for g in r.guard] == ["N=<M"]
    assert r.body == ()


def test_localized_propagation_rule():
    p = parse_program("#dialect chre.\nbase : [X]arc(Y,D) ==> [X]path(Y,D).")
    (r,) = p.rules
    assert p.dialect == "chre"
    assert r.name == "base" and r.kind == "propagation"
    assert r.kept[0].location == Var("X")


def test_empty_body_is_rejected():
    with pytest.raises(ParseError) as err:
        parse_program("p <=>.")
    assert err.value.line == 1 and "true" in err.value.expected


def test_parse_error_position():
    with pytest.raises(ParseError) as err:
        parse_program("a <=> true.\nb(X <=> true.")
    assert err.value.line == 2


def test_goal_parsing():
    assert parse_goal("min(1), min(0), min(2), min(1)") == [c("min", 1), c("min", 0), c("min", 2), c("min", 1)]
    assert parse_goal("") == []
    (t,) = parse_goal("atomic(transfer(acc1,acc2,1000))", corpus.load("bank_chrt"))
    assert isinstance(t, Atomic) and t.body == (c("transfer", "acc1", "acc2", 1000),)


def test_atomic_only_in_goals():
    with pytest.raises(ParseError):
        parse_program("#operation q/1.\natomic(q(X)) <=> true.")
    with pytest.raises(ParseError):
        parse_goal("atomic(p)", corpus.load("min"))


def test_rule_names_follow_position():
    p = parse_program("a <=> b.\nnamed : b <=> c.\nc <=> true.")
    assert [r.name for r in p.rules] == ["r0", "named", "r2"]


def test_duplicate_rule_names_rejected():
    with pytest.raises((ParseError, ValueError)):
        parse_program("x : a <=> b.\nx : b <=> c.")


def test_const_directive_and_override():
    p = corpus.load("philosophers")
    assert p.constants["n"] == 5
    q = parse_program(corpus.SOURCES["philosophers"], {"n": 3})
    assert q.constants["n"] == 3


def test_declarations():
    p = corpus.load("bank_chrt")
    assert p.dialect == "chrt"
    assert p.data_preds == {("balance", 2)}
    assert p.op_preds == {("deposit", 2), ("withdraw", 2), ("transfer", 3)}


def test_list_sugar_round_trip():
    t = make_list([1, Compound("f", ("a",)), 3])
    assert list_items(t) == [1, Compound("f", ("a",)), 3]
    assert format_term(t) == "[1,f(a),3]"
    (g,) = parse_goal("p([1,f(a),3])")
    assert g.args[0] == t
    (g,) = parse_goal("p([a|T])".replace("T", "[]"))
    assert g.args[0] == make_list(["a"]) and list_items(NIL) == []


@pytest.mark.parametrize("name", corpus.NAMES)
def test_corpus_round_trip(name):
    p = corpus.load(name)
    q = parse_program(str(p))
    assert str(q) == str(p)
    assert [(r.name, r.kept, r.removed, r.guard, r.body) for r in q.rules] == \
        [(r.name, r.kept, r.removed, r.guard, r.body) for r in p.rules]


@pytest.mark.parametrize("name", corpus.NAMES)
def test_corpus_kinds_and_ground(name):
    p = corpus.load(name)
    assert validate_ground(p) == []
    for r in p.rules:
        if not r.removed:
            assert r.kind == "propagation"
        elif not r.kept:
            assert r.kind == "simplification"
        else:
            assert r.kind == "simpagation"


def test_validate_ground_examples():
    assert validate_ground(corpus.load("gcd")) == []
    eat = parse_program("#const n = 5.\neat(X) <=> Y =:= (X+1) mod n | think(X), fork(X), fork(Y).")
    assert validate_ground(eat) == []
    (d,) = validate_ground(parse_program("p(X) <=> q(Y)."))
    assert d.variable == "Y" and d.rule == "r0"


def test_binder_must_precede_use():
    p = parse_program("p(X) <=> Z > 0, Z =:= X + 1 | q(Z).")
    assert [d.variable for d in validate_ground(p)] == ["Z"]


def test_fragment_checks():
    assert check_fragment(corpus.load("primes"), "par") == []
    prop = parse_program("a(X) ==> b(X).")
    assert check_fragment(prop, "par").errors and check_fragment(prop, "mp").errors
    assert check_fragment(prop, "seq") == []
    grow = check_fragment(corpus.load("gcd"), "par")
    assert not grow.errors
    fw = corpus.load("fw_distributed")
    report = check_fragment(fw, "chre")
    assert report.errors == []
    assert report.locations["base"].n == 0 and report.locations["base"].primary == Var("X")
    assert report.locations["trans"].n == 1 and report.locations["trans"].primary == Var("X")


def test_size_increasing_rule_is_informational():
    p = parse_program("a <=> b, c.")
    (d,) = check_fragment(p, "par")
    assert d.severity == "info"


def test_chrt_needs_one_operation_per_head():
    p = parse_program("#data d/1.\n#operation o/1, q/1.\no(X), q(X) <=> true.")
    assert check_fragment(p, "chrt").errors
    assert check_fragment(corpus.load("bank_chrt"), "chrt") == []


def test_neighbor_info_rejects_unconnected_heads():
    p = parse_program("#dialect chre.\nr : [X]a(Y), [Z]b <=> true.")
    assert neighbor_info(p.rules[0]) is None
    assert check_fragment(p, "chre").errors


def test_matching_graph():
    assert not is_direct_indexed(corpus.load("min").rules[0])
    assert is_direct_indexed(parse_program("min(X,N) \\ min(X,M) <=> N=<M | true.").rules[0])
    single = parse_program("a(X) <=> true.").rules[0]
    assert is_direct_indexed(single) and matching_graph(single).edges == set()


def test_localized_floyd_warshall_is_direct_indexed():
    assert all(is_direct_indexed(r) for r in corpus.load("fw_distributed").rules)
