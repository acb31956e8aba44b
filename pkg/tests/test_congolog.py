import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ndax import AgentAction, CapacityError, SpecificationError, SystemAction
from ndax import congolog as cg
from ndax.abstraction import refinement_reachable
from ndax.lang import parse_formula, parse_program
from ndax.logic import TRUE


def dtf(o, d, r=None):
    return AgentAction("driveAndTryFix", (o, d)) if r is None else SystemAction("driveAndTryFix", (o, d), r)


def test_canonicalize_examples(tire):
    _, ll, _, _ = tire
    a = cg.act("wait_LL")
    b = cg.act("stop_LL")
    c = cg.act("drive", ("11", "12"))
    raw = cg._make(cg.Seq, (cg.NIL, a))
    assert cg.canonicalize(raw) is a
    nested = cg._make(cg.Seq, (cg._make(cg.Seq, (a, b)), c))
    assert cg.canonicalize(nested) is cg.seq(a, b, c)
    assert cg.canonicalize(nested).items == (a, b, c)
    assert cg.canonicalize(cg._make(cg.Seq, (a, cg.NIL))) is a


def test_is_final(tire):
    _, ll, _, _ = tire
    s0 = ll.initial_state
    assert cg.is_final(ll, cg.star(cg.act("drive", ("11", "12"))), s0)
    assert not cg.is_final(ll, cg.test(parse_formula("Flat_LL", ll)), s0)
    assert not cg.is_final(ll, cg.act("wait_LL", (), "Success_LW"), s0)
    assert cg.is_final(ll, cg.NIL, s0)


def test_system_transitions(tire):
    _, ll, m, _ = tire
    s0 = ll.initial_state
    p = m.system_program(SystemAction("wait_HL", (), "Success_HW"))
    out = cg.system_transitions(ll, p, s0)
    assert [lab for lab, _ in out] == [SystemAction("wait_LL", (), "Success_LW")]
    (q, s1), = [c for _, c in out]
    assert s1 == s0 and cg.is_final(ll, q, s1)
    assert cg.system_transitions(ll, cg.test(TRUE), s0) == []
    both = cg.choice(cg.act("wait_LL", (), "Success_LW"), cg.act("stop_LL", (), "Success_LS"))
    assert len(cg.system_transitions(ll, both, s0)) == 2


def test_agent_transitions(tire):
    hl, ll, m, _ = tire
    s0 = ll.initial_state
    out = cg.agent_transitions(ll, cg.act("drive", ("11", "12")), s0)
    assert sorted(r for _, r, _ in out) == ["FlatTire", "NoFlatTire"]
    assert all(c[0] is cg.NIL for _, _, c in out)
    assert cg.agent_transitions(ll, cg.act("fixFlatTire", ("11",)), s0) == []

    p = m.agent_program(dtf("11", "12"))
    flat = [c for a, r, c in cg.agent_transitions(ll, p, s0) if r == "FlatTire"]
    (q, s1), = flat
    assert q is not cg.NIL  # still inside the if-structure
    assert cg.is_final(ll, q, s1)  # no spare at 12, so nothing more to do
    assert cg.agent_transitions(ll, q, s1) == []


def test_mixed_alphabets_are_rejected(tire):
    _, ll, _, _ = tire
    mixed = cg.seq(cg.act("wait_LL"), cg.act("stop_LL", (), "Success_LS"))
    with pytest.raises(SpecificationError):
        cg.system_transitions(ll, mixed, ll.initial_state)
    with pytest.raises(SpecificationError):
        cg.agent_transitions(ll, cg.act("stop_LL", (), "Success_LS"), ll.initial_state)


def test_terminating_runs(tire):
    _, ll, m, _ = tire
    s0 = ll.initial_state
    runs = cg.terminating_runs(ll, m.system_program(dtf("11", "12", "DrvNoFlat")), s0, "system")
    ends = {s for _, s in runs}
    assert len(ends) == 1
    (s1,) = ends
    assert "At_LL(12)" in ll.describe(s1) and "Flat_LL" not in ll.describe(s1)

    runs = cg.terminating_runs(ll, m.agent_program(dtf("11", "12")), s0, "agent")
    ends = {s for _, s in runs}
    assert len(ends) == 2
    assert {("Flat_LL" in ll.describe(s)) for s in ends} == {True, False}
    assert all("At_LL(12)" in ll.describe(s) for s in ends)

    assert cg.terminating_runs(ll, cg.NIL, s0, "agent") == {((), s0)}
    assert cg.terminating_runs(ll, cg.NIL, s0, "system") == {((), s0)}


def test_divergence_contributes_nothing(tire):
    _, ll, _, _ = tire
    s0 = ll.initial_state
    p = cg.seq(cg.star(cg.act("wait_LL")), cg.test(parse_formula("false", ll)))
    assert cg.end_states(ll, p, s0) == set()
    with pytest.raises(CapacityError):
        cg.terminating_runs(ll, cg.star(cg.act("wait_LL")), s0)
    runs = cg.terminating_runs(ll, cg.star(cg.act("wait_LL")), s0, max_length=3)
    assert sorted(len(t) for t, _ in runs) == [0, 1, 2, 3]


def test_situation_determined(tire):
    hl, ll, m, _ = tire
    s0 = ll.initial_state
    for aa in hl.agent_actions():
        assert cg.check_situation_determined(ll, m.agent_program(aa), s0)
    for o in ("11", "12", "21", "22", "31", "13"):
        for d in ("11", "12", "21", "22", "31", "13"):
            assert cg.check_situation_determined(ll, m.agent_program(dtf(o, d)), s0)

    a = cg.act("wait_LL", (), "Success_LW")
    b = cg.act("stop_LL", (), "Success_LS")
    c = cg.act("drive", ("11", "12"), "FlatTire")
    res = cg.check_situation_determined(ll, cg.choice(cg.seq(a, b), cg.seq(a, c)), s0)
    assert not res
    assert res.trace == (SystemAction("wait_LL", (), "Success_LW"),)
    assert set(res.programs) == {b, c}
    assert cg.check_situation_determined(ll, a, s0)


def test_config_graph(tire):
    _, ll, m, _ = tire
    s0 = ll.initial_state
    g = cg.build_config_graph(ll, m.agent_program(dtf("11", "12")), s0, "agent")
    assert len(g) <= 8
    g = cg.build_config_graph(ll, cg.star(cg.act("wait_LL")), s0, "agent")
    assert len(g) == 1  # NIL; wait_LL* folds back onto the root
    assert g.edges[0] and all(j == 0 for _, j in g.edges[0])
    g = cg.build_config_graph(ll, cg.NIL, s0)
    assert (len(g), g.edges, g.final_ids) == (1, [[]], [0])
    with pytest.raises(CapacityError):
        cg.build_config_graph(ll, m.agent_program(dtf("11", "12")), s0, "agent", limit=2)


def test_config_graph_ids_are_deterministic(tire):
    _, ll, m, go = tire
    p = cg.seq(cg.star(cg.act("wait_LL")), m.agent_program(dtf("11", "21")))
    g1 = cg.build_config_graph(ll, p, ll.initial_state)
    cg.clear_program_caches()
    g2 = cg.build_config_graph(ll, p, ll.initial_state)
    assert [str(c[0]) for c in g1.configs] == [str(c[0]) for c in g2.configs]
    assert g1.edges == g2.edges


def test_agent_system_coherence(tire):
    hl, ll, m, _ = tire
    for s in refinement_reachable(ll, m):
        for aa in hl.agent_actions():
            agent = cg.end_states(ll, m.agent_program(aa), s, "agent")
            system = set()
            for e in hl.reactions_of(aa.name):
                system |= cg.end_states(ll, m.system_program(aa.with_reaction(e)), s, "system")
            assert agent == system


def test_if_and_while_desugar(tire):
    _, ll, _, _ = tire
    f = parse_formula("Flat_LL", ll)
    a, b = cg.act("wait_LL"), cg.act("stop_LL")
    assert cg.if_then_else(f, a, b) == cg.choice(cg.seq(cg.test(f), a), cg.seq(cg.test(cg._negate(f)), b))
    assert parse_program("if Flat_LL then wait_LL else stop_LL endif", ll) == cg.if_then_else(f, a, b)
    assert parse_program("while Flat_LL do wait_LL endwhile", ll) == cg.while_do(f, a)


# ------------------------------------------------------------ properties

SYS = [
    cg.act("wait_LL", (), "Success_LW"),
    cg.act("stop_LL", (), "Success_LS"),
    cg.act("drive", ("11", "12"), "FlatTire"),
    cg.act("drive", ("11", "21"), "NoFlatTire"),
    cg.act("drive", ("12", "13"), "NoFlatTire"),
    cg.act("drive", ("21", "31"), "FlatTire"),
    cg.act("fixFlatTire", ("21",), "Success_LF"),
]


def raw_programs(tests):
    leaf = st.one_of(st.sampled_from(SYS), st.just(cg.NIL), st.sampled_from(tests))

    def extend(sub):
        return st.one_of(
            st.lists(sub, min_size=1, max_size=3).map(lambda xs: cg._make(cg.Seq, tuple(xs))),
            st.lists(sub, min_size=1, max_size=3).map(lambda xs: cg._make(cg.Choice, tuple(xs))),
            sub.map(lambda x: cg._make(cg.Star, x)),
        )

    return st.recursive(leaf, extend, max_leaves=6)


@pytest.fixture(scope="module")
def tests_ll(tire):
    ll = tire[1]
    return [cg.test(parse_formula(t, ll)) for t in ("Flat_LL", "!Flat_LL", "At_LL(12)")]


@settings(max_examples=80, deadline=None)
@given(data=st.data())
def test_canonicalize_is_idempotent_and_preserves_runs(tire, tests_ll, data):
    ll = tire[1]
    p = data.draw(raw_programs(tests_ll))
    c = cg.canonicalize(p)
    assert cg.canonicalize(c) is c
    s0 = ll.initial_state
    assert cg.terminating_runs(ll, p, s0, max_length=4) == cg.terminating_runs(ll, c, s0, max_length=4)


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_star_unfolding(tire, tests_ll, data):
    ll = tire[1]
    body = cg.canonicalize(data.draw(raw_programs(tests_ll)))
    assume(not isinstance(body, cg.Star) and body is not cg.NIL)
    s0 = ll.initial_state
    lhs = {(lab, q, s) for lab, (q, s) in cg.system_transitions(ll, cg.star(body), s0)}
    rhs = {(lab, cg.seq(q, cg.star(body)), s) for lab, (q, s) in cg.system_transitions(ll, body, s0)}
    assert lhs == rhs


@settings(max_examples=40, deadline=None)
@given(text=st.sampled_from(["Flat_LL", "!Flat_LL", "At_LL(11)", "Spare_LL(21) & At_LL(11)", "false"]))
def test_tests_are_synchronous(tire, text):
    ll = tire[1]
    f = parse_formula(text, ll)
    for s in (ll.initial_state, ll.successor(ll.initial_state, SystemAction("drive", ("11", "12"), "FlatTire"))):
        p = cg.test(f)
        assert cg.system_transitions(ll, p, s) == []
        assert cg.is_final(ll, p, s) == ll.evaluator(f)(s)
