import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndax import FIXTURES, AgentAction, PreconditionError, StrategyIncompleteError, SystemAction
from ndax import congolog as cg
from ndax.abstraction import map_agent_program
from ndax.lang import load_theory, parse_formula
from ndax.strategic import (
    STOP,
    AgentStrategy,
    check_inev_terminates,
    load_strategy,
    solve_env_game,
    solve_goal_game,
    solve_program_game,
    verify_strategy,
    weak_plan,
)
from ndax.theory import legal_reactions, reachable_states

from oracles import brute_force_agent_wins, micro_state, random_micro_theory


def A(name, *args):
    return AgentAction(name, tuple(args))


def goal(th, text):
    return parse_formula(text, th)


def test_goal_game_wins_at_both_levels(tire):
    hl, ll, _, _ = tire
    for th, g in ((hl, "At_HL(13)"), (ll, "At_LL(13)")):
        r = solve_goal_game(th, th.initial_state, goal(th, g))
        assert r.agent_wins and r.strategy is not None
        assert verify_strategy(th, th.initial_state, goal(th, g), r.strategy)


def test_goal_game_lost_without_spares(mutant):
    ll = mutant("tire_ll_nospare.ndt")
    r = solve_goal_game(ll, ll.initial_state, goal(ll, "At_LL(13)"))
    assert not r
    assert r.strategy is None


def test_extracted_strategy_shape(tire):
    _, ll, _, _ = tire
    g = goal(ll, "At_LL(13)")
    r = solve_goal_game(ll, ll.initial_state, g)
    at13 = ll.evaluator(g)
    for s, d in r.strategy.decisions.items():
        if at13(s):
            assert d == STOP
        else:
            assert d != STOP and legal_reactions(ll, s, d)


def test_program_games(tire):
    hl, ll, m, go = tire
    p = go.instantiate("13")
    assert solve_program_game(hl, p, hl.initial_state)
    lp = map_agent_program(m, p)
    r = solve_program_game(ll, lp, ll.initial_state)
    assert r and verify_strategy(ll, ll.initial_state, lp, r.strategy)
    assert not solve_program_game(hl, cg.test(goal(hl, "false")), hl.initial_state)


def test_program_game_rejects_non_sd_programs(tire):
    hl, _, _, go = tire
    composite = cg.seq(go.instantiate("31"), go.instantiate("13"))
    with pytest.raises(PreconditionError):
        solve_program_game(hl, composite, hl.initial_state)
    r = solve_program_game(hl, composite, hl.initial_state, allow_non_sd=True)
    assert r and verify_strategy(hl, hl.initial_state, composite, r.strategy)


def test_inev_terminates(tire):
    hl, ll, m, _ = tire
    s0 = ll.initial_state
    for aa in hl.agent_actions():
        if cg.end_states(ll, m.agent_program(aa), s0, "agent"):
            assert check_inev_terminates(ll, m.agent_program(aa), s0, "agent")
    looping = cg.seq(cg.star(cg.act("wait_LL")), cg.test(goal(ll, "false")))
    assert not check_inev_terminates(ll, looping, s0, "agent")
    assert check_inev_terminates(ll, cg.NIL, s0)


def test_env_games(tire):
    _, ll, m, _ = tire
    s0 = ll.initial_state
    assert solve_env_game(ll, m.system_program(SystemAction("wait_HL", (), "Success_HW")), s0)
    r = solve_env_game(ll, m.system_program(SystemAction("driveAndTryFix", ("11", "12"), "DrvFlat")), s0)
    assert r.env_wins
    assert r.strategy((m.system_program(SystemAction("driveAndTryFix", ("11", "12"), "DrvFlat")), s0), A("drive", "11", "12")) == "FlatTire"
    assert solve_env_game(ll, cg.test(goal(ll, "true")), s0)
    assert not solve_env_game(ll, cg.test(goal(ll, "Flat_LL")), s0)


def test_weak_plans(tire):
    hl, ll, _, _ = tire
    plan_h = [A("driveAndTryFix", "11", "12"), A("driveAndTryFix", "12", "13")]
    plan_l = [A("drive", "11", "12"), A("drive", "12", "13")]
    assert weak_plan(hl, hl.initial_state, goal(hl, "At_HL(13)"), plan_h)
    assert weak_plan(ll, ll.initial_state, goal(ll, "At_LL(13)"), plan_l)
    assert not weak_plan(ll, ll.initial_state, goal(ll, "At_LL(13)"), [A("drive", "11", "13")])
    found = weak_plan(ll, ll.initial_state, goal(ll, "At_LL(13)"))
    assert list(found.plan) == plan_l
    assert not weak_plan(ll, ll.initial_state, goal(ll, "At_LL(13)"), bound=1)


def test_hand_written_strategies(tire):
    hl, ll, _, _ = tire
    for th, name, g in ((hl, "f_h_repaired", "At_HL(13)"), (ll, "f_l_repaired", "At_LL(13)")):
        f = load_strategy(FIXTURES / "strategies" / f"{name}.json", th)
        assert verify_strategy(th, th.initial_state, goal(th, g), f)


def test_literal_hand_written_strategies_get_stuck_at_22(tire):
    hl, ll, _, _ = tire
    for th, name, g, at in ((hl, "f_h", "At_HL(13)", "At_HL(22)"), (ll, "f_l", "At_LL(13)", "At_LL(22)")):
        f = load_strategy(FIXTURES / "strategies" / f"{name}.json", th)
        r = verify_strategy(th, th.initial_state, goal(th, g), f)
        assert not r
        assert r.trace[-1].name.startswith("wait")
        end = th.execute(th.initial_state, r.trace)[-1]
        assert at in th.describe(end)


def test_always_wait_fails_with_a_lasso(tire):
    _, ll, _, _ = tire
    wait = AgentStrategy(ll, {s: A("wait_LL") for s in reachable_states(ll, [ll.initial_state])})
    r = verify_strategy(ll, ll.initial_state, goal(ll, "At_LL(13)"), wait)
    assert not r
    assert [a.name for a in r.trace] == ["wait_LL"]


def test_missing_decision_is_reported(tire):
    _, ll, _, _ = tire
    partial = AgentStrategy(ll, {ll.initial_state: A("drive", "11", "12")})
    with pytest.raises(StrategyIncompleteError):
        verify_strategy(ll, ll.initial_state, goal(ll, "At_LL(13)"), partial)


def test_strategy_serialization_is_stable(tire):
    hl, _, _, go = tire
    a = solve_goal_game(hl, hl.initial_state, goal(hl, "At_HL(13)")).strategy.dumps()
    b = solve_goal_game(hl, hl.initial_state, goal(hl, "At_HL(13)")).strategy.dumps()
    assert a == b
    data = json.loads(a)
    assert data["format"] == "ndax-strategy"
    keys = [(e["key"], e.get("program", "")) for e in data["decisions"]]
    assert keys == sorted(keys)
    back = load_strategy(a, hl)
    assert verify_strategy(hl, hl.initial_state, goal(hl, "At_HL(13)"), back)
    prog = solve_program_game(hl, go.instantiate("13"), hl.initial_state).strategy.to_json()
    assert all("program" in e for e in prog["decisions"])


def test_winning_implies_weak_plan(tire, tt_plus):
    for th, g in ((tire[0], "At_HL(13)"), (tire[1], "At_LL(22)"), (tt_plus[1], "At_LL(13)")):
        f = goal(th, g)
        if solve_goal_game(th, th.initial_state, f):
            assert weak_plan(th, th.initial_state, f, bound=10)


@pytest.mark.parametrize("seed", range(10))
def test_winning_regions_match_the_oracle(seed):
    mt = random_micro_theory(1000 + seed)
    th = load_theory(mt.source())
    g = goal(th, mt.goal_text())
    for s in reachable_states(th, [th.initial_state]):
        sub = random_micro_theory(1000 + seed)
        sub.init = micro_state(mt, th, s)
        assert bool(solve_goal_game(th, s, g)) == brute_force_agent_wins(sub)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_solver_matches_oracle_and_strategies_verify(seed):
    mt = random_micro_theory(seed)
    th = load_theory(mt.source())
    g = goal(th, mt.goal_text())
    r = solve_goal_game(th, th.initial_state, g)
    assert bool(r) == brute_force_agent_wins(mt)
    if r:
        assert verify_strategy(th, th.initial_state, g, r.strategy)
        assert weak_plan(th, th.initial_state, g, bound=len(mt.reachable()))
