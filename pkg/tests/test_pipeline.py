import json

import pytest

from ndax import FIXTURES, RefinementUnsoundError, UnsupportedConstructError
from ndax import congolog as cg
from ndax.abstraction import map_agent_program, map_fluent_formula
from ndax.lang import load_mapping, parse_formula
from ndax.monitoring import explain
from ndax.pipeline import prefer, seeded_adversary, simulate, synthesize_and_refine
from ndax.strategic import STOP, AgentStrategy, load_strategy, solve_env_game, verify_strategy
from ndax.theory import AgentAction, reachable_states


@pytest.fixture(scope="module")
def refined(tire):
    hl, ll, m, _ = tire
    g = parse_formula("At_HL(13)", hl)
    return synthesize_and_refine(hl, ll, m, g), map_fluent_formula(m, g)


def test_refined_goal_strategy_is_f_l(tire, refined):
    _, ll, _, _ = tire
    rs, goal = refined
    assert rs and not rs.conflicts and not rs.multiple_partners
    f_l = load_strategy(FIXTURES / "strategies" / "f_l_repaired.json", ll)
    assert len(rs.table) == 9
    for s, d in rs.table.items():
        assert d == f_l.decide(s), ll.describe(s)
    assert verify_strategy(ll, ll.initial_state, goal, rs)


def test_refined_decision_table_verifies_on_its_own(tire, refined):
    _, ll, _, _ = tire
    rs, goal = refined
    table = AgentStrategy(ll, dict(rs.table))
    assert verify_strategy(ll, ll.initial_state, goal, table)


def test_refined_program_strategies(tire):
    hl, ll, m, go = tire
    for task in (go.instantiate("13"), cg.seq(go.instantiate("31"), go.instantiate("13"))):
        rs = synthesize_and_refine(hl, ll, m, task)
        assert rs
        assert verify_strategy(ll, ll.initial_state, map_agent_program(m, task), rs)


def test_infeasible_without_spares(tire, mutant):
    _, ll, m, _ = tire
    hl = mutant("tire_hl_nospare.ndt")
    ll = mutant("tire_ll_nospare.ndt")
    m = load_mapping(FIXTURES / "tire.ndm", hl, ll)
    rs = synthesize_and_refine(hl, ll, m, parse_formula("At_HL(13)", hl))
    assert not rs and rs.hl_strategy is None
    assert rs.to_json()["feasible"] is False


def test_concurrency_is_refused(tire):
    hl, ll, m, _ = tire
    p = cg.conc(cg.act("wait_HL"), cg.act("stop_HL"))
    with pytest.raises(UnsupportedConstructError):
        synthesize_and_refine(hl, ll, m, p)


def test_broken_mapping_is_refused(tire):
    hl, ll, _, _ = tire
    bad = load_mapping(FIXTURES / "mutants" / "tire_spare_uncond.ndm", hl, ll)
    with pytest.raises(RefinementUnsoundError) as exc:
        synthesize_and_refine(hl, ll, bad, parse_formula("At_HL(13)", hl))
    assert exc.value.constraint == "bisimulation"


def test_exhaustive_simulation(tire, refined):
    _, ll, _, _ = tire
    rs, goal = refined
    outs = simulate(ll, rs, goal)
    assert len(outs) == 16
    assert all(o.met and o.reason == "stop" for o in outs)
    assert len({o.trace for o in outs}) == 16


def test_always_wait_never_arrives(tire):
    _, ll, _, _ = tire
    wait = AgentStrategy(ll, {s: AgentAction("wait_LL", ()) for s in reachable_states(ll, [ll.initial_state])})
    outs = simulate(ll, wait, parse_formula("At_LL(13)", ll), limit=20)
    assert outs and not any(o.met for o in outs)
    assert all(o.reason == "step-limit" and o.steps == 20 for o in outs)


def test_f_h_against_a_fixing_environment(tire):
    hl, _, _, _ = tire
    f_h = load_strategy(FIXTURES / "strategies" / "f_h_repaired.json", hl)
    out = simulate(hl, f_h, parse_formula("At_HL(13)", hl), prefer("DrvFlatFix"))
    assert out.met and out.steps <= 4
    # 11 -> 21 -> 31 -> 22 -> 13; there is no spare at 13 to fix with
    assert [a.args[1] for a in out.trace] == ["21", "31", "22", "13"]
    assert [a.reaction for a in out.trace] == ["DrvFlatFix"] * 3 + ["DrvFlat"]
    assert out.to_json()["adversary"] == "prefers DrvFlatFix"


def test_env_strategy_adversary(tire):
    _, ll, m, _ = tire
    aa = AgentAction("driveAndTryFix", ("11", "12"))
    env = solve_env_game(ll, m.system_program(aa.with_reaction("DrvFlat")), ll.initial_state).strategy
    f_l = load_strategy(FIXTURES / "strategies" / "f_l_repaired.json", ll)
    out = simulate(ll, f_l, parse_formula("At_LL(13)", ll), env)
    assert out.met


def test_seeded_runs_are_reproducible(tire, refined):
    _, ll, _, _ = tire
    rs, goal = refined
    runs = [simulate(ll, rs, goal, seed).to_json() for seed in (7, 7, 8)]
    assert runs[0] == runs[1]
    assert all(r["objective_met"] for r in runs)
    a, b = seeded_adversary(3), seeded_adversary(3)
    legal = ["x", "y", "z"]
    assert [a(None, None, legal) for _ in range(10)] == [b(None, None, legal) for _ in range(10)]
    with pytest.raises(ValueError):
        simulate(ll, rs, goal, "sometimes")


def test_hl_and_ll_agree(tire, refined):
    hl, ll, m, _ = tire
    rs, goal = refined
    hl_outs = simulate(hl, rs.hl_strategy, parse_formula("At_HL(13)", hl))
    ll_outs = simulate(ll, rs, goal)
    assert all(o.met for o in hl_outs) and all(o.met for o in ll_outs)
    # each LL outcome explains to an HL outcome
    hl_traces = {o.trace for o in hl_outs}
    for o in ll_outs:
        assert explain(m, o.trace).hl_sequence in hl_traces


def test_refined_strategy_serialization(refined):
    rs, _ = refined
    a = rs.dumps()
    assert a == rs.dumps()
    data = json.loads(a)
    assert data["format"] == "ndax-refined-strategy"
    assert [e["key"] for e in data["ll_decisions"]] == sorted(e["key"] for e in data["ll_decisions"])
    assert STOP in {e["action"] for e in data["ll_decisions"]}
