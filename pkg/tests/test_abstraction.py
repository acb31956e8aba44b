import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndax import FIXTURES, AgentAction, SystemAction
from ndax import congolog as cg
from ndax.abstraction import (
    Analysis,
    check_abstraction,
    check_constraint,
    check_proper_mapping,
    compute_m_bisimulation,
    m_isomorphic,
    map_agent_program,
    map_fluent_formula,
    refinement_reachable,
    verify_complete_abstraction,
    verify_sound_abstraction,
)
from ndax.errors import UnsupportedConstructError
from ndax.lang import SourceDocument, load_mapping, load_theory, parse_formula, parse_program
from ndax.theory import eval_formula


def equivalent(th, f, g, states):
    return all(eval_formula(th, s, f) == eval_formula(th, s, g) for s in states)


def test_map_fluent_formula(tire, logistics):
    hl, ll, m, _ = tire
    states = refinement_reachable(ll, m)
    assert map_fluent_formula(m, parse_formula("Flat_HL", hl)) == parse_formula("Flat_LL", ll)
    got = map_fluent_formula(m, parse_formula("!Flat_HL & At_HL(13)", hl))
    assert equivalent(ll, got, parse_formula("!Flat_LL & At_LL(13)", ll), states)

    hl, ll, m = logistics
    got = map_fluent_formula(m, parse_formula("Closed_Rt(Rt_B)", hl))
    want = parse_formula("Closed_Rd(Rd_k) or (Closed_Rd(Rd_c) & Closed_Rd(Rd_d))", ll)
    atoms = [ll.atom("Closed_Rd", r) for r in ("Rd_a", "Rd_b", "Rd_k", "Rd_c", "Rd_d")]
    combos = [sum(a for a, on in zip(atoms, bits) if on) | ll.initial_state for bits in itertools.product((0, 1), repeat=5)]
    assert equivalent(ll, got, want, combos)


def test_map_agent_program(tire):
    hl, ll, m, go = tire
    mapped = map_agent_program(m, go.instantiate("13"))
    assert str(mapped).endswith("At_LL(13)?")
    assert "drive(o, d)" in str(mapped) and "fixFlatTire(d)" in str(mapped)
    assert map_agent_program(m, cg.test(parse_formula("Flat_HL", hl))) == cg.test(parse_formula("Flat_LL", ll))
    waits = parse_program("wait_HL; wait_HL", hl)
    assert map_agent_program(m, waits) == cg.seq(cg.act("wait_LL"), cg.act("wait_LL"))
    with pytest.raises(UnsupportedConstructError):
        map_agent_program(m, cg.conc(cg.act("wait_HL"), cg.act("stop_HL")))


def test_refinement_reachable(tire):
    _, ll, m, _ = tire
    states = refinement_reachable(ll, m)
    at = [ll.atom("At_LL", l) for l in ll.sorts["Loc"]]
    assert all(sum(1 for b in at if s & b) == 1 for s in states)
    assert any(s & ll.atom("At_LL", "12") and s & ll.atom("Flat_LL") for s in states)


EMPTY_HL = """
theory Empty : high {
  sort Loc {11, 12, 13, 21, 22, 31};
  fluent Here(l: Loc);
  init { closed: Here(11); }
}
"""
EMPTY_MAP = "mapping empty from Empty to TireLL { fluent Here(l): At_LL(l); }"


def test_mapping_without_hl_actions(tire):
    _, ll, _, _ = tire
    hl = load_theory(EMPTY_HL)
    m = load_mapping(SourceDocument(EMPTY_MAP, "<empty>", "mapping"), hl, ll)
    assert refinement_reachable(ll, m) == [ll.initial_state]
    assert check_proper_mapping(ll, m)
    assert verify_sound_abstraction(hl, ll, m).ok
    assert verify_complete_abstraction(hl, ll, m)


def test_proper_mapping(tire, mutant):
    hl, ll, m, _ = tire
    assert check_proper_mapping(ll, m)
    bad = load_mapping(FIXTURES / "mutants" / "tire_nofix.ndm", hl, ll)
    r = check_proper_mapping(ll, bad)
    assert not r
    end = set(r.witness["end_state"])
    loc = next(a[len("At_LL("):-1] for a in end if a.startswith("At_LL("))
    assert "Flat_LL" in end and f"Spare_LL({loc})" in end
    assert r.witness["action"].startswith("driveAndTryFix")


@pytest.mark.parametrize("which", ["inev_term", "agt_exec", "env_exec"])
def test_constraints_hold_on_tireworld(tire, which):
    _, ll, m, _ = tire
    assert check_constraint(ll, m, which)


def test_unknown_constraint(tire):
    _, ll, m, _ = tire
    with pytest.raises(ValueError):
        check_constraint(ll, m, "nope")


def test_bisimulation(tire):
    hl, ll, m, _ = tire
    rel = compute_m_bisimulation((hl, hl.initial_state), (ll, ll.initial_state), m)
    assert rel is not None and (hl.initial_state, ll.initial_state) in rel
    assert all(m_isomorphic(m, h, s) for h, s in rel.pairs)
    assert all(len(rel.partners(s)) == 1 for _, s in rel.pairs)


def test_bisimulation_fails_for_the_noflat_mutant(tire, mutant):
    _, ll, _, _ = tire
    hl = mutant("tire_hl_noflat.ndt")
    m = load_mapping(FIXTURES / "tire.ndm", hl, ll)
    assert compute_m_bisimulation((hl, hl.initial_state), (ll, ll.initial_state), m) is None


def identity_mapping(th):
    copy = load_theory(SourceDocument((FIXTURES / "tire_hl.ndt").read_text().replace("TireHL", "TireCopy"), "<copy>", "theory"))
    lines = ["mapping ident from TireHL to TireCopy {"]
    for name, sch in th.actions.items():
        ps = ", ".join(p for p, _ in sch.params)
        call = f"{name}({ps})" if ps else name
        sys_call = f"{name}({ps + ', ' if ps else ''}r_l)"
        lines.append(f"  action {name}({ps}) {{ agent: {call}; system(r_h): pi r_l. {sys_call}; r_h = r_l?; }}")
    for name, sch in th.fluents.items():
        ps = ", ".join(f"x{i}" for i in range(len(sch.params)))
        lines.append(f"  fluent {name}{'(' + ps + ')' if ps else ''}: {name}{'(' + ps + ')' if ps else ''};")
    lines.append("}")
    return copy, load_mapping(SourceDocument("\n".join(lines), "<ident>", "mapping"), th, copy)


def test_identity_mapping_gives_the_identity_relation(tire):
    hl = tire[0]
    copy, m = identity_mapping(hl)
    rel = compute_m_bisimulation((hl, hl.initial_state), (copy, copy.initial_state), m)
    states = refinement_reachable(copy, m)
    assert rel is not None
    assert sorted(rel.pairs) == sorted((hl.state_from_atoms(copy.describe(s)), s) for s in states)
    assert all(hl.describe(h) == copy.describe(s) for h, s in rel.pairs)


def test_sound_and_complete(tire):
    hl, ll, m, _ = tire
    rep = verify_sound_abstraction(hl, ll, m)
    assert [c.check for c in rep.checks] == ["sound_a", "sound_b", "sound_c"]
    assert rep.ok
    assert verify_complete_abstraction(hl, ll, m)


def test_sound_b_fails_when_driving_demands_a_spare(tire):
    hl, ll, _, _ = tire
    m = load_mapping(FIXTURES / "mutants" / "tire_spare_uncond.ndm", hl, ll)
    rep = verify_sound_abstraction(hl, ll, m)
    assert not rep["sound_b"]
    w = rep["sound_b"].witness
    s = ll.state_from_atoms(w["state"])
    d = w["action"].split("(")[1].split(",")[1].strip()
    assert not s & ll.atom("Spare_LL", d)


def test_incomplete_when_hl_has_more_models(tire, mutant, tt_plus):
    _, ll, _, _ = tire
    hl = mutant("tire_hl_open.ndt")
    m = load_mapping(FIXTURES / "tire.ndm", hl, ll)
    assert len(hl.initial_models()) == 2
    assert not verify_complete_abstraction(hl, ll, m)
    assert verify_sound_abstraction(hl, ll, m)["sound_a"]
    assert not verify_complete_abstraction(*tt_plus)


def test_check_abstraction_report(tire):
    hl, ll, m, _ = tire
    rep = check_abstraction(hl, ll, m, ["proper", "inev_term", "agt_exec", "env_exec", "sound", "complete", "sd"])
    data = rep.to_json()
    assert data["ok"] is True
    assert [c["check"] for c in data["checks"]] == ["proper", "C2", "C3", "C4", "sound_a", "sound_b", "sound_c", "complete", "situation_determined"]
    assert all(c["status"] == "pass" for c in data["checks"])
    with pytest.raises(ValueError):
        check_abstraction(hl, ll, m, ["bogus"])


def test_logistics_mapping(logistics):
    hl, ll, m = logistics
    assert check_proper_mapping(ll, m)
    rep = verify_sound_abstraction(hl, ll, m)
    assert rep["sound_a"] and rep["sound_c"]
    assert not rep["sound_b"]  # recorded in the decisions ledger
    assert verify_complete_abstraction(hl, ll, m)
    assert len(refinement_reachable(ll, m)) == 3072


# ------------------------------------------------------------ transfer properties


def hl_sequences(hl, s0, n):
    """All executable HL system-action sequences of length <= n with their end states."""
    out = [((), s0)]
    layer = [((), s0)]
    for _ in range(n):
        nxt = []
        for seq_, s in layer:
            for a, t in hl.transitions(s):
                nxt.append((seq_ + (a,), t))
        out.extend(nxt)
        layer = nxt
    return out


def test_executability_transfer(tire):
    hl, ll, m, _ = tire
    an = Analysis.of(m)
    for alphas, h in hl_sequences(hl, hl.initial_state, 3):
        ends = an.refine_sequence(alphas)
        assert ends, alphas
        assert {an.image(s) for s in ends} == {h}
    # a sequence that is not HL executable has no refinement run
    bad = (SystemAction("driveAndTryFix", ("11", "13"), "DrvNoFlat"),)
    assert not an.refine_sequence(bad)


def test_agent_sequence_transfer(tire):
    hl, ll, m, _ = tire
    an = Analysis.of(m)
    acts = [a for a in hl.agent_actions() if a.name != "stop_HL"]
    frontier = {(): ({hl.initial_state}, {ll.initial_state})}
    for _ in range(2):
        nxt = {}
        for seq_, (hs, ls) in frontier.items():
            for aa in acts:
                h2 = {hl.successor(h, aa.with_reaction(e)) for h in hs for e in hl.legal_reactions(h, aa)}
                l2 = set().union(*(an.agent_ends(aa, s) for s in ls)) if ls else set()
                assert {an.image(s) for s in l2} == h2, seq_ + (aa,)
                if h2:
                    nxt[seq_ + (aa,)] = (h2, l2)
        frontier = nxt


HL_ATOMS = ["Flat_HL", "At_HL(11)", "At_HL(12)", "At_HL(13)", "Spare_HL(21)", "Visited_HL(22)", "Road_HL(12, 13)"]


def hl_formulas():
    leaf = st.sampled_from(HL_ATOMS)

    def extend(sub):
        return st.one_of(
            sub.map(lambda f: f"!({f})"),
            st.tuples(sub, sub, st.sampled_from(["&", "or", "->"])).map(lambda t: f"({t[0]}) {t[2]} ({t[1]})"),
            sub.map(lambda f: f"exists l: Loc. At_HL(l) & ({f})"),
            sub.map(lambda f: f"forall l: Loc. Visited_HL(l) -> ({f})"),
        )

    return st.recursive(leaf, extend, max_leaves=6)


@pytest.fixture(scope="module")
def bisim_pairs(tire):
    hl, ll, m, _ = tire
    rel = compute_m_bisimulation((hl, hl.initial_state), (ll, ll.initial_state), m)
    return sorted(rel.pairs)[::7]


@settings(max_examples=50, deadline=None)
@given(text=hl_formulas())
def test_m_isomorphic_states_agree_on_mapped_formulas(tire, bisim_pairs, text):
    hl, ll, m, _ = tire
    f = parse_formula(text, hl)
    g = map_fluent_formula(m, f)
    for h, s in bisim_pairs:
        assert eval_formula(hl, h, f) == eval_formula(ll, s, g)


def test_agent_program_ends_match_hl_on_bisimilar_states(tire):
    hl, ll, m, _ = tire
    an = Analysis.of(m)
    for s in refinement_reachable(ll, m)[::5]:
        h = an.image(s)
        for aa in hl.agent_actions():
            hl_ends = {hl.successor(h, aa.with_reaction(e)) for e in hl.legal_reactions(h, aa)}
            assert {an.image(t) for t in an.agent_ends(aa, s)} == hl_ends
            assert bool(hl_ends) == bool(an.agent_ends(aa, s))
            assert hl.poss_ag_fn(aa)(h) == bool(an.agent_ends(AgentAction(aa.name, aa.args), s))
