"""The twelve acceptance criteria, each timed against its budget.

Every criterion prints one ``criterion N: PASS|FAIL`` line.  Two criteria
are expected failures; their reasons are in the xfail markers below.
Run directly (``python3 tests/test_acceptance.py``) for the summary alone.
"""

import random
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import brute_force_agent_wins, random_micro_theory  # noqa: E402

from ndax import FIXTURES, AgentAction, AmbiguityError, SystemAction  # noqa: E402
from ndax import congolog as cg  # noqa: E402
from ndax.abstraction import (  # noqa: E402
    Analysis,
    check_constraint,
    check_proper_mapping,
    compute_m_bisimulation,
    map_agent_program,
    map_fluent_formula,
    verify_complete_abstraction,
    verify_sound_abstraction,
)
from ndax.lang import load_mapping, load_program, load_theory, parse_action, parse_formula  # noqa: E402
from ndax.monitoring import (  # noqa: E402
    check_coverage_assumption,
    check_refinement_assumptions,
    explain,
    hl_query,
)
from ndax.strategic import load_strategy, solve_goal_game, solve_program_game, verify_strategy, weak_plan  # noqa: E402
from ndax.theory import validate_ndbat  # noqa: E402

CRITERIA: dict = {}


def criterion(n, title, budget):
    def deco(fn):
        CRITERIA[n] = (title, budget, fn)
        return fn

    return deco


def pair(prefix, mapping=None):
    hl = load_theory(FIXTURES / f"{prefix}_hl.ndt")
    ll = load_theory(FIXTURES / f"{prefix}_ll.ndt")
    return hl, ll, load_mapping(FIXTURES / (mapping or f"{prefix}.ndm"), hl, ll)


def A(name, *args):
    return AgentAction(name, tuple(args))


def S(name, args, reaction):
    return SystemAction(name, tuple(args), reaction)


def hl_system_actions(hl, s):
    for aa in hl.agent_actions():
        for e, fn in hl.reaction_table(aa):
            if fn(s):
                yield aa.with_reaction(e)


def program_game(th, p, s):
    sd = bool(cg.check_situation_determined(th, p, s))
    return solve_program_game(th, p, s, allow_non_sd=not sd)


# ---------------------------------------------------------------- criteria


@criterion(1, "action theories are valid NDBATs", 2.0)
def c1():
    names = ["tire_ll", "tire_hl", "tt_plus_ll", "tt_plus_hl", "logistics_hl", "logistics_ll"]

    parts, ok, slowest = [], True, 0.0
    for name in names:
        t = time.perf_counter()
        rep = validate_ndbat(load_theory(FIXTURES / f"{name}.ndt"))
        dt = time.perf_counter() - t
        slowest = max(slowest, dt)
        ok &= bool(rep)
        parts.append(f"{name} {'ok' if rep else 'violations'}")
    return ok, "; ".join(parts) + f"; slowest validation {slowest:.2f}s", slowest


@criterion(2, "tireworld mapping is proper; the no-fix mutant is not", 5.0)
def c2():
    hl, ll, m = pair("tire")
    good = check_proper_mapping(ll, m)
    bad = check_proper_mapping(ll, load_mapping(FIXTURES / "mutants" / "tire_nofix.ndm", hl, ll))
    end = set(bad.witness["end_state"]) if not bad else set()
    loc = next((a[len("At_LL("):-1] for a in end if a.startswith("At_LL(")), None)
    at_flat_spare = "Flat_LL" in end and f"Spare_LL({loc})" in end
    return bool(good) and not bad and at_flat_spare, f"proper={bool(good)}; mutant witness at Flat & Spare({loc})={at_flat_spare}"


@criterion(3, "sound and complete abstraction; bisimulation relates the initial pair", 10.0)
def c3():
    hl, ll, m = pair("tire")
    sound = verify_sound_abstraction(hl, ll, m)
    complete = verify_complete_abstraction(hl, ll, m)
    rel = compute_m_bisimulation((hl, hl.initial_state), (ll, ll.initial_state), m)
    init = rel is not None and (hl.initial_state, ll.initial_state) in rel
    return sound.ok and bool(complete) and init, f"sound={sound.ok} complete={bool(complete)} initial pair related={init}"


@criterion(4, "constraints inev_term, agt_exec and env_exec hold", 10.0)
def c4():
    _, ll, m = pair("tire")
    res = {w: bool(check_constraint(ll, m, w)) for w in ("inev_term", "agt_exec", "env_exec")}
    return all(res.values()), " ".join(f"{k}={v}" for k, v in res.items())


@criterion(5, "weak plans transfer between levels", 1.0)
def c5():
    hl, ll, _ = pair("tire")
    gh, gl = parse_formula("At_HL(13)", hl), parse_formula("At_LL(13)", ll)
    h = weak_plan(hl, hl.initial_state, gh, [A("driveAndTryFix", "11", "12"), A("driveAndTryFix", "12", "13")])
    lo = weak_plan(ll, ll.initial_state, gl, [A("drive", "11", "12"), A("drive", "12", "13")])
    found = weak_plan(ll, ll.initial_state, gl)
    n = len(found.plan) if found else None
    return bool(h) and bool(lo) and n == 2, f"HL plan={bool(h)} LL plan={bool(lo)} LL search length={n}"


@criterion(6, "strong plans at both levels; hand-written and extracted strategies verify", 5.0)
def c6():
    hl, ll, _ = pair("tire")
    parts, ok = [], True
    for th, g, name in ((hl, "At_HL(13)", "f_h_repaired"), (ll, "At_LL(13)", "f_l_repaired")):
        goal = parse_formula(g, th)
        r = solve_goal_game(th, th.initial_state, goal)
        extracted = bool(r) and bool(verify_strategy(th, th.initial_state, goal, r.strategy))
        hand = bool(verify_strategy(th, th.initial_state, goal, load_strategy(FIXTURES / "strategies" / f"{name}.json", th)))
        ok &= bool(r) and extracted and hand
        parts.append(f"{g}: wins={bool(r)} extracted={extracted} {name}={hand}")
    return ok, "; ".join(parts)


@criterion(7, "program tasks win at both levels, including the composite task", 10.0)
def c7():
    hl, ll, m = pair("tire")
    go = load_program(FIXTURES / "go.ndp", hl)
    p = go.instantiate("13")
    h = solve_program_game(hl, p, hl.initial_state)
    lo = solve_program_game(ll, map_agent_program(m, p), ll.initial_state)
    comp = solve_program_game(hl, cg.seq(go.instantiate("31"), p), hl.initial_state, allow_non_sd=True)
    return bool(h) and bool(lo) and bool(comp), f"go(13) HL={bool(h)} LL={bool(lo)}; go(31);go(13)={bool(comp)}"


@criterion(8, "HL wins imply LL wins after every refined sequence of length <= 3", 30.0)
def c8():
    hl, ll, m = pair("tire")
    go = load_program(FIXTURES / "go.ndp", hl)
    g = parse_formula("At_HL(13)", hl)
    gl = map_fluent_formula(m, g)
    p = go.instantiate("13")
    pl = map_agent_program(m, p)
    an = Analysis.of(m)
    nodes, stack = [], [((), hl.initial_state, frozenset([ll.initial_state]))]
    while stack:
        alpha, h, states = stack.pop()
        nodes.append((alpha, h, states))
        if len(alpha) == 3:
            continue
        for a in hl_system_actions(hl, h):
            aa = AgentAction(a.name, a.args)
            nxt = frozenset().union(*(an.system_ends(aa, s)[a.reaction] for s in states))
            if nxt:
                stack.append((alpha + (a,), hl.successor_fn(a)(h), nxt))
    checked = violations = 0
    for alpha, h, states in nodes:
        hw = bool(solve_goal_game(hl, h, g))
        hp = bool(program_game(hl, p, h))
        for s in states:
            checked += 1
            if (hw and not solve_goal_game(ll, s, gl)) or (hp and not program_game(ll, pl, s)):
                violations += 1
    return violations == 0, f"{len(nodes)} HL sequences, {checked} image states, {violations} violations"


@criterion(9, "monitoring: explanation, HL queries, assumptions and coverage at depth 4", 10.0)
def c9():
    hl, ll, m = pair("tt_plus")
    trace = [S("drive", ("11", "21"), "NoFlatTire"), S("drive", ("21", "12"), "FlatTire")]
    want = (S("driveAndTryFix", ("11", "21"), "DrvNoFlat"), S("driveAndTryFix", ("21", "12"), "DrvFlat"))
    r = explain(m, trace)
    expl = r.hl_sequence == want and r.lp == 2
    q = (
        hl_query(hl, r.hl_sequence, "At_HL(12)", "entailed"),
        hl_query(hl, r.hl_sequence, "Poss(serviceAndFix(12, Succ_HServ))", "satisfiable"),
        hl_query(hl, r.hl_sequence, "Poss(buyAndFix(12, Succ_HBuy))", "entailed"),
    )
    assumptions = check_refinement_assumptions(ll, m).ok
    cov = check_coverage_assumption(ll, m, 4)
    detail = f"explain lp={r.lp} match={expl}; queries={all(q)}; assumptions={assumptions}; coverage@4={bool(cov)}"
    if not cov:
        detail += " orphan: " + "; ".join(cov.witness["trace"])
    return expl and all(q) and assumptions and bool(cov), detail


def _tire_round_trip(hl, m):
    ll = m.ll
    checked = wrong = 0
    stack = [((), hl.initial_state, (), ll.initial_state)]
    while stack:
        alpha, h, trace, s = stack.pop()
        r = explain(m, trace)
        checked += 1
        wrong += r.hl_sequence != alpha or r.lp != len(trace)
        if len(alpha) == 3:
            continue
        for a in hl_system_actions(hl, h):
            for run, s2 in cg.terminating_runs(ll, m.system_program(a), s, "system"):
                stack.append((alpha + (a,), hl.successor_fn(a)(h), trace + tuple(run), s2))
    return checked, wrong


def _sampled_round_trip(hl, m, samples, seed):
    ll = m.ll
    rng = random.Random(seed)
    wrong = ambiguous = 0
    witness = None
    for _ in range(samples):
        h, s, alpha, trace = hl.initial_state, ll.initial_state, (), ()
        for _ in range(rng.randint(0, 3)):
            options = []
            for a in hl_system_actions(hl, h):
                runs = sorted(cg.terminating_runs(ll, m.system_program(a), s, "system"), key=lambda r: [str(x) for x in r[0]])
                if runs:
                    options.append((a, runs))
            if not options:
                break
            a, runs = rng.choice(sorted(options, key=lambda o: str(o[0])))
            run, s = rng.choice(runs)
            h = hl.successor_fn(a)(h)
            alpha, trace = alpha + (a,), trace + tuple(run)
        try:
            r = explain(m, trace)
            wrong += r.hl_sequence != alpha or r.lp != len(trace)
        except AmbiguityError:
            ambiguous += 1
            if witness is None:
                witness = (trace, alpha)
    return wrong, ambiguous, witness


@criterion(10, "explain inverts refinement on tireworld and logistics (length <= 3)", 30.0)
def c10():
    hl, _, m = pair("tire")
    checked, wrong = _tire_round_trip(hl, m)
    detail = f"tireworld: {checked} sequences, {wrong} wrong"
    hl, _, m = pair("logistics")
    samples = 300
    lw, amb, witness = _sampled_round_trip(hl, m, samples, seed=2024)
    detail += f"; logistics: {samples} seeded samples, {lw} wrong, {amb} ambiguous"
    if witness:
        trace, alpha = witness
        detail += f" (e.g. [{'; '.join(map(str, trace))}] for [{'; '.join(map(str, alpha))}])"
    return wrong == 0 and lw == 0 and amb == 0, detail


@criterion(11, "goal-game verdicts match a brute-force oracle on 50 micro theories", 60.0)
def c11():
    mismatches = wins = 0
    for seed in range(50):
        mt = random_micro_theory(seed)
        th = load_theory(mt.source())
        got = bool(solve_goal_game(th, th.initial_state, parse_formula(mt.goal_text(), th)))
        want = brute_force_agent_wins(mt)
        wins += want
        mismatches += got != want
    return mismatches == 0, f"50 theories, {wins} winnable, {mismatches} mismatches"


@criterion(12, "logistics mapping is proper; checkRouteStatus successor matches", 10.0)
def c12():
    hl, ll, m = pair("logistics")
    proper = check_proper_mapping(ll, m)
    s0 = hl.initial_state
    s1 = hl.successor(s0, parse_action("checkRouteStatus({close_Rt(Rt_A)})", hl))
    want = sorted(set(hl.describe(s0)) | {"Closed_Rt(Rt_A)"})
    return bool(proper) and hl.describe(s1) == want, f"proper={bool(proper)}; successor matches={hl.describe(s1) == want}"


# ------------------------------------------------------------------ runner

EXPECTED_FAILURES = {
    9: "coverage fails at depth 3 on tt+: calling service and then ordering is no refinement of any HL action",
    10: "the literal logistics mapping violates disjointness: a failed first leg out of L2 refines the failure of either route",
}


def run_criterion(n):
    title, budget, fn = CRITERIA[n]
    t = time.perf_counter()
    out = fn()
    elapsed = time.perf_counter() - t
    ok, detail = out[0], out[1]
    timed = out[2] if len(out) > 2 else elapsed
    within = timed < budget
    verdict = "PASS" if ok and within else "FAIL"
    line = f"criterion {n:2d}: {verdict}  {title} ({elapsed:.2f}s, budget {budget:g}s) -- {detail}"
    return ok and within, line


@pytest.mark.parametrize(
    "n",
    [pytest.param(n, marks=pytest.mark.xfail(strict=True, reason=EXPECTED_FAILURES[n])) if n in EXPECTED_FAILURES else n for n in range(1, 13)],
)
def test_criterion(n, capsys):
    ok, line = run_criterion(n)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    for n in sorted(CRITERIA):
        print(run_criterion(n)[1], flush=True)
