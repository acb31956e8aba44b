"""
Plans and strategies
====================

A weak plan works for some reactions; a strategy has to win against all of
them.  We solve both on tireworld and check a hand-written strategy.
"""

from ndax import FIXTURES
from ndax.lang import load_program, load_theory, parse_formula
from ndax.strategic import load_strategy, solve_goal_game, solve_program_game, verify_strategy, weak_plan

ll = load_theory(FIXTURES / "tire_ll.ndt")
hl = load_theory(FIXTURES / "tire_hl.ndt")
goal = parse_formula("At_LL(13)", ll)

plan = weak_plan(ll, ll.initial_state, goal)
print("weak plan:", "; ".join(map(str, plan.plan)))

res = solve_goal_game(ll, ll.initial_state, goal)
print("agent can force At_LL(13):", bool(res), f"({res.explored} states explored)")
for s, d in sorted(res.strategy.decisions.items(), key=lambda kv: ll.describe(kv[0], True)):
    print(f"  {', '.join(ll.describe(s, True)):55s} => {d}")

# the literal hand-written strategy gets stuck at 22; the repaired one wins
for name in ("f_l", "f_l_repaired"):
    r = verify_strategy(ll, ll.initial_state, goal, load_strategy(FIXTURES / "strategies" / f"{name}.json", ll))
    print(f"{name}:", "wins" if r else "fails after " + "; ".join(map(str, r.trace)))

# a program objective: follow go(13) and end where its final test holds
go = load_program(FIXTURES / "go.ndp", hl)
print("go(13) at the high level:", bool(solve_program_game(hl, go.instantiate("13"), hl.initial_state)))
