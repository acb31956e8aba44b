"""
Synthesize high, execute low
============================

Solve the goal on the small high-level model, refine every decision into a
low-level strategy, and play it against different environments.
"""

from ndax import FIXTURES
from ndax.abstraction import map_fluent_formula
from ndax.lang import load_mapping, load_theory, parse_formula
from ndax.pipeline import prefer, simulate, synthesize_and_refine

hl = load_theory(FIXTURES / "tire_hl.ndt")
ll = load_theory(FIXTURES / "tire_ll.ndt")
m = load_mapping(FIXTURES / "tire.ndm", hl, ll)
goal = parse_formula("At_HL(13)", hl)

rs = synthesize_and_refine(hl, ll, m, goal)
print("feasible:", rs.feasible, f"({len(rs.table)} low-level decisions)")
for s, d in sorted(rs.table.items(), key=lambda kv: ll.describe(kv[0], True)):
    print(f"  {', '.join(ll.describe(s, True)):55s} => {d}")

ll_goal = map_fluent_formula(m, goal)
outcomes = simulate(ll, rs, ll_goal)
print(f"exhaustive: {len(outcomes)} outcomes, all reach the goal: {all(o.met for o in outcomes)}")
longest = max(outcomes, key=lambda o: o.steps)
print("longest run:", "; ".join(map(str, longest.trace)))

for adversary in (prefer("FlatTire"), 7):
    o = simulate(ll, rs, ll_goal, adversary)
    print(f"{o.adversary}: {o.steps} steps, goal met: {o.met}")
