"""
Checking an abstraction
=======================

A refinement mapping links a high-level theory to a low-level one.  We check
that it is proper, satisfies the constraints and gives a sound and complete
abstraction, then break it on purpose.
"""

from ndax import FIXTURES
from ndax.abstraction import check_abstraction, check_proper_mapping, compute_m_bisimulation
from ndax.lang import load_mapping, load_theory

hl = load_theory(FIXTURES / "tire_hl.ndt")
ll = load_theory(FIXTURES / "tire_ll.ndt")
m = load_mapping(FIXTURES / "tire.ndm", hl, ll)

report = check_abstraction(hl, ll, m, ["proper", "inev_term", "agt_exec", "env_exec", "sound", "complete"])
for c in report.checks:
    print(f"  {c.check:10s} {'pass' if c else 'FAIL'}")

rel = compute_m_bisimulation((hl, hl.initial_state), (ll, ll.initial_state), m)
print(f"m-bisimulation: {len(rel.pairs)} related pairs")

# drop the fix branch from the refinement: a flat at a spare is left unfixed
nofix = load_mapping(FIXTURES / "mutants" / "tire_nofix.ndm", hl, ll)
r = check_proper_mapping(ll, nofix)
print("mutant proper:", bool(r))
print("  action:", r.witness["action"])
print("  stray end state:", [a for a in r.witness["end_state"] if not a.startswith("Road")])
