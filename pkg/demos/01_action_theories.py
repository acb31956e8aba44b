"""
Nondeterministic action theories
================================

Load the two tireworld theories, look at a state, and step through the
reactions the environment may choose for a drive.
"""

from ndax import FIXTURES, AgentAction
from ndax.lang import load_theory
from ndax.theory import legal_reactions, validate_ndbat

ll = load_theory(FIXTURES / "tire_ll.ndt")
hl = load_theory(FIXTURES / "tire_hl.ndt")
print(ll)
print(hl)

# states are sets of true atoms; dynamic_only hides the static road map
s0 = ll.initial_state
print("initial state:", ll.describe(s0, True))

# the agent picks drive(11, 12); the environment picks the reaction
drive = AgentAction("drive", ("11", "12"))
for e in legal_reactions(ll, s0, drive):
    s1 = ll.successor(s0, drive.with_reaction(e))
    print(f"  {e:11s} ->", ll.describe(s1, True))

# every possible system action must respect the agent precondition, and every
# executable agent action must have some reaction
for th in (ll, hl):
    rep = validate_ndbat(th)
    print(f"{th.name}: {rep.states_checked} reachable states, {len(rep.violations)} violations")
