"""
Programs over system actions
============================

A refinement of a high-level action is a nondeterministic program over
low-level actions.  Here we run one and collect its complete runs.
"""

from ndax import FIXTURES, AgentAction
from ndax import congolog as cg
from ndax.lang import load_mapping, load_theory

hl = load_theory(FIXTURES / "tire_hl.ndt")
ll = load_theory(FIXTURES / "tire_ll.ndt")
m = load_mapping(FIXTURES / "tire.ndm", hl, ll)
s0 = ll.initial_state

dtf = AgentAction("driveAndTryFix", ("11", "21"))
print("agent program:", m.agent_program(dtf))

# one run per environment reaction; a flat at 21 (which has a spare) is fixed
for trace, end in sorted(cg.terminating_runs(ll, m.agent_program(dtf), s0, "agent"), key=str):
    print("  ", "; ".join(map(str, trace)), "->", ll.describe(end, True))

# the system program for one high-level reaction admits only matching runs
sys_prog = m.system_program(dtf.with_reaction("DrvFlatFix"))
print("system program:", sys_prog)
for trace, _ in cg.terminating_runs(ll, sys_prog, s0, "system"):
    print("  ", "; ".join(map(str, trace)))

# refinement programs commit to one remaining program at each step
print("situation determined:", bool(cg.check_situation_determined(ll, sys_prog, s0)))
