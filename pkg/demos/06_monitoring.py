"""
Monitoring a low-level trace
============================

Feed low-level actions one at a time, recover the high-level actions they
implement, and ask what holds or may happen next.
"""

from ndax import FIXTURES, CoverageError
from ndax.lang import load_mapping, load_theory, parse_action
from ndax.monitoring import advance_tracker, explain, hl_query, load_trace, next_possible_hl_actions, start_tracker

hl = load_theory(FIXTURES / "tt_plus_hl.ndt")
ll = load_theory(FIXTURES / "tt_plus_ll.ndt")
m = load_mapping(FIXTURES / "tt_plus.ndm", hl, ll)

trace = load_trace(FIXTURES / "tt_plus_trace.json", ll)
fr = start_tracker(m)
for a in trace:
    fr = advance_tracker(fr, a)
    print(f"after {a}: {[list(map(str, s)) for s in fr.completed[-1]]}")

res = explain(m, trace)
alpha = res.hl_sequence
print("explained prefix:", res.lp, "of", len(trace))

print("At_HL(12) certain:", hl_query(hl, alpha, "At_HL(12)", "entailed"))
for a, sat, ent in next_possible_hl_actions(hl, alpha):
    if sat:
        print(f"  next may be {a}{' (certainly possible)' if ent else ''}")

# an action sequence no refinement produces is reported as soon as it appears
fr = start_tracker(m)
for text in ("drive(11, 12, FlatTire)", "callService(12, Succ_LServ)", "order(12, Succ_LOrder)"):
    try:
        fr = advance_tracker(fr, parse_action(text, ll))
    except CoverageError as exc:
        print("orphan:", exc)
