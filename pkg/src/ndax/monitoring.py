"""Online monitoring: explain low-level traces as high-level system actions.

A trace is parsed against the implicit grammar "any refinement of any HL
system action, repeated".  The parser keeps a frontier of hypotheses, each
pairing the HL actions completed so far with one in-progress configuration
of some m_s(A(x, e)).  Where the HL reaction only occurs in tests of the
mapping body, one lifted configuration stands for all reactions at once.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import congolog as cg
from .abstraction import AbstractionReport, Analysis, CheckResult
from .errors import AmbiguityError, CapacityError, CoverageError, ExecutionError, SpecificationError
from .logic import Formula, ReactionSet
from .mapping import RefinementMapping
from .theory import AgentAction, GroundTheory, State, SystemAction, action_key, enumerate_initial_models

# ---------------------------------------------------------------- traces


def _reaction_from_json(v):
    if isinstance(v, (list, tuple)):
        return ReactionSet(str(x) for x in v)
    return str(v)


def load_trace(source, ll: GroundTheory) -> list:
    """Trace from a JSON path, JSON text or list of ``{action, args, reaction}``."""
    if isinstance(source, Path) or (isinstance(source, str) and source.lstrip()[:1] not in ("[", "{")):
        data = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        data = json.loads(source)
    else:
        data = source
    if not isinstance(data, list):
        raise SpecificationError("a trace is a JSON list of {action, args, reaction} objects")
    out = []
    for i, item in enumerate(data):
        if isinstance(item, SystemAction):
            a = item
        elif isinstance(item, dict) and {"action", "reaction"} <= item.keys():
            a = SystemAction(item["action"], tuple(str(x) for x in item.get("args", ())), _reaction_from_json(item["reaction"]))
        else:
            raise SpecificationError(f"trace item {i}: expected {{action, args, reaction}}, got {item!r}")
        ll.check_action(a)
        out.append(a)
    return out


def trace_to_json(trace: Iterable[SystemAction]) -> list:
    out = []
    for a in trace:
        r = sorted(a.reaction) if isinstance(a.reaction, ReactionSet) else a.reaction
        out.append({"action": a.name, "args": list(a.args), "reaction": r})
    return out


# ------------------------------------------------------- refinement grammar


class _Grammar:
    """Start configurations and steps of every m_s(A(x, e)), with pruning.

    An item is ``(agent action, reaction or None, program, mask)``; a None
    reaction means the item is lifted over all reactions of the action and
    ``mask`` tracks which of them are still alive.
    """

    def __init__(self, m: RefinementMapping):
        self.m = m
        self.ll = m.ll
        self._templates = {}
        for aa in m.hl.agent_actions():
            body, var = m.system_template(aa)
            values = m.hl.reactions_of(aa.name)
            if cg.mentions_only_in_tests(body, var):
                lift = cg.Lift(var, values)
                self._templates[aa] = (cg.Engine.of(self.ll, lift), lift, ((None, body),))
            else:
                progs = tuple((e, m.system_program(aa.with_reaction(e))) for e in values)
                self._templates[aa] = (cg.Engine.of(self.ll), None, progs)
        self._roots: dict = {}

    def engine(self, aa: AgentAction) -> cg.Engine:
        return self._templates[aa][0]

    def reactions(self, item, mask: int | None = None) -> list:
        aa, e, _, m = item
        if e is not None:
            return [e] if (m if mask is None else mask) else []
        lift = self._templates[aa][1]
        return lift.members(m if mask is None else mask)

    def prune(self, aa, e, q, s, mask):
        """Restrict ``mask`` to values for which some complete run remains."""
        ends = self.engine(aa).ends(q, s, mask)
        if ends is None:
            return mask
        via = 0
        for fm in ends.values():
            via |= fm
        return mask & via

    def roots(self, s: State) -> tuple:
        out = self._roots.get(s)
        if out is None:
            items = []
            for aa, (eng, _, progs) in self._templates.items():
                for e, body in progs:
                    mk = self.prune(aa, e, body, s, eng.full)
                    if mk:
                        items.append((aa, e, body, mk))
            out = self._roots[s] = tuple(items)
        return out

    def final(self, item, s: State) -> int:
        aa, e, q, mask = item
        return self.engine(aa).final(q, s, mask)

    def step(self, item, s: State, label: SystemAction) -> list:
        aa, e, q, mask = item
        out = []
        for lab, q2, m2 in self.engine(aa).steps(q, s, mask):
            if lab == label:
                s2 = self.ll.successor_fn(lab)(s)
                mk = self.prune(aa, e, q2, s2, m2)
                if mk:
                    out.append((aa, e, q2, mk))
        return out

    def moves(self, item, s: State) -> list:
        aa, e, q, mask = item
        out = []
        for lab, q2, m2 in self.engine(aa).steps(q, s, mask):
            s2 = self.ll.successor_fn(lab)(s)
            mk = self.prune(aa, e, q2, s2, m2)
            if mk:
                out.append((lab, s2, (aa, e, q2, mk)))
        return out

    def completed(self, item, s: State) -> list:
        """HL system actions whose refinement ends with ``item`` at ``s``."""
        aa = item[0]
        return [aa.with_reaction(e) for e in self.reactions(item, self.final(item, s))]


def _grammar(m: RefinementMapping) -> _Grammar:
    g = getattr(m, "_grammar", None)
    if g is None:
        g = m._grammar = _Grammar(m)
    return g


# ---------------------------------------------------------------- tracker


@dataclass(frozen=True)
class Hypothesis:
    done: tuple  # completed HL system actions
    item: tuple | None = None  # in-progress refinement, None at a boundary

    @property
    def at_boundary(self) -> bool:
        return self.item is None


@dataclass(frozen=True)
class ParseFrontier:
    m: RefinementMapping
    state: State
    trace: tuple = ()
    hypotheses: frozenset = frozenset()
    completed: tuple = ((),)  # per prefix length: completed HL sequences

    @property
    def position(self) -> int:
        return len(self.trace)


def start_tracker(m: RefinementMapping, state: State | None = None) -> ParseFrontier:
    s = m.ll.initial_state if state is None else state
    return ParseFrontier(m, s, (), frozenset([Hypothesis(())]), (((),),))


def advance_tracker(frontier: ParseFrontier, a: SystemAction) -> ParseFrontier:
    """Consume one LL system action; raises CoverageError if no hypothesis survives."""
    m = frontier.m
    ll = m.ll
    s = frontier.state
    if not ll.poss_fn(a)(s):
        raise ExecutionError(f"{a} is not possible at this point of the trace", action=a, state=s)
    g = _grammar(m)
    s2 = ll.successor_fn(a)(s)
    nxt = set()
    for h in frontier.hypotheses:
        items = g.roots(s) if h.item is None else (h.item,)
        for it in items:
            for it2 in g.step(it, s, a):
                nxt.add(Hypothesis(h.done, it2))
    trace = frontier.trace + (a,)
    if not nxt:
        raise CoverageError(f"no refinement of any HL action produces the trace after {a}", trace)
    done_here = set()
    for h in list(nxt):
        for alpha in g.completed(h.item, s2):
            seq = h.done + (alpha,)
            done_here.add(seq)
            nxt.add(Hypothesis(seq))
        if not g.engine(h.item[0]).steps(h.item[2], s2, h.item[3]):
            nxt.discard(h)
    completed = frontier.completed + (tuple(sorted(done_here, key=_seq_key)),)
    return ParseFrontier(m, s2, trace, frozenset(nxt), completed)


def _seq_key(seq) -> tuple:
    return tuple(action_key(a) for a in seq)


@dataclass
class Residual:
    action: AgentAction
    reactions: tuple
    remaining: cg.Program

    def to_json(self) -> dict:
        return {"action": str(self.action), "reactions": [str(e) for e in self.reactions], "remaining": str(self.remaining)}


@dataclass
class ExplanationResult:
    lp: int
    hl_sequence: tuple
    residual: list = field(default_factory=list)
    alternatives: tuple = ()
    covered: bool = True
    length: int = 0

    def to_json(self) -> dict:
        out = {
            "lp": self.lp,
            "hl_sequence": [str(a) for a in self.hl_sequence],
            "residual_hypotheses": [r.to_json() for r in self.residual],
        }
        if len(self.alternatives) > 1:
            out["alternatives"] = [[str(a) for a in seq] for seq in self.alternatives]
        if not self.covered:
            out["covered"] = False
        return out


def explain(m: RefinementMapping, trace: Iterable[SystemAction], state: State | None = None, allow_ambiguous: bool = False) -> ExplanationResult:
    """Largest explainable prefix of ``trace`` and its HL system action sequence."""
    fr = start_tracker(m, state)
    covered = True
    trace = list(trace)
    for a in trace:
        try:
            fr = advance_tracker(fr, a)
        except CoverageError:
            covered = False
            break
    lp = max(i for i, seqs in enumerate(fr.completed) if seqs)
    seqs = fr.completed[lp]
    if len(seqs) > 1 and not allow_ambiguous:
        shown = "; ".join("[" + ", ".join(map(str, s)) + "]" for s in seqs)
        raise AmbiguityError(
            f"the first {lp} actions have {len(seqs)} explanations ({shown}); refinements of distinct HL actions overlap",
            seqs,
        )
    alpha = seqs[0]
    residual = []
    if covered and lp < len(trace):
        g = _grammar(m)
        for h in sorted(fr.hypotheses, key=lambda h: (len(h.done), str(h.item))):
            if h.item is not None and h.done == alpha:
                residual.append(Residual(h.item[0], tuple(g.reactions(h.item)), h.item[2]))
    return ExplanationResult(lp, alpha, residual, seqs, covered, len(trace))


# ------------------------------------------------------------- assumptions


def check_refinement_assumptions(
    ll: GroundTheory, m: RefinementMapping, limit: int = cg.DEFAULT_MAX_CONFIGS, states: Iterable[State] | None = None
) -> AbstractionReport:
    """Disjoint, maximal and nonempty refinements over refinement-reachable states.

    disjoint: once some m_s(alpha) has completed, no other m_s(alpha') can
    still be on its way to completion along the same trace.  maximal: a
    completed run of m_s(alpha) cannot be continued into a longer complete
    run.  nonempty: every complete run performs at least one action.
    """
    g = _grammar(m)
    states = Analysis.of(m, limit).reachable() if states is None else list(states)
    failures: dict = {}
    for s in states:
        roots = g.roots(s)
        if "nonempty" not in failures:
            for it in roots:
                for alpha in g.completed(it, s):
                    failures["nonempty"] = _fail("nonempty", ll, s, (), f"{alpha} has a refinement with no actions")
                    break
        if "disjoint" in failures and "maximal" in failures:
            continue
        seen = set()
        queue = deque([(frozenset(roots), s, ())])
        while queue:
            items, st, trace = queue.popleft()
            groups: dict = {}
            for it in items:
                for lab, s2, it2 in g.moves(it, st):
                    groups.setdefault((lab, s2), set()).add(it2)
            for (lab, s2), nxt in sorted(groups.items(), key=lambda kv: action_key(kv[0][0])):
                t2 = trace + (lab,)
                key = (frozenset(nxt), s2)
                if key in seen:
                    continue
                if len(seen) >= limit:
                    raise CapacityError(f"more than {limit} parse states while checking refinements")
                seen.add(key)
                done = set()
                alive = set()
                for it in nxt:
                    done.update(g.completed(it, s2))
                    alive.update(it[0].with_reaction(e) for e in g.reactions(it))
                    if "maximal" not in failures:
                        for alpha in g.completed(it, s2):
                            for lab3, s3, it3 in g.moves(it, s2):
                                if alpha.reaction in g.reactions(it3):
                                    failures["maximal"] = _fail(
                                        "maximal", ll, s, t2, f"a complete run of {alpha} continues with {lab3}"
                                    )
                                    break
                if done and "disjoint" not in failures:
                    for alpha in sorted(done, key=action_key):
                        others = sorted((b for b in alive if b != alpha), key=action_key)
                        if others:
                            failures["disjoint"] = _fail(
                                "disjoint", ll, s, t2, f"{alpha} is complete while {others[0]} can still complete"
                            )
                            break
                queue.append((key[0], s2, t2))
    report = AbstractionReport()
    for name in ("disjoint", "maximal", "nonempty"):
        report.add(failures.get(name, CheckResult(name, True)))
    return report


def _fail(name: str, ll: GroundTheory, s: State, trace: tuple, detail: str) -> CheckResult:
    w = {"state": ll.describe(s), "trace": [str(a) for a in trace], "detail": detail}
    return CheckResult(name, False, w, detail)


def check_coverage_assumption(
    ll: GroundTheory, m: RefinementMapping, depth: int, limit: int = cg.DEFAULT_MAX_CONFIGS
) -> CheckResult:
    """Every executable LL trace of length <= depth stays on some refinement parse.

    The witness is a shortest trace after which no hypothesis survives.
    """
    g = _grammar(m)
    boundary = ("boundary",)
    start = [(frozenset([boundary]), s) for s in sorted(enumerate_initial_models(ll))]
    seen = set(start)
    layer = [(node, ()) for node in start]
    for _ in range(depth):
        nxt_layer = []
        for (items, s), trace in layer:
            for a, s2 in sorted(ll.transitions(s), key=lambda t: action_key(t[0])):
                nxt = set()
                for it in items:
                    for it0 in g.roots(s) if it is boundary else (it,):
                        nxt.update(g.step(it0, s, a))
                if not nxt:
                    w = {"state": ll.describe(s2), "trace": [str(x) for x in trace + (a,)]}
                    return CheckResult("coverage", False, w, f"no refinement produces the trace ending with {a}")
                if any(g.final(it, s2) for it in nxt):
                    nxt.add(boundary)
                node = (frozenset(nxt), s2)
                if node not in seen:
                    if len(seen) >= limit:
                        raise CapacityError(f"more than {limit} parse states while checking coverage")
                    seen.add(node)
                    nxt_layer.append((node, trace + (a,)))
        layer = nxt_layer
    return CheckResult("coverage", True, None, f"all traces up to length {depth}")


# ------------------------------------------------------------- HL queries


def _hl_ends(hl: GroundTheory, alphas: Iterable[SystemAction]) -> list:
    """End states of ``alphas`` over the HL initial models where it is executable."""
    out = []
    alphas = list(alphas)
    for s in enumerate_initial_models(hl):
        ok = True
        for a in alphas:
            if not hl.poss_fn(a)(s):
                ok = False
                break
            s = hl.successor_fn(a)(s)
        if ok:
            out.append(s)
    return out


def _formula(hl: GroundTheory, phi):
    if isinstance(phi, str):
        from .lang import parse_formula

        phi = parse_formula(phi, hl)
    return hl.evaluator(phi)


def hl_query(hl: GroundTheory, alphas: Iterable[SystemAction], phi: Formula | str, mode: str = "entailed") -> bool:
    """Does ``phi`` hold after ``alphas`` in some (satisfiable) or every (entailed) model?

    Only models in which the sequence is executable count.  Entailment is
    false when the sequence is executable in no model.
    """
    if mode not in ("satisfiable", "entailed"):
        raise ValueError(f"mode must be 'satisfiable' or 'entailed', got {mode!r}")
    fn = _formula(hl, phi)
    ends = _hl_ends(hl, alphas)
    if mode == "satisfiable":
        return any(fn(s) for s in ends)
    return bool(ends) and all(fn(s) for s in ends)


def next_possible_hl_actions(hl: GroundTheory, alphas: Iterable[SystemAction]) -> list:
    """[(system action, satisfiable, entailed)] for every ground HL system action."""
    ends = _hl_ends(hl, alphas)
    out = []
    for aa in hl.agent_actions():
        for e, fn in hl.reaction_table(aa):
            vals = [bool(fn(s)) for s in ends]
            out.append((aa.with_reaction(e), any(vals), bool(vals) and all(vals)))
    out.sort(key=lambda t: action_key(t[0]))
    return out


__all__ = [
    "ExplanationResult",
    "Hypothesis",
    "ParseFrontier",
    "Residual",
    "advance_tracker",
    "check_coverage_assumption",
    "check_refinement_assumptions",
    "explain",
    "hl_query",
    "load_trace",
    "next_possible_hl_actions",
    "start_tracker",
    "trace_to_json",
]
