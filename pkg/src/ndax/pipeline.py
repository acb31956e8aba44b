"""Abstraction-guided synthesis and adversarial simulation.

A refined strategy runs the HL strategy at refinement boundaries and, for
each chosen HL action A(x), a low-level strategy that forces some complete
execution of m_a(A(x)).  HL decisions are looked up at the m-bisimilar HL
state of the current LL state.  One HL action is refined to completion
before the HL strategy is consulted again.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Callable

from . import congolog as cg
from .abstraction import Analysis, BisimRelation, check_constraint, compute_m_bisimulation
from .errors import (
    CapacityError,
    ExecutionError,
    RefinementUnsoundError,
    SpecificationError,
    StrategyIncompleteError,
    UnsupportedConstructError,
)
from .logic import Formula
from .mapping import RefinementMapping
from .strategic import (
    STOP,
    AgentStrategy,
    EnvStrategy,
    Strategy,
    SynthesisResult,
    solve_goal_game,
    solve_program_game,
    verify_strategy,
)
from .theory import AgentAction, GroundTheory, State, SystemAction

# ------------------------------------------------------------ controller


@dataclass(frozen=True)
class _Boundary:
    hl_key: object  # HL state, or (HL program, HL state)


@dataclass(frozen=True)
class _InAction:
    hl_key: object
    action: AgentAction
    start: State  # LL state where the refinement began
    config: tuple  # (LL program, LL state)


class RefinedStrategy(Strategy):
    """HL strategy composed with per-action LL strategies (f_l = f_l' o g_l)."""

    def __init__(
        self,
        m: RefinementMapping,
        objective,
        hl_result: SynthesisResult,
        relation: BisimRelation | None,
        limit: int = cg.DEFAULT_MAX_CONFIGS,
    ):
        self.m = m
        self.hl = m.hl
        self.ll = m.ll
        self.objective = objective
        self.hl_result = hl_result
        self.relation = relation
        self.limit = limit
        self.ll_strategies: dict = {}  # (HL action, LL start state) -> AgentStrategy
        self.table: dict = {}  # LL state -> decision, along the strategy's own runs
        self.conflicts: list = []  # LL states where the composed decision depends on history
        self.multiple_partners: list = []
        self.mismatches: list = []
        self._program_objective = isinstance(objective, cg.Program)
        self._option_ok: dict = {}

    @property
    def feasible(self) -> bool:
        return bool(self.hl_result)

    def __bool__(self) -> bool:
        return self.feasible

    @property
    def hl_strategy(self) -> AgentStrategy | None:
        return self.hl_result.strategy

    # -- HL navigation

    def partner(self, s: State) -> State:
        """The HL state bisimilar to LL state ``s`` (least one if several)."""
        hs = self.relation.partners(s) if self.relation is not None else []
        if not hs:
            return Analysis.of(self.m, self.limit).image(s)
        if len(hs) > 1 and s not in self.multiple_partners:
            self.multiple_partners.append(s)
        return hs[0]

    def _ll_strategy(self, a: AgentAction, s: State) -> AgentStrategy:
        key = (a, s)
        g = self.ll_strategies.get(key)
        if g is None:
            p = self.m.agent_program(a)
            sd = bool(cg.check_situation_determined(self.ll, p, s, self.limit))
            res = solve_program_game(self.ll, p, s, allow_non_sd=not sd, limit=self.limit)
            if not res:
                raise RefinementUnsoundError(
                    f"the agent cannot force a complete execution of m_a({a}) here",
                    "C3",
                    {"state": self.ll.describe(s), "action": str(a)},
                )
            g = self.ll_strategies[key] = res.strategy
        return g

    def start(self, s: State):
        h = self.partner(s)
        key = (self.objective, h) if self._program_objective else h
        return _Boundary(key)

    def _open(self, cs, s: State, depth: int = 0):
        """Resolve a boundary into an in-progress HL action (or STOP)."""
        if not isinstance(cs, _Boundary):
            return cs
        d = self.hl_strategy.decide(cs.hl_key)
        if d == STOP:
            return STOP
        g = self._ll_strategy(d, s)
        cfg = (self.m.agent_program(d), s)
        if g.decide(cfg) == STOP:
            # the refinement is already complete: the HL action took no LL steps
            if depth > len(self.hl.agent_actions()):
                raise SpecificationError(f"m_a({d}) completes without any action, repeatedly")
            return self._open(self._close(cs, d, s), s, depth + 1)
        return _InAction(cs.hl_key, d, s, cfg)

    def decide_in(self, cs, s: State):
        cs = self._open(cs, s)
        if cs == STOP:
            return STOP, cs
        g = self.ll_strategies[(cs.action, cs.start)]
        return g.decide(cs.config), cs

    def advance(self, cs, label: SystemAction, s2: State):
        """Controller state after executing ``label`` and reaching ``s2``."""
        g = self.ll_strategies[(cs.action, cs.start)]
        q, s = cs.config
        eng = cg.Engine.of(self.ll)
        options = list(dict.fromkeys((q2, t) for lab, q2, t, _ in eng.transitions(q, s) if lab == label))
        if not options:
            raise ExecutionError(f"{label} is not a step of m_a({cs.action})", action=label, state=s)
        nxt = options[0] if len(options) == 1 else (g.successor(cs.config, label, options) or options[0])
        if g.decide(nxt) == STOP:
            return self._close(_Boundary(cs.hl_key), cs.action, nxt[1])
        return _InAction(cs.hl_key, cs.action, cs.start, nxt)

    def _close(self, b: _Boundary, a: AgentAction, s_end: State):
        """HL key after HL action ``a`` whose refinement ended in ``s_end``."""
        h_end = self.partner(s_end)
        if self._program_objective:
            prog, h = b.hl_key
        else:
            h = b.hl_key
        reactions = [e for e in self.hl.legal_reactions(h, a) if self.hl.successor_fn(a.with_reaction(e))(h) == h_end]
        if not reactions:
            self.mismatches.append((h, a, s_end))
            raise RefinementUnsoundError(
                f"the LL end state of m_a({a}) is not bisimilar to any HL successor",
                "bisimulation",
                {"state": self.ll.describe(s_end), "action": str(a)},
            )
        if not self._program_objective:
            return _Boundary(h_end)
        label = a.with_reaction(reactions[0])
        eng = cg.Engine.of(self.hl)
        options = list(dict.fromkeys((q2, t) for lab, q2, t, _ in eng.transitions(prog, h) if lab == label))
        if not options:
            raise RefinementUnsoundError(f"{label} is not a step of the HL program", "program")
        nxt = options[0]
        if len(options) > 1:
            nxt = self.hl_strategy.successor((prog, h), label, options) or options[0]
        return _Boundary(nxt)

    # -- state-keyed view

    def decide(self, key):
        s = key[1] if isinstance(key, tuple) else key
        d = self.table.get(s)
        if d is None:
            raise StrategyIncompleteError(f"no refined decision for {{{', '.join(self.ll.describe(s))}}}", s)
        return d

    def successor(self, key, label, options):
        """For non-SD task programs: the first remaining program these decisions complete."""
        for q, s in options:
            ok = self._option_ok.get((q, s))
            if ok is None:
                self._option_ok[(q, s)] = False  # guards against re-entry through a cycle
                ok = self._option_ok[(q, s)] = verify_strategy(self.ll, s, q, self).ok
            if ok:
                return (q, s)
        return None

    def explore(self, s0: State, max_steps: int = 10_000) -> None:
        """Run the controller against every reaction and tabulate LL decisions."""
        start = self.start(s0)
        seen = set()
        stack = [(start, s0)]
        while stack:
            cs, s = stack.pop()
            if (cs, s) in seen:
                continue
            if len(seen) >= max_steps * 10:
                raise CapacityError("refined strategy exploration exceeded its limit")
            seen.add((cs, s))
            d, cs = self.decide_in(cs, s)
            prev = self.table.setdefault(s, d)
            if prev != d and s not in self.conflicts:
                self.conflicts.append(s)
            if d == STOP:
                continue
            for e in self.ll.legal_reactions(s, d):
                label = d.with_reaction(e)
                s2 = self.ll.successor_fn(label)(s)
                stack.append((self.advance(cs, label, s2), s2))

    def to_json(self) -> dict:
        ll_entries = []
        for (a, s), g in self.ll_strategies.items():
            ll_entries.append({"hl_action": str(a), "start": self.ll.describe(s), "strategy": g.to_json()})
        ll_entries.sort(key=lambda e: (e["hl_action"], e["start"]))
        table = [
            {"key": self.ll.describe(s), "action": STOP if d == STOP else str(d)}
            for s, d in self.table.items()
        ]
        table.sort(key=lambda e: e["key"])
        return {
            "format": "ndax-refined-strategy",
            "mapping": self.m.name,
            "objective": self.hl_result.objective,
            "feasible": self.feasible,
            "hl_strategy": self.hl_strategy.to_json() if self.hl_strategy is not None else None,
            "ll_strategies": ll_entries,
            "ll_decisions": table,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def synthesize_and_refine(
    hl: GroundTheory,
    ll: GroundTheory,
    m: RefinementMapping,
    objective,
    ll_state: State | None = None,
    verify_constraint: bool = True,
    limit: int = cg.DEFAULT_MAX_CONFIGS,
) -> RefinedStrategy:
    """Solve at HL, then refine each HL decision into an LL strategy.

    ``objective`` is an HL goal Formula or an HL agent Program.  The result
    is falsy (``feasible`` False) when the HL game is lost.
    """
    if isinstance(objective, cg.Program) and cg.contains_conc(objective):
        raise UnsupportedConstructError("concurrent composition is not supported in task programs")
    if verify_constraint:
        c3 = check_constraint(ll, m, "agt_exec", limit)
        if not c3:
            raise RefinementUnsoundError(f"constraint C3 fails: {c3.witness.get('detail', '')}", "C3", c3.witness)
    l0 = ll.initial_state if ll_state is None else ll_state
    h0 = Analysis.of(m, limit).image(l0)
    if isinstance(objective, cg.Program):
        sd = bool(cg.check_situation_determined(hl, objective, h0, limit))
        hl_res = solve_program_game(hl, objective, h0, allow_non_sd=not sd, limit=limit)
    else:
        hl_res = solve_goal_game(hl, h0, objective, limit)
    if not hl_res:
        return RefinedStrategy(m, objective, hl_res, None, limit)
    relation = compute_m_bisimulation((hl, h0), (ll, l0), m, limit)
    if relation is None:
        raise RefinementUnsoundError("no m-bisimulation relates the initial states", "bisimulation")
    rs = RefinedStrategy(m, objective, hl_res, relation, limit)
    rs.explore(l0)
    return rs


# ------------------------------------------------------------ simulation


@dataclass
class SimulationOutcome:
    trace: tuple
    met: bool
    steps: int
    adversary: str
    reason: str = "stop"  # stop | step-limit | stuck

    def to_json(self) -> dict:
        return {
            "trace": [str(a) for a in self.trace],
            "objective_met": self.met,
            "steps": self.steps,
            "adversary": self.adversary,
            "end": self.reason,
        }


def prefer(*reactions) -> Callable:
    """Adversary answering the first listed reaction that is legal (else the least legal one)."""

    def choose(state, action, legal):
        for r in reactions:
            if r in legal:
                return r
        return legal[0]

    choose.description = "prefers " + ", ".join(map(str, reactions))
    return choose


def seeded_adversary(seed: int) -> Callable:
    rng = random.Random(seed)

    def choose(state, action, legal):
        return rng.choice(legal)

    choose.description = f"random (seed {seed})"
    return choose


def _env_adversary(env: EnvStrategy) -> Callable:
    def choose(state, action, legal):
        e = env.choices.get((state, action))
        return e if e in legal else legal[0]

    choose.description = "fixed environment strategy"
    return choose


class _Runner:
    """Uniform step interface over plain strategies and refined ones."""

    def __init__(self, strategy: Strategy):
        self.strategy = strategy
        self.refined = isinstance(strategy, RefinedStrategy)

    def start(self, s):
        return self.strategy.start(s) if self.refined else None

    def decide(self, cs, s):
        if self.refined:
            return self.strategy.decide_in(cs, s)
        return self.strategy.decide(s), cs

    def advance(self, cs, label, s2):
        return self.strategy.advance(cs, label, s2) if self.refined else None


def simulate(
    th: GroundTheory,
    strategy: Strategy,
    objective: Formula | None,
    adversary="exhaustive",
    s0: State | None = None,
    limit: int = 100,
):
    """Run ``strategy`` against an adversary.

    ``adversary`` is "exhaustive" (returns a list with one outcome per
    reaction resolution), an EnvStrategy, a callable
    ``(state, action, legal reactions) -> reaction`` or an int seed.  The
    objective is evaluated when the strategy stops; running out of steps or
    reaching an action with no legal reaction counts as not met.
    """
    s0 = th.initial_state if s0 is None else s0
    goal = th.evaluator(objective) if objective is not None else (lambda s: True)
    runner = _Runner(strategy)
    if adversary == "exhaustive":
        out = []
        stack = [(s0, runner.start(s0), ())]
        while stack:
            s, cs, trace = stack.pop()
            if len(trace) >= limit:
                out.append(SimulationOutcome(trace, False, len(trace), "exhaustive", "step-limit"))
                continue
            d, cs = runner.decide(cs, s)
            if d == STOP:
                out.append(SimulationOutcome(trace, bool(goal(s)), len(trace), "exhaustive"))
                continue
            legal = th.legal_reactions(s, d)
            if not legal:
                out.append(SimulationOutcome(trace, False, len(trace), "exhaustive", "stuck"))
                continue
            for e in reversed(sorted(legal, key=str)):
                label = d.with_reaction(e)
                s2 = th.successor_fn(label)(s)
                stack.append((s2, runner.advance(cs, label, s2), trace + (label,)))
        return out
    if isinstance(adversary, int) and not isinstance(adversary, bool):
        choose = seeded_adversary(adversary)
    elif isinstance(adversary, EnvStrategy):
        choose = _env_adversary(adversary)
    elif callable(adversary):
        choose = adversary
    else:
        raise ValueError(f"unknown adversary {adversary!r}")
    desc = getattr(choose, "description", "custom")
    s, cs, trace = s0, runner.start(s0), ()
    while True:
        if len(trace) >= limit:
            return SimulationOutcome(trace, False, len(trace), desc, "step-limit")
        d, cs = runner.decide(cs, s)
        if d == STOP:
            return SimulationOutcome(trace, bool(goal(s)), len(trace), desc)
        legal = sorted(th.legal_reactions(s, d), key=str)
        if not legal:
            return SimulationOutcome(trace, False, len(trace), desc, "stuck")
        label = d.with_reaction(choose(s, d, legal))
        s2 = th.successor_fn(label)(s)
        cs = runner.advance(cs, label, s2)
        s, trace = s2, trace + (label,)


__all__ = [
    "RefinedStrategy",
    "SimulationOutcome",
    "prefer",
    "seeded_adversary",
    "simulate",
    "synthesize_and_refine",
]
