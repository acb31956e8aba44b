"""Game solving over ground theories and program configurations.

Goal games and program games are solved as least fixpoints (attractors)
on finite graphs.  Every winning node gets a rank; the extracted strategy
picks, at each node, the least action whose successors all have a smaller
rank, so following it strictly decreases the rank until the objective
holds.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import congolog as cg
from .errors import CapacityError, PreconditionError, SpecificationError, StrategyIncompleteError
from .logic import Formula, Var, free_vars, value_key
from .theory import AgentAction, GroundTheory, State, SystemAction, action_key, parse_ground_atom

STOP = "stop"


def _render_decision(d) -> str:
    return STOP if d == STOP else str(d)


def _program_text(p: cg.Program) -> str:
    from .lang.printer import format_program

    return format_program(p)


# ------------------------------------------------------------ strategies


class Strategy:
    """Common interface: ``decide(key)`` returns an AgentAction or STOP."""

    kind = "goal"

    def decide(self, key):
        raise NotImplementedError

    def successor(self, key, label: SystemAction, options: list):
        """Pick the remaining program among ``options`` (non-SD programs only)."""
        return None


@dataclass
class AgentStrategy(Strategy):
    """A finite decision table.  Keys are states or (program, state) configs."""

    theory: GroundTheory
    decisions: dict
    objective: str = ""
    kind: str = "goal"
    successors: dict = field(default_factory=dict)  # (key, label) -> next key

    def decide(self, key):
        d = self.decisions.get(key)
        if d is None:
            raise StrategyIncompleteError(f"no decision for {self.describe_key(key)}", key)
        return d

    def successor(self, key, label, options):
        return self.successors.get((key, label))

    def describe_key(self, key) -> str:
        if self.kind == "program":
            p, s = key
            return f"<{_program_text(p)}, {{{', '.join(self.theory.describe(s))}}}>"
        return "{" + ", ".join(self.theory.describe(key)) + "}"

    def __len__(self) -> int:
        return len(self.decisions)

    def to_json(self) -> dict:
        entries = []
        for key, d in self.decisions.items():
            if self.kind == "program":
                p, s = key
                e = {"key": self.theory.describe(s), "program": _program_text(p), "action": _render_decision(d)}
            else:
                e = {"key": self.theory.describe(key), "action": _render_decision(d)}
            entries.append(e)
        entries.sort(key=lambda e: (e["key"], e.get("program", "")))
        return {
            "format": "ndax-strategy",
            "theory": self.theory.name,
            "objective": self.objective,
            "kind": self.kind,
            "decisions": entries,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"


@dataclass
class Rule:
    condition: Formula
    action: str | None  # action name, None for stop
    args: tuple = ()  # terms: constants or Var


class RuleStrategy(Strategy):
    """Ordered condition/action rules evaluated on the current state.

    The first rule whose condition holds under some binding of its free
    variables fires; the lexicographically least binding is used.
    """

    def __init__(self, theory: GroundTheory, rules: Iterable[Rule], variables: Mapping[str, str], objective: str = "", name: str = ""):
        self.theory = theory
        self.rules = list(rules)
        self.variables = dict(variables)
        self.objective = objective
        self.name = name
        self._cache: dict = {}
        self._compiled = []
        for r in self.rules:
            names = sorted(set(free_vars(r.condition)) | {a.name for a in r.args if isinstance(a, Var)})
            for n in names:
                if n not in self.variables:
                    raise SpecificationError(f"rule variable {n} has no declared sort")
            self._compiled.append((r, names))

    def _bindings(self, names):
        domains = [self.theory.sorts[self.variables[n]] for n in names]
        for values in itertools.product(*domains):
            yield dict(zip(names, values))

    def decide(self, key):
        state = key[1] if isinstance(key, tuple) else key
        d = self._cache.get(state)
        if d is not None:
            return d
        th = self.theory
        for rule, names in self._compiled:
            for env in self._bindings(names):
                if th.evaluator(rule.condition, env)(state):
                    if rule.action is None:
                        d = STOP
                    else:
                        args = tuple(env[a.name] if isinstance(a, Var) else a for a in rule.args)
                        d = AgentAction(rule.action, args)
                    self._cache[state] = d
                    return d
        raise StrategyIncompleteError(f"no rule applies in {{{', '.join(th.describe(state))}}}", key)


def load_strategy(source, theory: GroundTheory) -> Strategy:
    """Load a strategy file: either a rule list or a decision table."""
    from .lang import parse_action, parse_formula

    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    elif isinstance(source, str):
        data = json.loads(source)
    else:
        data = source
    fmt = data.get("format")
    if fmt == "ndax-strategy-rules":
        variables = data.get("vars", {})
        rules = []
        for r in data["rules"]:
            cond = parse_formula(r["if"], theory, variables)
            act = r["do"].strip()
            if act == STOP:
                rules.append(Rule(cond, None))
                continue
            name, args = _parse_template(act)
            if name not in theory.actions:
                raise SpecificationError(f"unknown action {name} in strategy rule")
            terms = tuple(Var(a) if a in variables else a for a in args)
            rules.append(Rule(cond, name, terms))
        return RuleStrategy(theory, rules, variables, data.get("objective", ""), data.get("name", ""))
    if fmt in ("ndax-strategy", "ndax-refined-strategy"):
        if fmt == "ndax-strategy" and data.get("kind", "goal") != "goal":
            raise SpecificationError("only goal-game decision tables can be loaded")
        decisions = {}
        for e in data["decisions" if fmt == "ndax-strategy" else "ll_decisions"]:
            s = theory.state_from_atoms(e["key"])
            decisions[s] = STOP if e["action"] == STOP else parse_action(e["action"], theory)
        return AgentStrategy(theory, decisions, data.get("objective", ""))
    raise SpecificationError(f"unknown strategy format {fmt!r}")


def _parse_template(text: str):
    return parse_ground_atom(text)


@dataclass
class EnvStrategy:
    """Maps (key, agent action) to the environment's reaction."""

    choices: dict = field(default_factory=dict)

    def __call__(self, key, action: AgentAction):
        return self.choices.get((key, action))


@dataclass
class SynthesisResult:
    agent_wins: bool
    strategy: AgentStrategy | None
    objective: str
    explored: int
    iterations: int
    winning: int = 0
    witness: EnvStrategy | None = None

    def __bool__(self) -> bool:
        return self.agent_wins


# -------------------------------------------------------------- goal game


def _state_moves(th: GroundTheory, states: Iterable[State]) -> dict:
    """state -> [(agent action, (successor, ...), (reaction, ...))] with >= 1 legal reaction."""
    moves = {}
    for s in states:
        out = []
        for aa in th.agent_actions():
            if not th.poss_ag_fn(aa)(s):
                continue
            es, succ = [], []
            for e, fn in th.reaction_table(aa):
                if fn(s):
                    es.append(e)
                    succ.append(th.successor_fn(aa.with_reaction(e))(s))
            if es:
                out.append((aa, tuple(succ), tuple(es)))
        moves[s] = out
    return moves


def _reachable(th: GroundTheory, s0: State, limit: int) -> list:
    seen = {s0}
    order = [s0]
    queue = deque([s0])
    while queue:
        s = queue.popleft()
        for _, t in th.transitions(s):
            if t not in seen:
                if len(seen) >= limit:
                    raise CapacityError(f"more than {limit} reachable states")
                seen.add(t)
                order.append(t)
                queue.append(t)
    return order


def _attractor(nodes, base: Callable, moves: Mapping, choose: Callable) -> tuple:
    """Ranks of winning nodes.  ``choose(move, rank)`` -> bool (move wins)."""
    rank = {n: 0 for n in nodes if base(n)}
    level = 0
    while True:
        level += 1
        new = {}
        for n in nodes:
            if n in rank:
                continue
            for mv in moves[n]:
                if choose(mv, rank):
                    new[n] = level
                    break
        if not new:
            return rank, level
        rank.update(new)


def solve_goal_game(th: GroundTheory, s0: State, goal: Formula, limit: int = cg.DEFAULT_MAX_CONFIGS) -> SynthesisResult:
    """Can the agent force ``goal`` from ``s0``?  Extracts a positional strategy."""
    goal_fn = th.evaluator(goal)
    states = _reachable(th, s0, limit)
    moves = _state_moves(th, states)
    rank, iterations = _attractor(
        states,
        lambda s: goal_fn(s),
        moves,
        lambda mv, rank: all(t in rank for t in mv[1]),
    )
    objective = str(goal)
    if s0 not in rank:
        env = EnvStrategy()
        for s in states:
            if s in rank:
                continue
            for aa, succ, es in moves[s]:
                for e, t in zip(es, succ):
                    if t not in rank:
                        env.choices[(s, aa)] = e
                        break
        return SynthesisResult(False, None, objective, len(states), iterations, len(rank), env)
    decisions = {}
    queue = deque([s0])
    while queue:
        s = queue.popleft()
        if s in decisions:
            continue
        if rank[s] == 0:
            decisions[s] = STOP
            continue
        for aa, succ, _ in moves[s]:
            if all(rank.get(t, rank[s]) < rank[s] for t in succ):
                decisions[s] = aa
                queue.extend(succ)
                break
    strat = AgentStrategy(th, decisions, objective, "goal")
    return SynthesisResult(True, strat, objective, len(states), iterations, len(rank))


# ----------------------------------------------------------- program game


def _grouped_edges(g: cg.ConfigGraph, i: int) -> list:
    """[(agent action, {reaction: [target ids]})] in action order."""
    groups: dict = {}
    for lab, j in g.edges[i]:
        groups.setdefault(lab.agent, {}).setdefault(lab.reaction, []).append(j)
    return sorted(groups.items(), key=lambda kv: action_key(kv[0]))


def solve_program_game(
    th: GroundTheory,
    p: cg.Program,
    s0: State,
    allow_non_sd: bool = False,
    limit: int = cg.DEFAULT_MAX_CONFIGS,
) -> SynthesisResult:
    """Can the agent force a complete execution of agent program ``p``?

    With ``allow_non_sd`` the program need not be situation-determined;
    the agent then also picks the remaining program after each step.
    """
    if not allow_non_sd:
        sd = cg.check_situation_determined(th, p, s0, limit)
        if not sd:
            raise PreconditionError("program is not situation-determined", sd)
    g = cg.build_config_graph(th, p, s0, "agent", limit)
    nodes = range(len(g))
    moves = {i: _grouped_edges(g, i) for i in nodes}
    rank, iterations = _attractor(
        nodes,
        lambda i: bool(g.final[i]),
        moves,
        lambda mv, rank: all(any(j in rank for j in js) for js in mv[1].values()),
    )
    objective = f"execute {_program_text(p)}"
    if 0 not in rank:
        env = EnvStrategy()
        for i in nodes:
            if i in rank:
                continue
            key = g.configs[i][:2]
            for aa, by_e in moves[i]:
                for e, js in by_e.items():
                    if not any(j in rank for j in js):
                        env.choices[(key, aa)] = e
                        break
        return SynthesisResult(False, None, objective, len(g), iterations, len(rank), env)
    decisions: dict = {}
    successors: dict = {}
    queue = deque([0])
    done = set()
    while queue:
        i = queue.popleft()
        if i in done:
            continue
        done.add(i)
        key = g.configs[i][:2]
        r = rank[i]
        if r == 0:
            decisions[key] = STOP
            continue
        for aa, by_e in moves[i]:
            picks = {}
            for e, js in by_e.items():
                good = [j for j in js if rank.get(j, r) < r]
                if not good:
                    break
                picks[e] = min(good, key=lambda j: (rank[j], j))
            else:
                decisions[key] = aa
                for e, j in picks.items():
                    if len(by_e[e]) > 1:
                        successors[(key, aa.with_reaction(e))] = g.configs[j][:2]
                    queue.append(j)
                break
    strat = AgentStrategy(th, decisions, objective, "program", successors)
    return SynthesisResult(True, strat, objective, len(g), iterations, len(rank))


def check_inev_terminates(th: GroundTheory, p: cg.Program, s: State, mode: str | None = None, limit: int = cg.DEFAULT_MAX_CONFIGS) -> bool:
    """All executions of ``p`` from ``s`` eventually reach a final configuration."""
    g = cg.build_config_graph(th, p, s, mode, limit)
    holds = [bool(f) for f in g.final]
    changed = True
    while changed:
        changed = False
        for i in range(len(g)):
            if not holds[i] and g.edges[i] and all(holds[j] for _, j in g.edges[i]):
                holds[i] = True
                changed = True
    return holds[0]


@dataclass
class EnvGameResult:
    env_wins: bool
    strategy: EnvStrategy | None
    explored: int

    def __bool__(self) -> bool:
        return self.env_wins


def solve_env_game(th: GroundTheory, p: cg.Program, s: State, limit: int = cg.DEFAULT_MAX_CONFIGS) -> EnvGameResult:
    """Can the environment force system program ``p`` to complete?

    The environment wins at a final configuration with no transitions, or
    where for every agent action that has a transition it can choose a
    reaction leading to a winning configuration.
    """
    g = cg.build_config_graph(th, p, s, "system", limit)
    nodes = range(len(g))
    moves = {i: _grouped_edges(g, i) for i in nodes}
    rank, _ = _attractor(
        nodes,
        lambda i: bool(g.final[i]) and not g.edges[i],
        {i: [moves[i]] if moves[i] else [] for i in nodes},
        lambda mv, rank: all(any(j in rank for js in by_e.values() for j in js) for _, by_e in mv),
    )
    if 0 not in rank:
        return EnvGameResult(False, None, len(g))
    env = EnvStrategy()
    queue = deque([0])
    done = set()
    while queue:
        i = queue.popleft()
        if i in done or rank[i] == 0:
            continue
        done.add(i)
        key = g.configs[i][:2]
        for aa, by_e in moves[i]:
            best = None
            for e in sorted(by_e, key=value_key):
                for j in by_e[e]:
                    if rank.get(j, rank[i]) < rank[i] and (best is None or (rank[j], j) < (rank[best[1]], best[1])):
                        best = (e, j)
            env.choices[(key, aa)] = best[0]
            queue.append(best[1])
    return EnvGameResult(True, env, len(g))


# -------------------------------------------------------------- weak plans


@dataclass
class WeakPlanResult:
    found: bool
    plan: tuple = ()
    trace: tuple = ()  # a reaction resolution realising the plan

    def __bool__(self) -> bool:
        return self.found


def weak_plan(
    th: GroundTheory,
    s0: State,
    goal: Formula,
    plan: Iterable[AgentAction] | None = None,
    bound: int = 6,
) -> WeakPlanResult:
    """Check a given agent-action sequence, or search for a shortest one."""
    goal_fn = th.evaluator(goal)
    if plan is not None:
        plan = tuple(plan)
        frontier = {s0: ()}
        for aa in plan:
            th.check_action(aa)
            nxt = {}
            for s, tr in frontier.items():
                for e in th.legal_reactions(s, aa):
                    sa = aa.with_reaction(e)
                    t = th.successor_fn(sa)(s)
                    if t not in nxt:
                        nxt[t] = tr + (sa,)
            frontier = nxt
        for s, tr in sorted(frontier.items(), key=lambda kv: [action_key(a) for a in kv[1]]):
            if goal_fn(s):
                return WeakPlanResult(True, plan, tr)
        return WeakPlanResult(False, plan)
    # layered search keeping the lexicographically least trace per state
    best = {s0: ()}
    layer = {s0: ()}
    for _ in range(bound + 1):
        hits = [tr for s, tr in layer.items() if goal_fn(s)]
        if hits:
            tr = min(hits, key=lambda t: [action_key(a) for a in t])
            return WeakPlanResult(True, tuple(a.agent for a in tr), tr)
        nxt: dict = {}
        for s, tr in layer.items():
            for sa, t in th.transitions(s):
                if t in best:
                    continue
                cand = tr + (sa,)
                old = nxt.get(t)
                if old is None or [action_key(a) for a in cand] < [action_key(a) for a in old]:
                    nxt[t] = cand
        if not nxt:
            break
        best.update(nxt)
        layer = nxt
    return WeakPlanResult(False)


# ------------------------------------------------------- verification


@dataclass
class VerifyResult:
    ok: bool
    trace: tuple = ()
    reason: str = ""
    visited: int = 0

    def __bool__(self) -> bool:
        return self.ok


def verify_strategy(
    th: GroundTheory,
    s0: State,
    objective,
    strategy: Strategy,
) -> VerifyResult:
    """Exhaustive adversary: every reaction sequence must reach the objective.

    ``objective`` is a goal Formula or an agent Program.  A cycle in the
    runs the strategy allows is a failure (the adversary can loop forever).
    """
    if isinstance(objective, cg.Program):
        return _verify_program(th, s0, objective, strategy)
    goal_fn = th.evaluator(objective)
    good: set = set()
    on_path: set = set()

    def fail(trace, reason):
        return VerifyResult(False, tuple(trace), reason, len(good))

    stack: list = []  # (state, iterator over remaining steps)
    trace: list = []

    def expand(s):
        d = strategy.decide(s)
        if d == STOP:
            return d, None
        if not th.poss_ag_fn(d)(s):
            return d, "chosen action is not executable"
        steps = []
        for e in th.legal_reactions(s, d):
            sa = d.with_reaction(e)
            steps.append((sa, th.successor_fn(sa)(s)))
        if not steps:
            return d, "chosen action has no legal reaction"
        return d, steps

    def enter(s):
        d, steps = expand(s)
        if d == STOP:
            if goal_fn(s):
                good.add(s)
                return None
            return "stopped where the goal is false"
        if isinstance(steps, str):
            return steps
        on_path.add(s)
        stack.append((s, iter(steps)))
        return None

    err = enter(s0)
    if err:
        return fail(trace, err)
    while stack:
        s, it = stack[-1]
        for sa, t in it:
            if t in good:
                continue
            if t in on_path:
                return fail(trace + [sa], "the adversary can make the run cycle forever")
            trace.append(sa)
            err = enter(t)
            if err:
                return fail(trace, err)
            if t in good:
                trace.pop()
            break
        else:
            stack.pop()
            on_path.discard(s)
            good.add(s)
            if trace:
                trace.pop()
    return VerifyResult(True, (), "", len(good))


def _verify_program(th: GroundTheory, s0: State, p: cg.Program, strategy: Strategy) -> VerifyResult:
    eng = cg.Engine.of(th)
    good: set = set()
    on_path: set = set()
    stack: list = []
    trace: list = []

    def fail(reason, extra=()):
        return VerifyResult(False, tuple(trace) + tuple(extra), reason, len(good))

    def enter(key):
        q, s = key
        d = strategy.decide(key)
        if d == STOP:
            if eng.final(q, s):
                good.add(key)
                return None
            return "stopped in a non-final configuration"
        steps: dict = {}
        for lab, q2, s2, _ in eng.transitions(q, s):
            if lab.agent == d:
                steps.setdefault(lab, []).append((q2, s2))
        if not steps:
            return f"program allows no transition with {d}"
        succ = []
        for lab in sorted(steps, key=action_key):
            options = list(dict.fromkeys(steps[lab]))
            if len(options) == 1:
                succ.append((lab, options[0]))
                continue
            chosen = strategy.successor(key, lab, options)
            if chosen is not None:
                succ.append((lab, chosen))
            else:
                succ.extend((lab, o) for o in options)
        on_path.add(key)
        stack.append((key, iter(succ)))
        return None

    err = enter((p, s0))
    if err:
        return fail(err)
    while stack:
        key, it = stack[-1]
        for lab, nk in it:
            if nk in good:
                continue
            if nk in on_path:
                return fail("the adversary can make the run cycle forever", (lab,))
            trace.append(lab)
            err = enter(nk)
            if err:
                return fail(err)
            if nk in good:
                trace.pop()
            break
        else:
            stack.pop()
            on_path.discard(key)
            good.add(key)
            if trace:
                trace.pop()
    return VerifyResult(True, (), "", len(good))


__all__ = [
    "STOP",
    "AgentStrategy",
    "EnvGameResult",
    "EnvStrategy",
    "Rule",
    "RuleStrategy",
    "Strategy",
    "SynthesisResult",
    "VerifyResult",
    "WeakPlanResult",
    "check_inev_terminates",
    "load_strategy",
    "solve_env_game",
    "solve_goal_game",
    "solve_program_game",
    "verify_strategy",
    "weak_plan",
]
