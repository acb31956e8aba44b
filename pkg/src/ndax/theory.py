"""Ground nondeterministic basic action theories.

A state is a plain ``int``: bit ``i`` holds the truth value of ground atom
``theory.atoms[i]``.  Everything a query needs (preconditions, successor
functions, formula evaluators) is compiled lazily per ground action and
cached on the theory, which is otherwise immutable.
"""

from __future__ import annotations

import functools
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import CapacityError, ExecutionError, SpecificationError
from .logic import (
    FALSE,
    TRUE,
    Formula,
    GAtom,
    Grounder,
    GroundingError,
    ReactionSet,
    Value,
    compile_ground,
    render_call,
    support_mask,
    to_source,
    value_key,
)

State = int


class GroundAtom(NamedTuple):
    name: str
    args: tuple

    def __str__(self) -> str:
        return render_call(self.name, self.args)


class AgentAction(NamedTuple):
    name: str
    args: tuple

    def __str__(self) -> str:
        return render_call(self.name, self.args)

    def with_reaction(self, reaction: Value) -> "SystemAction":
        return SystemAction(self.name, self.args, reaction)


class SystemAction(NamedTuple):
    name: str
    args: tuple
    reaction: Value

    def __str__(self) -> str:
        return render_call(self.name, self.args + (self.reaction,))

    @property
    def agent(self) -> AgentAction:
        return AgentAction(self.name, self.args)


@functools.lru_cache(maxsize=None)
def action_key(a) -> tuple:
    """Lexicographic key for agent and system actions."""
    key = (a.name, tuple(value_key(x) for x in a.args))
    if isinstance(a, SystemAction):
        return key + (value_key(a.reaction),)
    return key


@dataclass(frozen=True)
class ReactionSort:
    """Legal reaction values of one action type.

    ``tokens`` lists enumerated reactions.  For set-valued reactions
    ``base`` lists the update atoms and ``guard`` (over ``var``) filters the
    subsets.
    """

    tokens: tuple = ()
    base: tuple = ()
    guard: Formula | None = None
    var: str = "e"

    @property
    def is_subset(self) -> bool:
        return bool(self.base)


@dataclass(frozen=True)
class FluentSchema:
    name: str
    params: tuple  # ((var, sort), ...)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple  # ((var, sort), ...)
    reaction_var: str
    reactions: ReactionSort
    poss_ag: Formula
    poss: Formula


@dataclass(frozen=True)
class SuccessorAxiom:
    fluent: str
    params: tuple  # variable names
    rhs: Formula
    action_var: str = "a"


@dataclass(frozen=True)
class ObjectUniverse:
    sorts: Mapping[str, tuple]
    reaction_sorts: Mapping[str, tuple]


def reaction_sort_name(action: str) -> str:
    return f"reactions({action})"


def enumerate_subsets(base: Sequence[str], guard: Formula | None, var: str, grounder: Grounder) -> tuple:
    out = []
    for k in range(len(base) + 1):
        for combo in itertools.combinations(sorted(base), k):
            r = ReactionSet(combo)
            if guard is not None:
                g = grounder.ground(guard, {var: r})
                if g not in (TRUE, FALSE):
                    raise SpecificationError("reaction guard may only use membership and equality")
                if g == FALSE:
                    continue
            out.append(r)
    return tuple(sorted(out, key=value_key))


class GroundTheory:
    """A fully grounded NDBAT over finite sorts."""

    def __init__(
        self,
        name: str,
        sorts: Mapping[str, Iterable[str]],
        fluents: Sequence[FluentSchema],
        actions: Sequence[ActionSchema],
        ssas: Sequence[SuccessorAxiom] = (),
        init_true: Iterable[tuple] = (),
        init_open: Iterable[tuple] = (),
        high_level: bool = False,
        open_limit: int = 16,
    ):
        self.name = name
        self.high_level = high_level
        self.open_limit = open_limit
        base_sorts = {}
        for s, consts in sorts.items():
            consts = tuple(sorted(dict.fromkeys(consts), key=value_key))
            if not consts:
                raise SpecificationError(f"sort {s} is empty")
            base_sorts[s] = consts
        self.fluents = {f.name: f for f in fluents}
        self.actions = {a.name: a for a in actions}
        if len(self.fluents) != len(fluents) or len(self.actions) != len(actions):
            raise SpecificationError("duplicate fluent or action name")
        self.ssas = {x.fluent: x for x in ssas}
        if len(self.ssas) != len(tuple(ssas)):
            raise SpecificationError("duplicate successor state axiom")
        for f in self.ssas:
            if f not in self.fluents:
                raise SpecificationError(f"successor state axiom for unknown fluent {f}")

        self.atoms: list[GroundAtom] = []
        for fl in fluents:
            for s in (p[1] for p in fl.params):
                if s not in base_sorts:
                    raise SpecificationError(f"fluent {fl.name}: unknown sort {s}")
            for args in itertools.product(*(base_sorts[s] for _, s in fl.params)):
                self.atoms.append(GroundAtom(fl.name, tuple(args)))
        self.atom_index = {a: i for i, a in enumerate(self.atoms)}
        self.dynamic_mask = 0
        for i, a in enumerate(self.atoms):
            if a.name in self.ssas:
                self.dynamic_mask |= 1 << i

        self.sorts = dict(base_sorts)
        self._grounder = Grounder(self.sorts, self.atom_index, self._poss_lookup)
        reaction_sorts = {}
        for a in actions:
            for _, s in a.params:
                if s not in base_sorts:
                    raise SpecificationError(f"action {a.name}: unknown sort {s}")
            rs = a.reactions
            if rs.is_subset:
                vals = enumerate_subsets(rs.base, rs.guard, rs.var, self._grounder)
            else:
                vals = tuple(sorted(dict.fromkeys(rs.tokens), key=value_key))
            if not vals:
                raise SpecificationError(f"action {a.name} has no reaction values")
            reaction_sorts[a.name] = vals
            self.sorts[reaction_sort_name(a.name)] = vals
        self.universe = ObjectUniverse(dict(base_sorts), reaction_sorts)

        self.init_true = frozenset(GroundAtom(n, tuple(args)) for n, args in init_true)
        self.init_open = tuple(GroundAtom(n, tuple(args)) for n, args in init_open)
        for a in itertools.chain(self.init_true, self.init_open):
            if a not in self.atom_index:
                raise SpecificationError(f"initial state mentions unknown atom {a}")
        if self.init_open and not high_level:
            raise SpecificationError("open initial atoms are only allowed in high-level theories")
        if set(self.init_open) & self.init_true:
            raise SpecificationError("atom both closed and open in the initial state")

        self._caches: dict = {}
        self._poss_cache: dict = {}
        self._poss_ag_cache: dict = {}
        self._succ_cache: dict = {}
        self._formula_cache: dict = {}
        self._agent_actions = None
        self._system_actions = None

    # ---------------------------------------------------------- vocabulary

    def __repr__(self) -> str:
        return f"GroundTheory({self.name!r}, {len(self.atoms)} atoms, {len(self.actions)} actions)"

    def spec(self) -> tuple:
        """Structural identity, used to compare theories (e.g. after re-parsing)."""
        return (
            self.name,
            self.high_level,
            tuple(sorted(self.universe.sorts.items())),
            tuple(sorted(self.fluents.items())),
            tuple(sorted(self.actions.items())),
            tuple(sorted(self.ssas.items())),
            tuple(sorted(self.init_true)),
            self.init_open,
        )

    def cache(self, name: str) -> dict:
        """Per-theory scratch cache shared by the query modules."""
        return self._caches.setdefault(name, {})

    def clear_caches(self) -> None:
        self._caches.clear()
        self._formula_cache.clear()

    def reactions_of(self, action: str) -> tuple:
        return self.universe.reaction_sorts[action]

    def agent_actions(self) -> tuple:
        if self._agent_actions is None:
            out = []
            for a in sorted(self.actions):
                sch = self.actions[a]
                for args in itertools.product(*(self.sorts[s] for _, s in sch.params)):
                    out.append(AgentAction(a, tuple(args)))
            self._agent_actions = tuple(out)
        return self._agent_actions

    def system_actions(self) -> tuple:
        if self._system_actions is None:
            out = []
            for aa in self.agent_actions():
                for e in self.reactions_of(aa.name):
                    out.append(aa.with_reaction(e))
            self._system_actions = tuple(out)
        return self._system_actions

    def check_action(self, a) -> None:
        sch = self.actions.get(a.name)
        if sch is None:
            raise SpecificationError(f"unknown action {a.name}")
        if len(a.args) != len(sch.params):
            raise SpecificationError(f"{a.name} expects {len(sch.params)} arguments, got {len(a.args)}")
        for v, (_, s) in zip(a.args, sch.params):
            if v not in self.sorts[s]:
                raise SpecificationError(f"{a.name}: {v} is not of sort {s}")
        if isinstance(a, SystemAction) and a.reaction not in self.reactions_of(a.name):
            raise SpecificationError(f"{a.name}: {a.reaction} is not a reaction value")

    def atom(self, name: str, *args) -> int:
        """Bit mask of a ground atom."""
        key = GroundAtom(name, tuple(args))
        if key not in self.atom_index:
            raise SpecificationError(f"unknown atom {key}")
        return 1 << self.atom_index[key]

    def true_atoms(self, state: State) -> list:
        return [self.atoms[i] for i in range(len(self.atoms)) if state >> i & 1]

    def describe(self, state: State, dynamic_only: bool = False) -> list:
        """Sorted true-atom strings of ``state``."""
        mask = self.dynamic_mask if dynamic_only else -1
        return sorted(str(a) for i, a in enumerate(self.atoms) if (state & mask) >> i & 1)

    def state_from_atoms(self, atoms: Iterable) -> State:
        s = 0
        for a in atoms:
            if isinstance(a, str):
                a = parse_ground_atom(a)
            a = GroundAtom(a[0], tuple(a[1]))
            if a not in self.atom_index:
                raise SpecificationError(f"unknown atom {a}")
            s |= 1 << self.atom_index[a]
        return s

    # ------------------------------------------------------------ grounding

    def ground(self, f: Formula, env: Mapping | None = None, action=None, poss_ag=None) -> Formula:
        try:
            return self._grounder.ground(f, env, action, poss_ag)
        except GroundingError as exc:
            raise SpecificationError(str(exc)) from None

    def evaluator(self, f: Formula, env: Mapping | None = None):
        """Compiled ``bits -> bool`` for a formula closed under ``env``."""
        key = (f, tuple(sorted((env or {}).items(), key=lambda kv: kv[0])))
        fn = self._formula_cache.get(key)
        if fn is None:
            g = self.ground(f, env)
            fn = compile_ground(g)
            fn.support = support_mask(g)
            fn.ground = g
            self._formula_cache[key] = fn
        return fn

    def _poss_lookup(self, act) -> Formula:
        return self.poss_formula(SystemAction(*act))

    def poss_ag_formula(self, a: AgentAction) -> Formula:
        g = self._poss_ag_cache.get(a)
        if g is None:
            self.check_action(a)
            sch = self.actions[a.name]
            env = dict(zip((p[0] for p in sch.params), a.args))
            g = self.ground(sch.poss_ag, env)
            self._poss_ag_cache[a] = g
        return g

    def poss_formula(self, a: SystemAction) -> Formula:
        g = self._poss_cache.get(a)
        if g is None:
            self.check_action(a)
            sch = self.actions[a.name]
            env = dict(zip((p[0] for p in sch.params), a.args))
            env[sch.reaction_var] = a.reaction
            g = self.ground(sch.poss, env, poss_ag=sch.poss_ag)
            self._poss_cache[a] = g
        return g

    def poss_fn(self, a: SystemAction):
        key = ("poss", a)
        fn = self._formula_cache.get(key)
        if fn is None:
            g = self.poss_formula(a)
            fn = compile_ground(g)
            fn.support = support_mask(g)
            self._formula_cache[key] = fn
        return fn

    def poss_ag_fn(self, a: AgentAction):
        key = ("poss_ag", a)
        fn = self._formula_cache.get(key)
        if fn is None:
            g = self.poss_ag_formula(a)
            fn = compile_ground(g)
            fn.support = support_mask(g)
            self._formula_cache[key] = fn
        return fn

    def reaction_table(self, a: AgentAction) -> tuple:
        """((reaction, poss_fn), ...) in deterministic order."""
        key = ("rt", a)
        t = self._formula_cache.get(key)
        if t is None:
            t = tuple((e, self.poss_fn(a.with_reaction(e))) for e in self.reactions_of(a.name))
            self._formula_cache[key] = t
        return t

    def effects(self, a: SystemAction) -> tuple:
        """(set mask, clear mask, ((bit, ground condition), ...)) for ``a``."""
        key = ("eff", a)
        eff = self._formula_cache.get(key)
        if eff is not None:
            return eff
        self.check_action(a)
        set_m = clear_m = 0
        general = []
        for fname, ax in self.ssas.items():
            fl = self.fluents[fname]
            for args in itertools.product(*(self.sorts[s] for _, s in fl.params)):
                idx = self.atom_index[GroundAtom(fname, args)]
                env = dict(zip(ax.params, args))
                g = self.ground(ax.rhs, env, action=a)
                if g == TRUE:
                    set_m |= 1 << idx
                elif g == FALSE:
                    clear_m |= 1 << idx
                elif g == GAtom(idx):
                    continue
                else:
                    general.append((idx, g))
        eff = (set_m, clear_m, tuple(general))
        self._formula_cache[key] = eff
        return eff

    def successor_fn(self, a: SystemAction):
        fn = self._succ_cache.get(a)
        if fn is None:
            set_m, clear_m, general = self.effects(a)
            touched = set_m | clear_m
            for idx, _ in general:
                touched |= 1 << idx
            if not general:
                keep = ~touched
                fn = eval(f"lambda b: (b & {keep}) | {set_m}")  # noqa: S307
            else:
                terms = " | ".join(f"({1 << idx} if ({to_source(g)}) else 0)" for idx, g in general)
                fn = eval(f"lambda b: (b & {~touched}) | {set_m} | {terms}")  # noqa: S307
            self._succ_cache[a] = fn
        return fn

    # ------------------------------------------------------------ semantics

    def initial_models(self) -> list:
        return enumerate_initial_models(self)

    @property
    def initial_state(self) -> State:
        models = enumerate_initial_models(self)
        if len(models) != 1:
            raise SpecificationError(f"{self.name} has {len(models)} initial models")
        return models[0]

    def legal_reactions(self, state: State, a: AgentAction) -> list:
        return [e for e, fn in self.reaction_table(a) if fn(state)]

    def successor(self, state: State, a: SystemAction, check: bool = True) -> State:
        if check and not self.poss_fn(a)(state):
            raise ExecutionError(
                f"{a} is not possible: precondition {self.poss_formula(a)!s} is false", action=a, state=state
            )
        return self.successor_fn(a)(state)

    def transitions(self, state: State) -> list:
        """All (system action, successor) pairs possible in ``state``."""
        out = []
        for sup, rows, memo in self._transition_groups():
            k = state & sup
            hits = memo.get(k)
            if hits is None:
                hits = memo[k] = tuple((sa, succ) for sa, fn, succ in rows if fn(state))
            out += [(sa, succ(state)) for sa, succ in hits]
        return out

    def successor_states(self, state: State) -> set:
        """Successors of ``state`` under all possible system actions (labels dropped)."""
        out = set()
        for sup, rows, memo in self._transition_groups():
            k = state & sup
            hits = memo.get(k)
            if hits is None:
                hits = memo[k] = tuple((sa, succ) for sa, fn, succ in rows if fn(state))
            out.update([succ(state) for _, succ in hits])
        return out

    def _transition_groups(self) -> tuple:
        """Per agent action: (support, ((system action, poss, successor), ...), memo).

        Which reactions are possible depends only on the support bits, so the
        memo is keyed by the masked state.
        """
        groups = self._formula_cache.get("transitions")
        if groups is None:
            groups = []
            for aa in self.agent_actions():
                rows = tuple((aa.with_reaction(e), fn, self.successor_fn(aa.with_reaction(e))) for e, fn in self.reaction_table(aa))
                sup = 0
                for _, fn, _ in rows:
                    sup |= fn.support
                groups.append((sup, rows, {}))
            groups = self._formula_cache["transitions"] = tuple(groups)
        return groups

    def execute(self, state: State, actions: Iterable[SystemAction]) -> list:
        """Replay a trace; returns the state sequence (initial state first)."""
        states = [state]
        for a in actions:
            state = self.successor(state, a)
            states.append(state)
        return states


def parse_ground_atom(text: str) -> tuple:
    text = text.strip()
    if "(" not in text:
        return (text, ())
    name, rest = text.split("(", 1)
    args = tuple(x.strip() for x in rest.rstrip(")").split(",") if x.strip())
    return (name.strip(), args)


# ------------------------------------------------------- module-level API


def eval_formula(th: GroundTheory, state: State, f: Formula, env: Mapping | None = None) -> bool:
    return bool(th.evaluator(f, env)(state))


def poss_ag(th: GroundTheory, state: State, a: AgentAction) -> bool:
    return bool(th.poss_ag_fn(a)(state))


def poss(th: GroundTheory, state: State, a: SystemAction) -> bool:
    return bool(th.poss_fn(a)(state))


def legal_reactions(th: GroundTheory, state: State, a: AgentAction) -> list:
    return th.legal_reactions(state, a)


def successor(th: GroundTheory, state: State, a: SystemAction) -> State:
    return th.successor(state, a)


def enumerate_initial_models(th: GroundTheory, limit: int | None = None) -> list:
    limit = th.open_limit if limit is None else limit
    k = len(th.init_open)
    if k > limit:
        raise CapacityError(f"{k} open initial atoms exceed the limit of {limit}")
    base = 0
    for a in th.init_true:
        base |= 1 << th.atom_index[a]
    bits = [1 << th.atom_index[a] for a in th.init_open]
    out = []
    for values in itertools.product((False, True), repeat=k):
        s = base
        for b, v in zip(bits, values):
            if v:
                s |= b
        out.append(s)
    return out


def reachable_states(th: GroundTheory, roots: Iterable[State], depth: int | None = None, limit: int = 1_000_000) -> dict:
    """Breadth-first closure under possible system actions: state -> depth."""
    seen = {}
    queue = deque()
    for r in roots:
        if r not in seen:
            seen[r] = 0
            queue.append(r)
    while queue:
        s = queue.popleft()
        d = seen[s]
        if depth is not None and d >= depth:
            continue
        for s2 in th.successor_states(s):
            if s2 not in seen:
                if len(seen) >= limit:
                    raise CapacityError(f"more than {limit} reachable states")
                seen[s2] = d + 1
                queue.append(s2)
    return seen


@dataclass(frozen=True)
class Violation:
    kind: str  # "independence" | "existence"
    state: State
    action: AgentAction
    reaction: Value | None = None


@dataclass
class NDBATReport:
    theory: str
    states_checked: int
    depth: int | None
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_ndbat(th: GroundTheory, reachable_bound: int | None = None) -> NDBATReport:
    """Check reaction independence and reaction existence on reachable states."""
    states = reachable_states(th, enumerate_initial_models(th), reachable_bound)
    report = NDBATReport(th.name, len(states), reachable_bound)
    order = sorted(states, key=lambda s: (states[s], s))
    found = []
    for i, aa in enumerate(th.agent_actions()):
        ag_fn = th.poss_ag_fn(aa)
        table = th.reaction_table(aa)
        sup = ag_fn.support
        for _, fn in table:
            sup |= fn.support
        memo: dict = {}
        for rank, s in enumerate(order):
            k = s & sup
            bad = memo.get(k)
            if bad is None:
                ag = ag_fn(s)
                legal = [e for e, fn in table if fn(s)]
                bad = [("independence", e) for e in legal] if not ag else ([] if legal else [("existence", None)])
                memo[k] = bad
            for kind, e in bad:
                found.append((rank, i, Violation(kind, s, aa, e)))
    found.sort(key=lambda t: t[:2])
    report.violations.extend(v for _, _, v in found)
    return report
