"""Refinement mappings: properness, Constraints 2-4, m-bisimulation, sound/complete checks.

The workhorse is the *image* of a low-level state: the high-level state in
which every HL atom takes the value of its m_f formula.  Two states are
m-isomorphic exactly when the HL state equals the image of the LL state,
and because m_f is a homomorphism, m_f(phi) holds at an LL state iff phi
holds at its image.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from . import congolog as cg
from .errors import CapacityError, UnsupportedConstructError
from .logic import Atom, Formula
from .mapping import RefinementMapping
from .strategic import check_inev_terminates, solve_env_game, solve_program_game
from .theory import AgentAction, GroundTheory, State, SystemAction


def map_fluent_formula(m: RefinementMapping, f: Formula) -> Formula:
    return m.map_formula(f)


def map_agent_program(m: RefinementMapping, p: cg.Program) -> cg.Program:
    """m_a lifted to HL agent programs; tests are mapped through m_f."""
    if isinstance(p, cg.Conc):
        raise UnsupportedConstructError("concurrent composition is not supported in refined task programs")
    if p is cg.NIL:
        return p
    if isinstance(p, cg.Act):
        if not p.is_agent:
            raise UnsupportedConstructError(f"{p} is a system action; expected an agent program")
        am = m._map(p.name)
        return cg.subst(am.agent, dict(zip(am.params, p.args)))
    if isinstance(p, cg.Test):
        return cg.test(m.map_formula(p.formula))
    if isinstance(p, cg.Seq):
        return cg.seq(*(map_agent_program(m, i) for i in p.items))
    if isinstance(p, cg.Choice):
        return cg.choice(*(map_agent_program(m, i) for i in p.items))
    if isinstance(p, cg.Pick):
        return cg.pick(p.var, p.sort, map_agent_program(m, p.body))
    if isinstance(p, cg.Star):
        return cg.star(map_agent_program(m, p.body))
    raise UnsupportedConstructError(f"cannot map program node {p!r}")


# ------------------------------------------------------------- analysis


class Analysis:
    """Cached refinement facts for one mapping (images, run end states)."""

    def __init__(self, m: RefinementMapping, limit: int = cg.DEFAULT_MAX_CONFIGS):
        self.m = m
        self.hl = m.hl
        self.ll = m.ll
        self.limit = limit
        self._image_fns = [
            (i, self.ll.evaluator(m.map_atom(Atom(a.name, a.args)))) for i, a in enumerate(self.hl.atoms)
        ]
        self._images: dict = {}
        self._sys: dict = {}
        self._agent: dict = {}
        self._reachable: dict = {}

    @classmethod
    def of(cls, m: RefinementMapping, limit: int = cg.DEFAULT_MAX_CONFIGS) -> "Analysis":
        a = getattr(m, "_analysis", None)
        if a is None or a.limit != limit:
            a = cls(m, limit)
            m._analysis = a
        return a

    def image(self, s: State) -> State:
        h = self._images.get(s)
        if h is None:
            h = 0
            for i, fn in self._image_fns:
                if fn(s):
                    h |= 1 << i
            self._images[s] = h
        return h

    def system_ends(self, aa: AgentAction, s: State) -> dict:
        """{HL reaction: frozenset of LL end states of m_s(A(x, e)) from s}."""
        key = (aa, s)
        out = self._sys.get(key)
        if out is not None:
            return out
        body, var = self.m.system_template(aa)
        values = self.hl.reactions_of(aa.name)
        ends: dict = {e: set() for e in values}
        if cg.mentions_only_in_tests(body, var):
            lift = cg.Lift(var, values)
            found = cg.Engine.of(self.ll, lift).ends(body, s)
            if found is not None:
                for st, fm in found.items():
                    for e in lift.members(fm):
                        ends[e].add(st)
            else:
                g = cg.build_config_graph(self.ll, body, s, "system", self.limit, lift)
                for i in g.final_ids:
                    for e in lift.members(g.final[i]):
                        ends[e].add(g.configs[i][1])
        else:
            for e in values:
                p = self.m.system_program(aa.with_reaction(e))
                ends[e] = cg.end_states(self.ll, p, s, "system", self.limit)
        out = {e: frozenset(v) for e, v in ends.items()}
        self._sys[key] = out
        return out

    def agent_ends(self, aa: AgentAction, s: State) -> frozenset:
        key = (aa, s)
        out = self._agent.get(key)
        if out is None:
            out = frozenset(cg.end_states(self.ll, self.m.agent_program(aa), s, "agent", self.limit))
            self._agent[key] = out
        return out

    def reachable(self, roots: Iterable[State] | None = None) -> list:
        """States closed under end states of every ground m_s(A(x, e))."""
        roots = tuple(sorted(self.ll.initial_models() if roots is None else roots))
        out = self._reachable.get(roots)
        if out is not None:
            return out
        seen = set(roots)
        order = list(roots)
        queue = deque(roots)
        while queue:
            s = queue.popleft()
            for aa in self.hl.agent_actions():
                for ends in self.system_ends(aa, s).values():
                    for t in ends:
                        if t not in seen:
                            if len(seen) >= self.limit:
                                raise CapacityError(f"more than {self.limit} refinement-reachable states")
                            seen.add(t)
                            order.append(t)
                            queue.append(t)
        out = sorted(order, key=self.ll.describe)
        self._reachable[roots] = out
        return out

    def refine_sequence(self, alphas: Iterable[SystemAction], states: Iterable[State] | None = None) -> frozenset:
        """End states of Do(m_s(alpha_1); ...; m_s(alpha_n)) from ``states``."""
        cur = set(self.ll.initial_models() if states is None else states)
        for a in alphas:
            nxt = set()
            for s in cur:
                nxt |= self.system_ends(a.agent, s)[a.reaction]
            cur = nxt
        return frozenset(cur)


def refinement_reachable(ll: GroundTheory, m: RefinementMapping, limit: int = cg.DEFAULT_MAX_CONFIGS) -> list:
    """LL states reachable by refinements of HL system action sequences (sorted)."""
    return Analysis.of(m, limit).reachable()


# -------------------------------------------------------------- reports


@dataclass
class CheckResult:
    check: str
    ok: bool
    witness: dict | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict:
        out = {"check": self.check, "status": "pass" if self.ok else "fail"}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


@dataclass
class AbstractionReport:
    checks: list = field(default_factory=list)

    def add(self, r: CheckResult) -> CheckResult:
        self.checks.append(r)
        return r

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.check == name:
                return c
        raise KeyError(name)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_json(self) -> dict:
        return {"ok": self.ok, "checks": [c.to_json() for c in self.checks]}

    def render(self) -> str:
        lines = []
        for c in self.checks:
            lines.append(f"{c.check}: {'pass' if c.ok else 'FAIL'}")
            if c.witness:
                w = c.witness
                if "state" in w:
                    lines.append(f"  state: {{{', '.join(w['state'])}}}")
                if "action" in w:
                    lines.append(f"  action: {w['action']}")
                if w.get("detail"):
                    lines.append(f"  detail: {w['detail']}")
        return "\n".join(lines)


def _witness(th: GroundTheory, s: State | None, action=None, detail: str = "") -> dict:
    w: dict = {}
    if s is not None:
        w["state"] = th.describe(s)
    if action is not None:
        w["action"] = str(action)
    w["detail"] = detail
    return w


def _states_text(th: GroundTheory, states) -> str:
    return "; ".join("{" + ", ".join(th.describe(s, True)) + "}" for s in sorted(states, key=th.describe))


# ------------------------------------------------------ Constraint 1 (proper)


def check_proper_mapping(ll: GroundTheory, m: RefinementMapping, limit: int = cg.DEFAULT_MAX_CONFIGS) -> CheckResult:
    """End states of m_a(A(x)) equal the union over e of end states of m_s(A(x, e))."""
    an = Analysis.of(m, limit)
    for s in an.reachable():
        for aa in m.hl.agent_actions():
            agent = an.agent_ends(aa, s)
            system = frozenset().union(*an.system_ends(aa, s).values())
            if agent != system:
                extra_a = agent - system
                extra_s = system - agent
                if extra_s:
                    odd = extra_s
                    detail = f"m_s end state not produced by m_a: {_states_text(ll, extra_s)}"
                else:
                    odd = extra_a
                    detail = f"m_a end state not produced by any m_s: {_states_text(ll, extra_a)}"
                w = _witness(ll, s, aa, detail)
                w["end_state"] = ll.describe(min(odd, key=ll.describe))
                return CheckResult("proper", False, w)
    return CheckResult("proper", True)


def check_situation_determined_mapping(
    ll: GroundTheory, m: RefinementMapping, limit: int = cg.DEFAULT_MAX_CONFIGS
) -> CheckResult:
    """All instantiated m_a / m_s programs are SD at refinement-reachable states."""
    an = Analysis.of(m, limit)
    for s in an.reachable():
        for aa in m.hl.agent_actions():
            progs = [(aa, m.agent_program(aa))]
            progs += [(sa, m.system_program(sa)) for sa in (aa.with_reaction(e) for e in m.hl.reactions_of(aa.name))]
            for a, p in progs:
                r = cg.check_situation_determined(ll, p, s, limit)
                if not r:
                    trace = ", ".join(str(x) for x in r.trace)
                    return CheckResult("situation_determined", False, _witness(ll, s, a, f"two remaining programs after [{trace}]"))
    return CheckResult("situation_determined", True)


# ---------------------------------------------------------- Constraints 2-4

CONSTRAINTS = {"inev_term": "C2", "agt_exec": "C3", "env_exec": "C4"}


def check_constraint(ll: GroundTheory, m: RefinementMapping, which: str, limit: int = cg.DEFAULT_MAX_CONFIGS) -> CheckResult:
    """Constraint 2 (inev_term), 3 (agt_exec) or 4 (env_exec) over refinement-reachable states."""
    if which not in CONSTRAINTS:
        raise ValueError(f"unknown constraint {which!r}; expected one of {sorted(CONSTRAINTS)}")
    an = Analysis.of(m, limit)
    name = CONSTRAINTS[which]
    for s in an.reachable():
        for aa in m.hl.agent_actions():
            if which == "env_exec":
                for e, ends in an.system_ends(aa, s).items():
                    if ends and not solve_env_game(ll, m.system_program(aa.with_reaction(e)), s, limit):
                        return CheckResult(name, False, _witness(ll, s, aa.with_reaction(e), "environment cannot force the refinement"))
                continue
            if not an.agent_ends(aa, s):
                continue
            p = m.agent_program(aa)
            if which == "inev_term":
                if not check_inev_terminates(ll, p, s, "agent", limit):
                    return CheckResult(name, False, _witness(ll, s, aa, "some execution of m_a blocks or diverges"))
            else:
                sd = bool(cg.check_situation_determined(ll, p, s, limit))
                if not solve_program_game(ll, p, s, allow_non_sd=not sd, limit=limit):
                    return CheckResult(name, False, _witness(ll, s, aa, "agent cannot force termination of m_a"))
    return CheckResult(name, True)


# ---------------------------------------------------------- m-bisimulation


@dataclass
class BisimRelation:
    pairs: frozenset  # {(HL state, LL state)}
    initial: tuple
    contains_initial: bool

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def partners(self, ll_state: State) -> list:
        return sorted(h for h, l in self.pairs if l == ll_state)


def m_isomorphic(m: RefinementMapping, hl_state: State, ll_state: State) -> bool:
    return Analysis.of(m).image(ll_state) == hl_state


def compute_m_bisimulation(hl_model, ll_model, m: RefinementMapping, limit: int = cg.DEFAULT_MAX_CONFIGS):
    """Greatest m-bisimulation over refinement-reachable LL states, or None.

    Candidates are the m-isomorphic pairs; pairs violating the forth (ii)
    or back (iii) condition are removed until nothing changes.
    """
    hl, sh0 = hl_model
    ll, sl0 = ll_model
    an = Analysis.of(m, limit)
    states = an.reachable([sl0])
    rel = {(an.image(s), s) for s in states}
    if (sh0, sl0) not in rel:
        return None
    actions = hl.agent_actions()

    def ok(pair) -> bool:
        h, s = pair
        for aa in actions:
            ends = an.system_ends(aa, s)
            for e, fn in hl.reaction_table(aa):
                hl_poss = fn(h)
                lows = ends[e]
                if hl_poss:
                    h2 = hl.successor_fn(aa.with_reaction(e))(h)
                    if not any((h2, t) in rel for t in lows):
                        return False
                elif lows:
                    return False
                else:
                    continue
                if any((h2, t) not in rel for t in lows):
                    return False
        return True

    changed = True
    while changed:
        changed = False
        for pair in sorted(rel):
            if not ok(pair):
                rel.discard(pair)
                changed = True
        if (sh0, sl0) not in rel:
            return None
    return BisimRelation(frozenset(rel), (sh0, sl0), True)


# ------------------------------------------------------- sound / complete


def verify_sound_abstraction(hl: GroundTheory, ll: GroundTheory, m: RefinementMapping, limit: int = cg.DEFAULT_MAX_CONFIGS) -> AbstractionReport:
    """Clauses (a) initial state, (b) preconditions, (c) effects."""
    an = Analysis.of(m, limit)
    rep = AbstractionReport()
    # (a) every closed HL initial literal holds, through m_f, in every LL initial model
    open_bits = 0
    for a in hl.init_open:
        open_bits |= 1 << hl.atom_index[a]
    closed = ~open_bits & ((1 << len(hl.atoms)) - 1)
    hl_init = 0
    for a in hl.init_true:
        hl_init |= 1 << hl.atom_index[a]
    res = CheckResult("sound_a", True)
    for s in ll.initial_models():
        diff = (an.image(s) ^ hl_init) & closed
        if diff:
            bad = [str(hl.atoms[i]) for i in range(len(hl.atoms)) if diff >> i & 1]
            res = CheckResult("sound_a", False, _witness(ll, s, None, f"initial literal fails through m_f: {', '.join(bad)}"))
            break
    rep.add(res)
    # (b) m_f(Poss) iff some refinement run exists; (c) m_f(SSA) before iff m_f(F) after
    res_b = CheckResult("sound_b", True)
    res_c = CheckResult("sound_c", True)
    for s in an.reachable():
        h = an.image(s)
        for aa in hl.agent_actions():
            ends = an.system_ends(aa, s)
            for e, fn in hl.reaction_table(aa):
                sa = aa.with_reaction(e)
                lows = ends[e]
                if res_b.ok and bool(fn(h)) != bool(lows):
                    detail = "m_f(poss) holds but no refinement run exists" if fn(h) else "refinement run exists but m_f(poss) is false"
                    res_b = CheckResult("sound_b", False, _witness(ll, s, sa, detail))
                if res_c.ok and lows:
                    h2 = hl.successor_fn(sa)(h)
                    for t in sorted(lows, key=ll.describe):
                        diff = an.image(t) ^ h2
                        if diff:
                            bad = [str(hl.atoms[i]) for i in range(len(hl.atoms)) if diff >> i & 1]
                            res_c = CheckResult("sound_c", False, _witness(ll, s, sa, f"fluents disagree after the refinement: {', '.join(bad)}"))
                            break
            if not res_b.ok and not res_c.ok:
                break
    rep.add(res_b)
    rep.add(res_c)
    return rep


def verify_complete_abstraction(hl: GroundTheory, ll: GroundTheory, m: RefinementMapping) -> CheckResult:
    """Every HL initial model has an m-isomorphic LL initial model."""
    an = Analysis.of(m)
    images = {an.image(s) for s in ll.initial_models()}
    for h in hl.initial_models():
        if h not in images:
            return CheckResult("complete", False, _witness(hl, h, None, "no LL initial model is m-isomorphic to this HL model"))
    return CheckResult("complete", True)


def check_abstraction(
    hl: GroundTheory,
    ll: GroundTheory,
    m: RefinementMapping,
    checks: Iterable[str] = ("proper", "inev_term", "agt_exec", "env_exec", "sound", "complete"),
    limit: int = cg.DEFAULT_MAX_CONFIGS,
) -> AbstractionReport:
    """Run the requested checks and collect them in one report."""
    rep = AbstractionReport()
    for c in checks:
        if c == "proper":
            rep.add(check_proper_mapping(ll, m, limit))
        elif c in CONSTRAINTS:
            rep.add(check_constraint(ll, m, c, limit))
        elif c == "sound":
            rep.checks.extend(verify_sound_abstraction(hl, ll, m, limit).checks)
        elif c == "complete":
            rep.add(verify_complete_abstraction(hl, ll, m))
        elif c == "sd":
            rep.add(check_situation_determined_mapping(ll, m, limit))
        else:
            raise ValueError(f"unknown check {c!r}")
    return rep


__all__ = [
    "AbstractionReport",
    "Analysis",
    "BisimRelation",
    "CheckResult",
    "RefinementMapping",
    "check_abstraction",
    "check_constraint",
    "check_proper_mapping",
    "check_situation_determined_mapping",
    "compute_m_bisimulation",
    "m_isomorphic",
    "map_agent_program",
    "map_fluent_formula",
    "refinement_reachable",
    "verify_complete_abstraction",
    "verify_sound_abstraction",
]
