"""ConGolog programs and their single-step semantics.

Program terms are hash-consed: structurally equal terms are the same
object, so configurations hash and compare in constant time.  The smart
constructors (``seq``, ``choice``, ...) produce canonical forms directly.

Semantics are computed by an :class:`Engine` bound to one theory.  An
engine may be *lifted* over one free variable (used for the HL reaction
``r_h`` of a mapped system program): configurations then carry a bitmask of
the variable's values that are still consistent with the tests passed so
far, so the refinements of ``A(x, e)`` for all ``e`` are explored at once.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import CapacityError, SpecificationError
from .logic import FALSE, TRUE, Formula, Not, Truth, Var, free_vars, substitute
from .theory import AgentAction, GroundTheory, State, SystemAction, action_key

DEFAULT_MAX_CONFIGS = 100_000

_INTERN: dict = {}


class Program:
    __slots__ = ("_fv", "_text", "__weakref__")

    kind = "program"

    def __str__(self) -> str:
        if self._text is None:
            from .lang.printer import format_program

            self._text = format_program(self)
        return self._text

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self}>"

    @property
    def free(self) -> frozenset:
        if self._fv is None:
            self._fv = self._free()
        return self._fv

    def _free(self) -> frozenset:
        return frozenset()

    def __reduce__(self):
        return (_rebuild, (type(self).__name__, self._fields()))

    def _fields(self) -> tuple:
        return ()


def _make(cls, *fields):
    key = (cls, fields)
    obj = _INTERN.get(key)
    if obj is None:
        obj = object.__new__(cls)
        obj._fv = None
        obj._text = None
        obj._init(*fields)
        _INTERN[key] = obj
    return obj


class _Nil(Program):
    __slots__ = ()

    def _init(self):
        pass


class Act(Program):
    """Primitive action; ``reaction`` is None for agent actions."""

    __slots__ = ("name", "args", "reaction")

    def _init(self, name, args, reaction):
        self.name = name
        self.args = args
        self.reaction = reaction

    def _fields(self):
        return (self.name, self.args, self.reaction)

    @property
    def is_agent(self) -> bool:
        return self.reaction is None

    def _free(self):
        ts = self.args + (() if self.reaction is None else (self.reaction,))
        return frozenset(t.name for t in ts if isinstance(t, Var))


class Test(Program):
    __slots__ = ("formula",)

    def _init(self, formula):
        self.formula = formula

    def _fields(self):
        return (self.formula,)

    def _free(self):
        return free_vars(self.formula)


class Seq(Program):
    __slots__ = ("items", "_tail")

    def _init(self, items):
        self.items = items
        self._tail = None

    def _fields(self):
        return (self.items,)

    @property
    def head(self) -> Program:
        return self.items[0]

    @property
    def tail(self) -> Program:
        if self._tail is None:
            self._tail = seq(*self.items[1:])
        return self._tail

    def _free(self):
        return frozenset().union(*(i.free for i in self.items))


class Choice(Program):
    __slots__ = ("items",)

    def _init(self, items):
        self.items = items

    def _fields(self):
        return (self.items,)

    def _free(self):
        return frozenset().union(*(i.free for i in self.items))


class Pick(Program):
    __slots__ = ("var", "sort", "body")

    def _init(self, var, sort, body):
        self.var = var
        self.sort = sort
        self.body = body

    def _fields(self):
        return (self.var, self.sort, self.body)

    def _free(self):
        return self.body.free - {self.var}


class Star(Program):
    __slots__ = ("body",)

    def _init(self, body):
        self.body = body

    def _fields(self):
        return (self.body,)

    def _free(self):
        return self.body.free


class Conc(Program):
    __slots__ = ("left", "right")

    def _init(self, left, right):
        self.left = left
        self.right = right

    def _fields(self):
        return (self.left, self.right)

    def _free(self):
        return self.left.free | self.right.free


NIL = _make(_Nil)


def _rebuild(name, fields):
    return {
        "_Nil": lambda: NIL,
        "Act": lambda: act(*fields),
        "Test": lambda: test(*fields),
        "Seq": lambda: seq(*fields[0]),
        "Choice": lambda: choice(*fields[0]),
        "Pick": lambda: pick(*fields),
        "Star": lambda: star(*fields),
        "Conc": lambda: conc(*fields),
    }[name]()


# ------------------------------------------------------ smart constructors


def act(name: str, args: Iterable = (), reaction=None) -> Program:
    return _make(Act, name, tuple(args), reaction)


def agent_act(a: AgentAction) -> Program:
    return act(a.name, a.args)


def system_act(a: SystemAction) -> Program:
    return act(a.name, a.args, a.reaction)


def test(f: Formula) -> Program:
    if f == TRUE:
        return NIL
    return _make(Test, f)


def seq(*items: Program) -> Program:
    flat = []
    for p in items:
        if p is NIL:
            continue
        if isinstance(p, Seq):
            flat.extend(p.items)
        else:
            flat.append(p)
    if not flat:
        return NIL
    if len(flat) == 1:
        return flat[0]
    return _make(Seq, tuple(flat))


def choice(*items: Program) -> Program:
    flat: list = []
    for p in items:
        for q in p.items if isinstance(p, Choice) else (p,):
            if q not in flat:
                flat.append(q)
    if not flat:
        raise SpecificationError("empty choice")
    if len(flat) == 1:
        return flat[0]
    return _make(Choice, tuple(flat))


def pick(var: str, sort: str, body: Program) -> Program:
    if var not in body.free:
        return body
    return _make(Pick, var, sort, body)


def star(body: Program) -> Program:
    if body is NIL:
        return NIL
    if isinstance(body, Star):
        return body
    return _make(Star, body)


def conc(left: Program, right: Program) -> Program:
    if left is NIL:
        return right
    if right is NIL:
        return left
    return _make(Conc, left, right)


def if_then_else(cond: Formula, then: Program, other: Program = NIL) -> Program:
    return choice(seq(test(cond), then), seq(test(_negate(cond)), other))


def while_do(cond: Formula, body: Program) -> Program:
    return seq(star(seq(test(cond), body)), test(_negate(cond)))


def _negate(f: Formula) -> Formula:
    if isinstance(f, Truth):
        return FALSE if f.value else TRUE
    return Not(f)


def canonicalize(p: Program) -> Program:
    """Rebuild ``p`` through the smart constructors (idempotent)."""
    if isinstance(p, Seq):
        return seq(*(canonicalize(i) for i in p.items))
    if isinstance(p, Choice):
        return choice(*(canonicalize(i) for i in p.items))
    if isinstance(p, Pick):
        return pick(p.var, p.sort, canonicalize(p.body))
    if isinstance(p, Star):
        return star(canonicalize(p.body))
    if isinstance(p, Conc):
        return conc(canonicalize(p.left), canonicalize(p.right))
    if isinstance(p, Test):
        return test(p.formula)
    return p


_SUBST: dict = {}


def subst(p: Program, env: Mapping[str, object]) -> Program:
    """Replace free variables; bound variables shadow ``env``."""
    if not env or not (p.free & env.keys()):
        return p
    env = {k: v for k, v in env.items() if k in p.free}
    key = (p, tuple(sorted(env.items(), key=lambda kv: kv[0])))
    out = _SUBST.get(key)
    if out is not None:
        return out

    def term(t):
        return env.get(t.name, t) if isinstance(t, Var) else t

    if isinstance(p, Act):
        out = act(p.name, tuple(term(t) for t in p.args), None if p.reaction is None else term(p.reaction))
    elif isinstance(p, Test):
        out = test(substitute(p.formula, env))
    elif isinstance(p, Seq):
        out = seq(*(subst(i, env) for i in p.items))
    elif isinstance(p, Choice):
        out = choice(*(subst(i, env) for i in p.items))
    elif isinstance(p, Pick):
        inner = {k: v for k, v in env.items() if k != p.var}
        out = pick(p.var, p.sort, subst(p.body, inner))
    elif isinstance(p, Star):
        out = star(subst(p.body, env))
    elif isinstance(p, Conc):
        out = conc(subst(p.left, env), subst(p.right, env))
    else:
        out = p
    _SUBST[key] = out
    return out


def alphabet(p: Program) -> str:
    """'agent', 'system', 'none' (no actions) or 'mixed'."""
    out = _ALPHABET.get(p)
    if out is None:
        out = _ALPHABET[p] = _alphabet(p)
    return out


_ALPHABET: dict = {}


def _alphabet(p: Program) -> str:
    kinds = set()

    def go(q):
        if isinstance(q, Act):
            kinds.add("agent" if q.is_agent else "system")
        elif isinstance(q, (Seq, Choice)):
            for i in q.items:
                go(i)
        elif isinstance(q, (Pick, Star)):
            go(q.body)
        elif isinstance(q, Conc):
            go(q.left)
            go(q.right)

    go(p)
    if not kinds:
        return "none"
    if len(kinds) > 1:
        return "mixed"
    return kinds.pop()


def contains_conc(p: Program) -> bool:
    if isinstance(p, Conc):
        return True
    if isinstance(p, (Seq, Choice)):
        return any(contains_conc(i) for i in p.items)
    if isinstance(p, (Pick, Star)):
        return contains_conc(p.body)
    return False


def mentions_only_in_tests(p: Program, var: str) -> bool:
    """True if ``var`` occurs free only inside tests of ``p``."""
    key = (p, var)
    out = _TESTS_ONLY.get(key)
    if out is None:
        out = _TESTS_ONLY[key] = _mentions_only_in_tests(p, var)
    return out


_TESTS_ONLY: dict = {}


def _mentions_only_in_tests(p: Program, var: str) -> bool:
    if var not in p.free:
        return True
    if isinstance(p, Test):
        return True
    if isinstance(p, Act):
        return False
    if isinstance(p, (Seq, Choice)):
        return all(mentions_only_in_tests(i, var) for i in p.items)
    if isinstance(p, Star):
        return mentions_only_in_tests(p.body, var)
    if isinstance(p, Pick):
        return p.var == var or mentions_only_in_tests(p.body, var)
    if isinstance(p, Conc):
        return mentions_only_in_tests(p.left, var) and mentions_only_in_tests(p.right, var)
    return True


# --------------------------------------------------------------- semantics


@dataclass(frozen=True)
class Lift:
    """A free variable explored symbolically, with its value domain."""

    var: str
    values: tuple

    @property
    def full(self) -> int:
        return (1 << len(self.values)) - 1

    def members(self, mask: int) -> list:
        return [v for i, v in enumerate(self.values) if mask >> i & 1]

    def index(self, value) -> int:
        return self.values.index(value)


class Engine:
    """Trans/Final for one theory, optionally lifted over one variable."""

    def __init__(self, theory: GroundTheory, lift: Lift | None = None):
        self.theory = theory
        self.lift = lift
        self.full = lift.full if lift else 1
        self._trans: dict = {}
        self._final: dict = {}
        self._support: dict = {}
        self._expand: dict = {}
        self._tests: dict = {}
        self._ends: dict = {}

    @classmethod
    def of(cls, theory: GroundTheory, lift: Lift | None = None) -> "Engine":
        engines = theory.cache("engines")
        eng = engines.get(lift)
        if eng is None:
            eng = engines[lift] = cls(theory, lift)
        return eng

    # -- helpers

    def expansions(self, p: Pick) -> tuple:
        out = self._expand.get(p)
        if out is None:
            if p.sort not in self.theory.sorts:
                raise SpecificationError(f"unknown sort {p.sort} in pick")
            out = tuple(subst(p.body, {p.var: v}) for v in self.theory.sorts[p.sort])
            self._expand[p] = out
        return out

    def _test_fn(self, t: Test):
        """(support, bits -> value mask) for a test."""
        fn = self._tests.get(t)
        if fn is None:
            lift = self.lift
            free = t.free
            if lift is not None and lift.var in free:
                if free - {lift.var}:
                    raise SpecificationError(f"test {t} has free variables {sorted(free - {lift.var})}")
                evs = [self.theory.evaluator(t.formula, {lift.var: v}) for v in lift.values]
                sup = 0
                for e in evs:
                    sup |= e.support

                def fn_(b, evs=evs):
                    m = 0
                    for i, e in enumerate(evs):
                        if e(b):
                            m |= 1 << i
                    return m

                fn = (sup, fn_)
            else:
                if free:
                    raise SpecificationError(f"test {t} has free variables {sorted(free)}")
                ev = self.theory.evaluator(t.formula)
                full = self.full
                fn = (ev.support, lambda b, ev=ev, full=full: full if ev(b) else 0)
            self._tests[t] = fn
        return fn

    def ground_action(self, p: Act):
        if p.free:
            raise SpecificationError(f"action {p} is not ground")
        if p.is_agent:
            return AgentAction(p.name, p.args)
        return SystemAction(p.name, p.args, p.reaction)

    def support(self, p: Program) -> int:
        """Bits on which Trans/Final of ``p`` may depend."""
        sup = self._support.get(p)
        if sup is not None:
            return sup
        th = self.theory
        if p is NIL:
            sup = 0
        elif isinstance(p, Act):
            a = self.ground_action(p)
            if p.is_agent:
                sup = th.poss_ag_fn(a).support
                for _, fn in th.reaction_table(a):
                    sup |= fn.support
            else:
                sup = th.poss_fn(a).support
        elif isinstance(p, Test):
            sup = self._test_fn(p)[0]
        elif isinstance(p, (Seq, Choice)):
            sup = 0
            for i in p.items:
                sup |= self.support(i)
        elif isinstance(p, Pick):
            sup = 0
            for q in self.expansions(p):
                sup |= self.support(q)
        elif isinstance(p, Star):
            sup = self.support(p.body)
        elif isinstance(p, Conc):
            sup = self.support(p.left) | self.support(p.right)
        else:
            raise SpecificationError(f"unknown program node {p!r}")
        self._support[p] = sup
        return sup

    # -- Final

    def final(self, p: Program, s: State, mask: int | None = None) -> int:
        """Mask of lifted values for which (p, s) is final (1/0 when unlifted)."""
        if mask is None:
            mask = self.full
        if not mask:
            return 0
        if p is NIL or isinstance(p, Star):
            return mask
        if isinstance(p, Act):
            return 0
        key = (p, s & self.support(p), mask)
        r = self._final.get(key)
        if r is not None:
            return r
        if isinstance(p, Test):
            sup, fn = self._test_fn(p)
            r = mask & fn(s)
        elif isinstance(p, Seq):
            r = mask
            for i in p.items:
                r = self.final(i, s, r)
                if not r:
                    break
        elif isinstance(p, Choice):
            r = 0
            for i in p.items:
                r |= self.final(i, s, mask)
                if r == mask:
                    break
        elif isinstance(p, Pick):
            r = 0
            for q in self.expansions(p):
                r |= self.final(q, s, mask)
                if r == mask:
                    break
        elif isinstance(p, Conc):
            r = self.final(p.left, s, mask)
            if r:
                r = self.final(p.right, s, r)
        else:
            raise SpecificationError(f"unknown program node {p!r}")
        self._final[key] = r
        return r

    # -- Trans

    def steps(self, p: Program, s: State, mask: int | None = None) -> tuple:
        """Single-step transitions: ((label, program', mask'), ...).

        Labels are ground system actions; successor states are obtained with
        ``theory.successor_fn(label)``.
        """
        if mask is None:
            mask = self.full
        if not mask or p is NIL or isinstance(p, Test):
            return ()
        key = (p, s & self.support(p), mask)
        r = self._trans.get(key)
        if r is not None:
            return r
        out: list = []
        if isinstance(p, Act):
            a = self.ground_action(p)
            th = self.theory
            if p.is_agent:
                for e, fn in th.reaction_table(a):
                    if fn(s):
                        out.append((a.with_reaction(e), NIL, mask))
            elif th.poss_fn(a)(s):
                out.append((a, NIL, mask))
        elif isinstance(p, Seq):
            rest = p.tail
            for lab, q, m in self.steps(p.head, s, mask):
                out.append((lab, seq(q, rest), m))
            fm = self.final(p.head, s, mask)
            if fm:
                out.extend(self.steps(rest, s, fm))
        elif isinstance(p, Choice):
            for i in p.items:
                out.extend(self.steps(i, s, mask))
        elif isinstance(p, Pick):
            for q in self.expansions(p):
                out.extend(self.steps(q, s, mask))
        elif isinstance(p, Star):
            for lab, q, m in self.steps(p.body, s, mask):
                out.append((lab, seq(q, p), m))
        elif isinstance(p, Conc):
            for lab, q, m in self.steps(p.left, s, mask):
                out.append((lab, conc(q, p.right), m))
            for lab, q, m in self.steps(p.right, s, mask):
                out.append((lab, conc(p.left, q), m))
        else:
            raise SpecificationError(f"unknown program node {p!r}")
        r = tuple(dict.fromkeys(out))
        self._trans[key] = r
        return r

    def ends(self, p: Program, s: State, mask: int | None = None) -> dict | None:
        """{end state: mask of values} over complete runs, or None if runs can loop.

        Memoised per configuration, so programs that revisit the same
        intermediate states from many starting states share the work.
        """
        if mask is None:
            mask = self.full
        root = (p, s, mask)
        memo = self._ends
        if root in memo:
            return memo[root]
        if not self.steps(p, s, mask):
            fm = self.final(p, s, mask)
            return {s: fm} if fm else {}
        active = {root}
        stack = [(root, iter(self.transitions(p, s, mask)), {})]
        while stack:
            cfg, it, acc = stack[-1]
            for _, q, s2, m2 in it:
                child = (q, s2, m2)
                if child in memo:
                    sub = memo[child]
                    if sub is None:
                        break
                    for st, fm in sub.items():
                        acc[st] = acc.get(st, 0) | fm
                    continue
                if child in active:
                    memo[root] = None
                    return None
                active.add(child)
                stack.append((child, iter(self.transitions(q, s2, m2)), {}))
                break
            else:
                fm = self.final(cfg[0], cfg[1], cfg[2])
                if fm:
                    acc[cfg[1]] = acc.get(cfg[1], 0) | fm
                memo[cfg] = acc
                active.discard(cfg)
                stack.pop()
                if stack:
                    parent = stack[-1][2]
                    for st, fm in acc.items():
                        parent[st] = parent.get(st, 0) | fm
                continue
            if memo.get(child, 0) is None:
                memo[root] = None
                return None
        return memo[root]

    def transitions(self, p: Program, s: State, mask: int | None = None) -> list:
        """((label, program', state', mask'), ...)."""
        succ = self.theory.successor_fn
        return [(lab, q, succ(lab)(s), m) for lab, q, m in self.steps(p, s, mask)]


# ---------------------------------------------------------- public helpers


def _engine(theory: GroundTheory, lift: Lift | None = None) -> Engine:
    return Engine.of(theory, lift)


def _check_mode(p: Program, mode: str | None) -> str:
    kind = alphabet(p)
    if kind == "mixed":
        raise SpecificationError("program mixes agent and system actions")
    if mode is not None and kind not in ("none", mode):
        raise SpecificationError(f"expected a {mode} program, got a {kind} program")
    return mode or kind


def is_final(theory: GroundTheory, p: Program, s: State) -> bool:
    return bool(_engine(theory).final(p, s))


def system_transitions(theory: GroundTheory, p: Program, s: State) -> list:
    """[(GroundSystemAction, (program', state'))] for a system program."""
    _check_mode(p, "system")
    return [(lab, (q, s2)) for lab, q, s2, _ in _engine(theory).transitions(p, s)]


def agent_transitions(theory: GroundTheory, p: Program, s: State) -> list:
    """[(GroundAgentAction, reaction, (program', state'))] for an agent program."""
    _check_mode(p, "agent")
    return [(lab.agent, lab.reaction, (q, s2)) for lab, q, s2, _ in _engine(theory).transitions(p, s)]


@dataclass
class ConfigGraph:
    """Reified Trans relation.  Node ``i`` is ``configs[i] = (program, state, mask)``."""

    configs: list
    edges: list  # per node: [(label, target id), ...] in program order
    final: list  # per node: final mask
    root: int = 0
    lift: Lift | None = None

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def final_ids(self) -> list:
        return [i for i, m in enumerate(self.final) if m]

    def preds(self) -> list:
        out = [[] for _ in self.configs]
        for i, es in enumerate(self.edges):
            for lab, j in es:
                out[j].append((lab, i))
        return out

    def viable(self) -> list:
        """Per node: mask of lifted values for which some Final config is reachable."""
        via = list(self.final)
        preds = self.preds()
        queue = deque(i for i, m in enumerate(via) if m)
        while queue:
            j = queue.popleft()
            for _, i in preds[j]:
                nm = via[i] | (via[j] & self.configs[i][2])
                if nm != via[i]:
                    via[i] = nm
                    queue.append(i)
        return via


def build_config_graph(
    theory: GroundTheory,
    p: Program,
    s: State,
    mode: str | None = None,
    limit: int = DEFAULT_MAX_CONFIGS,
    lift: Lift | None = None,
) -> ConfigGraph:
    _check_mode(p, mode)
    eng = _engine(theory, lift)
    root = (p, s, eng.full)
    ids = {root: 0}
    configs = [root]
    edges: list = []
    finals: list = []
    i = 0
    while i < len(configs):
        q, st, m = configs[i]
        finals.append(eng.final(q, st, m))
        out = []
        for lab, q2, s2, m2 in eng.transitions(q, st, m):
            c = (q2, s2, m2)
            j = ids.get(c)
            if j is None:
                if len(configs) >= limit:
                    raise CapacityError(f"configuration limit of {limit} exceeded")
                j = ids[c] = len(configs)
                configs.append(c)
            out.append((lab, j))
        if len(out) > 1:
            out = list(dict.fromkeys(out))
        edges.append(out)
        i += 1
    return ConfigGraph(configs, edges, finals, 0, lift)


def graph_runs(g: ConfigGraph, max_length: int | None = None) -> dict:
    """All terminating runs of a config graph: {(trace, end state): value mask}."""
    via = g.viable()
    if max_length is None:
        _check_acyclic(g, via)
    out: dict = {}
    stack = [(g.root, ())]
    while stack:
        i, trace = stack.pop()
        p, s, m = g.configs[i]
        if g.final[i]:
            key = (trace, s)
            out[key] = out.get(key, 0) | g.final[i]
        if max_length is not None and len(trace) >= max_length:
            continue
        for lab, j in g.edges[i]:
            if via[j]:
                stack.append((j, trace + (lab,)))
    return out


def _check_acyclic(g: ConfigGraph, via: list) -> None:
    color = [0] * len(g)
    for start in range(len(g)):
        if color[start] or not via[start]:
            continue
        stack = [(start, iter(g.edges[start]))]
        color[start] = 1
        while stack:
            i, it = stack[-1]
            for _, j in it:
                if not via[j]:
                    continue
                if color[j] == 1:
                    raise CapacityError("infinitely many terminating runs (cycle); pass max_length")
                if color[j] == 0:
                    color[j] = 1
                    stack.append((j, iter(g.edges[j])))
                    break
            else:
                color[i] = 2
                stack.pop()


def terminating_runs(
    theory: GroundTheory,
    p: Program,
    s: State,
    mode: str | None = None,
    max_length: int | None = None,
    limit: int = DEFAULT_MAX_CONFIGS,
) -> set:
    """{(trace, end state)} for all complete runs (Do / Do_ag)."""
    g = build_config_graph(theory, p, s, mode, limit)
    return set(graph_runs(g, max_length))


def end_states(theory: GroundTheory, p: Program, s: State, mode: str | None = None, limit: int = DEFAULT_MAX_CONFIGS) -> set:
    """States reachable by complete runs; finite even for looping programs."""
    _check_mode(p, mode)
    out = _engine(theory).ends(p, s)
    if out is not None:
        return set(out)
    g = build_config_graph(theory, p, s, mode, limit)
    return {g.configs[i][1] for i in g.final_ids}


@dataclass
class SDResult:
    ok: bool
    trace: tuple = ()
    programs: tuple = ()

    def __bool__(self) -> bool:
        return self.ok


def check_situation_determined(
    theory: GroundTheory, p: Program, s: State, limit: int = DEFAULT_MAX_CONFIGS
) -> SDResult:
    """Subset construction over traces: every trace must leave one program."""
    eng = _engine(theory)
    start = (frozenset([p]), s)
    seen = {start: ()}
    queue = deque([start])
    while queue:
        progs, st = queue.popleft()
        trace = seen[(progs, st)]
        nxt: dict = {}
        for q in sorted(progs, key=str):
            for lab, q2, s2, _ in eng.transitions(q, st):
                nxt.setdefault((lab, s2), []).append(q2)
        for (lab, s2), qs in sorted(nxt.items(), key=lambda kv: action_key(kv[0][0])):
            uniq = tuple(dict.fromkeys(qs))
            if len(uniq) > 1:
                return SDResult(False, trace + (lab,), tuple(sorted(uniq, key=str)[:2]))
            node = (frozenset(uniq), s2)
            if node not in seen:
                if len(seen) >= limit:
                    raise CapacityError(f"configuration limit of {limit} exceeded")
                seen[node] = trace + (lab,)
                queue.append(node)
    return SDResult(True)


def clear_program_caches() -> None:
    _SUBST.clear()
