"""Name resolution, sort checking and lowering of parsed documents."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .. import congolog as cg
from ..errors import SpecificationError
from ..logic import (
    FALSE,
    TRUE,
    ActionIs,
    And,
    Atom,
    Eq,
    Exists,
    Forall,
    Iff,
    Implies,
    Member,
    Not,
    Or,
    PossAg,
    PossOf,
    ReactionSet,
    Var,
    render_call,
)
from ..mapping import ActionMap, FluentMap, ProgramDef, Query, RefinementMapping
from ..theory import ActionSchema, FluentSchema, GroundTheory, ReactionSort, SuccessorAxiom, reaction_sort_name
from . import ast as A


class LoweringError(SpecificationError):
    def __init__(self, diagnostics):
        self.diagnostics = sorted(diagnostics, key=lambda d: d.sort_key())
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class _Abort(Exception):
    pass


@dataclass
class Vocab:
    """What names mean while lowering formulas and programs."""

    sorts: dict  # sort -> tuple of constants
    fluents: dict  # name -> tuple of param sorts
    actions: dict  # name -> tuple of param sorts
    updates: dict  # update atom name -> tuple of arg sorts (None when unknown)
    constants: dict = field(default_factory=dict)  # constant -> set of sorts

    @classmethod
    def of_theory(cls, th: GroundTheory) -> "Vocab":
        v = cls(
            sorts=dict(th.sorts),
            fluents={f.name: tuple(s for _, s in f.params) for f in th.fluents.values()},
            actions={a.name: tuple(s for _, s in a.params) for a in th.actions.values()},
            updates={},
        )
        for a in th.actions.values():
            for u in a.reactions.base:
                v.updates.setdefault(u.split("(", 1)[0], None)
        v.index_constants()
        return v

    def index_constants(self) -> None:
        self.constants = {}
        for s, cs in self.sorts.items():
            for c in cs:
                if isinstance(c, str):
                    self.constants.setdefault(c, set()).add(s)

    def merged(self, other: "Vocab") -> "Vocab":
        """Own fluents/actions; constants and updates of both."""
        sorts = dict(other.sorts)
        sorts.update(self.sorts)
        updates = dict(other.updates)
        updates.update(self.updates)
        v = Vocab(sorts, dict(self.fluents), dict(self.actions), updates)
        v.constants = {}
        for src in (other, self):
            for s, cs in src.sorts.items():
                for c in cs:
                    if isinstance(c, str):
                        v.constants.setdefault(c, set()).add(s)
        return v


class _Binding:
    __slots__ = ("sort", "span")

    def __init__(self, sort, span):
        self.sort = sort
        self.span = span


class Lowerer:
    def __init__(self, origin: str = "<input>"):
        self.origin = origin
        self.diags: list = []

    def error(self, span: A.Span, message: str, hint: str | None = None) -> None:
        self.diags.append(A.Diagnostic("error", span, message, hint, self.origin))

    def fail(self, span, message, hint=None):
        self.error(span, message, hint)
        raise _Abort()

    # ------------------------------------------------------------ terms

    def term(self, t, scope: dict, vocab: Vocab, expected: str | None):
        if isinstance(t, A.PSet):
            items = []
            for c in t.items:
                items.append(self.update_atom(c, scope, vocab, ground=True))
            return ReactionSet(items)
        if isinstance(t, A.PCall):
            if t.args or t.parens:
                self.fail(t.span, f"unexpected call {t.name}(...) in term position")
            t = A.PName(t.name, t.span)
        name = t.name
        b = scope.get(name)
        if b is not None:
            if expected is not None:
                if b.sort is None:
                    b.sort = expected
                elif b.sort != expected and not _compatible(b.sort, expected, vocab):
                    self.error(t.span, f"variable {name} has sort {b.sort}, expected {expected}")
            return Var(name)
        sorts = vocab.constants.get(name)
        if sorts is None:
            self.fail(t.span, f"unresolved name {name}")
        if expected is not None and expected in vocab.sorts and name not in vocab.sorts[expected]:
            self.error(t.span, f"{name} is not of sort {expected}")
        return name

    def update_atom(self, c: A.PCall, scope, vocab: Vocab, ground: bool = False):
        if c.name not in vocab.updates:
            self.fail(c.span, f"unknown update atom {c.name}")
        args = tuple(self.term(a, scope, vocab, None) for a in c.args)
        if ground:
            if any(isinstance(a, Var) for a in args):
                self.fail(c.span, "set literals must be ground")
            return render_call(c.name, args)
        return (c.name, args)

    # --------------------------------------------------------- formulas

    def formula(self, f, scope: dict, vocab: Vocab, action_var: str | None = None, poss_ag_ok: bool = False):
        rec = lambda g: self.formula(g, scope, vocab, action_var, poss_ag_ok)  # noqa: E731
        if isinstance(f, A.FConst):
            return TRUE if f.value else FALSE
        if isinstance(f, A.FAtom):
            c = f.call
            if c.name in scope and not c.parens:
                self.fail(c.span, f"variable {c.name} used as a formula")
            if c.name not in vocab.fluents:
                self.fail(c.span, f"unknown fluent {c.name}")
            sorts = vocab.fluents[c.name]
            if len(sorts) != len(c.args):
                self.fail(c.span, f"fluent {c.name} takes {len(sorts)} arguments, got {len(c.args)}")
            return Atom(c.name, tuple(self.term(a, scope, vocab, s) for a, s in zip(c.args, sorts)))
        if isinstance(f, A.FEq):
            if isinstance(f.right, A.PCall) and f.right.parens:
                left = f.left
                if action_var is None or not (isinstance(left, A.PName) and left.name == action_var):
                    self.fail(f.span, "action equality is only allowed as 'a = A(...)' in successor state axioms")
                c = f.right
                if c.name not in vocab.actions:
                    self.fail(c.span, f"unknown action {c.name}")
                sorts = vocab.actions[c.name]
                if len(c.args) != len(sorts) + 1:
                    self.fail(c.span, f"action {c.name} takes {len(sorts)} arguments plus a reaction")
                args = tuple(self.term(a, scope, vocab, s) for a, s in zip(c.args, sorts))
                r = self.term(c.args[-1], scope, vocab, reaction_sort_name(c.name))
                out = ActionIs(c.name, args, r)
            else:
                out = Eq(self.term(f.left, scope, vocab, None), self.term(f.right, scope, vocab, None))
            return Not(out) if f.negated else out
        if isinstance(f, A.FIn):
            name, args = self.update_atom(f.update, scope, vocab)
            r = self.term(f.reaction, scope, vocab, None)
            return Member(name, args, r)
        if isinstance(f, A.FPoss):
            c = f.call
            if c.name not in vocab.actions:
                self.fail(c.span, f"unknown action {c.name}")
            sorts = vocab.actions[c.name]
            if len(c.args) != len(sorts) + 1:
                self.fail(c.span, f"Poss({c.name}(...)) needs {len(sorts)} arguments plus a reaction")
            args = tuple(self.term(a, scope, vocab, s) for a, s in zip(c.args, sorts))
            return PossOf(c.name, args, self.term(c.args[-1], scope, vocab, reaction_sort_name(c.name)))
        if isinstance(f, A.FPossAg):
            if not poss_ag_ok:
                self.fail(f.span, "poss_ag may only be referenced inside an action's poss")
            return PossAg()
        if isinstance(f, A.FNot):
            return Not(rec(f.body))
        if isinstance(f, A.FAnd):
            return And(tuple(rec(p) for p in f.parts))
        if isinstance(f, A.FOr):
            return Or(tuple(rec(p) for p in f.parts))
        if isinstance(f, A.FImp):
            return Implies(rec(f.left), rec(f.right))
        if isinstance(f, A.FIff):
            return Iff(rec(f.left), rec(f.right))
        if isinstance(f, A.FQuant):
            inner = dict(scope)
            binds = []
            for v in f.vars:
                if v.sort is not None and v.sort not in vocab.sorts:
                    self.fail(v.span, f"unknown sort {v.sort}")
                b = _Binding(v.sort, v.span)
                inner[v.name] = b
                binds.append((v.name, b))
            body = self.formula(f.body, inner, vocab, action_var, poss_ag_ok)
            vs = []
            for n, b in binds:
                if b.sort is None:
                    self.fail(b.span, f"cannot infer the sort of {n}", "annotate it as name:Sort")
                vs.append((n, b.sort))
            return (Exists if f.kind == "exists" else Forall)(tuple(vs), body)
        self.fail(getattr(f, "span", A.Span(1, 1)), f"not a formula: {type(f).__name__}")

    # --------------------------------------------------------- programs

    def program(self, g, scope: dict, vocab: Vocab, mode: str):
        rec = lambda q: self.program(q, scope, vocab, mode)  # noqa: E731
        if isinstance(g, A.GNil):
            return cg.NIL
        if isinstance(g, A.GAct):
            c = g.call
            if c.name not in vocab.actions:
                self.fail(c.span, f"unknown action {c.name}")
            sorts = vocab.actions[c.name]
            if mode == "agent":
                if len(c.args) != len(sorts):
                    hint = "system actions are not allowed in agent programs" if len(c.args) == len(sorts) + 1 else None
                    self.fail(c.span, f"agent action {c.name} takes {len(sorts)} arguments, got {len(c.args)}", hint)
                args = tuple(self.term(a, scope, vocab, s) for a, s in zip(c.args, sorts))
                return cg.act(c.name, args)
            if len(c.args) != len(sorts) + 1:
                hint = "agent actions are not allowed in system programs" if len(c.args) == len(sorts) else None
                self.fail(c.span, f"system action {c.name} takes {len(sorts)} arguments plus a reaction", hint)
            args = tuple(self.term(a, scope, vocab, s) for a, s in zip(c.args, sorts))
            r = self.term(c.args[-1], scope, vocab, reaction_sort_name(c.name))
            return cg.act(c.name, args, r)
        if isinstance(g, A.GTest):
            return cg.test(self.formula(g.formula, scope, vocab))
        if isinstance(g, A.GSeq):
            return cg.seq(*(rec(i) for i in g.items))
        if isinstance(g, A.GChoice):
            return cg.choice(*(rec(i) for i in g.items))
        if isinstance(g, A.GConc):
            return cg.conc(rec(g.left), rec(g.right))
        if isinstance(g, A.GStar):
            return cg.star(rec(g.body))
        if isinstance(g, A.GIf):
            cond = self.formula(g.cond, scope, vocab)
            other = rec(g.other) if g.other is not None else cg.NIL
            return cg.if_then_else(cond, rec(g.then), other)
        if isinstance(g, A.GWhile):
            return cg.while_do(self.formula(g.cond, scope, vocab), rec(g.body))
        if isinstance(g, A.GPick):
            inner = dict(scope)
            binds = []
            for v in g.vars:
                if v.sort is not None and v.sort not in vocab.sorts:
                    self.fail(v.span, f"unknown sort {v.sort}")
                b = _Binding(v.sort, v.span)
                inner[v.name] = b
                binds.append((v.name, b))
            body = self.program(g.body, inner, vocab, mode)
            for n, b in reversed(binds):
                if b.sort is None:
                    self.fail(b.span, f"cannot infer the sort of {n}", "annotate it as name:Sort")
                body = _pick_keep(n, b.sort, body)
            return body
        self.fail(getattr(g, "span", A.Span(1, 1)), f"not a program: {type(g).__name__}")

    # ---------------------------------------------------------- theory

    def theory(self, d: A.TheoryDecl, open_limit: int = 16) -> GroundTheory:
        sorts: dict = {}
        for s in d.sorts:
            if s.name in sorts:
                self.error(s.span, f"duplicate sort {s.name}")
            if len(set(s.consts)) != len(s.consts):
                self.error(s.span, f"duplicate constant in sort {s.name}")
            sorts[s.name] = tuple(s.consts)
        fluents = []
        seen = set()
        for f in d.fluents:
            if f.name in seen:
                self.error(f.span, f"duplicate fluent {f.name}")
            seen.add(f.name)
            for p in f.params:
                if p.sort not in sorts:
                    self.error(p.span, f"unknown sort {p.sort}")
            fluents.append(FluentSchema(f.name, tuple((p.name, p.sort) for p in f.params)))
        vocab = Vocab(
            sorts=dict(sorts),
            fluents={f.name: tuple(s for _, s in f.params) for f in fluents},
            actions={a.name: tuple(p.sort for p in a.params) for a in d.actions},
            updates={},
        )
        for a in d.actions:
            for u in a.base:
                vocab.updates.setdefault(u.name, None)
            vocab.sorts[reaction_sort_name(a.name)] = tuple(a.tokens)
        vocab.index_constants()
        actions = []
        seen = set()
        for a in d.actions:
            if a.name in seen:
                self.error(a.span, f"duplicate action {a.name}")
            seen.add(a.name)
            try:
                actions.append(self._action(a, vocab))
            except _Abort:
                pass
        ssas = []
        seen = set()
        for x in d.ssas:
            if x.fluent in seen:
                self.error(x.span, f"duplicate successor state axiom for {x.fluent}")
            seen.add(x.fluent)
            try:
                ssas.append(self._ssa(x, vocab))
            except _Abort:
                pass
        init_true, init_open = [], []
        if d.init is not None:
            for neg, c in d.init.closed:
                try:
                    atom = self._ground_atom(c, vocab)
                except _Abort:
                    continue
                if not neg:
                    init_true.append(atom)
            for c in d.init.open:
                try:
                    init_open.append(self._ground_atom(c, vocab))
                except _Abort:
                    continue
            if init_open and d.level != "high":
                self.error(d.init.span, "open initial atoms require a high-level theory", "declare 'theory NAME : high'")
        if self.diags:
            raise LoweringError(self.diags)
        try:
            return GroundTheory(
                d.name, sorts, fluents, actions, ssas, init_true, init_open, d.level == "high", open_limit
            )
        except SpecificationError as exc:
            self.error(d.span, str(exc))
            raise LoweringError(self.diags) from None

    def _ground_atom(self, c: A.PCall, vocab: Vocab):
        if c.name not in vocab.fluents:
            self.fail(c.span, f"unknown fluent {c.name}")
        sorts = vocab.fluents[c.name]
        if len(sorts) != len(c.args):
            self.fail(c.span, f"fluent {c.name} takes {len(sorts)} arguments")
        args = tuple(self.term(a, {}, vocab, s) for a, s in zip(c.args, sorts))
        return (c.name, args)

    def _action(self, a: A.ActionDecl, vocab: Vocab) -> ActionSchema:
        for p in a.params:
            if p.sort not in vocab.sorts:
                self.fail(p.span, f"unknown sort {p.sort}")
        scope = {p.name: _Binding(p.sort, p.span) for p in a.params}
        if a.base:
            base = tuple(self.update_atom(c, {}, vocab, ground=True) for c in a.base)
            guard = None
            if a.guard is not None:
                gscope = {a.reaction_var: _Binding(reaction_sort_name(a.name), a.span)}
                guard = self.formula(a.guard, gscope, vocab)
            rs = ReactionSort(base=base, guard=guard, var=a.reaction_var)
        else:
            rs = ReactionSort(tokens=tuple(a.tokens), var=a.reaction_var)
        pa = self.formula(a.poss_ag, scope, vocab)
        if a.reaction_var in _mentioned(pa):
            self.error(a.span, f"poss_ag of {a.name} mentions the reaction variable {a.reaction_var}")
        pscope = dict(scope)
        pscope[a.reaction_var] = _Binding(reaction_sort_name(a.name), a.span)
        pf = self.formula(a.poss, pscope, vocab, poss_ag_ok=True)
        return ActionSchema(a.name, tuple((p.name, p.sort) for p in a.params), a.reaction_var, rs, pa, pf)

    def _ssa(self, x: A.SsaDecl, vocab: Vocab) -> SuccessorAxiom:
        if x.fluent not in vocab.fluents:
            self.fail(x.span, f"successor state axiom for unknown fluent {x.fluent}")
        sorts = vocab.fluents[x.fluent]
        if len(sorts) != len(x.params):
            self.fail(x.span, f"fluent {x.fluent} takes {len(sorts)} arguments")
        scope = {p.name: _Binding(s, p.span) for p, s in zip(x.params, sorts)}
        rhs = self.formula(x.formula, scope, vocab, action_var="a")
        return SuccessorAxiom(x.fluent, tuple(p.name for p in x.params), rhs)

    # --------------------------------------------------------- mapping

    def mapping(self, d: A.MappingDecl, theories: Mapping[str, GroundTheory]) -> RefinementMapping:
        hl = theories.get(d.hl)
        ll = theories.get(d.ll)
        if hl is None:
            self.fail(d.span, f"unknown theory {d.hl}")
        if ll is None:
            self.fail(d.span, f"unknown theory {d.ll}")
        hv = Vocab.of_theory(hl)
        lv = Vocab.of_theory(ll).merged(hv)
        actions = {}
        for am in d.actions:
            if am.name in actions:
                self.error(am.span, f"duplicate mapping for action {am.name}")
                continue
            sch = hl.actions.get(am.name)
            if sch is None:
                self.error(am.span, f"{am.name} is not an action of {hl.name}")
                continue
            if len(am.params) != len(sch.params):
                self.error(am.span, f"{am.name} takes {len(sch.params)} parameters")
                continue
            scope = {}
            for p, (_, s) in zip(am.params, sch.params):
                if p.sort is not None and p.sort != s:
                    self.error(p.span, f"parameter {p.name} has sort {s} in {hl.name}")
                scope[p.name] = _Binding(s, p.span)
            try:
                ag = self.program(am.agent, dict(scope), lv, "agent")
                sscope = dict(scope)
                sscope[am.system_var] = _Binding(reaction_sort_name(am.name), am.span)
                sy = self.program(am.system, sscope, lv, "system")
            except _Abort:
                continue
            actions[am.name] = ActionMap(am.name, tuple(p.name for p in am.params), ag, am.system_var, sy)
        fluents = {}
        for fm in d.fluents:
            if fm.name in fluents:
                self.error(fm.span, f"duplicate mapping for fluent {fm.name}")
                continue
            sch = hl.fluents.get(fm.name)
            if sch is None:
                self.error(fm.span, f"{fm.name} is not a fluent of {hl.name}")
                continue
            if len(fm.params) != len(sch.params):
                self.error(fm.span, f"{fm.name} takes {len(sch.params)} parameters")
                continue
            scope = {p.name: _Binding(s, p.span) for p, (_, s) in zip(fm.params, sch.params)}
            try:
                fluents[fm.name] = FluentMap(fm.name, tuple(p.name for p in fm.params), self.formula(fm.formula, scope, lv))
            except _Abort:
                continue
        for a in sorted(hl.actions):
            if a not in actions and not any(am.name == a for am in d.actions):
                self.error(d.span, f"mapping coverage gap: no m_a/m_s for HL action {a}")
        for f in sorted(hl.fluents):
            if f not in fluents and not any(fm.name == f for fm in d.fluents):
                self.error(d.span, f"mapping coverage gap: no m_f for HL fluent {f}")
        if self.diags:
            raise LoweringError(self.diags)
        return RefinementMapping(d.name, hl, ll, actions, fluents)

    # --------------------------------------------------------- programs

    def program_def(self, d: A.ProgramDecl, theories: Mapping[str, GroundTheory]) -> ProgramDef:
        th = theories.get(d.theory)
        if th is None:
            self.fail(d.span, f"unknown theory {d.theory}")
        vocab = Vocab.of_theory(th)
        scope = {}
        for p in d.params:
            if p.sort is not None and p.sort not in vocab.sorts:
                self.fail(p.span, f"unknown sort {p.sort}")
            scope[p.name] = _Binding(p.sort, p.span)
        body = self.program(d.body, scope, vocab, d.mode)
        params = []
        for p in d.params:
            b = scope[p.name]
            if b.sort is None:
                self.fail(p.span, f"cannot infer the sort of {p.name}")
            params.append((p.name, b.sort))
        if self.diags:
            raise LoweringError(self.diags)
        return ProgramDef(d.name, tuple(params), d.mode, d.theory, body)

    def query(self, d: A.QueryDecl, theories: Mapping[str, GroundTheory]) -> Query:
        th = theories.get(d.theory)
        if th is None:
            self.fail(d.span, f"unknown theory {d.theory}")
        vocab = Vocab.of_theory(th)
        items = []
        for it in d.items:
            try:
                if it.kind == "goal":
                    items.append(("goal", self.formula(it.payload, {}, vocab)))
                else:
                    items.append(("task", self.program(it.payload, {}, vocab, "agent")))
            except _Abort:
                continue
        if self.diags:
            raise LoweringError(self.diags)
        return Query(d.name, d.theory, tuple(items))


def _pick_keep(var: str, sort: str, body: cg.Program) -> cg.Program:
    return cg.pick(var, sort, body)


def _compatible(have: str, want: str, vocab: Vocab) -> bool:
    """Same-named sorts across theories, or a sort whose constants fit."""
    if have == want:
        return True
    a = vocab.sorts.get(have)
    b = vocab.sorts.get(want)
    return a is not None and b is not None and set(a) <= set(b)


def _mentioned(f) -> set:
    from ..logic import free_vars

    return set(free_vars(f))


# ---------------------------------------------------------- entry points


def lower(ast, context: Mapping[str, GroundTheory] | None = None, origin: str = "<input>", open_limit: int = 16):
    """Lower a parsed document.  Raises LoweringError with diagnostics."""
    lw = Lowerer(origin)
    context = context or {}
    try:
        if isinstance(ast, A.TheoryDecl):
            return lw.theory(ast, open_limit)
        if isinstance(ast, A.MappingDecl):
            return lw.mapping(ast, context)
        if isinstance(ast, A.ProgramDecl):
            return lw.program_def(ast, context)
        if isinstance(ast, A.QueryDecl):
            return lw.query(ast, context)
    except _Abort:
        raise LoweringError(lw.diags) from None
    raise SpecificationError(f"cannot lower {type(ast).__name__}")


def lower_formula(ast, theory: GroundTheory, variables: Mapping[str, str] | None = None, extra: GroundTheory | None = None):
    lw = Lowerer("<formula>")
    vocab = Vocab.of_theory(theory)
    if extra is not None:
        vocab = vocab.merged(Vocab.of_theory(extra))
    scope = {k: _Binding(v, A.Span(1, 1)) for k, v in (variables or {}).items()}
    try:
        f = lw.formula(ast, scope, vocab)
    except _Abort:
        raise LoweringError(lw.diags) from None
    if lw.diags:
        raise LoweringError(lw.diags)
    return f


def lower_program(ast, theory: GroundTheory, mode: str = "agent", variables: Mapping[str, str] | None = None):
    lw = Lowerer("<program>")
    vocab = Vocab.of_theory(theory)
    scope = {k: _Binding(v, A.Span(1, 1)) for k, v in (variables or {}).items()}
    try:
        p = lw.program(ast, scope, vocab, mode)
    except _Abort:
        raise LoweringError(lw.diags) from None
    if lw.diags:
        raise LoweringError(lw.diags)
    return p
