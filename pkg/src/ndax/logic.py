"""Terms and situation-suppressed formulas.

Formulas are immutable trees.  Grounding against a theory (``Grounder``)
folds every equality, action-equality and membership test to a constant
and expands quantifiers, leaving a propositional formula over ground atom
indices which is compiled into a Python closure over an ``int`` bitmask.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Union


class ReactionSet(frozenset):
    """A set-valued reaction: a frozenset of ground update-atom strings."""

    def __repr__(self) -> str:
        return "{" + ", ".join(sorted(self)) + "}"

    __str__ = __repr__


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


Value = Union[str, ReactionSet]
Term = Union[Var, str, ReactionSet]


def value_key(v: Value) -> tuple:
    """Deterministic ordering for constants and reaction values."""
    if isinstance(v, ReactionSet):
        return (1, len(v), tuple(sorted(v)))
    return (0, 0, (v,))


def render_value(v: Value) -> str:
    return str(v)


def render_term(t: Term) -> str:
    return str(t)


def render_call(name: str, args: Iterable) -> str:
    args = list(args)
    if not args:
        return name
    return f"{name}({', '.join(str(a) for a in args)})"


# ---------------------------------------------------------------- formulas


class Formula:
    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return conj(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return disj(self, other)

    def __invert__(self) -> "Formula":
        return neg(self)

    def __str__(self) -> str:
        from .lang.printer import format_formula

        return format_formula(self)


@dataclass(frozen=True, eq=True)
class Truth(Formula):
    value: bool


TRUE = Truth(True)
FALSE = Truth(False)


@dataclass(frozen=True)
class Atom(Formula):
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Eq(Formula):
    left: Term
    right: Term


@dataclass(frozen=True)
class ActionIs(Formula):
    """``a = A(args, reaction)`` inside successor state axioms."""

    name: str
    args: tuple
    reaction: Term


@dataclass(frozen=True)
class Member(Formula):
    """``upd(args) in e`` for set-valued reactions."""

    update: str
    args: tuple
    reaction: Term


@dataclass(frozen=True)
class PossOf(Formula):
    """``Poss(A(args, reaction))``: system action precondition as a formula."""

    name: str
    args: tuple
    reaction: Term


@dataclass(frozen=True)
class PossAg(Formula):
    """Reference to the enclosing action's agent precondition."""


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    parts: tuple


@dataclass(frozen=True)
class Or(Formula):
    parts: tuple


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    vars: tuple  # ((name, sort), ...)
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    vars: tuple
    body: Formula


def conj(*parts: Formula) -> Formula:
    flat = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*parts: Formula) -> Formula:
    flat = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(f: Formula) -> Formula:
    return Not(f)


# ------------------------------------------------------------ traversal


def free_vars(f: Formula) -> frozenset:
    """Names of free variables of ``f``."""
    out: set = set()

    def terms(ts, bound):
        for t in ts:
            if isinstance(t, Var) and t.name not in bound:
                out.add(t.name)

    def go(f, bound):
        if isinstance(f, Atom):
            terms(f.args, bound)
        elif isinstance(f, Eq):
            terms((f.left, f.right), bound)
        elif isinstance(f, (ActionIs, Member, PossOf)):
            terms(f.args + (f.reaction,), bound)
        elif isinstance(f, Not):
            go(f.body, bound)
        elif isinstance(f, (And, Or)):
            for p in f.parts:
                go(p, bound)
        elif isinstance(f, (Implies, Iff)):
            go(f.left, bound)
            go(f.right, bound)
        elif isinstance(f, (Exists, Forall)):
            go(f.body, bound | {v for v, _ in f.vars})

    go(f, frozenset())
    return frozenset(out)


def atoms_of(f: Formula) -> set:
    """Fluent names mentioned by ``f``."""
    out: set = set()

    def go(f):
        if isinstance(f, Atom):
            out.add(f.name)
        elif isinstance(f, Not):
            go(f.body)
        elif isinstance(f, (And, Or)):
            for p in f.parts:
                go(p)
        elif isinstance(f, (Implies, Iff)):
            go(f.left)
            go(f.right)
        elif isinstance(f, (Exists, Forall)):
            go(f.body)

    go(f)
    return out


def _sub_term(t: Term, env: Mapping) -> Term:
    if isinstance(t, Var) and t.name in env:
        return env[t.name]
    return t


def substitute(f: Formula, env: Mapping[str, Term]) -> Formula:
    """Capture-avoiding enough for our use: bound names shadow ``env``."""
    if not env:
        return f
    if isinstance(f, Atom):
        return Atom(f.name, tuple(_sub_term(t, env) for t in f.args))
    if isinstance(f, Eq):
        return Eq(_sub_term(f.left, env), _sub_term(f.right, env))
    if isinstance(f, ActionIs):
        return ActionIs(f.name, tuple(_sub_term(t, env) for t in f.args), _sub_term(f.reaction, env))
    if isinstance(f, Member):
        return Member(f.update, tuple(_sub_term(t, env) for t in f.args), _sub_term(f.reaction, env))
    if isinstance(f, PossOf):
        return PossOf(f.name, tuple(_sub_term(t, env) for t in f.args), _sub_term(f.reaction, env))
    if isinstance(f, Not):
        return Not(substitute(f.body, env))
    if isinstance(f, And):
        return And(tuple(substitute(p, env) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(substitute(p, env) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(substitute(f.left, env), substitute(f.right, env))
    if isinstance(f, Iff):
        return Iff(substitute(f.left, env), substitute(f.right, env))
    if isinstance(f, (Exists, Forall)):
        inner = {k: v for k, v in env.items() if k not in {n for n, _ in f.vars}}
        return type(f)(f.vars, substitute(f.body, inner))
    return f


def map_atoms(f: Formula, fn) -> Formula:
    """Homomorphically replace every fluent atom by ``fn(atom)``."""
    if isinstance(f, Atom):
        return fn(f)
    if isinstance(f, Not):
        return Not(map_atoms(f.body, fn))
    if isinstance(f, And):
        return And(tuple(map_atoms(p, fn) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(map_atoms(p, fn) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(map_atoms(f.left, fn), map_atoms(f.right, fn))
    if isinstance(f, Iff):
        return Iff(map_atoms(f.left, fn), map_atoms(f.right, fn))
    if isinstance(f, (Exists, Forall)):
        return type(f)(f.vars, map_atoms(f.body, fn))
    return f


# ------------------------------------------------------------- grounding


class GroundingError(ValueError):
    pass


@dataclass(frozen=True)
class GAtom(Formula):
    """Ground atom by bit index (only produced by grounding)."""

    index: int


def _g_not(f: Formula) -> Formula:
    if f is TRUE or f == TRUE:
        return FALSE
    if f is FALSE or f == FALSE:
        return TRUE
    if isinstance(f, Not):
        return f.body
    return Not(f)


def _g_and(parts) -> Formula:
    out = []
    seen = set()
    for p in parts:
        if p == FALSE:
            return FALSE
        if p == TRUE:
            continue
        if isinstance(p, And):
            items = p.parts
        else:
            items = (p,)
        for q in items:
            if q not in seen:
                seen.add(q)
                out.append(q)
    for q in out:
        if _g_not(q) in seen:
            return FALSE
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def _g_or(parts) -> Formula:
    out = []
    seen = set()
    for p in parts:
        if p == TRUE:
            return TRUE
        if p == FALSE:
            continue
        items = p.parts if isinstance(p, Or) else (p,)
        for q in items:
            if q not in seen:
                seen.add(q)
                out.append(q)
    for q in out:
        if _g_not(q) in seen:
            return TRUE
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


class Grounder:
    """Grounds formulas against a fixed vocabulary.

    ``sorts`` maps sort names to constant tuples, ``atom_index`` maps
    ``(fluent, args)`` to bit positions.  ``poss_lookup`` resolves
    ``Poss(...)`` and ``poss_ag`` references and is supplied by the theory.
    """

    def __init__(self, sorts: Mapping[str, tuple], atom_index: Mapping[tuple, int], poss_lookup=None):
        self.sorts = sorts
        self.atom_index = atom_index
        self.poss_lookup = poss_lookup

    def _val(self, t: Term, env: Mapping) -> Value:
        if isinstance(t, Var):
            if t.name not in env:
                raise GroundingError(f"unbound variable {t.name}")
            return env[t.name]
        return t

    def ground(self, f: Formula, env: Mapping | None = None, action=None, poss_ag: Formula | None = None) -> Formula:
        return self._g(f, dict(env or {}), action, poss_ag)

    def _g(self, f, env, action, poss_ag):
        if isinstance(f, Truth) or isinstance(f, GAtom):
            return f
        if isinstance(f, Atom):
            key = (f.name, tuple(self._val(t, env) for t in f.args))
            idx = self.atom_index.get(key)
            if idx is None:
                raise GroundingError(f"unknown atom {render_call(*key)}")
            return GAtom(idx)
        if isinstance(f, Eq):
            return TRUE if self._val(f.left, env) == self._val(f.right, env) else FALSE
        if isinstance(f, ActionIs):
            if action is None:
                raise GroundingError("action equality outside a successor state axiom")
            name, args, reaction = action
            if f.name != name or len(f.args) != len(args):
                return FALSE
            vals = tuple(self._val(t, env) for t in f.args)
            return TRUE if vals == tuple(args) and self._val(f.reaction, env) == reaction else FALSE
        if isinstance(f, Member):
            r = self._val(f.reaction, env)
            upd = render_call(f.update, (self._val(t, env) for t in f.args))
            return TRUE if isinstance(r, ReactionSet) and upd in r else FALSE
        if isinstance(f, PossOf):
            if self.poss_lookup is None:
                raise GroundingError("Poss(...) not available here")
            act = (f.name, tuple(self._val(t, env) for t in f.args), self._val(f.reaction, env))
            return self.poss_lookup(act)
        if isinstance(f, PossAg):
            if poss_ag is None:
                raise GroundingError("poss_ag used outside an action's poss")
            return self._g(poss_ag, env, None, None)
        if isinstance(f, Not):
            return _g_not(self._g(f.body, env, action, poss_ag))
        if isinstance(f, And):
            parts = []
            for p in f.parts:
                g = self._g(p, env, action, poss_ag)
                if g == FALSE:
                    return FALSE
                parts.append(g)
            return _g_and(parts)
        if isinstance(f, Or):
            parts = []
            for p in f.parts:
                g = self._g(p, env, action, poss_ag)
                if g == TRUE:
                    return TRUE
                parts.append(g)
            return _g_or(parts)
        if isinstance(f, Implies):
            left = self._g(f.left, env, action, poss_ag)
            if left == FALSE:
                return TRUE
            return _g_or([_g_not(left), self._g(f.right, env, action, poss_ag)])
        if isinstance(f, Iff):
            a = self._g(f.left, env, action, poss_ag)
            b = self._g(f.right, env, action, poss_ag)
            if a == TRUE:
                return b
            if b == TRUE:
                return a
            if a == FALSE:
                return _g_not(b)
            if b == FALSE:
                return _g_not(a)
            return _g_or([_g_and([a, b]), _g_and([_g_not(a), _g_not(b)])])
        if isinstance(f, Exists):
            return self._quant(f, env, action, poss_ag, exists=True)
        if isinstance(f, Forall):
            return self._quant(f, env, action, poss_ag, exists=False)
        raise GroundingError(f"cannot ground {f!r}")

    def _pin(self, f, env, action):
        """Bindings forced by an ``a = A(...)`` conjunct (or disjunct under ∀).

        Returns None when nothing can be pinned, FALSE when the pattern can
        never match ``action``, or a dict of forced variable values.
        """
        if action is None:
            return None
        qnames = {n for n, _ in f.vars}
        body = f.body
        if isinstance(f, Exists):
            cands = body.parts if isinstance(body, And) else (body,)
            cands = [c for c in cands if isinstance(c, ActionIs)]
        else:
            if isinstance(body, Implies):
                cands = body.left.parts if isinstance(body.left, And) else (body.left,)
                cands = [c for c in cands if isinstance(c, ActionIs)]
            else:
                parts = body.parts if isinstance(body, Or) else (body,)
                cands = []
                for p in parts:
                    if isinstance(p, Not) and isinstance(p.body, ActionIs):
                        cands.append(p.body)
                    elif isinstance(p, Not) and isinstance(p.body, And):
                        cands.extend(c for c in p.body.parts if isinstance(c, ActionIs))
        for c in cands:
            name, args, reaction = action
            if c.name != name or len(c.args) != len(args):
                return FALSE
            pins: dict = {}
            for t, v in zip(c.args + (c.reaction,), tuple(args) + (reaction,)):
                if isinstance(t, Var) and t.name in qnames:
                    if pins.get(t.name, v) != v:
                        return FALSE
                    pins[t.name] = v
                else:
                    try:
                        if self._val(t, env) != v:
                            return FALSE
                    except GroundingError:
                        pass
            sorts = dict(f.vars)
            for n, v in pins.items():
                if v not in self.sorts[sorts[n]]:
                    return FALSE
            return pins
        return None

    def _quant(self, f, env, action, poss_ag, exists: bool):
        pins = self._pin(f, env, action)
        if pins == FALSE:
            return FALSE if exists else TRUE
        pins = pins or {}
        rest = [(n, s) for n, s in f.vars if n not in pins]
        domains = []
        for n, s in rest:
            if s not in self.sorts:
                raise GroundingError(f"unknown sort {s}")
            domains.append(self.sorts[s])
        parts = []
        for combo in itertools.product(*domains):
            e2 = dict(env)
            e2.update(pins)
            e2.update(zip((n for n, _ in rest), combo))
            g = self._g(f.body, e2, action, poss_ag)
            if exists and g == TRUE:
                return TRUE
            if not exists and g == FALSE:
                return FALSE
            parts.append(g)
        return _g_or(parts) if exists else _g_and(parts)


# ------------------------------------------------------------- compiling


def support_mask(g: Formula) -> int:
    if isinstance(g, GAtom):
        return 1 << g.index
    if isinstance(g, Not):
        return support_mask(g.body)
    if isinstance(g, (And, Or)):
        m = 0
        for p in g.parts:
            m |= support_mask(p)
        return m
    return 0


def _literal_masks(parts):
    """Split conjunction parts into (pos mask, neg mask, others)."""
    pos = neg_ = 0
    rest = []
    for p in parts:
        if isinstance(p, GAtom):
            pos |= 1 << p.index
        elif isinstance(p, Not) and isinstance(p.body, GAtom):
            neg_ |= 1 << p.body.index
        else:
            rest.append(p)
    return pos, neg_, rest


def to_source(g: Formula, var: str = "b") -> str:
    if g == TRUE:
        return "True"
    if g == FALSE:
        return "False"
    if isinstance(g, GAtom):
        return f"({var} & {1 << g.index}) != 0"
    if isinstance(g, Not):
        if isinstance(g.body, GAtom):
            return f"({var} & {1 << g.body.index}) == 0"
        return f"not ({to_source(g.body, var)})"
    if isinstance(g, And):
        pos, negm, rest = _literal_masks(g.parts)
        items = []
        if pos:
            items.append(f"({var} & {pos}) == {pos}")
        if negm:
            items.append(f"({var} & {negm}) == 0")
        items.extend(f"({to_source(p, var)})" for p in rest)
        return " and ".join(items)
    if isinstance(g, Or):
        return " or ".join(f"({to_source(p, var)})" for p in g.parts)
    raise GroundingError(f"not a ground formula: {g!r}")


def compile_ground(g: Formula):
    """Compile a ground formula to ``bits -> bool``."""
    if g == TRUE:
        return lambda b: True
    if g == FALSE:
        return lambda b: False
    return eval(f"lambda b: {to_source(g)}")  # noqa: S307 - generated from our own AST
