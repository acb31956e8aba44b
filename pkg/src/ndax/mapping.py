"""Refinement mappings m = <m_a, m_s, m_f> and named program definitions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from . import congolog as cg
from .errors import SpecificationError
from .logic import Atom, Formula, map_atoms, substitute
from .theory import AgentAction, GroundTheory, SystemAction


@dataclass(frozen=True)
class ActionMap:
    name: str
    params: tuple  # variable names, HL parameter order
    agent: cg.Program
    system_var: str
    system: cg.Program


@dataclass(frozen=True)
class FluentMap:
    name: str
    params: tuple
    formula: Formula


class RefinementMapping:
    def __init__(self, name: str, hl: GroundTheory, ll: GroundTheory, actions: Mapping, fluents: Mapping):
        self.name = name
        self.hl = hl
        self.ll = ll
        self.actions = dict(actions)
        self.fluents = dict(fluents)
        self._ma: dict = {}
        self._ms: dict = {}
        self._tmpl: dict = {}

    def __repr__(self) -> str:
        return f"RefinementMapping({self.name!r}, {self.hl.name} -> {self.ll.name})"

    def spec(self) -> tuple:
        return (
            self.name,
            self.hl.name,
            self.ll.name,
            tuple(sorted(self.actions.items())),
            tuple(sorted(self.fluents.items())),
        )

    def _map(self, name: str) -> ActionMap:
        am = self.actions.get(name)
        if am is None:
            raise SpecificationError(f"mapping {self.name} has no entry for HL action {name}")
        return am

    def agent_program(self, a: AgentAction) -> cg.Program:
        """m_a(A(x))."""
        p = self._ma.get(a)
        if p is None:
            am = self._map(a.name)
            p = cg.subst(am.agent, dict(zip(am.params, a.args)))
            self._ma[a] = p
        return p

    def system_template(self, a: AgentAction) -> tuple:
        """(m_s(A(x, r_h)) with r_h free, r_h's name)."""
        t = self._tmpl.get(a)
        if t is None:
            am = self._map(a.name)
            env = {k: v for k, v in zip(am.params, a.args) if k != am.system_var}
            t = (cg.subst(am.system, env), am.system_var)
            self._tmpl[a] = t
        return t

    def system_program(self, a: SystemAction) -> cg.Program:
        """m_s(A(x, e))."""
        p = self._ms.get(a)
        if p is None:
            body, var = self.system_template(a.agent)
            p = cg.subst(body, {var: a.reaction})
            self._ms[a] = p
        return p

    def map_atom(self, atom: Atom) -> Formula:
        fm = self.fluents.get(atom.name)
        if fm is None:
            raise SpecificationError(f"mapping {self.name} has no entry for HL fluent {atom.name}")
        if len(fm.params) != len(atom.args):
            raise SpecificationError(f"{atom.name} expects {len(fm.params)} arguments")
        return substitute(fm.formula, dict(zip(fm.params, atom.args)))

    def map_formula(self, f: Formula) -> Formula:
        """m_f(phi): substitute every HL fluent atom."""
        return map_atoms(f, self.map_atom)


@dataclass(frozen=True)
class ProgramDef:
    """A named, possibly parameterised program over one theory."""

    name: str
    params: tuple  # ((var, sort), ...)
    mode: str
    theory: str
    body: cg.Program

    def instantiate(self, *args) -> cg.Program:
        if len(args) != len(self.params):
            raise SpecificationError(f"program {self.name} expects {len(self.params)} arguments")
        return cg.subst(self.body, {v: a for (v, _), a in zip(self.params, args)})


@dataclass(frozen=True)
class Query:
    name: str
    theory: str
    items: tuple  # (("goal", Formula) | ("task", Program), ...)
