"""Textual specification language: parser, lowering and printer."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from ..errors import SpecificationError
from ..logic import ReactionSet
from ..theory import AgentAction, GroundTheory, SystemAction
from . import ast
from .ast import Diagnostic, SourceDocument, Span
from .lower import LoweringError, lower, lower_formula, lower_program
from .parser import ParseError, parse_call_ast, parse_document, parse_formula_ast, parse_program_ast
from .printer import format_formula, format_mapping, format_program, format_program_def, format_theory


def _raise_diags(diags) -> None:
    raise LoweringError(list(diags))


def load_document(source, context: Mapping[str, GroundTheory] | None = None, kind: str | None = None, origin: str | None = None):
    """Parse and lower a path or a SourceDocument (or raw text with ``origin``)."""
    if isinstance(source, SourceDocument):
        doc = source
    elif isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).suffix in (".ndt", ".ndm", ".ndp", ".ndq")):
        doc = SourceDocument.from_path(source)
    else:
        doc = SourceDocument(source, origin or "<input>", kind)
    if kind is not None and doc.kind is None:
        doc = SourceDocument(doc.text, doc.origin, kind)
    d = parse_document(doc)
    if isinstance(d, list):
        _raise_diags(d)
    return lower(d, context or {}, doc.origin)


def load_theory(source) -> GroundTheory:
    return load_document(source, kind="theory")


def load_mapping(source, hl: GroundTheory, ll: GroundTheory):
    return load_document(source, {hl.name: hl, ll.name: ll}, kind="mapping")


def load_program(source, *theories: GroundTheory):
    return load_document(source, {t.name: t for t in theories}, kind="program")


def load_query(source, *theories: GroundTheory):
    return load_document(source, {t.name: t for t in theories}, kind="query-script")


def parse_formula(text: str, theory: GroundTheory, variables: Mapping[str, str] | None = None, extra: GroundTheory | None = None):
    a = parse_formula_ast(text)
    if isinstance(a, list):
        _raise_diags(a)
    return lower_formula(a, theory, variables, extra)


def parse_program(text: str, theory: GroundTheory, mode: str = "agent", variables: Mapping[str, str] | None = None):
    a = parse_program_ast(text)
    if isinstance(a, list):
        _raise_diags(a)
    return lower_program(a, theory, mode, variables)


def _value(theory: GroundTheory, action: str, t) -> object:
    if isinstance(t, ast.PSet):
        from ..logic import render_call

        return ReactionSet(render_call(c.name, tuple(x.name for x in c.args)) for c in t.items)
    return t.name


def parse_action(text: str, theory: GroundTheory):
    """``A(x)`` -> AgentAction, ``A(x, e)`` -> SystemAction (checked)."""
    c = parse_call_ast(text.strip())
    if isinstance(c, list):
        _raise_diags(c)
    sch = theory.actions.get(c.name)
    if sch is None:
        raise SpecificationError(f"unknown action {c.name}")
    vals = tuple(_value(theory, c.name, t) for t in c.args)
    n = len(sch.params)
    if len(vals) == n:
        a = AgentAction(c.name, vals)
    elif len(vals) == n + 1:
        a = SystemAction(c.name, vals[:-1], vals[-1])
    else:
        raise SpecificationError(f"{c.name} expects {n} arguments (plus an optional reaction)")
    theory.check_action(a)
    return a


__all__ = [
    "Diagnostic",
    "LoweringError",
    "ParseError",
    "SourceDocument",
    "Span",
    "format_formula",
    "format_mapping",
    "format_program",
    "format_program_def",
    "format_theory",
    "load_document",
    "load_mapping",
    "load_program",
    "load_query",
    "load_theory",
    "lower",
    "parse_action",
    "parse_document",
    "parse_formula",
    "parse_program",
]
