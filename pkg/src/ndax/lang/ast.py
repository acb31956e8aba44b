"""Located syntax trees produced by the parser (names still unresolved)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int = 0
    end_col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    span: Span
    message: str
    hint: Optional[str] = None
    origin: str = "<input>"

    def __str__(self) -> str:
        text = f"{self.origin}:{self.span}: {self.severity}: {self.message}"
        if self.hint:
            text += f" (hint: {self.hint})"
        return text

    def sort_key(self):
        return (self.span.line, self.span.col, self.message)


# terms


@dataclass(frozen=True)
class PName:
    name: str
    span: Span


@dataclass(frozen=True)
class PCall:
    name: str
    args: tuple  # of terms; () for bare names
    span: Span
    parens: bool = False


@dataclass(frozen=True)
class PSet:
    items: tuple  # of PCall
    span: Span


# formulas


@dataclass(frozen=True)
class FConst:
    value: bool
    span: Span


@dataclass(frozen=True)
class FAtom:
    call: PCall
    span: Span


@dataclass(frozen=True)
class FEq:
    left: object
    right: object  # PName | PSet | PCall (action pattern)
    negated: bool
    span: Span


@dataclass(frozen=True)
class FIn:
    update: PCall
    reaction: object
    span: Span


@dataclass(frozen=True)
class FPoss:
    call: PCall
    span: Span


@dataclass(frozen=True)
class FPossAg:
    span: Span


@dataclass(frozen=True)
class FNot:
    body: object
    span: Span


@dataclass(frozen=True)
class FAnd:
    parts: tuple
    span: Span


@dataclass(frozen=True)
class FOr:
    parts: tuple
    span: Span


@dataclass(frozen=True)
class FImp:
    left: object
    right: object
    span: Span


@dataclass(frozen=True)
class FIff:
    left: object
    right: object
    span: Span


@dataclass(frozen=True)
class VarDecl:
    name: str
    sort: Optional[str]
    span: Span


@dataclass(frozen=True)
class FQuant:
    kind: str  # "exists" | "forall"
    vars: tuple  # of VarDecl
    body: object
    span: Span


# programs


@dataclass(frozen=True)
class GAct:
    call: PCall
    span: Span


@dataclass(frozen=True)
class GTest:
    formula: object
    span: Span


@dataclass(frozen=True)
class GNil:
    span: Span


@dataclass(frozen=True)
class GSeq:
    items: tuple
    span: Span


@dataclass(frozen=True)
class GChoice:
    items: tuple
    span: Span


@dataclass(frozen=True)
class GConc:
    left: object
    right: object
    span: Span


@dataclass(frozen=True)
class GStar:
    body: object
    span: Span


@dataclass(frozen=True)
class GPick:
    vars: tuple  # of VarDecl
    body: object
    span: Span


@dataclass(frozen=True)
class GIf:
    cond: object
    then: object
    other: object  # None when absent
    span: Span


@dataclass(frozen=True)
class GWhile:
    cond: object
    body: object
    span: Span


# declarations


@dataclass(frozen=True)
class SortDecl:
    name: str
    consts: tuple
    span: Span


@dataclass(frozen=True)
class FluentDecl:
    name: str
    params: tuple  # of VarDecl
    span: Span


@dataclass(frozen=True)
class ActionDecl:
    name: str
    params: tuple
    reaction_var: str
    tokens: tuple  # enumerated reactions
    base: tuple  # PCall update atoms for subset reactions
    guard: object  # formula AST or None
    poss_ag: object
    poss: object
    span: Span


@dataclass(frozen=True)
class SsaDecl:
    fluent: str
    params: tuple  # of PName
    formula: object
    span: Span


@dataclass(frozen=True)
class InitDecl:
    closed: tuple  # of (negated: bool, PCall)
    open: tuple  # of PCall
    span: Span


@dataclass(frozen=True)
class TheoryDecl:
    name: str
    level: str  # "low" | "high"
    sorts: tuple
    fluents: tuple
    actions: tuple
    ssas: tuple
    init: Optional[InitDecl]
    span: Span
    kind: str = "theory"


@dataclass(frozen=True)
class ActionMapDecl:
    name: str
    params: tuple  # of VarDecl (sorts optional)
    agent: object
    system_var: str
    system: object
    span: Span


@dataclass(frozen=True)
class FluentMapDecl:
    name: str
    params: tuple
    formula: object
    span: Span


@dataclass(frozen=True)
class MappingDecl:
    name: str
    hl: str
    ll: str
    actions: tuple
    fluents: tuple
    span: Span
    kind: str = "mapping"


@dataclass(frozen=True)
class ProgramDecl:
    name: str
    params: tuple  # of VarDecl
    mode: str  # "agent" | "system"
    theory: str
    body: object
    span: Span
    kind: str = "program"


@dataclass(frozen=True)
class QueryItem:
    kind: str  # "goal" | "task"
    payload: object
    span: Span


@dataclass(frozen=True)
class QueryDecl:
    name: str
    theory: str
    items: tuple
    span: Span
    kind: str = "query-script"


@dataclass(frozen=True)
class SourceDocument:
    text: str
    origin: str = "<input>"
    kind: Optional[str] = None  # checked against the parsed declaration when given

    @classmethod
    def from_path(cls, path) -> "SourceDocument":
        from pathlib import Path

        p = Path(path)
        kind = {".ndt": "theory", ".ndm": "mapping", ".ndp": "program", ".ndq": "query-script"}.get(p.suffix)
        return cls(p.read_text(encoding="utf-8"), str(p), kind)
