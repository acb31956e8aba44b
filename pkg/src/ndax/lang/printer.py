"""Pretty printer whose output parses back to an equal specification."""

from __future__ import annotations

from .. import congolog as cg
from ..logic import (
    ActionIs,
    And,
    Atom,
    Eq,
    Exists,
    Forall,
    GAtom,
    Iff,
    Implies,
    Member,
    Not,
    Or,
    PossAg,
    PossOf,
    Truth,
    render_call,
)

_PRIMARY = (Truth, Atom, Eq, ActionIs, Member, PossOf, PossAg, GAtom)


def _call(name: str, args) -> str:
    args = list(args)
    return f"{name}({', '.join(str(a) for a in args)})" if args else name


def _sub(f) -> str:
    text = format_formula(f)
    if isinstance(f, _PRIMARY + (Not,)):
        return text
    return f"({text})"


def format_formula(f) -> str:
    if isinstance(f, Truth):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return _call(f.name, f.args)
    if isinstance(f, GAtom):
        return f"#{f.index}"
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, ActionIs):
        return f"a = {f.name}({', '.join(str(x) for x in (*f.args, f.reaction))})"
    if isinstance(f, Member):
        return f"{_call(f.update, f.args)} in {f.reaction}"
    if isinstance(f, PossOf):
        return f"Poss({f.name}({', '.join(str(x) for x in (*f.args, f.reaction))}))"
    if isinstance(f, PossAg):
        return "poss_ag"
    if isinstance(f, Not):
        if isinstance(f.body, Eq):
            return f"{f.body.left} != {f.body.right}"
        return "!" + _sub(f.body)
    if isinstance(f, And):
        return " & ".join(_sub(p) for p in f.parts) if f.parts else "true"
    if isinstance(f, Or):
        return " or ".join(_sub(p) for p in f.parts) if f.parts else "false"
    if isinstance(f, Implies):
        return f"{_sub(f.left)} -> {_sub(f.right)}"
    if isinstance(f, Iff):
        return f"{_sub(f.left)} <-> {_sub(f.right)}"
    if isinstance(f, (Exists, Forall)):
        kw = "exists" if isinstance(f, Exists) else "forall"
        vs = ", ".join(f"{n}:{s}" for n, s in f.vars)
        return f"{kw} {vs}. {format_formula(f.body)}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- programs


def _bracket(p, loose: tuple) -> str:
    text = format_program(p)
    return f"[{text}]" if isinstance(p, loose) else text


def format_program(p) -> str:
    if p is cg.NIL:
        return "nil"
    if isinstance(p, cg.Act):
        if p.reaction is None:
            return _call(p.name, p.args)
        return f"{p.name}({', '.join(str(x) for x in (*p.args, p.reaction))})"
    if isinstance(p, cg.Test):
        return _sub(p.formula) + "?"
    if isinstance(p, cg.Seq):
        return "; ".join(_bracket(i, (cg.Choice, cg.Conc, cg.Pick)) for i in p.items)
    if isinstance(p, cg.Choice):
        return " | ".join(_bracket(i, (cg.Pick,)) for i in p.items)
    if isinstance(p, cg.Conc):
        left = _bracket(p.left, (cg.Choice, cg.Conc, cg.Pick))
        right = _bracket(p.right, (cg.Choice, cg.Pick))
        return f"{left} || {right}"
    if isinstance(p, cg.Star):
        return _bracket(p.body, (cg.Seq, cg.Choice, cg.Conc, cg.Pick, cg.Star)) + "*"
    if isinstance(p, cg.Pick):
        return f"pi {p.var}:{p.sort}. {format_program(p.body)}"
    raise TypeError(f"not a program: {p!r}")


# ------------------------------------------------------------ documents


def _params(params) -> str:
    return ", ".join(f"{n}: {s}" for n, s in params)


def format_theory(th) -> str:
    lines = [f"theory {th.name}{' : high' if th.high_level else ''} {{"]
    for s, consts in th.universe.sorts.items():
        lines.append(f"  sort {s} {{{', '.join(consts)}}};")
    for f in th.fluents.values():
        lines.append(f"  fluent {f.name}({_params(f.params)});")
    for a in th.actions.values():
        rs = a.reactions
        var = "" if rs.var == "e" else f"{rs.var}: "
        if rs.is_subset:
            spec = f"subset of {{{', '.join(rs.base)}}}"
            if rs.guard is not None:
                spec += f" where {format_formula(rs.guard)}"
        else:
            spec = "{" + ", ".join(rs.tokens) + "}"
        if a.reaction_var != rs.var:
            var = f"{a.reaction_var}: "
        lines.append(f"  action {a.name}({_params(a.params)}) reactions {var}{spec} {{")
        lines.append(f"    poss_ag: {format_formula(a.poss_ag)};")
        lines.append(f"    poss: {format_formula(a.poss)};")
        lines.append("  }")
    for x in th.ssas.values():
        head = f"{x.fluent}({', '.join(x.params)})" if x.params else x.fluent
        lines.append(f"  ssa {head}: {format_formula(x.rhs)};")
    lines.append("  init {")
    closed = sorted(str(a) for a in th.init_true)
    lines.append(f"    closed: {', '.join(closed)};")
    if th.init_open:
        lines.append(f"    open: {', '.join(str(a) for a in th.init_open)};")
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_mapping(m) -> str:
    lines = [f"mapping {m.name} from {m.hl.name} to {m.ll.name} {{"]
    for name, am in m.actions.items():
        lines.append(f"  action {name}({', '.join(am.params)}) {{")
        lines.append(f"    agent: {format_program(am.agent)};")
        lines.append(f"    system({am.system_var}): {format_program(am.system)};")
        lines.append("  }")
    for name, fm in m.fluents.items():
        head = f"{name}({', '.join(fm.params)})" if fm.params else name
        lines.append(f"  fluent {head}: {format_formula(fm.formula)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_program_def(d) -> str:
    params = f"({_params(d.params)})" if d.params else ""
    return f"program {d.name}{params} {d.mode} on {d.theory} {{\n  {format_program(d.body)}\n}}\n"


__all__ = ["format_formula", "format_program", "format_theory", "format_mapping", "format_program_def", "render_call"]
