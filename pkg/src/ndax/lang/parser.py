"""Recursive-descent parser for theory, mapping, program and query documents."""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast as A

KEYWORDS = {
    "theory", "sort", "fluent", "action", "reactions", "subset", "of", "where",
    "poss_ag", "poss", "ssa", "init", "closed", "open", "mapping", "from", "to",
    "agent", "system", "program", "on", "query", "goal", "task", "pi", "if",
    "then", "else", "endif", "while", "do", "endwhile", "nil", "true", "false",
    "exists", "forall", "and", "or", "not", "in", "Poss",
}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>(//|\#)[^\n]*)
  | (?P<sym><->|->|\|\||!=|[{}()\[\];,:.?*|&!~=])
  | (?P<name>[A-Za-z0-9_][A-Za-z0-9_']*)
    """,
    re.VERBOSE,
)

_ALIASES = {"endIf": "endif", "endWhile": "endwhile"}


@dataclass(frozen=True)
class Token:
    kind: str  # "name" | "sym" | "eof"
    value: str
    line: int
    col: int

    @property
    def span(self) -> A.Span:
        return A.Span(self.line, self.col, self.line, self.col + len(self.value))


class ParseError(Exception):
    def __init__(self, message: str, token: Token, hint: str | None = None):
        super().__init__(message)
        self.token = token
        self.hint = hint


def tokenize(text: str) -> list:
    out = []
    pos = line = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", Token("sym", text[pos], line, pos - line_start + 1))
        kind = m.lastgroup
        value = m.group()
        if kind == "name":
            out.append(Token("name", _ALIASES.get(value, value), line, pos - line_start + 1))
        elif kind == "sym":
            out.append(Token("sym", value, line, pos - line_start + 1))
        nl = value.count("\n")
        if nl:
            line += nl
            line_start = pos + value.rfind("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *values: str) -> bool:
        t = self.tok
        return t.kind != "eof" and t.value in values

    def accept(self, *values: str) -> Token | None:
        if self.at(*values):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, value: str, hint: str | None = None) -> Token:
        t = self.tok
        if t.kind != "eof" and t.value == value:
            self.i += 1
            return t
        found = "end of input" if t.kind == "eof" else repr(t.value)
        raise ParseError(f"expected {value!r}, found {found}", t, hint)

    def name(self, what: str = "name") -> Token:
        t = self.tok
        if t.kind == "name" and t.value not in KEYWORDS:
            self.i += 1
            return t
        found = "end of input" if t.kind == "eof" else repr(t.value)
        raise ParseError(f"expected {what}, found {found}", t)

    def is_name(self, t: Token | None = None) -> bool:
        t = t or self.tok
        return t.kind == "name" and t.value not in KEYWORDS

    def span_from(self, start: Token) -> A.Span:
        prev = self.toks[max(self.i - 1, 0)]
        return A.Span(start.line, start.col, prev.line, prev.col + len(prev.value))

    # -- documents

    def document(self):
        t = self.tok
        if self.at("theory"):
            d = self.theory()
        elif self.at("mapping"):
            d = self.mapping()
        elif self.at("program"):
            d = self.program_decl()
        elif self.at("query"):
            d = self.query_decl()
        else:
            raise ParseError("expected 'theory', 'mapping', 'program' or 'query'", t)
        if self.tok.kind != "eof":
            raise ParseError("only one top-level declaration is allowed per document", self.tok)
        return d

    def theory(self) -> A.TheoryDecl:
        start = self.expect("theory")
        name = self.name("theory name").value
        level = "low"
        if self.accept(":"):
            lv = self.tok
            if lv.value not in ("high", "low"):
                raise ParseError("expected 'high' or 'low'", lv)
            self.i += 1
            level = lv.value
        self.expect("{")
        sorts, fluents, actions, ssas = [], [], [], []
        init = None
        while not self.at("}"):
            t = self.tok
            if self.at("sort"):
                sorts.append(self.sort_decl())
            elif self.at("fluent"):
                fluents.append(self.fluent_decl())
            elif self.at("action"):
                actions.append(self.action_decl())
            elif self.at("ssa"):
                ssas.append(self.ssa_decl())
            elif self.at("init"):
                if init is not None:
                    raise ParseError("duplicate init block", t)
                init = self.init_decl()
            else:
                found = "end of input" if t.kind == "eof" else repr(t.value)
                raise ParseError(
                    f"expected a declaration or '}}', found {found}", t, "unclosed '{'?" if t.kind == "eof" else None
                )
        self.expect("}")
        return A.TheoryDecl(name, level, tuple(sorts), tuple(fluents), tuple(actions), tuple(ssas), init, self.span_from(start))

    def sort_decl(self) -> A.SortDecl:
        start = self.expect("sort")
        name = self.name("sort name").value
        self.expect("{")
        consts = [self.name("constant").value]
        while self.accept(","):
            consts.append(self.name("constant").value)
        self.expect("}")
        self.accept(";")
        return A.SortDecl(name, tuple(consts), self.span_from(start))

    def params(self, sorts_required: bool = True) -> tuple:
        out = []
        if not self.accept("("):
            return ()
        if self.accept(")"):
            return ()
        while True:
            t = self.name("parameter")
            sort = None
            if sorts_required or self.at(":"):
                self.expect(":")
                sort = self.sort_name()
            out.append(A.VarDecl(t.value, sort, t.span))
            if not self.accept(","):
                break
        self.expect(")")
        return tuple(out)

    def sort_name(self) -> str:
        if self.at("reactions"):
            self.i += 1
            self.expect("(")
            n = self.name("action name").value
            self.expect(")")
            return f"reactions({n})"
        return self.name("sort name").value

    def fluent_decl(self) -> A.FluentDecl:
        start = self.expect("fluent")
        name = self.name("fluent name").value
        ps = self.params()
        self.expect(";")
        return A.FluentDecl(name, ps, self.span_from(start))

    def action_decl(self) -> A.ActionDecl:
        start = self.expect("action")
        name = self.name("action name").value
        ps = self.params()
        self.expect("reactions")
        rvar = "e"
        if self.is_name() and self.peek().value == ":":
            rvar = self.name().value
            self.expect(":")
        tokens: tuple = ()
        base: tuple = ()
        guard = None
        if self.accept("subset"):
            self.expect("of")
            self.expect("{")
            items = [self.call()]
            while self.accept(","):
                items.append(self.call())
            self.expect("}")
            base = tuple(items)
            if self.accept("where"):
                guard = self.formula()
        else:
            self.expect("{")
            toks = [self.name("reaction").value]
            while self.accept(","):
                toks.append(self.name("reaction").value)
            self.expect("}")
            tokens = tuple(toks)
        self.expect("{")
        self.expect("poss_ag")
        self.expect(":")
        pa = self.formula()
        self.expect(";")
        self.expect("poss")
        self.expect(":")
        pf = self.formula()
        self.expect(";")
        self.expect("}")
        return A.ActionDecl(name, ps, rvar, tokens, base, guard, pa, pf, self.span_from(start))

    def ssa_decl(self) -> A.SsaDecl:
        start = self.expect("ssa")
        name = self.name("fluent name").value
        ps = []
        if self.accept("("):
            if not self.at(")"):
                t = self.name("variable")
                ps.append(A.PName(t.value, t.span))
                while self.accept(","):
                    t = self.name("variable")
                    ps.append(A.PName(t.value, t.span))
            self.expect(")")
        self.expect(":")
        f = self.formula()
        self.expect(";")
        return A.SsaDecl(name, tuple(ps), f, self.span_from(start))

    def init_decl(self) -> A.InitDecl:
        start = self.expect("init")
        self.expect("{")
        closed, open_ = [], []
        while not self.at("}"):
            if self.accept("closed"):
                self.expect(":")
                if not self.at(";"):
                    closed.append(self.literal())
                    while self.accept(","):
                        closed.append(self.literal())
                self.expect(";")
            elif self.accept("open"):
                self.expect(":")
                if not self.at(";"):
                    open_.append(self.call())
                    while self.accept(","):
                        open_.append(self.call())
                self.expect(";")
            else:
                raise ParseError("expected 'closed:' or 'open:'", self.tok)
        self.expect("}")
        self.accept(";")
        return A.InitDecl(tuple(closed), tuple(open_), self.span_from(start))

    def literal(self):
        neg = bool(self.accept("!", "~", "not"))
        return (neg, self.call())

    def mapping(self) -> A.MappingDecl:
        start = self.expect("mapping")
        name = self.name("mapping name").value
        self.expect("from")
        hl = self.name("theory name").value
        self.expect("to")
        ll = self.name("theory name").value
        self.expect("{")
        actions, fluents = [], []
        while not self.at("}"):
            t = self.tok
            if self.at("action"):
                actions.append(self.action_map())
            elif self.at("fluent"):
                fluents.append(self.fluent_map())
            else:
                found = "end of input" if t.kind == "eof" else repr(t.value)
                raise ParseError(f"expected 'action', 'fluent' or '}}', found {found}", t)
        self.expect("}")
        return A.MappingDecl(name, hl, ll, tuple(actions), tuple(fluents), self.span_from(start))

    def action_map(self) -> A.ActionMapDecl:
        start = self.expect("action")
        name = self.name("action name").value
        ps = self.params(sorts_required=False)
        self.expect("{")
        self.expect("agent")
        self.expect(":")
        ag = self.program()
        self.expect(";")
        self.expect("system")
        self.expect("(")
        var = self.name("reaction variable").value
        self.expect(")")
        self.expect(":")
        sy = self.program()
        self.expect(";")
        self.expect("}")
        return A.ActionMapDecl(name, ps, ag, var, sy, self.span_from(start))

    def fluent_map(self) -> A.FluentMapDecl:
        start = self.expect("fluent")
        name = self.name("fluent name").value
        ps = self.params(sorts_required=False)
        self.expect(":")
        f = self.formula()
        self.expect(";")
        return A.FluentMapDecl(name, ps, f, self.span_from(start))

    def program_decl(self) -> A.ProgramDecl:
        start = self.expect("program")
        name = self.name("program name").value
        ps = self.params(sorts_required=False)
        mode_tok = self.tok
        if not self.accept("agent", "system"):
            raise ParseError("expected 'agent' or 'system'", mode_tok)
        self.expect("on")
        th = self.name("theory name").value
        self.expect("{")
        body = self.program()
        self.accept(";")
        self.expect("}")
        return A.ProgramDecl(name, ps, mode_tok.value, th, body, self.span_from(start))

    def query_decl(self) -> A.QueryDecl:
        start = self.expect("query")
        name = self.name("query name").value
        self.expect("on")
        th = self.name("theory name").value
        self.expect("{")
        items = []
        while not self.at("}"):
            t = self.tok
            if self.accept("goal"):
                self.expect(":")
                items.append(A.QueryItem("goal", self.formula(), self.span_from(t)))
            elif self.accept("task"):
                self.expect(":")
                items.append(A.QueryItem("task", self.program(), self.span_from(t)))
            else:
                raise ParseError("expected 'goal:' or 'task:'", t)
            self.expect(";")
        self.expect("}")
        return A.QueryDecl(name, th, tuple(items), self.span_from(start))

    # -- terms

    def term(self):
        if self.at("{"):
            return self.set_literal()
        n = self.name("term")
        return A.PName(n.value, n.span)

    def set_literal(self) -> A.PSet:
        start = self.expect("{")
        items = []
        if not self.at("}"):
            items.append(self.call())
            while self.accept(","):
                items.append(self.call())
        self.expect("}")
        return A.PSet(tuple(items), self.span_from(start))

    def call(self) -> A.PCall:
        n = self.name()
        if self.accept("("):
            args = []
            if not self.at(")"):
                args.append(self.term())
                while self.accept(","):
                    args.append(self.term())
            self.expect(")")
            return A.PCall(n.value, tuple(args), self.span_from(n), True)
        return A.PCall(n.value, (), n.span, False)

    # -- formulas

    def formula(self):
        start = self.tok
        left = self.implication()
        if self.accept("<->"):
            right = self.formula()
            return A.FIff(left, right, self.span_from(start))
        return left

    def implication(self):
        start = self.tok
        left = self.disjunction()
        if self.accept("->"):
            right = self.implication()
            return A.FImp(left, right, self.span_from(start))
        return left

    def disjunction(self):
        start = self.tok
        parts = [self.conjunction()]
        while self.accept("or"):
            parts.append(self.conjunction())
        if len(parts) == 1:
            return parts[0]
        return A.FOr(tuple(parts), self.span_from(start))

    def conjunction(self):
        start = self.tok
        parts = [self.unary()]
        while self.accept("&", "and"):
            parts.append(self.unary())
        if len(parts) == 1:
            return parts[0]
        return A.FAnd(tuple(parts), self.span_from(start))

    def quant_vars(self) -> tuple:
        out = []
        while True:
            t = self.name("variable")
            sort = None
            if self.accept(":"):
                sort = self.sort_name()
            out.append(A.VarDecl(t.value, sort, t.span))
            if not self.accept(","):
                break
        self.expect(".")
        return tuple(out)

    def unary(self):
        start = self.tok
        if self.accept("!", "~", "not"):
            return A.FNot(self.unary(), self.span_from(start))
        if self.at("exists", "forall"):
            kind = self.tok.value
            self.i += 1
            vs = self.quant_vars()
            body = self.formula()
            return A.FQuant(kind, vs, body, self.span_from(start))
        return self.primary_formula()

    def primary_formula(self):
        start = self.tok
        if self.accept("("):
            f = self.formula()
            self.expect(")")
            return f
        if self.accept("true"):
            return A.FConst(True, start.span)
        if self.accept("false"):
            return A.FConst(False, start.span)
        if self.accept("poss_ag"):
            return A.FPossAg(start.span)
        if self.accept("Poss"):
            self.expect("(")
            c = self.call()
            self.expect(")")
            return A.FPoss(c, self.span_from(start))
        if self.at("{"):
            left = self.set_literal()
        else:
            left = self.call()
        if self.at("=", "!="):
            neg = self.tok.value == "!="
            self.i += 1
            if self.at("{"):
                right = self.set_literal()
            else:
                right = self.call()
                if not right.parens:
                    right = A.PName(right.name, right.span)
            if isinstance(left, A.PCall) and not left.parens:
                left = A.PName(left.name, left.span)
            return A.FEq(left, right, neg, self.span_from(start))
        if self.accept("in"):
            if not isinstance(left, A.PCall):
                raise ParseError("left side of 'in' must be an update atom", start)
            r = self.term()
            return A.FIn(left, r, self.span_from(start))
        if isinstance(left, A.PSet):
            raise ParseError("a set literal is not a formula", start)
        return A.FAtom(left, left.span)

    # -- programs

    _PROGRAM_START_SYMS = {"(", "[", "!", "~", "{"}
    _PROGRAM_START_KWS = {"nil", "pi", "if", "while", "true", "false", "not", "exists", "forall", "Poss", "poss_ag"}

    def starts_program(self, t: Token) -> bool:
        if t.kind == "eof":
            return False
        if t.kind == "sym":
            return t.value in self._PROGRAM_START_SYMS
        return t.value not in KEYWORDS or t.value in self._PROGRAM_START_KWS

    def program(self):
        start = self.tok
        items = [self.conc_program()]
        while self.at("|"):
            self.i += 1
            items.append(self.conc_program())
        if len(items) == 1:
            return items[0]
        return A.GChoice(tuple(items), self.span_from(start))

    def conc_program(self):
        start = self.tok
        left = self.seq_program()
        if self.accept("||"):
            right = self.conc_program()
            return A.GConc(left, right, self.span_from(start))
        return left

    def seq_program(self):
        start = self.tok
        items = [self.postfix_program()]
        while self.at(";") and self.starts_program(self.peek()):
            self.i += 1
            items.append(self.postfix_program())
        if len(items) == 1:
            return items[0]
        return A.GSeq(tuple(items), self.span_from(start))

    def postfix_program(self):
        start = self.tok
        p = self.primary_program()
        while self.accept("*"):
            p = A.GStar(p, self.span_from(start))
        return p

    def _try_test(self):
        save = self.i
        start = self.tok
        try:
            f = self.formula()
        except ParseError:
            self.i = save
            return None
        if self.accept("?"):
            return A.GTest(f, self.span_from(start))
        self.i = save
        return None

    def primary_program(self):
        start = self.tok
        if self.accept("nil"):
            return A.GNil(start.span)
        if self.accept("pi"):
            vs = self.quant_vars()
            body = self.program()
            return A.GPick(vs, body, self.span_from(start))
        if self.accept("if"):
            cond = self.formula()
            self.expect("then")
            then = self.program()
            other = None
            if self.accept("else"):
                other = self.program()
            self.expect("endif")
            return A.GIf(cond, then, other, self.span_from(start))
        if self.accept("while"):
            cond = self.formula()
            self.expect("do")
            body = self.program()
            self.expect("endwhile")
            return A.GWhile(cond, body, self.span_from(start))
        if self.accept("["):
            p = self.program()
            self.expect("]")
            return p
        t = self._try_test()
        if t is not None:
            return t
        if self.accept("("):
            p = self.program()
            self.expect(")")
            return p
        if self.is_name():
            c = self.call()
            return A.GAct(c, c.span)
        found = "end of input" if start.kind == "eof" else repr(start.value)
        raise ParseError(f"expected a program, found {found}", start)


def _diag(exc: ParseError, origin: str) -> A.Diagnostic:
    return A.Diagnostic("error", exc.token.span, str(exc), exc.hint, origin)


def parse_document(doc: A.SourceDocument):
    """Parse a document; returns a declaration AST or a list of diagnostics."""
    try:
        p = Parser(doc.text)
        d = p.document()
    except ParseError as exc:
        return [_diag(exc, doc.origin)]
    except RecursionError:
        return [A.Diagnostic("error", A.Span(1, 1), "input nested too deeply", None, doc.origin)]
    if doc.kind is not None and d.kind != doc.kind:
        return [A.Diagnostic("error", d.span, f"expected a {doc.kind} document, found a {d.kind}", None, doc.origin)]
    return d


def _parse_fragment(text: str, method: str, origin: str):
    try:
        p = Parser(text)
        out = getattr(p, method)()
        if p.tok.kind != "eof":
            raise ParseError(f"unexpected {p.tok.value!r}", p.tok)
        return out
    except ParseError as exc:
        return [_diag(exc, origin)]


def parse_formula_ast(text: str, origin: str = "<formula>"):
    return _parse_fragment(text, "formula", origin)


def parse_program_ast(text: str, origin: str = "<program>"):
    return _parse_fragment(text, "program", origin)


def parse_call_ast(text: str, origin: str = "<action>"):
    return _parse_fragment(text, "call", origin)
