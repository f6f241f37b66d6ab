"""Text syntax for session types, processes, and monitors.

The concrete grammar (``#`` comments, insignificant whitespace):

    S    ::= "+{" sel ("," sel)* "}" | "&{" bra ("," bra)* "}"
           | "!" msg ("." S)? | "?" msg ("." S)? | "rec" ID "." S | ID | "end"
    sel  ::= "!" msg ("." S)?
    bra  ::= "?" msg ("." S)?
    msg  ::= Label "(" (param ("," param)*)? ")" ("[" assertion "]")?
    param ::= (ID ":")? BaseType
    B    ::= "Int" | "Str" | "Bool" | "(" B ("," B)* ")"

    P    ::= "send" Label "(" exprs? ")" ("." P)?
           | "recv" "{" pbra ("," pbra)* "}"
           | "rec" ID "." P | ID | "if" A "then" P "else" P | "0"
    pbra ::= Label "(" ids? ")" ("." P)?

Monitors add directional prefixes: ``recvP``/``sendP`` face the monitored
process, ``recvE``/``sendE`` face the environment, and the four verdicts
are ``no_P``, ``no_E``, ``no_P_assert``, ``no_E_assert``.

Rendering is the inverse: ``parse(render(x))`` is structurally ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .terms import (
    BOOL,
    INT,
    INT64_MAX,
    INT64_MIN,
    STR,
    TT,
    And,
    BaseType,
    BoolLit,
    Branch,
    Compare,
    End,
    Expr,
    If,
    IntLit,
    IsType,
    Monitor,
    MonIf,
    MonNil,
    MonVar,
    Nil,
    Not,
    Or,
    Param,
    PredCall,
    Process,
    ProcVar,
    RecMon,
    RecProc,
    RecType,
    Recv,
    RecvBranch,
    RecvExternal,
    RecvInternal,
    Select,
    Send,
    SendExternal,
    SendInternal,
    SessionType,
    StrLit,
    TupleLit,
    TupleType,
    TypeBranch,
    TypeVar,
    VarRef,
    Verdict,
    VerdictKind,
    quote_string,
)

KEYWORDS = {
    "rec", "end", "send", "recv", "if", "then", "else", "tt", "ff",
    "recvP", "sendP", "recvE", "sendE", "no_P", "no_E", "no_P_assert", "no_E_assert",
}

_PUNCT = (
    "==", "!=", ">=", "<=", "&&", "||",
    "+{", "&{",
    "{", "}", "(", ")", "[", "]", "!", "?", ".", ",", ":", ">", "<", "-",
)


class SourceError(Exception):
    """A syntax or well-formedness error at a source position."""

    def __init__(self, line: int, column: int, message: str, snippet: str = ""):
        self.line = line
        self.column = column
        self.message = message
        self.snippet = snippet
        super().__init__(f"{line}:{column}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | string | punct | eof
    text: str
    line: int
    column: int


def _tokenize(src: str) -> list[Token]:
    lines = src.split("\n")
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(src)

    def err(msg: str) -> SourceError:
        snippet = lines[line - 1] if line - 1 < len(lines) else ""
        return SourceError(line, col, msg, snippet)

    while i < n:
        ch = src[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if ch.isalpha():
            start = i
            while i < n and (src[i].isalnum() or src[i] == "_"):
                i += 1
            text = src[start:i]
            tokens.append(Token("ident", text, line, col))
            col += i - start
            continue
        if ch.isdigit():
            start = i
            while i < n and src[i].isdigit():
                i += 1
            tokens.append(Token("int", src[start:i], line, col))
            col += i - start
            continue
        if ch == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            out: list[str] = []
            while True:
                if i >= n or src[i] == "\n":
                    raise SourceError(start_line, start_col, "unterminated string",
                                      lines[start_line - 1] if start_line - 1 < len(lines) else "")
                c = src[i]
                if c == '"':
                    i += 1
                    col += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        raise err("unterminated escape")
                    esc = src[i + 1]
                    mapped = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}.get(esc)
                    if mapped is None:
                        raise err(f"unknown escape: \\{esc}")
                    out.append(mapped)
                    i += 2
                    col += 2
                    continue
                out.append(c)
                i += 1
                col += 1
            tokens.append(Token("string", "".join(out), start_line, start_col))
            continue
        for p in _PUNCT:
            if src.startswith(p, i):
                tokens.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise err(f"unexpected character: {ch!r}")
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src_lines = src.split("\n")
        self.tokens = _tokenize(src)
        self.pos = 0

    # -- token helpers ------------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.text == text and tok.kind in ("punct", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def error(self, message: str, tok: Optional[Token] = None) -> SourceError:
        tok = tok or self.peek()
        snippet = self.src_lines[tok.line - 1] if tok.line - 1 < len(self.src_lines) else ""
        return SourceError(tok.line, tok.column, message, snippet)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}, found {self.peek().text!r}")
        return self.advance()

    def ident(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error(f"expected {what}, found {tok.text!r}")
        if tok.text in KEYWORDS:
            raise self.error(f"reserved word {tok.text!r} cannot be used as {what}")
        return self.advance()

    def expect_eof(self) -> None:
        tok = self.peek()
        if tok.kind != "eof":
            raise self.error(f"unexpected trailing input: {tok.text!r}")

    # -- shared pieces ------------------------------------------------------

    def base_type(self) -> BaseType:
        tok = self.peek()
        if tok.kind == "ident":
            if tok.text == "Int":
                self.advance()
                return INT
            if tok.text == "Str":
                self.advance()
                return STR
            if tok.text == "Bool":
                self.advance()
                return BOOL
            raise self.error(f"expected a base type, found {tok.text!r}")
        if self.accept("("):
            elems = [self.base_type()]
            while self.accept(","):
                elems.append(self.base_type())
            self.expect(")")
            return TupleType(tuple(elems))
        raise self.error(f"expected a base type, found {tok.text!r}")

    def int_literal(self, negative: bool) -> int:
        tok = self.advance()
        value = -int(tok.text) if negative else int(tok.text)
        if not INT64_MIN <= value <= INT64_MAX:
            raise self.error("integer literal out of 64-bit range", tok)
        return value

    def value_expr(self, scope: Optional[frozenset[str]]) -> Expr:
        """A literal, a variable, or a tuple of these."""
        tok = self.peek()
        if tok.kind == "int":
            return IntLit(self.int_literal(False))
        if self.at("-"):
            self.advance()
            if self.peek().kind != "int":
                raise self.error("expected an integer after '-'")
            return IntLit(self.int_literal(True))
        if tok.kind == "string":
            self.advance()
            return StrLit(tok.text)
        if self.at("tt"):
            self.advance()
            return BoolLit(True)
        if self.at("ff"):
            self.advance()
            return BoolLit(False)
        if self.accept("("):
            items = [self.value_expr(scope)]
            while self.accept(","):
                items.append(self.value_expr(scope))
            self.expect(")")
            if len(items) == 1:
                return items[0]
            return TupleLit(tuple(items))
        if tok.kind == "ident":
            name_tok = self.ident("a variable")
            if scope is not None and name_tok.text not in scope:
                raise self.error(f"unbound variable: {name_tok.text}", name_tok)
            return VarRef(name_tok.text)
        raise self.error(f"expected a value, found {tok.text!r}")

    # Assertions. `scope` is None when variable scoping is not enforced
    # (type assertions may read variables bound by earlier prefixes).

    def assertion(self, scope: Optional[frozenset[str]]) -> Expr:
        expr = self.assertion_and(scope)
        while self.accept("||"):
            expr = Or(expr, self.assertion_and(scope))
        return expr

    def assertion_and(self, scope: Optional[frozenset[str]]) -> Expr:
        expr = self.assertion_not(scope)
        while self.accept("&&"):
            expr = And(expr, self.assertion_not(scope))
        return expr

    def assertion_not(self, scope: Optional[frozenset[str]]) -> Expr:
        if self.accept("!"):
            return Not(self.assertion_not(scope))
        return self.assertion_cmp(scope)

    def assertion_cmp(self, scope: Optional[frozenset[str]]) -> Expr:
        lhs = self.assertion_atom(scope)
        for op in ("==", "!=", ">=", "<=", ">", "<"):
            if self.at(op):
                self.advance()
                rhs = self.assertion_atom(scope)
                return Compare(op, lhs, rhs)
        return lhs

    def assertion_atom(self, scope: Optional[frozenset[str]]) -> Expr:
        tok = self.peek()
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            nxt = self.tokens[self.pos + 1]
            if nxt.kind == "punct" and nxt.text == "(":
                name = self.advance().text
                return self.finish_call(name, scope)
        if self.accept("("):
            inner = [self.assertion(scope)]
            while self.accept(","):
                inner.append(self.assertion(scope))
            self.expect(")")
            if len(inner) == 1:
                return inner[0]
            return TupleLit(tuple(inner))
        return self.value_expr(scope)

    def finish_call(self, name: str, scope: Optional[frozenset[str]]) -> Expr:
        if name == "is_Int" or name == "is_Str" or name == "is_Bool":
            base = {"is_Int": INT, "is_Str": STR, "is_Bool": BOOL}[name]
            self.expect("(")
            operand = self.assertion(scope)
            self.expect(")")
            return IsType(base, operand)
        if name == "is_":
            self.expect("(")
            base = self.base_type()
            self.expect(")")
            self.expect("(")
            operand = self.assertion(scope)
            self.expect(")")
            return IsType(base, operand)
        self.expect("(")
        args: list[Expr] = []
        if not self.at(")"):
            # predicate arguments are unconstrained: scoping not enforced
            args.append(self.assertion(None))
            while self.accept(","):
                args.append(self.assertion(None))
        self.expect(")")
        return PredCall(name, tuple(args))

    # -- session types ------------------------------------------------------

    def session_type(self, bound: frozenset[str], unguarded: frozenset[str]) -> SessionType:
        tok = self.peek()
        if self.accept("+{"):
            branches = [self.type_branch("!", bound)]
            while self.accept(","):
                branches.append(self.type_branch("!", bound))
            self.expect("}")
            self.check_distinct_labels(branches, tok)
            return Select(tuple(branches))
        if self.accept("&{"):
            branches = [self.type_branch("?", bound)]
            while self.accept(","):
                branches.append(self.type_branch("?", bound))
            self.expect("}")
            self.check_distinct_labels(branches, tok)
            return Branch(tuple(branches))
        if self.at("!"):
            return Select((self.type_branch("!", bound),))
        if self.at("?"):
            return Branch((self.type_branch("?", bound),))
        if self.accept("rec"):
            var = self.ident("a recursion variable").text
            self.expect(".")
            body = self.session_type(bound | {var}, unguarded | {var})
            return RecType(var, body)
        if self.accept("end"):
            return End()
        if tok.kind == "ident":
            name_tok = self.ident("a type variable")
            if name_tok.text not in bound:
                raise self.error(f"free type variable: {name_tok.text}", name_tok)
            if name_tok.text in unguarded:
                raise self.error(f"unguarded recursion on {name_tok.text}", name_tok)
            return TypeVar(name_tok.text)
        raise self.error(f"expected a session type, found {tok.text!r}")

    def type_branch(self, marker: str, bound: frozenset[str]) -> TypeBranch:
        """Parse one `!msg (. S)?` or `?msg (. S)?`; the prefix guards the body."""
        self.expect(marker)
        label_tok = self.ident("a message label")
        self.expect("(")
        raw_params: list[tuple[Optional[str], BaseType]] = []
        if not self.at(")"):
            raw_params.append(self.param())
            while self.accept(","):
                raw_params.append(self.param())
        self.expect(")")
        assertion: Expr = TT
        if self.accept("["):
            assertion = self.assertion(None)
            self.expect("]")
        params = self.resolve_params(raw_params, label_tok)
        cont: SessionType = End()
        if self.accept("."):
            cont = self.session_type(bound, frozenset())
        return TypeBranch(label_tok.text, tuple(params), assertion, cont)

    def resolve_params(self, raw_params, label_tok) -> list[Param]:
        explicit = {name for name, _ in raw_params if name is not None}
        params: list[Param] = []
        taken = set(explicit)
        for idx, (name, base) in enumerate(raw_params, start=1):
            if name is None:
                name = f"arg{idx}"
                while name in taken:
                    name += "x"
                taken.add(name)
            params.append(Param(name, base))
        if len({p.name for p in params}) != len(params):
            raise self.error(f"duplicate payload variable in {label_tok.text}", label_tok)
        return params

    def param(self) -> tuple[Optional[str], BaseType]:
        tok = self.peek()
        nxt = self.tokens[self.pos + 1]
        if tok.kind == "ident" and nxt.kind == "punct" and nxt.text == ":":
            name = self.ident("a payload variable").text
            self.expect(":")
            return (name, self.base_type())
        return (None, self.base_type())

    def check_distinct_labels(self, branches: list[TypeBranch], where: Token) -> None:
        seen: set[str] = set()
        for b in branches:
            if b.label in seen:
                raise self.error(f"duplicate label: {b.label}", where)
            seen.add(b.label)

    # -- processes ----------------------------------------------------------

    def process(
        self,
        scope: frozenset[str],
        bound: frozenset[str],
        unguarded: frozenset[str],
    ) -> Process:
        tok = self.peek()
        if self.accept("send"):
            label = self.ident("a message label").text
            self.expect("(")
            args: list[Expr] = []
            if not self.at(")"):
                args.append(self.value_expr(scope))
                while self.accept(","):
                    args.append(self.value_expr(scope))
            self.expect(")")
            cont: Process = Nil()
            if self.accept("."):
                cont = self.process(scope, bound, frozenset())
            return Send(label, tuple(args), cont)
        if self.accept("recv"):
            self.expect("{")
            branches = [self.recv_branch(scope, bound)]
            while self.accept(","):
                branches.append(self.recv_branch(scope, bound))
            self.expect("}")
            seen: set[str] = set()
            for b in branches:
                if b.label in seen:
                    raise self.error(f"duplicate label: {b.label}", tok)
                seen.add(b.label)
            return Recv(tuple(branches))
        if self.accept("rec"):
            var = self.ident("a process variable").text
            self.expect(".")
            return RecProc(var, self.process(scope, bound | {var}, unguarded | {var}))
        if self.accept("if"):
            cond = self.assertion(scope)
            self.expect("then")
            then = self.process(scope, bound, unguarded)
            self.expect("else")
            orelse = self.process(scope, bound, unguarded)
            return If(cond, then, orelse)
        if tok.kind == "int" and tok.text == "0":
            self.advance()
            return Nil()
        if tok.kind == "ident":
            name_tok = self.ident("a process variable")
            if name_tok.text not in bound:
                raise self.error(f"free process variable: {name_tok.text}", name_tok)
            if name_tok.text in unguarded:
                raise self.error(f"unguarded recursion on {name_tok.text}", name_tok)
            return ProcVar(name_tok.text)
        raise self.error(f"expected a process, found {tok.text!r}")

    def recv_branch(self, scope: frozenset[str], bound: frozenset[str]) -> RecvBranch:
        label_tok = self.ident("a message label")
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.ident("a parameter").text)
            while self.accept(","):
                params.append(self.ident("a parameter").text)
        self.expect(")")
        if len(set(params)) != len(params):
            raise self.error(f"duplicate parameter in {label_tok.text}", label_tok)
        cont: Process = Nil()
        if self.accept("."):
            cont = self.process(scope | set(params), bound, frozenset())
        return RecvBranch(label_tok.text, tuple(params), cont)

    # -- monitors ------------------------------------------------------------

    def monitor(self, bound: frozenset[str], unguarded: frozenset[str]) -> Monitor:
        tok = self.peek()
        if self.at("recvP") or self.at("recvE"):
            internal = self.advance().text == "recvP"
            self.expect("{")
            branches = [self.mon_recv_branch(bound)]
            while self.accept(","):
                branches.append(self.mon_recv_branch(bound))
            self.expect("}")
            seen: set[str] = set()
            for b in branches:
                if b.label in seen:
                    raise self.error(f"duplicate label: {b.label}", tok)
                seen.add(b.label)
            return RecvInternal(tuple(branches)) if internal else RecvExternal(tuple(branches))
        if self.at("sendP") or self.at("sendE"):
            internal = self.advance().text == "sendP"
            label = self.ident("a message label").text
            self.expect("(")
            args: list[Expr] = []
            if not self.at(")"):
                args.append(self.value_expr(None))
                while self.accept(","):
                    args.append(self.value_expr(None))
            self.expect(")")
            cont: Monitor = MonNil()
            if self.accept("."):
                cont = self.monitor(bound, frozenset())
            return SendInternal(label, tuple(args), cont) if internal else SendExternal(label, tuple(args), cont)
        if self.accept("rec"):
            var = self.ident("a recursion variable").text
            self.expect(".")
            return RecMon(var, self.monitor(bound | {var}, unguarded | {var}))
        if self.accept("if"):
            cond = self.assertion(None)
            self.expect("then")
            then = self.monitor(bound, unguarded)
            self.expect("else")
            orelse = self.monitor(bound, unguarded)
            return MonIf(cond, then, orelse)
        for kw, kind in (
            ("no_P", VerdictKind.NO_P_LABEL),
            ("no_E", VerdictKind.NO_E_LABEL),
            ("no_P_assert", VerdictKind.NO_P_ASSERT),
            ("no_E_assert", VerdictKind.NO_E_ASSERT),
        ):
            if self.accept(kw):
                return Verdict(kind)
        if tok.kind == "int" and tok.text == "0":
            self.advance()
            return MonNil()
        if tok.kind == "ident":
            name_tok = self.ident("a recursion variable")
            if name_tok.text not in bound:
                raise self.error(f"free recursion variable: {name_tok.text}", name_tok)
            if name_tok.text in unguarded:
                raise self.error(f"unguarded recursion on {name_tok.text}", name_tok)
            return MonVar(name_tok.text)
        raise self.error(f"expected a monitor, found {tok.text!r}")

    def mon_recv_branch(self, bound: frozenset[str]) -> RecvBranch:
        label_tok = self.ident("a message label")
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.ident("a parameter").text)
            while self.accept(","):
                params.append(self.ident("a parameter").text)
        self.expect(")")
        if len(set(params)) != len(params):
            raise self.error(f"duplicate parameter in {label_tok.text}", label_tok)
        cont: Monitor = MonNil()
        if self.accept("."):
            cont = self.monitor(bound, frozenset())
        return RecvBranch(label_tok.text, tuple(params), cont)


def parse_type(src: str) -> SessionType:
    """Parse a closed, well-formed session type; raise SourceError otherwise."""
    p = _Parser(src)
    result = p.session_type(frozenset(), frozenset())
    p.expect_eof()
    return result


def parse_process(src: str) -> Process:
    """Parse a closed process; raise SourceError otherwise."""
    p = _Parser(src)
    result = p.process(frozenset(), frozenset(), frozenset())
    p.expect_eof()
    return result


def parse_monitor(src: str) -> Monitor:
    """Parse a monitor term (used for hand-written monitor files)."""
    p = _Parser(src)
    result = p.monitor(frozenset(), frozenset())
    p.expect_eof()
    return result


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3
_PREC_CMP = 4
_PREC_ATOM = 5


def render_base_type(base: BaseType) -> str:
    return str(base)


def render_expr(expr: Expr, parent_prec: int = 0) -> str:
    if isinstance(expr, BoolLit):
        return "tt" if expr.value else "ff"
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, StrLit):
        return quote_string(expr.value)
    if isinstance(expr, VarRef):
        return expr.name
    if isinstance(expr, TupleLit):
        return "(" + ", ".join(render_expr(e) for e in expr.items) + ")"
    if isinstance(expr, Compare):
        text = f"{render_expr(expr.lhs, _PREC_ATOM)} {expr.op} {render_expr(expr.rhs, _PREC_ATOM)}"
        return f"({text})" if parent_prec > _PREC_CMP else text
    if isinstance(expr, And):
        text = f"{render_expr(expr.lhs, _PREC_AND)} && {render_expr(expr.rhs, _PREC_AND + 1)}"
        return f"({text})" if parent_prec > _PREC_AND else text
    if isinstance(expr, Or):
        text = f"{render_expr(expr.lhs, _PREC_OR)} || {render_expr(expr.rhs, _PREC_OR + 1)}"
        return f"({text})" if parent_prec > _PREC_OR else text
    if isinstance(expr, Not):
        return f"!{render_expr(expr.operand, _PREC_NOT)}"
    if isinstance(expr, IsType):
        base = expr.base
        if isinstance(base, TupleType):
            return f"is_({render_base_type(base)})({render_expr(expr.operand)})"
        return f"is_{base}({render_expr(expr.operand)})"
    if isinstance(expr, PredCall):
        return f"{expr.name}({', '.join(render_expr(a) for a in expr.args)})"
    raise TypeError(f"unknown expression: {expr!r}")


def _render_type_msg(b: TypeBranch) -> str:
    params = ", ".join(f"{p.name}:{render_base_type(p.base)}" for p in b.params)
    text = f"{b.label}({params})"
    if b.assertion != TT:
        text += f"[{render_expr(b.assertion)}]"
    return text


def render_type(s: SessionType) -> str:
    if isinstance(s, Select):
        if len(s.branches) == 1:
            return "!" + _render_type_branch(s.branches[0])
        return "+{" + ", ".join("!" + _render_type_branch(b) for b in s.branches) + "}"
    if isinstance(s, Branch):
        if len(s.branches) == 1:
            return "?" + _render_type_branch(s.branches[0])
        return "&{" + ", ".join("?" + _render_type_branch(b) for b in s.branches) + "}"
    if isinstance(s, RecType):
        return f"rec {s.var}. {render_type(s.body)}"
    if isinstance(s, TypeVar):
        return s.name
    if isinstance(s, End):
        return "end"
    raise TypeError(f"unknown session type: {s!r}")


def _render_type_branch(b: TypeBranch) -> str:
    text = _render_type_msg(b)
    if not isinstance(b.cont, End):
        text += f". {render_type(b.cont)}"
    return text


def render_process(p: Process) -> str:
    if isinstance(p, Send):
        text = f"send {p.label}({', '.join(render_expr(a) for a in p.args)})"
        if not isinstance(p.cont, Nil):
            text += f". {render_process(p.cont)}"
        return text
    if isinstance(p, Recv):
        return "recv { " + ", ".join(_render_recv_branch(b, render_process, Nil) for b in p.branches) + " }"
    if isinstance(p, RecProc):
        return f"rec {p.var}. {render_process(p.body)}"
    if isinstance(p, ProcVar):
        return p.name
    if isinstance(p, If):
        return f"if {render_expr(p.cond)} then {render_process(p.then)} else {render_process(p.orelse)}"
    if isinstance(p, Nil):
        return "0"
    raise TypeError(f"unknown process: {p!r}")


def _render_recv_branch(b: RecvBranch, render_cont, nil_cls) -> str:
    text = f"{b.label}({', '.join(b.params)})"
    if not isinstance(b.cont, nil_cls):
        text += f". {render_cont(b.cont)}"
    return text


def render_monitor(m: Monitor) -> str:
    if isinstance(m, RecvInternal):
        return "recvP { " + ", ".join(_render_recv_branch(b, render_monitor, MonNil) for b in m.branches) + " }"
    if isinstance(m, RecvExternal):
        return "recvE { " + ", ".join(_render_recv_branch(b, render_monitor, MonNil) for b in m.branches) + " }"
    if isinstance(m, (SendInternal, SendExternal)):
        keyword = "sendP" if isinstance(m, SendInternal) else "sendE"
        text = f"{keyword} {m.label}({', '.join(render_expr(a) for a in m.args)})"
        if not isinstance(m.cont, MonNil):
            text += f". {render_monitor(m.cont)}"
        return text
    if isinstance(m, RecMon):
        return f"rec {m.var}. {render_monitor(m.body)}"
    if isinstance(m, MonVar):
        return m.name
    if isinstance(m, MonIf):
        return f"if {render_expr(m.cond)} then {render_monitor(m.then)} else {render_monitor(m.orelse)}"
    if isinstance(m, MonNil):
        return "0"
    if isinstance(m, Verdict):
        return m.kind.value
    raise TypeError(f"unknown monitor: {m!r}")
