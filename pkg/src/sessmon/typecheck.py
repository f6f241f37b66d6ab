"""Duality, equi-recursive type equality, the typing judgment, and its negation.

The positive judgment decides whether a process communicates according to a
session type. The negated judgment is implemented independently as a failure
explainer: it reports the rule chain of one (leftmost-innermost) failing
derivation. The two agree exactly: `typecheck` is true iff `explain_failure`
returns None.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .terms import (
    BOOL,
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
    Nil,
    Not,
    Or,
    Param,
    PredCall,
    Process,
    ProcVar,
    RecProc,
    RecType,
    Recv,
    Select,
    Send,
    SessionType,
    StrLit,
    TupleLit,
    TupleType,
    TypeBranch,
    TypeVar,
    VarRef,
    free_type_vars,
    type_is_guarded,
    unfold_type,
)


@dataclass(frozen=True)
class TypingEnvs:
    """The two typing environments: process variables and value variables."""

    theta: Mapping[str, SessionType] = field(default_factory=dict)
    gamma: Mapping[str, BaseType] = field(default_factory=dict)


EMPTY_ENVS = TypingEnvs({}, {})


# ---------------------------------------------------------------------------
# Duality
# ---------------------------------------------------------------------------


def dual(s: SessionType) -> SessionType:
    """Swap selections and branchings; labels, payloads, assertions unchanged."""
    if isinstance(s, Select):
        return Branch(tuple(_dual_branch(b) for b in s.branches))
    if isinstance(s, Branch):
        return Select(tuple(_dual_branch(b) for b in s.branches))
    if isinstance(s, RecType):
        return RecType(s.var, dual(s.body))
    if isinstance(s, (TypeVar, End)):
        return s
    raise TypeError(f"unknown session type: {s!r}")


def _dual_branch(b: TypeBranch) -> TypeBranch:
    return TypeBranch(b.label, b.params, b.assertion, dual(b.cont))


# ---------------------------------------------------------------------------
# Equi-recursive type equality
# ---------------------------------------------------------------------------


def _unfold_head(s: SessionType) -> SessionType:
    while isinstance(s, RecType):
        s = unfold_type(s)
    return s


def type_equal(s1: SessionType, s2: SessionType) -> bool:
    """Equality up to unfolding of recursion.

    Coinductive pair memoization; guardedness bounds the set of reachable
    subterm closures, so the procedure terminates.
    """
    seen: set[tuple[SessionType, SessionType]] = set()

    def go(a: SessionType, b: SessionType) -> bool:
        if a == b:
            return True
        key = (a, b)
        if key in seen:
            return True
        seen.add(key)
        a = _unfold_head(a)
        b = _unfold_head(b)
        if isinstance(a, Select) and isinstance(b, Select):
            return _branches_equal(a.branches, b.branches, go)
        if isinstance(a, Branch) and isinstance(b, Branch):
            return _branches_equal(a.branches, b.branches, go)
        if isinstance(a, End) and isinstance(b, End):
            return True
        if isinstance(a, TypeVar) and isinstance(b, TypeVar):
            return a.name == b.name
        return False

    return go(s1, s2)


def _branches_equal(xs: tuple[TypeBranch, ...], ys: tuple[TypeBranch, ...], go) -> bool:
    if {b.label for b in xs} != {b.label for b in ys}:
        return False
    by_label = {b.label: b for b in ys}
    for bx in xs:
        by = by_label[bx.label]
        if bx.params != by.params or bx.assertion != by.assertion:
            return False
        if not go(bx.cont, by.cont):
            return False
    return True


# ---------------------------------------------------------------------------
# Expression typing
# ---------------------------------------------------------------------------


def expr_base_type(expr: Expr, gamma: Mapping[str, BaseType]) -> Optional[BaseType]:
    """Base type of an expression, or None when ill-typed.

    Comparison operands must share a base type; boolean connectives need
    boolean operands; type tests accept any well-typed operand; named
    predicates are assumed boolean-valued with unconstrained arguments.
    """
    from .terms import BoolType, IntType, StrType, INT, STR

    if isinstance(expr, BoolLit):
        return BOOL
    if isinstance(expr, IntLit):
        return INT
    if isinstance(expr, StrLit):
        return STR
    if isinstance(expr, VarRef):
        return gamma.get(expr.name)
    if isinstance(expr, TupleLit):
        elems = []
        for item in expr.items:
            t = expr_base_type(item, gamma)
            if t is None:
                return None
            elems.append(t)
        return TupleType(tuple(elems))
    if isinstance(expr, Compare):
        lhs = expr_base_type(expr.lhs, gamma)
        rhs = expr_base_type(expr.rhs, gamma)
        if lhs is None or rhs is None or lhs != rhs:
            return None
        return BOOL
    if isinstance(expr, (And, Or)):
        if expr_base_type(expr.lhs, gamma) != BOOL:
            return None
        if expr_base_type(expr.rhs, gamma) != BOOL:
            return None
        return BOOL
    if isinstance(expr, Not):
        return BOOL if expr_base_type(expr.operand, gamma) == BOOL else None
    if isinstance(expr, IsType):
        return BOOL if expr_base_type(expr.operand, gamma) is not None else None
    if isinstance(expr, PredCall):
        return BOOL
    raise TypeError(f"unknown expression: {expr!r}")


def is_bool_typed(expr: Expr, gamma: Mapping[str, BaseType]) -> bool:
    return expr_base_type(expr, gamma) == BOOL


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # EmptyChoice | DuplicateLabel | DuplicateParam | Unguarded | FreeTypeVar | IllTypedAssertion
    path: tuple[str, ...]
    detail: str = ""

    def __str__(self) -> str:
        where = "/".join(self.path) or "root"
        text = f"{self.kind} at {where}"
        return f"{text}: {self.detail}" if self.detail else text


def check_well_formed(s: SessionType) -> list[Violation]:
    """All invariant violations of a session type, plus closedness.

    Assertions are checked for boolean well-typedness under the payload
    variables accumulated along the path (earlier prefixes stay in scope,
    mirroring the runtime payload environment).
    """
    violations: list[Violation] = []

    free = free_type_vars(s)
    for name in sorted(free):
        violations.append(Violation("FreeTypeVar", (), name))

    def walk(t: SessionType, path: tuple[str, ...], scope: dict, unguarded: frozenset[str]) -> None:
        if isinstance(t, (Select, Branch)):
            if not t.branches:
                violations.append(Violation("EmptyChoice", path))
            seen: set[str] = set()
            for b in t.branches:
                if b.label in seen:
                    violations.append(Violation("DuplicateLabel", path, b.label))
                seen.add(b.label)
            for b in t.branches:
                bpath = path + (f"branch {b.label}",)
                names = [p.name for p in b.params]
                if len(set(names)) != len(names):
                    violations.append(Violation("DuplicateParam", bpath))
                inner = dict(scope)
                for p in b.params:
                    inner[p.name] = p.base
                if not is_bool_typed(b.assertion, inner):
                    violations.append(Violation("IllTypedAssertion", bpath))
                walk(b.cont, bpath, inner, frozenset())
            return
        if isinstance(t, RecType):
            walk(t.body, path + ("body",), scope, unguarded | {t.var})
            return
        if isinstance(t, TypeVar):
            if t.name in unguarded:
                violations.append(Violation("Unguarded", path, t.name))
            return
        if isinstance(t, End):
            return
        raise TypeError(f"unknown session type: {t!r}")

    walk(s, (), {}, frozenset())
    return violations


# ---------------------------------------------------------------------------
# The positive typing judgment
# ---------------------------------------------------------------------------


def typecheck(env: TypingEnvs, p: Process, s: SessionType) -> bool:
    """Decide the typing judgment. The type must be well-formed."""
    return _tc(dict(env.theta), dict(env.gamma), p, s)


def _tc(theta: dict, gamma: dict, p: Process, s: SessionType) -> bool:
    if isinstance(p, Nil):
        return isinstance(_unfold_head(s), End)
    if isinstance(p, Send):
        t = _unfold_head(s)
        if not isinstance(t, Select):
            return False
        b = t.branch(p.label)
        if b is None or not _args_fit(p.args, b.params, gamma):
            return False
        return _tc(theta, gamma, p.cont, b.cont)
    if isinstance(p, Recv):
        t = _unfold_head(s)
        if not isinstance(t, Branch):
            return False
        for tb in t.branches:
            pb = p.branch(tb.label)
            if pb is None or len(pb.params) != len(tb.params):
                return False
            inner = dict(gamma)
            for name, param in zip(pb.params, tb.params):
                inner[name] = param.base
            if not _tc(theta, inner, pb.cont, tb.cont):
                return False
        return True
    if isinstance(p, RecProc):
        inner = dict(theta)
        inner[p.var] = s
        return _tc(inner, gamma, p.body, s)
    if isinstance(p, ProcVar):
        bound = theta.get(p.name)
        return bound is not None and type_equal(bound, s)
    if isinstance(p, If):
        if not is_bool_typed(p.cond, gamma):
            return False
        return _tc(theta, gamma, p.then, s) and _tc(theta, gamma, p.orelse, s)
    raise TypeError(f"unknown process: {p!r}")


def _args_fit(args: tuple[Expr, ...], params: tuple[Param, ...], gamma: Mapping) -> bool:
    if len(args) != len(params):
        return False
    return all(expr_base_type(a, gamma) == p.base for a, p in zip(args, params))


# ---------------------------------------------------------------------------
# The negated typing judgment (failure explanation)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FailureReport:
    """One failing derivation: the rule where it bottoms out, the path to
    that subterm, and the full root-to-leaf rule chain."""

    rule: str
    path: tuple[str, ...]
    detail: str
    chain: tuple[str, ...]

    def __str__(self) -> str:
        where = " / ".join(self.path) or "root"
        via = " -> ".join(self.chain)
        return f"rule {self.rule} at {where} ({self.detail}) via {via}"


def explain_failure(env: TypingEnvs, p: Process, s: SessionType) -> Optional[FailureReport]:
    """None when the process typechecks; otherwise the leftmost-innermost
    failing derivation of the negated judgment."""
    return _explain(dict(env.theta), dict(env.gamma), p, s, (), ())


def _leaf(rule: str, path, detail: str, chain) -> FailureReport:
    return FailureReport(rule, path, detail, chain + (rule,))


def _explain(theta: dict, gamma: dict, p: Process, s: SessionType, path, chain) -> Optional[FailureReport]:
    if isinstance(p, Nil):
        t = _unfold_head(s)
        if isinstance(t, End):
            return None
        return _leaf("nNil", path, "terminated process, but the type is not end", chain)
    if isinstance(p, Send):
        t = _unfold_head(s)
        if not isinstance(t, Select):
            return _leaf("nSel0", path, "output process, but the type is not an internal choice", chain)
        b = t.branch(p.label)
        if b is None:
            return _leaf("nSel1", path, f"label {p.label} matches no branch of the type", chain)
        if len(p.args) != len(b.params):
            return _leaf(
                "nSel2", path,
                f"{p.label} carries {len(p.args)} value(s), the type expects {len(b.params)}", chain,
            )
        for arg, param in zip(p.args, b.params):
            if expr_base_type(arg, gamma) != param.base:
                return _leaf("nSel2", path, f"payload for {param.name} is not of type {param.base}", chain)
        return _explain(theta, gamma, p.cont, b.cont, path + ("cont",), chain + ("nSel3",))
    if isinstance(p, Recv):
        t = _unfold_head(s)
        if not isinstance(t, Branch):
            return _leaf("nBra0", path, "input process, but the type is not an external choice", chain)
        for tb in t.branches:
            pb = p.branch(tb.label)
            if pb is None:
                return _leaf("nBra1", path, f"type branch {tb.label} is missing from the process", chain)
            if len(pb.params) != len(tb.params):
                return _leaf(
                    "nBra1", path,
                    f"branch {tb.label} binds {len(pb.params)} value(s), the type carries {len(tb.params)}",
                    chain,
                )
        for tb in t.branches:
            pb = p.branch(tb.label)
            inner = dict(gamma)
            for name, param in zip(pb.params, tb.params):
                inner[name] = param.base
            report = _explain(
                theta, inner, pb.cont, tb.cont,
                path + (f"branch {tb.label}",), chain + ("nBra2",),
            )
            if report is not None:
                return report
        return None
    if isinstance(p, RecProc):
        inner = dict(theta)
        inner[p.var] = s
        return _explain(inner, gamma, p.body, s, path + ("body",), chain + ("nRec",))
    if isinstance(p, ProcVar):
        bound = theta.get(p.name)
        if bound is not None and type_equal(bound, s):
            return None
        return _leaf("nPVar", path, f"{p.name} is not bound to this type", chain)
    if isinstance(p, If):
        if not is_bool_typed(p.cond, gamma):
            return _leaf("nIf1", path, "condition is not boolean-typed", chain)
        then_report = _explain(theta, gamma, p.then, s, path + ("then",), ())
        else_report = _explain(theta, gamma, p.orelse, s, path + ("else",), ())
        if then_report is None and else_report is None:
            return None
        if then_report is not None and else_report is None:
            return FailureReport(
                then_report.rule, then_report.path, then_report.detail,
                chain + ("nIf2",) + then_report.chain,
            )
        if then_report is None:
            return FailureReport(
                else_report.rule, else_report.path, else_report.detail,
                chain + ("nIf3",) + else_report.chain,
            )
        return FailureReport(
            then_report.rule, then_report.path, then_report.detail,
            chain + ("nIf4",) + then_report.chain,
        )
    raise TypeError(f"unknown process: {p!r}")
