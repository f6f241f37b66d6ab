"""Abstract syntax for session types, processes, monitors, and values.

Everything here is an immutable (frozen-dataclass) tree: safe to hash,
compare structurally, share between threads, and use as dict keys.
Constructors are permissive so that malformed terms can be built and then
reported by the well-formedness checkers; the parser enforces invariants
at the source level.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping, Optional, Union

IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def is_ident(text: str) -> bool:
    return bool(IDENT_RE.match(text))


def fresh_name(base: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    name = base
    while name in taken:
        name += "x"
    return name


# ---------------------------------------------------------------------------
# Base types and values
# ---------------------------------------------------------------------------


class BaseType:
    __slots__ = ()


@dataclass(frozen=True)
class IntType(BaseType):
    def __str__(self) -> str:
        return "Int"


@dataclass(frozen=True)
class StrType(BaseType):
    def __str__(self) -> str:
        return "Str"


@dataclass(frozen=True)
class BoolType(BaseType):
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class TupleType(BaseType):
    elements: tuple[BaseType, ...]

    def __post_init__(self) -> None:
        if len(self.elements) < 1:
            raise ValueError("tuple base type needs at least one element")

    def __str__(self) -> str:
        return "(" + ",".join(str(e) for e in self.elements) + ")"


INT = IntType()
STR = StrType()
BOOL = BoolType()


class Value:
    __slots__ = ()


@dataclass(frozen=True)
class IntV(Value):
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class StrV(Value):
    value: str

    def __str__(self) -> str:
        return quote_string(self.value)


@dataclass(frozen=True)
class BoolV(Value):
    value: bool

    def __str__(self) -> str:
        return "tt" if self.value else "ff"


@dataclass(frozen=True)
class TupleV(Value):
    items: tuple[Value, ...]

    def __str__(self) -> str:
        return "(" + ",".join(str(v) for v in self.items) + ")"


def has_type(value: Value, base: BaseType) -> bool:
    """Structural membership test for values against base types (isB)."""
    if isinstance(base, IntType):
        return isinstance(value, IntV)
    if isinstance(base, StrType):
        return isinstance(value, StrV)
    if isinstance(base, BoolType):
        return isinstance(value, BoolV)
    if isinstance(base, TupleType):
        return (
            isinstance(value, TupleV)
            and len(value.items) == len(base.elements)
            and all(has_type(v, b) for v, b in zip(value.items, base.elements))
        )
    raise TypeError(f"unknown base type: {base!r}")


_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\t": "\\t"}


def quote_string(text: str) -> str:
    out = ['"']
    for ch in text:
        out.append(_ESCAPES.get(ch, ch))
    out.append('"')
    return "".join(out)


# ---------------------------------------------------------------------------
# Expressions (assertions and message arguments)
# ---------------------------------------------------------------------------


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class StrLit(Expr):
    value: str


@dataclass(frozen=True)
class VarRef(Expr):
    name: str


@dataclass(frozen=True)
class TupleLit(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class Compare(Expr):
    op: str  # one of == != >= <= > <
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class And(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Or(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


@dataclass(frozen=True)
class IsType(Expr):
    base: BaseType
    operand: Expr


@dataclass(frozen=True)
class PredCall(Expr):
    name: str
    args: tuple[Expr, ...]


TT = BoolLit(True)
FF = BoolLit(False)

COMPARE_OPS = ("==", "!=", ">=", "<=", ">", "<")

PredicateFn = Callable[[list[Value]], bool]


class EvalError(Exception):
    """An expression failed to evaluate to a value.

    Ill-typed expressions never yield a truth value; they raise instead.
    """


def expr_free_vars(expr: Expr) -> frozenset[str]:
    if isinstance(expr, VarRef):
        return frozenset((expr.name,))
    if isinstance(expr, (BoolLit, IntLit, StrLit)):
        return frozenset()
    if isinstance(expr, TupleLit):
        return frozenset().union(*(expr_free_vars(e) for e in expr.items)) if expr.items else frozenset()
    if isinstance(expr, Compare):
        return expr_free_vars(expr.lhs) | expr_free_vars(expr.rhs)
    if isinstance(expr, (And, Or)):
        return expr_free_vars(expr.lhs) | expr_free_vars(expr.rhs)
    if isinstance(expr, Not):
        return expr_free_vars(expr.operand)
    if isinstance(expr, IsType):
        return expr_free_vars(expr.operand)
    if isinstance(expr, PredCall):
        out: frozenset[str] = frozenset()
        for a in expr.args:
            out |= expr_free_vars(a)
        return out
    raise TypeError(f"unknown expression: {expr!r}")


def subst_expr(expr: Expr, name: str, value: Value) -> Expr:
    """Replace free occurrences of a variable with a literal value."""
    if isinstance(expr, VarRef):
        return value_to_expr(value) if expr.name == name else expr
    if isinstance(expr, (BoolLit, IntLit, StrLit)):
        return expr
    if isinstance(expr, TupleLit):
        return TupleLit(tuple(subst_expr(e, name, value) for e in expr.items))
    if isinstance(expr, Compare):
        return Compare(expr.op, subst_expr(expr.lhs, name, value), subst_expr(expr.rhs, name, value))
    if isinstance(expr, And):
        return And(subst_expr(expr.lhs, name, value), subst_expr(expr.rhs, name, value))
    if isinstance(expr, Or):
        return Or(subst_expr(expr.lhs, name, value), subst_expr(expr.rhs, name, value))
    if isinstance(expr, Not):
        return Not(subst_expr(expr.operand, name, value))
    if isinstance(expr, IsType):
        return IsType(expr.base, subst_expr(expr.operand, name, value))
    if isinstance(expr, PredCall):
        return PredCall(expr.name, tuple(subst_expr(a, name, value) for a in expr.args))
    raise TypeError(f"unknown expression: {expr!r}")


def value_to_expr(value: Value) -> Expr:
    if isinstance(value, IntV):
        return IntLit(value.value)
    if isinstance(value, StrV):
        return StrLit(value.value)
    if isinstance(value, BoolV):
        return BoolLit(value.value)
    if isinstance(value, TupleV):
        return TupleLit(tuple(value_to_expr(v) for v in value.items))
    raise TypeError(f"unknown value: {value!r}")


def _value_order(a: Value, b: Value) -> int:
    # requires a and b of the same shape (checked by caller)
    if isinstance(a, IntV):
        return (a.value > b.value) - (a.value < b.value)
    if isinstance(a, StrV):
        return (a.value > b.value) - (a.value < b.value)
    if isinstance(a, BoolV):
        return int(a.value) - int(b.value)
    if isinstance(a, TupleV):
        for x, y in zip(a.items, b.items):
            c = _value_order(x, y)
            if c != 0:
                return c
        return 0
    raise TypeError(f"unknown value: {a!r}")


def _same_shape(a: Value, b: Value) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, TupleV):
        return len(a.items) == len(b.items) and all(
            _same_shape(x, y) for x, y in zip(a.items, b.items)
        )
    return True


def eval_expr(
    expr: Expr,
    env: Mapping[str, Value],
    predicates: Optional[Mapping[str, PredicateFn]] = None,
) -> Value:
    """Evaluate an expression under a variable environment.

    Raises EvalError on unbound variables, operand type mismatches,
    unknown predicates, or predicate failures.
    """
    if isinstance(expr, BoolLit):
        return BoolV(expr.value)
    if isinstance(expr, IntLit):
        return IntV(expr.value)
    if isinstance(expr, StrLit):
        return StrV(expr.value)
    if isinstance(expr, VarRef):
        try:
            return env[expr.name]
        except KeyError:
            raise EvalError(f"unbound variable: {expr.name}") from None
    if isinstance(expr, TupleLit):
        return TupleV(tuple(eval_expr(e, env, predicates) for e in expr.items))
    if isinstance(expr, Compare):
        lhs = eval_expr(expr.lhs, env, predicates)
        rhs = eval_expr(expr.rhs, env, predicates)
        if not _same_shape(lhs, rhs):
            raise EvalError(f"comparison operands of different types: {lhs} {expr.op} {rhs}")
        if expr.op == "==":
            return BoolV(lhs == rhs)
        if expr.op == "!=":
            return BoolV(lhs != rhs)
        order = _value_order(lhs, rhs)
        if expr.op == ">=":
            return BoolV(order >= 0)
        if expr.op == "<=":
            return BoolV(order <= 0)
        if expr.op == ">":
            return BoolV(order > 0)
        if expr.op == "<":
            return BoolV(order < 0)
        raise EvalError(f"unknown comparison operator: {expr.op}")
    if isinstance(expr, And):
        lhs = eval_expr(expr.lhs, env, predicates)
        if not isinstance(lhs, BoolV):
            raise EvalError("left operand of && is not a boolean")
        if not lhs.value:
            return BoolV(False)
        rhs = eval_expr(expr.rhs, env, predicates)
        if not isinstance(rhs, BoolV):
            raise EvalError("right operand of && is not a boolean")
        return rhs
    if isinstance(expr, Or):
        lhs = eval_expr(expr.lhs, env, predicates)
        if not isinstance(lhs, BoolV):
            raise EvalError("left operand of || is not a boolean")
        if lhs.value:
            return BoolV(True)
        rhs = eval_expr(expr.rhs, env, predicates)
        if not isinstance(rhs, BoolV):
            raise EvalError("right operand of || is not a boolean")
        return rhs
    if isinstance(expr, Not):
        val = eval_expr(expr.operand, env, predicates)
        if not isinstance(val, BoolV):
            raise EvalError("operand of ! is not a boolean")
        return BoolV(not val.value)
    if isinstance(expr, IsType):
        val = eval_expr(expr.operand, env, predicates)
        return BoolV(has_type(val, expr.base))
    if isinstance(expr, PredCall):
        if predicates is None or expr.name not in predicates:
            raise EvalError(f"unknown predicate: {expr.name}")
        args = [eval_expr(a, env, predicates) for a in expr.args]
        result = predicates[expr.name](args)
        if not isinstance(result, bool):
            raise EvalError(f"predicate {expr.name} did not return a boolean")
        return BoolV(result)
    raise TypeError(f"unknown expression: {expr!r}")


# ---------------------------------------------------------------------------
# Session types
# ---------------------------------------------------------------------------


class SessionType:
    __slots__ = ()


@dataclass(frozen=True)
class Param:
    name: str
    base: BaseType


@dataclass(frozen=True)
class TypeBranch:
    label: str
    params: tuple[Param, ...]
    assertion: Expr
    cont: "SessionType"


@dataclass(frozen=True)
class Select(SessionType):
    """Internal choice: the described party picks and sends one message."""

    branches: tuple[TypeBranch, ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.branches)

    def branch(self, label: str) -> Optional[TypeBranch]:
        for b in self.branches:
            if b.label == label:
                return b
        return None


@dataclass(frozen=True)
class Branch(SessionType):
    """External choice: the described party receives one of the messages."""

    branches: tuple[TypeBranch, ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.branches)

    def branch(self, label: str) -> Optional[TypeBranch]:
        for b in self.branches:
            if b.label == label:
                return b
        return None


@dataclass(frozen=True)
class RecType(SessionType):
    var: str
    body: SessionType


@dataclass(frozen=True)
class TypeVar(SessionType):
    name: str


@dataclass(frozen=True)
class End(SessionType):
    pass


def free_type_vars(s: SessionType) -> frozenset[str]:
    if isinstance(s, (Select, Branch)):
        out: frozenset[str] = frozenset()
        for b in s.branches:
            out |= free_type_vars(b.cont)
        return out
    if isinstance(s, RecType):
        return free_type_vars(s.body) - {s.var}
    if isinstance(s, TypeVar):
        return frozenset((s.name,))
    if isinstance(s, End):
        return frozenset()
    raise TypeError(f"unknown session type: {s!r}")


def subst_type_var(s: SessionType, var: str, replacement: SessionType) -> SessionType:
    """Capture-avoiding substitution of a type variable by a session type."""
    if isinstance(s, (Select, Branch)):
        branches = tuple(
            TypeBranch(b.label, b.params, b.assertion, subst_type_var(b.cont, var, replacement))
            for b in s.branches
        )
        return Select(branches) if isinstance(s, Select) else Branch(branches)
    if isinstance(s, RecType):
        if s.var == var:
            return s
        if s.var in free_type_vars(replacement) and var in free_type_vars(s.body):
            renamed = fresh_name(s.var, free_type_vars(replacement) | free_type_vars(s.body) | {var})
            body = subst_type_var(s.body, s.var, TypeVar(renamed))
            return RecType(renamed, subst_type_var(body, var, replacement))
        return RecType(s.var, subst_type_var(s.body, var, replacement))
    if isinstance(s, TypeVar):
        return replacement if s.name == var else s
    if isinstance(s, End):
        return s
    raise TypeError(f"unknown session type: {s!r}")


def unfold_type(s: SessionType) -> SessionType:
    """One unfolding of a top-level recursive type; identity otherwise."""
    if isinstance(s, RecType):
        return subst_type_var(s.body, s.var, s)
    return s


def type_is_guarded(s: SessionType) -> bool:
    """Every type variable occurs under at least one choice prefix."""

    def walk(t: SessionType, unguarded: frozenset[str]) -> bool:
        if isinstance(t, (Select, Branch)):
            return all(walk(b.cont, frozenset()) for b in t.branches)
        if isinstance(t, RecType):
            return walk(t.body, unguarded | {t.var})
        if isinstance(t, TypeVar):
            return t.name not in unguarded
        if isinstance(t, End):
            return True
        raise TypeError(f"unknown session type: {t!r}")

    return walk(s, frozenset())


# ---------------------------------------------------------------------------
# Processes
# ---------------------------------------------------------------------------


class Process:
    __slots__ = ()


@dataclass(frozen=True)
class RecvBranch:
    label: str
    params: tuple[str, ...]
    cont: Union["Process", "Monitor"]


@dataclass(frozen=True)
class Send(Process):
    label: str
    args: tuple[Expr, ...]
    cont: Process


@dataclass(frozen=True)
class Recv(Process):
    branches: tuple[RecvBranch, ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.branches)

    def branch(self, label: str) -> Optional[RecvBranch]:
        for b in self.branches:
            if b.label == label:
                return b
        return None


@dataclass(frozen=True)
class RecProc(Process):
    var: str
    body: Process


@dataclass(frozen=True)
class ProcVar(Process):
    name: str


@dataclass(frozen=True)
class If(Process):
    cond: Expr
    then: Process
    orelse: Process


@dataclass(frozen=True)
class Nil(Process):
    pass


NIL = Nil()


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------


class VerdictKind(Enum):
    NO_P_LABEL = "no_P"
    NO_E_LABEL = "no_E"
    NO_P_ASSERT = "no_P_assert"
    NO_E_ASSERT = "no_E_assert"

    def blames_process(self) -> bool:
        return self in (VerdictKind.NO_P_LABEL, VerdictKind.NO_P_ASSERT)

    def blames_environment(self) -> bool:
        return not self.blames_process()


class Monitor:
    __slots__ = ()


@dataclass(frozen=True)
class RecvInternal(Monitor):
    """Receive a message from the monitored process."""

    branches: tuple[RecvBranch, ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.branches)

    def branch(self, label: str) -> Optional[RecvBranch]:
        for b in self.branches:
            if b.label == label:
                return b
        return None


@dataclass(frozen=True)
class SendInternal(Monitor):
    """Deliver a message to the monitored process."""

    label: str
    args: tuple[Expr, ...]
    cont: Monitor


@dataclass(frozen=True)
class RecvExternal(Monitor):
    """Receive a message from the environment."""

    branches: tuple[RecvBranch, ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.branches)

    def branch(self, label: str) -> Optional[RecvBranch]:
        for b in self.branches:
            if b.label == label:
                return b
        return None


@dataclass(frozen=True)
class SendExternal(Monitor):
    """Emit a message towards the environment."""

    label: str
    args: tuple[Expr, ...]
    cont: Monitor


@dataclass(frozen=True)
class RecMon(Monitor):
    var: str
    body: Monitor


@dataclass(frozen=True)
class MonVar(Monitor):
    name: str


@dataclass(frozen=True)
class MonIf(Monitor):
    cond: Expr
    then: Monitor
    orelse: Monitor


@dataclass(frozen=True)
class MonNil(Monitor):
    pass


@dataclass(frozen=True)
class Verdict(Monitor):
    kind: VerdictKind


MON_NIL = MonNil()


# ---------------------------------------------------------------------------
# Messages and actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Message:
    label: str
    payload: tuple[Value, ...]

    def __post_init__(self) -> None:
        if not is_ident(self.label):
            raise ValueError(f"bad message label: {self.label!r}")

    def __str__(self) -> str:
        return f"{self.label}({','.join(str(v) for v in self.payload)})"


class Action:
    __slots__ = ()


@dataclass(frozen=True)
class Tau(Action):
    def __str__(self) -> str:
        return "tau"


@dataclass(frozen=True)
class ProcSend(Action):
    """Message flowing process -> monitor."""

    message: Message

    def __str__(self) -> str:
        return f"proc-send {self.message}"


@dataclass(frozen=True)
class ProcRecv(Action):
    """Message flowing monitor -> process."""

    message: Message

    def __str__(self) -> str:
        return f"proc-recv {self.message}"


@dataclass(frozen=True)
class ExtSend(Action):
    """Message flowing monitor -> environment (the visible output)."""

    message: Message

    def __str__(self) -> str:
        return f"out {self.message}"


@dataclass(frozen=True)
class ExtRecv(Action):
    """Message flowing environment -> monitor (the visible input)."""

    message: Message

    def __str__(self) -> str:
        return f"in {self.message}"


TAU = Tau()


# ---------------------------------------------------------------------------
# Free variables and substitution for processes
# ---------------------------------------------------------------------------


def free_vars(p: Process) -> frozenset[str]:
    """Free value variables of a process."""
    if isinstance(p, Send):
        out = frozenset().union(*(expr_free_vars(a) for a in p.args)) if p.args else frozenset()
        return out | free_vars(p.cont)
    if isinstance(p, Recv):
        out: frozenset[str] = frozenset()
        for b in p.branches:
            out |= free_vars(b.cont) - set(b.params)
        return out
    if isinstance(p, RecProc):
        return free_vars(p.body)
    if isinstance(p, ProcVar):
        return frozenset()
    if isinstance(p, If):
        return expr_free_vars(p.cond) | free_vars(p.then) | free_vars(p.orelse)
    if isinstance(p, Nil):
        return frozenset()
    raise TypeError(f"unknown process: {p!r}")


def free_pvars(p: Process) -> frozenset[str]:
    """Free process variables of a process."""
    if isinstance(p, Send):
        return free_pvars(p.cont)
    if isinstance(p, Recv):
        out: frozenset[str] = frozenset()
        for b in p.branches:
            out |= free_pvars(b.cont)
        return out
    if isinstance(p, RecProc):
        return free_pvars(p.body) - {p.var}
    if isinstance(p, ProcVar):
        return frozenset((p.name,))
    if isinstance(p, If):
        return free_pvars(p.then) | free_pvars(p.orelse)
    if isinstance(p, Nil):
        return frozenset()
    raise TypeError(f"unknown process: {p!r}")


def substitute_value(p: Process, name: str, value: Value) -> Process:
    """Replace free occurrences of a value variable by a literal value."""
    if isinstance(p, Send):
        return Send(p.label, tuple(subst_expr(a, name, value) for a in p.args), substitute_value(p.cont, name, value))
    if isinstance(p, Recv):
        branches = []
        for b in p.branches:
            if name in b.params:
                branches.append(b)  # binder shadows
            else:
                branches.append(RecvBranch(b.label, b.params, substitute_value(b.cont, name, value)))
        return Recv(tuple(branches))
    if isinstance(p, RecProc):
        return RecProc(p.var, substitute_value(p.body, name, value))
    if isinstance(p, ProcVar):
        return p
    if isinstance(p, If):
        return If(
            subst_expr(p.cond, name, value),
            substitute_value(p.then, name, value),
            substitute_value(p.orelse, name, value),
        )
    if isinstance(p, Nil):
        return p
    raise TypeError(f"unknown process: {p!r}")


def substitute_pvar(p: Process, var: str, replacement: Process) -> Process:
    """Capture-avoiding substitution of a process variable by a process."""
    if isinstance(p, Send):
        return Send(p.label, p.args, substitute_pvar(p.cont, var, replacement))
    if isinstance(p, Recv):
        return Recv(
            tuple(
                RecvBranch(b.label, b.params, substitute_pvar(b.cont, var, replacement))
                for b in p.branches
            )
        )
    if isinstance(p, RecProc):
        if p.var == var:
            return p
        if p.var in free_pvars(replacement) and var in free_pvars(p.body):
            renamed = fresh_name(p.var, free_pvars(replacement) | free_pvars(p.body) | {var})
            body = substitute_pvar(p.body, p.var, ProcVar(renamed))
            return RecProc(renamed, substitute_pvar(body, var, replacement))
        return RecProc(p.var, substitute_pvar(p.body, var, replacement))
    if isinstance(p, ProcVar):
        return replacement if p.name == var else p
    if isinstance(p, If):
        return If(p.cond, substitute_pvar(p.then, var, replacement), substitute_pvar(p.orelse, var, replacement))
    if isinstance(p, Nil):
        return p
    raise TypeError(f"unknown process: {p!r}")


def unfold_process(p: Process) -> Process:
    if isinstance(p, RecProc):
        return substitute_pvar(p.body, p.var, p)
    return p


def process_is_guarded(p: Process) -> bool:
    """Process variables occur only under a send or receive prefix."""

    def walk(q: Process, unguarded: frozenset[str]) -> bool:
        if isinstance(q, Send):
            return walk(q.cont, frozenset())
        if isinstance(q, Recv):
            return all(walk(b.cont, frozenset()) for b in q.branches)
        if isinstance(q, RecProc):
            return walk(q.body, unguarded | {q.var})
        if isinstance(q, ProcVar):
            return q.name not in unguarded
        if isinstance(q, If):
            return walk(q.then, unguarded) and walk(q.orelse, unguarded)
        if isinstance(q, Nil):
            return True
        raise TypeError(f"unknown process: {q!r}")

    return walk(p, frozenset())


# ---------------------------------------------------------------------------
# Free variables and substitution for monitors
# ---------------------------------------------------------------------------


def monitor_free_vars(m: Monitor) -> frozenset[str]:
    if isinstance(m, (SendInternal, SendExternal)):
        out = frozenset().union(*(expr_free_vars(a) for a in m.args)) if m.args else frozenset()
        return out | monitor_free_vars(m.cont)
    if isinstance(m, (RecvInternal, RecvExternal)):
        out: frozenset[str] = frozenset()
        for b in m.branches:
            out |= monitor_free_vars(b.cont) - set(b.params)
        return out
    if isinstance(m, RecMon):
        return monitor_free_vars(m.body)
    if isinstance(m, MonVar):
        return frozenset()
    if isinstance(m, MonIf):
        return expr_free_vars(m.cond) | monitor_free_vars(m.then) | monitor_free_vars(m.orelse)
    if isinstance(m, (MonNil, Verdict)):
        return frozenset()
    raise TypeError(f"unknown monitor: {m!r}")


def monitor_free_pvars(m: Monitor) -> frozenset[str]:
    if isinstance(m, (SendInternal, SendExternal)):
        return monitor_free_pvars(m.cont)
    if isinstance(m, (RecvInternal, RecvExternal)):
        out: frozenset[str] = frozenset()
        for b in m.branches:
            out |= monitor_free_pvars(b.cont)
        return out
    if isinstance(m, RecMon):
        return monitor_free_pvars(m.body) - {m.var}
    if isinstance(m, MonVar):
        return frozenset((m.name,))
    if isinstance(m, MonIf):
        return monitor_free_pvars(m.then) | monitor_free_pvars(m.orelse)
    if isinstance(m, (MonNil, Verdict)):
        return frozenset()
    raise TypeError(f"unknown monitor: {m!r}")


def monitor_substitute_pvar(m: Monitor, var: str, replacement: Monitor) -> Monitor:
    if isinstance(m, SendInternal):
        return SendInternal(m.label, m.args, monitor_substitute_pvar(m.cont, var, replacement))
    if isinstance(m, SendExternal):
        return SendExternal(m.label, m.args, monitor_substitute_pvar(m.cont, var, replacement))
    if isinstance(m, (RecvInternal, RecvExternal)):
        branches = tuple(
            RecvBranch(b.label, b.params, monitor_substitute_pvar(b.cont, var, replacement))
            for b in m.branches
        )
        return RecvInternal(branches) if isinstance(m, RecvInternal) else RecvExternal(branches)
    if isinstance(m, RecMon):
        if m.var == var:
            return m
        if m.var in monitor_free_pvars(replacement) and var in monitor_free_pvars(m.body):
            renamed = fresh_name(
                m.var, monitor_free_pvars(replacement) | monitor_free_pvars(m.body) | {var}
            )
            body = monitor_substitute_pvar(m.body, m.var, MonVar(renamed))
            return RecMon(renamed, monitor_substitute_pvar(body, var, replacement))
        return RecMon(m.var, monitor_substitute_pvar(m.body, var, replacement))
    if isinstance(m, MonVar):
        return replacement if m.name == var else m
    if isinstance(m, MonIf):
        return MonIf(
            m.cond,
            monitor_substitute_pvar(m.then, var, replacement),
            monitor_substitute_pvar(m.orelse, var, replacement),
        )
    if isinstance(m, (MonNil, Verdict)):
        return m
    raise TypeError(f"unknown monitor: {m!r}")


def unfold_monitor(m: Monitor) -> Monitor:
    if isinstance(m, RecMon):
        return monitor_substitute_pvar(m.body, m.var, m)
    return m


def monitor_is_guarded(m: Monitor) -> bool:
    """Monitor variables occur only under a communication prefix."""

    def walk(n: Monitor, unguarded: frozenset[str]) -> bool:
        if isinstance(n, (SendInternal, SendExternal)):
            return walk(n.cont, frozenset())
        if isinstance(n, (RecvInternal, RecvExternal)):
            return all(walk(b.cont, frozenset()) for b in n.branches)
        if isinstance(n, RecMon):
            return walk(n.body, unguarded | {n.var})
        if isinstance(n, MonVar):
            return n.name not in unguarded
        if isinstance(n, MonIf):
            return walk(n.then, unguarded) and walk(n.orelse, unguarded)
        if isinstance(n, (MonNil, Verdict)):
            return True
        raise TypeError(f"unknown monitor: {n!r}")

    return walk(m, frozenset())
