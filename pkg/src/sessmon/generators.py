"""Seeded random generation of well-formed types, well-typed processes,
and targeted ill-typed mutations.

Types are generated guarded by construction (a recursion variable only
becomes usable once a choice prefix separates it from its binder).
Ill-typed processes are produced by mutating well-typed ones; each
mutation lands on a specific negated-rule failure. Mutation inputs avoid
conditionals entirely so that the results are trivially free of dead code.
"""

from __future__ import annotations

import random
from typing import Optional

from .terms import (
    BOOL,
    INT,
    STR,
    TT,
    BoolLit,
    BoolV,
    Branch,
    Compare,
    End,
    Expr,
    If,
    IntLit,
    IntV,
    IsType,
    Nil,
    Param,
    PredCall,
    Process,
    ProcVar,
    RecProc,
    RecType,
    Recv,
    RecvBranch,
    Select,
    Send,
    SessionType,
    StrLit,
    StrV,
    TypeBranch,
    TypeVar,
    Value,
    VarRef,
)
from .typecheck import EMPTY_ENVS, typecheck

LABELS = ("A", "B", "C", "D", "E", "F")
BASES = (INT, STR, BOOL)
STR_POOL = ("a", "b", "hello", "")


def gen_type(
    rng: random.Random,
    max_depth: int = 4,
    max_fanout: int = 3,
    assertion_free: bool = True,
    free_var: Optional[str] = None,
) -> SessionType:
    """A well-formed session type; closed unless `free_var` names a type
    variable allowed to occur (guarded) free."""
    var_counter = [0]

    def go(depth: int, usable: tuple[str, ...], pending: tuple[str, ...]) -> SessionType:
        if depth <= 0:
            if usable and rng.random() < 0.5:
                return TypeVar(rng.choice(usable))
            return End()
        roll = rng.random()
        if roll < 0.38:
            return _choice(Select, depth, usable, pending)
        if roll < 0.76:
            return _choice(Branch, depth, usable, pending)
        if roll < 0.88 and depth >= 2:
            var = f"X{var_counter[0]}"
            var_counter[0] += 1
            body = go(depth - 1, usable, pending + (var,))
            return RecType(var, body)
        if usable and roll < 0.94:
            return TypeVar(rng.choice(usable))
        return End()

    def _choice(cls, depth: int, usable: tuple[str, ...], pending: tuple[str, ...]):
        fanout = rng.randint(1, max_fanout)
        labels = rng.sample(LABELS, fanout)
        branches = []
        for label in labels:
            params = tuple(
                Param(f"v{i}", rng.choice(BASES)) for i in range(rng.randint(0, 2))
            )
            assertion = TT if assertion_free else _gen_assertion(rng, params)
            cont = go(depth - 1, usable + pending, ())
            branches.append(TypeBranch(label, params, assertion, cont))
        return cls(tuple(branches))

    pending0 = (free_var,) if free_var is not None else ()
    return go(max_depth, (), pending0)


def _gen_assertion(rng: random.Random, params: tuple[Param, ...]) -> Expr:
    if rng.random() < 0.5 or not params:
        return TT
    p = rng.choice(params)
    if p.base == INT:
        return Compare(rng.choice((">=", "<", "==")), VarRef(p.name), IntLit(rng.randint(-1, 2)))
    if p.base == STR:
        if rng.random() < 0.5:
            return PredCall("nonEmpty", (VarRef(p.name),))
        return Compare("!=", VarRef(p.name), StrLit(""))
    return IsType(BOOL, VarRef(p.name))


def sample_value(rng: random.Random, base) -> Value:
    from .terms import BoolType, IntType, StrType, TupleType, TupleV

    if isinstance(base, IntType):
        return IntV(rng.randint(-3, 3))
    if isinstance(base, StrType):
        return StrV(rng.choice(STR_POOL))
    if isinstance(base, BoolType):
        return BoolV(rng.random() < 0.5)
    if isinstance(base, TupleType):
        return TupleV(tuple(sample_value(rng, b) for b in base.elements))
    raise TypeError(f"unknown base type: {base!r}")


def _value_expr(rng: random.Random, base) -> Expr:
    from .terms import value_to_expr

    return value_to_expr(sample_value(rng, base))


_CLOSED_CONDS = (
    Compare("<", IntLit(1), IntLit(2)),
    Compare("==", StrLit("a"), StrLit("a")),
    Compare(">=", IntLit(0), IntLit(1)),
    BoolLit(True),
)


def process_for_type(
    rng: random.Random,
    s: SessionType,
    include_if: bool = True,
    extra_branches: bool = True,
) -> Process:
    """A process that typechecks against the given type.

    Selections pick one branch at random; branchings implement every type
    branch (occasionally plus an untypechecked extra). Conditionals with
    closed conditions may wrap any point, both arms derived independently.
    """
    junk_counter = [0]

    def go(t: SessionType, tvar_map: dict[str, str], depth_budget: int) -> Process:
        if include_if and depth_budget > 0 and rng.random() < 0.12:
            cond = rng.choice(_CLOSED_CONDS)
            return If(cond, go(t, tvar_map, depth_budget - 1), go(t, tvar_map, depth_budget - 1))
        if isinstance(t, Select):
            b = rng.choice(t.branches)
            args = tuple(_value_expr(rng, p.base) for p in b.params)
            return Send(b.label, args, go(b.cont, tvar_map, depth_budget))
        if isinstance(t, Branch):
            branches = []
            for tb in t.branches:
                branches.append(
                    RecvBranch(tb.label, tuple(p.name for p in tb.params), go(tb.cont, tvar_map, depth_budget))
                )
            if extra_branches and rng.random() < 0.15:
                junk_counter[0] += 1
                label = f"Zx{junk_counter[0]}"
                if label not in {b.label for b in branches}:
                    branches.append(RecvBranch(label, (), Nil()))
            return Recv(tuple(branches))
        if isinstance(t, RecType):
            pvar = tvar_map.get(t.var, t.var)
            inner = dict(tvar_map)
            inner[t.var] = pvar
            return RecProc(pvar, go(t.body, inner, depth_budget))
        if isinstance(t, TypeVar):
            return ProcVar(tvar_map.get(t.name, t.name))
        if isinstance(t, End):
            return Nil()
        raise TypeError(f"unknown session type: {t!r}")

    return go(s, {}, 2)


def gen_well_typed(
    rng: random.Random,
    max_depth: int = 4,
    max_fanout: int = 3,
    include_if: bool = True,
    extra_branches: bool = True,
) -> tuple[Process, SessionType]:
    s = gen_type(rng, max_depth, max_fanout, assertion_free=True)
    p = process_for_type(rng, s, include_if=include_if, extra_branches=extra_branches)
    return p, s


# ---------------------------------------------------------------------------
# Ill-typed mutations
# ---------------------------------------------------------------------------

MUTATIONS = ("label_rename", "branch_prune", "arg_retype", "premature_nil")


def _count_nodes(p: Process, want) -> int:
    total = 1 if want(p) else 0
    if isinstance(p, Send):
        return total + _count_nodes(p.cont, want)
    if isinstance(p, Recv):
        return total + sum(_count_nodes(b.cont, want) for b in p.branches)
    if isinstance(p, RecProc):
        return total + _count_nodes(p.body, want)
    if isinstance(p, If):
        return total + _count_nodes(p.then, want) + _count_nodes(p.orelse, want)
    return total


def _rewrite_nth(p: Process, want, index: list[int], rewrite) -> Process:
    """Apply `rewrite` to the index-th node satisfying `want` (preorder)."""
    if want(p):
        if index[0] == 0:
            index[0] -= 1
            return rewrite(p)
        index[0] -= 1
    if isinstance(p, Send):
        return Send(p.label, p.args, _rewrite_nth(p.cont, want, index, rewrite))
    if isinstance(p, Recv):
        return Recv(
            tuple(
                RecvBranch(b.label, b.params, _rewrite_nth(b.cont, want, index, rewrite))
                for b in p.branches
            )
        )
    if isinstance(p, RecProc):
        return RecProc(p.var, _rewrite_nth(p.body, want, index, rewrite))
    if isinstance(p, If):
        return If(p.cond, _rewrite_nth(p.then, want, index, rewrite), _rewrite_nth(p.orelse, want, index, rewrite))
    return p


def _mutate(rng: random.Random, p: Process, mutation: str) -> Optional[Process]:
    if mutation == "label_rename":
        want = lambda q: isinstance(q, Send)
        rewrite = lambda q: Send("Zz", q.args, q.cont)
    elif mutation == "branch_prune":
        want = lambda q: isinstance(q, Recv) and len(q.branches) > 1
        rewrite = lambda q: Recv(q.branches[1:])
    elif mutation == "arg_retype":
        want = lambda q: isinstance(q, Send) and len(q.args) > 0
        def rewrite(q):
            first = q.args[0]
            swapped: Expr = StrLit("oops") if isinstance(first, (IntLit, BoolLit)) else IntLit(99)
            return Send(q.label, (swapped,) + q.args[1:], q.cont)
    elif mutation == "premature_nil":
        want = lambda q: isinstance(q, (Send, Recv))
        rewrite = lambda q: Nil()
    else:
        raise ValueError(f"unknown mutation: {mutation}")

    count = _count_nodes(p, want)
    if count == 0:
        return None
    return _rewrite_nth(p, want, [rng.randrange(count)], rewrite)


def gen_ill_typed(
    rng: random.Random,
    max_depth: int = 3,
    max_fanout: int = 3,
    max_attempts: int = 50,
) -> tuple[Process, SessionType, str]:
    """An ill-typed, dead-code-free pair plus the mutation that broke it."""
    for _ in range(max_attempts):
        s = gen_type(rng, max_depth, max_fanout, assertion_free=True)
        base = process_for_type(rng, s, include_if=False, extra_branches=False)
        mutation = rng.choice(MUTATIONS)
        mutated = _mutate(rng, base, mutation)
        if mutated is None or mutated == base:
            continue
        if typecheck(EMPTY_ENVS, mutated, s):
            continue  # mutation landed on an untypechecked spot
        return mutated, s, mutation
    raise RuntimeError("could not generate an ill-typed pair")
