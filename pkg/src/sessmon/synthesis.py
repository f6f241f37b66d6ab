"""Monitor synthesis: structural translation of session types to monitors.

An internal choice becomes a receive-from-process over the same labels,
guarded by payload type tests (and the branch assertion, when nontrivial),
forwarding to the environment on success and halting with a process-blaming
verdict otherwise. An external choice is the mirror image with environment
blame. When every assertion is trivially true the output contains no
assertion verdicts at all.
"""

from __future__ import annotations

from .terms import (
    TT,
    And,
    Expr,
    IsType,
    MonIf,
    MonNil,
    Monitor,
    MonVar,
    Param,
    RecMon,
    RecType,
    RecvBranch,
    RecvExternal,
    RecvInternal,
    Select,
    Branch,
    SendExternal,
    SendInternal,
    SessionType,
    TypeBranch,
    TypeVar,
    End,
    VarRef,
    Verdict,
    VerdictKind,
)
from .typecheck import check_well_formed


def synthesize(s: SessionType) -> Monitor:
    """Synthesize the rejection monitor for a closed, well-formed type."""
    violations = check_well_formed(s)
    if violations:
        raise ValueError(
            "cannot synthesize from an ill-formed type: "
            + "; ".join(str(v) for v in violations)
        )
    return _synth(s)


def _synth(s: SessionType) -> Monitor:
    if isinstance(s, Select):
        return RecvInternal(
            tuple(
                _guard_branch(b, SendExternal, VerdictKind.NO_P_LABEL, VerdictKind.NO_P_ASSERT)
                for b in s.branches
            )
        )
    if isinstance(s, Branch):
        return RecvExternal(
            tuple(
                _guard_branch(b, SendInternal, VerdictKind.NO_E_LABEL, VerdictKind.NO_E_ASSERT)
                for b in s.branches
            )
        )
    if isinstance(s, RecType):
        return RecMon(s.var, _synth(s.body))
    if isinstance(s, TypeVar):
        return MonVar(s.name)
    if isinstance(s, End):
        return MonNil()
    raise TypeError(f"unknown session type: {s!r}")


def _guard_branch(b: TypeBranch, forward_cls, label_verdict: VerdictKind, assert_verdict: VerdictKind) -> RecvBranch:
    names = tuple(p.name for p in b.params)
    forward = forward_cls(b.label, tuple(VarRef(n) for n in names), _synth(b.cont))
    body: Monitor = forward
    if b.assertion != TT:
        body = MonIf(b.assertion, body, Verdict(assert_verdict))
    check = _type_checks(b.params)
    if check is not None:
        body = MonIf(check, body, Verdict(label_verdict))
    return RecvBranch(b.label, names, body)


def _type_checks(params: tuple[Param, ...]) -> Expr | None:
    """Conjoined payload type tests, left to right; None when there is no
    payload to check."""
    checks = [IsType(p.base, VarRef(p.name)) for p in params]
    if not checks:
        return None
    combined = checks[0]
    for check in checks[1:]:
        combined = And(combined, check)
    return combined
