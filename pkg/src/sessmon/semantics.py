"""Executable transition semantics for processes, monitors, and composites.

Process and monitor stepping are pure. Receives are message-parametric:
`step_process` reports them as symbolic slots and `receive` instantiates
one; monitors are total receivers (a message with an unexpected label
drives them to the matching rejection verdict).

The composite system synchronizes process sends with monitor internal
receives (and vice versa) as silent moves; only environment-facing sends
and receives are visible. `explore` enumerates the reachable state space
over finite value domains; `run_trace` replays a scripted interaction
deterministically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Union

from .terms import (
    TAU,
    Action,
    BaseType,
    BoolType,
    BoolV,
    EvalError,
    Expr,
    ExtRecv,
    ExtSend,
    If,
    IntType,
    IntV,
    Message,
    MonIf,
    MonNil,
    Monitor,
    Nil,
    ProcRecv,
    ProcSend,
    Process,
    RecMon,
    RecProc,
    Recv,
    RecvExternal,
    RecvInternal,
    Send,
    SendExternal,
    SendInternal,
    SessionType,
    Branch,
    RecType,
    Select,
    StrType,
    StrV,
    TupleType,
    TupleV,
    Value,
    Verdict,
    VerdictKind,
    eval_expr,
    unfold_monitor,
    unfold_process,
    unfold_type,
)

# ---------------------------------------------------------------------------
# Finite value domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValueDomain:
    """Finite sample sets standing in for the denumerable value sets when
    enumerating environment inputs."""

    ints: tuple[int, ...] = (0, 1)
    strs: tuple[str, ...] = ("a", "b")
    bools: tuple[bool, ...] = (True, False)
    tuples: tuple[TupleV, ...] = ()
    alien_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.ints or not self.strs or not self.bools:
            raise ValueError("value domains must be non-empty")

    def values_for(self, base: BaseType) -> tuple[Value, ...]:
        """Samples of one base type (tuple types by element product)."""
        if isinstance(base, IntType):
            return tuple(IntV(i) for i in self.ints)
        if isinstance(base, StrType):
            return tuple(StrV(s) for s in self.strs)
        if isinstance(base, BoolType):
            return tuple(BoolV(b) for b in self.bools)
        if isinstance(base, TupleType):
            parts = [self.values_for(b) for b in base.elements]
            return tuple(TupleV(combo) for combo in itertools.product(*parts))
        raise TypeError(f"unknown base type: {base!r}")

    def universe(self) -> tuple[Value, ...]:
        """Every sample value, used when the environment may send anything."""
        out: list[Value] = [IntV(i) for i in self.ints]
        out.extend(StrV(s) for s in self.strs)
        out.extend(BoolV(b) for b in self.bools)
        out.extend(self.tuples)
        return tuple(out)

    def extended(self) -> "ValueDomain":
        """Adversarial variant: extra off-type values and an alien label."""
        return replace(
            self,
            ints=self.ints + (-1,),
            strs=self.strs + ("zz",),
            alien_labels=self.alien_labels + ("Alien",),
        )


DEFAULT_DOMAIN = ValueDomain()


# ---------------------------------------------------------------------------
# Payload environments and configurations
# ---------------------------------------------------------------------------

Env = tuple[tuple[str, Value], ...]
EMPTY_ENV: Env = ()


def env_bind(env: Env, names: Iterable[str], values: Iterable[Value]) -> Env:
    d = dict(env)
    for name, value in zip(names, values):
        d[name] = value
    return tuple(sorted(d.items()))


def env_dict(env: Env) -> dict[str, Value]:
    return dict(env)


@dataclass(frozen=True)
class Configuration:
    """A composite monitored system state: process, monitor, payload map."""

    process: Process
    monitor: Monitor
    payloads: Env = EMPTY_ENV


# ---------------------------------------------------------------------------
# Process semantics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecvSlot:
    """A symbolic receive transition: any message with this label and arity
    can be consumed; the caller instantiates it via `receive`."""

    label: str
    arity: int


PredicateMap = Optional[Mapping[str, object]]


def step_process(p: Process, predicates: PredicateMap = None) -> list[tuple[object, Process]]:
    """One-step successors of a closed process.

    Send and silent steps are concrete `(Action, Process)` pairs; receive
    branches appear as `(RecvSlot, branch body)` for the caller to
    instantiate. A conditional whose predicate fails to evaluate has no
    transitions: the process is stuck on an ill-typed expression.
    """
    if isinstance(p, Send):
        try:
            payload = tuple(eval_expr(a, {}, predicates) for a in p.args)
        except EvalError:
            return []
        return [(ProcSend(Message(p.label, payload)), p.cont)]
    if isinstance(p, Recv):
        return [(RecvSlot(b.label, len(b.params)), b.cont) for b in p.branches]
    if isinstance(p, RecProc):
        return [(TAU, unfold_process(p))]
    if isinstance(p, If):
        try:
            cond = eval_expr(p.cond, {}, predicates)
        except EvalError:
            return []
        if not isinstance(cond, BoolV):
            return []
        return [(TAU, p.then if cond.value else p.orelse)]
    return []


def receive(p: Process, msg: Message) -> Optional[Process]:
    """Instantiate an input transition for a concrete message, substituting
    the payload for the branch parameters; None when the process cannot
    receive this message."""
    from .terms import substitute_value

    if not isinstance(p, Recv):
        return None
    branch = p.branch(msg.label)
    if branch is None or len(branch.params) != len(msg.payload):
        return None
    cont = branch.cont
    for name, value in zip(branch.params, msg.payload):
        cont = substitute_value(cont, name, value)
    return cont


def process_expr_stuck(p: Process, predicates: PredicateMap = None) -> bool:
    """A communication-ready shape that cannot move because an expression
    does not evaluate."""
    if isinstance(p, If):
        try:
            return not isinstance(eval_expr(p.cond, {}, predicates), BoolV)
        except EvalError:
            return True
    if isinstance(p, Send):
        try:
            for a in p.args:
                eval_expr(a, {}, predicates)
            return False
        except EvalError:
            return True
    return False


# ---------------------------------------------------------------------------
# Monitor semantics
# ---------------------------------------------------------------------------


def step_monitor(m: Monitor, env: Env, predicates: PredicateMap = None) -> list[tuple[Action, Monitor, Env]]:
    """Autonomous monitor steps: recursion unfolding, conditionals, and both
    send directions. Receives are handled by the deliver functions."""
    if isinstance(m, RecMon):
        return [(TAU, unfold_monitor(m), env)]
    if isinstance(m, MonIf):
        try:
            cond = eval_expr(m.cond, env_dict(env), predicates)
        except EvalError:
            return []
        if not isinstance(cond, BoolV):
            return []
        return [(TAU, m.then if cond.value else m.orelse, env)]
    if isinstance(m, SendInternal):
        msg = _eval_message(m.label, m.args, env, predicates)
        if msg is None:
            return []
        return [(ProcRecv(msg), m.cont, env)]
    if isinstance(m, SendExternal):
        msg = _eval_message(m.label, m.args, env, predicates)
        if msg is None:
            return []
        return [(ExtSend(msg), m.cont, env)]
    return []


def _eval_message(label: str, args: tuple[Expr, ...], env: Env, predicates: PredicateMap) -> Optional[Message]:
    try:
        return Message(label, tuple(eval_expr(a, env_dict(env), predicates) for a in args))
    except EvalError:
        return None


def deliver_internal(m: Monitor, env: Env, msg: Message) -> Optional[tuple[Monitor, Env]]:
    """Offer a process-sent message to the monitor.

    A label (or shape) outside the expected branches drives the monitor to
    the process-blaming label verdict; a matching branch binds the payload.
    None when the monitor is not at an internal receive.
    """
    if not isinstance(m, RecvInternal):
        return None
    branch = m.branch(msg.label)
    if branch is None or len(branch.params) != len(msg.payload):
        return (Verdict(VerdictKind.NO_P_LABEL), env)
    return (branch.cont, env_bind(env, branch.params, msg.payload))


def deliver_external(m: Monitor, env: Env, msg: Message) -> Optional[tuple[Monitor, Env]]:
    """Offer an environment-sent message to the monitor; symmetric to
    `deliver_internal` with environment blame."""
    if not isinstance(m, RecvExternal):
        return None
    branch = m.branch(msg.label)
    if branch is None or len(branch.params) != len(msg.payload):
        return (Verdict(VerdictKind.NO_E_LABEL), env)
    return (branch.cont, env_bind(env, branch.params, msg.payload))


# ---------------------------------------------------------------------------
# Session type transitions (used by the subject-reduction harness)
# ---------------------------------------------------------------------------


def step_type(s: SessionType) -> list[tuple[tuple, SessionType]]:
    """Type transitions: ('tau', None) unfolding, ('select', label) outputs,
    ('branch', label) inputs."""
    if isinstance(s, RecType):
        return [(("tau", None), unfold_type(s))]
    if isinstance(s, Select):
        return [(("select", b.label), b.cont) for b in s.branches]
    if isinstance(s, Branch):
        return [(("branch", b.label), b.cont) for b in s.branches]
    return []


def action_accepted(action: Action, s: SessionType) -> bool:
    """Whether a process/monitor action is accepted by a session type
    (silent actions always; communications must match a branch label with a
    well-typed payload, up to unfolding)."""
    from .terms import has_type

    if action == TAU:
        return True
    t = s
    while isinstance(t, RecType):
        t = unfold_type(t)
    if isinstance(action, (ProcSend, ExtSend)):
        if not isinstance(t, Select):
            return False
        branch = t.branch(action.message.label)
    elif isinstance(action, (ProcRecv, ExtRecv)):
        if not isinstance(t, Branch):
            return False
        branch = t.branch(action.message.label)
    else:
        return False
    if branch is None or len(branch.params) != len(action.message.payload):
        return False
    return all(has_type(v, p.base) for v, p in zip(action.message.payload, branch.params))


# ---------------------------------------------------------------------------
# Composite system
# ---------------------------------------------------------------------------


def external_inputs(m: Monitor, domains: ValueDomain) -> list[Message]:
    """Every environment input enumerated for an external-receive monitor:
    each branch label crossed with domain values, plus alien labels."""
    if not isinstance(m, RecvExternal):
        return []
    universe = domains.universe()
    out: list[Message] = []
    for b in m.branches:
        for combo in itertools.product(universe, repeat=len(b.params)):
            out.append(Message(b.label, combo))
    branch_labels = set(m.labels())
    for label in domains.alien_labels:
        if label not in branch_labels:
            out.append(Message(label, ()))
    return out


def step_composite(
    c: Configuration,
    domains: ValueDomain = DEFAULT_DOMAIN,
    predicates: PredicateMap = None,
) -> list[tuple[Action, Configuration]]:
    """All one-step composite transitions. A configuration whose monitor has
    reached a verdict has no successors."""
    if isinstance(c.monitor, Verdict):
        return []
    out: list[tuple[Action, Configuration]] = []
    proc_steps = step_process(c.process, predicates)

    # process send + monitor internal receive (silent)
    for step, cont in proc_steps:
        if isinstance(step, ProcSend):
            delivered = deliver_internal(c.monitor, c.payloads, step.message)
            if delivered is not None:
                out.append((TAU, Configuration(cont, delivered[0], delivered[1])))

    for action, mon, env in step_monitor(c.monitor, c.payloads, predicates):
        if action == TAU:
            out.append((TAU, Configuration(c.process, mon, env)))
        elif isinstance(action, ProcRecv):
            # monitor internal send + process receive (silent)
            cont = receive(c.process, action.message)
            if cont is not None:
                out.append((TAU, Configuration(cont, mon, env)))
        elif isinstance(action, ExtSend):
            out.append((action, Configuration(c.process, mon, env)))

    # independent silent process moves
    for step, cont in proc_steps:
        if step == TAU:
            out.append((TAU, Configuration(cont, c.monitor, c.payloads)))

    # environment inputs
    for msg in external_inputs(c.monitor, domains):
        delivered = deliver_external(c.monitor, c.payloads, msg)
        if delivered is not None:
            out.append((ExtRecv(msg), Configuration(c.process, delivered[0], delivered[1])))

    return out


# ---------------------------------------------------------------------------
# Stuck states
# ---------------------------------------------------------------------------


class StuckKind:
    __slots__ = ()


@dataclass(frozen=True)
class VerdictReached(StuckKind):
    kind: VerdictKind

    def __str__(self) -> str:
        return f"verdict {self.kind.value}"


@dataclass(frozen=True)
class Deadlock(StuckKind):
    def __str__(self) -> str:
        return "deadlock"


@dataclass(frozen=True)
class CleanTermination(StuckKind):
    def __str__(self) -> str:
        return "clean termination"


UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class StuckReport:
    config: Configuration
    kind: StuckKind
    classification: str  # 1 | 2a | 2b | 3a | 3b | 3c | 4 | 5 | unclassified
    trace: tuple[Action, ...] = ()

    def __str__(self) -> str:
        text = str(self.kind)
        if self.classification != UNCLASSIFIED:
            text += f" (case {self.classification})"
        return text


def classify_stuck(c: Configuration, predicates: PredicateMap = None) -> tuple[StuckKind, str]:
    """Classify a successor-free configuration into the stuck-state taxonomy:
    1 process-blaming verdict; 2a/2b monitor awaits a process send but the
    process receives / has terminated; 3a/3b/3c the monitor delivers a
    message the process cannot take / the process sends / has terminated;
    4 monitor finished but the process still communicates; 5 process stuck
    on an ill-typed expression."""
    p, m = c.process, c.monitor
    if isinstance(m, Verdict):
        cls = "1" if m.kind.blames_process() else UNCLASSIFIED
        return (VerdictReached(m.kind), cls)
    if isinstance(p, Nil) and isinstance(m, MonNil):
        return (CleanTermination(), UNCLASSIFIED)
    if process_expr_stuck(p, predicates):
        return (Deadlock(), "5")
    if isinstance(m, RecvInternal):
        if isinstance(p, Recv):
            return (Deadlock(), "2a")
        if isinstance(p, Nil):
            return (Deadlock(), "2b")
        return (Deadlock(), UNCLASSIFIED)
    if isinstance(m, SendInternal):
        if isinstance(p, Recv):
            return (Deadlock(), "3a")
        if isinstance(p, Send):
            return (Deadlock(), "3b")
        if isinstance(p, Nil):
            return (Deadlock(), "3c")
        return (Deadlock(), UNCLASSIFIED)
    if isinstance(m, MonNil) and isinstance(p, (Send, Recv)):
        return (Deadlock(), "4")
    return (Deadlock(), UNCLASSIFIED)


# ---------------------------------------------------------------------------
# Bounded exhaustive exploration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExploreResult:
    reports: tuple[StuckReport, ...]
    truncated: bool  # the frontier was cut at max_depth
    visited: int = 0

    def kinds(self) -> set[StuckKind]:
        return {r.kind for r in self.reports}

    def has_verdict(self, kind: VerdictKind) -> bool:
        return any(isinstance(r.kind, VerdictReached) and r.kind.kind == kind for r in self.reports)


def explore(
    c0: Configuration,
    max_depth: int,
    domains: ValueDomain = DEFAULT_DOMAIN,
    predicates: PredicateMap = None,
) -> ExploreResult:
    """Breadth-first enumeration of every configuration reachable within
    `max_depth` transitions, reporting each successor-free one. Visited
    configurations are deduplicated structurally, payload maps included."""
    visited: set[Configuration] = {c0}
    # trace reconstruction: first (shortest) discovery wins
    parents: dict[Configuration, tuple[Optional[Configuration], Optional[Action]]] = {c0: (None, None)}
    frontier: list[Configuration] = [c0]
    reports: list[StuckReport] = []
    truncated = False

    def trace_to(c: Configuration) -> tuple[Action, ...]:
        acc: list[Action] = []
        cur: Optional[Configuration] = c
        while cur is not None:
            parent, action = parents[cur]
            if action is not None:
                acc.append(action)
            cur = parent
        acc.reverse()
        return tuple(acc)

    depth = 0
    while frontier:
        next_frontier: list[Configuration] = []
        for c in frontier:
            successors = step_composite(c, domains, predicates)
            if not successors:
                kind, cls = classify_stuck(c, predicates)
                reports.append(StuckReport(c, kind, cls, trace_to(c)))
                continue
            if depth == max_depth:
                truncated = True
                continue
            for action, succ in successors:
                if succ in visited:
                    continue
                visited.add(succ)
                parents[succ] = (c, action)
                next_frontier.append(succ)
        frontier = next_frontier
        depth += 1

    return ExploreResult(tuple(reports), truncated, len(visited))


# ---------------------------------------------------------------------------
# Deterministic scripted replay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Running:
    """The composite is waiting for environment input (or the step budget
    ran out) without having stopped."""

    truncated: bool = False

    def __str__(self) -> str:
        return "running (step budget exhausted)" if self.truncated else "running"


def run_trace(
    c0: Configuration,
    script: list[Message],
    domains: ValueDomain = DEFAULT_DOMAIN,
    predicates: PredicateMap = None,
    max_steps: int = 10_000,
) -> tuple[list[Action], Union[StuckReport, Running]]:
    """Drive the composite deterministically: silent rules in a fixed order
    (send-sync, receive-sync, process, monitor), environment outputs logged,
    environment inputs consumed from the script in order. Stops at a
    verdict, a deadlock, script exhaustion, or clean termination.

    A scripted message whose label is outside the monitor's external
    branches is still consumed: the external-violation rule makes every
    label receivable, so a script mismatch cannot occur.
    """
    log: list[Action] = []
    c = c0
    cursor = 0
    steps = 0

    while True:
        if isinstance(c.monitor, Verdict):
            kind, cls = classify_stuck(c, predicates)
            return (log, StuckReport(c, kind, cls, tuple(log)))
        if steps >= max_steps:
            return (log, Running(truncated=True))
        steps += 1

        # [send-sync]: process send + monitor internal receive
        moved = False
        for step, cont in step_process(c.process, predicates):
            if isinstance(step, ProcSend):
                delivered = deliver_internal(c.monitor, c.payloads, step.message)
                if delivered is not None:
                    c = Configuration(cont, delivered[0], delivered[1])
                    moved = True
                break
        if moved:
            continue

        # [receive-sync]: monitor internal send + process receive
        mon_steps = step_monitor(c.monitor, c.payloads, predicates)
        for action, mon, env in mon_steps:
            if isinstance(action, ProcRecv):
                cont = receive(c.process, action.message)
                if cont is not None:
                    c = Configuration(cont, mon, env)
                    moved = True
                break
        if moved:
            continue

        # [process]: independent silent process move
        for step, cont in step_process(c.process, predicates):
            if step == TAU:
                c = Configuration(cont, c.monitor, c.payloads)
                moved = True
                break
        if moved:
            continue

        # [monitor]: independent silent monitor move
        for action, mon, env in mon_steps:
            if action == TAU:
                c = Configuration(c.process, mon, env)
                moved = True
                break
        if moved:
            continue

        # [out]: emit towards the environment
        for action, mon, env in mon_steps:
            if isinstance(action, ExtSend):
                log.append(action)
                c = Configuration(c.process, mon, env)
                moved = True
                break
        if moved:
            continue

        # [in]: consume the next scripted environment message
        if isinstance(c.monitor, RecvExternal):
            if cursor >= len(script):
                return (log, Running())
            msg = script[cursor]
            cursor += 1
            delivered = deliver_external(c.monitor, c.payloads, msg)
            log.append(ExtRecv(msg))
            c = Configuration(c.process, delivered[0], delivered[1])
            continue

        kind, cls = classify_stuck(c, predicates)
        return (log, StuckReport(c, kind, cls, tuple(log)))
