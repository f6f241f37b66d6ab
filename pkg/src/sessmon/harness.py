"""Executable property suites: detection soundness, blame, weak
completeness, subject reduction, and the unsafe-vs-monitored benchmarks.

The suites run over a bundled corpus of paired type/process files plus
seeded random instances. Soundness explores the composite exhaustively and
demands that no process-blaming verdict is reachable from a well-typed
process; weak completeness demands a stuck witness (other than an
environment violation) from every ill-typed, dead-code-free process.
"""

from __future__ import annotations

import json
import random
import socket
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

from .generators import gen_ill_typed, gen_well_typed, sample_value
from .parser import parse_process, parse_type, render_process, render_type
from .proxy import (
    Flagged,
    Forwarded,
    FrameReader,
    LineCodec,
    ProxyConfig,
    ProxyServer,
    SessionEvent,
    line_codec,
)
from .semantics import (
    DEFAULT_DOMAIN,
    CleanTermination,
    Configuration,
    Deadlock,
    ExploreResult,
    Running,
    RecvSlot,
    StuckReport,
    ValueDomain,
    VerdictReached,
    action_accepted,
    explore,
    receive,
    run_trace,
    step_process,
    step_type,
)
from .synthesis import synthesize
from .terms import (
    TAU,
    TT,
    Branch,
    Message,
    Monitor,
    Nil,
    ProcSend,
    Process,
    RecType,
    RecvBranch,
    Recv,
    Select,
    Send,
    SessionType,
    Value,
    VerdictKind,
    value_to_expr,
)
from .typecheck import EMPTY_ENVS, typecheck


class UsageError(Exception):
    """A suite was invoked outside its stated precondition."""


class CorpusError(Exception):
    """The corpus directory is malformed or self-validation failed."""


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    process: Process
    session_type: SessionType
    expected: str  # well-typed | ill-typed
    dead_code_free: bool


@dataclass(frozen=True)
class Corpus:
    entries: tuple[CorpusEntry, ...]

    def well_typed(self) -> list[CorpusEntry]:
        return [e for e in self.entries if e.expected == "well-typed"]

    def ill_typed(self) -> list[CorpusEntry]:
        return [e for e in self.entries if e.expected == "ill-typed"]

    def entry(self, name: str) -> Optional[CorpusEntry]:
        for e in self.entries:
            if e.name == name:
                return e
        return None


def load_corpus(directory: Union[str, Path]) -> Corpus:
    """Load and self-validate a corpus directory (manifest.json plus paired
    .st/.proc files); the stated expectation must agree with the checker."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise CorpusError(f"no manifest.json in {directory}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    entries = []
    for item in manifest["entries"]:
        name = item["name"]
        session_type = parse_type((directory / item["type"]).read_text(encoding="utf-8"))
        process = parse_process((directory / item["process"]).read_text(encoding="utf-8"))
        expected = item["expected"]
        if expected not in ("well-typed", "ill-typed"):
            raise CorpusError(f"{name}: bad expectation {expected!r}")
        actual = typecheck(EMPTY_ENVS, process, session_type)
        if actual != (expected == "well-typed"):
            raise CorpusError(f"{name}: expected {expected}, checker disagrees")
        entries.append(
            CorpusEntry(name, process, session_type, expected, bool(item.get("dead_code_free", False)))
        )
    return Corpus(tuple(entries))


# ---------------------------------------------------------------------------
# Soundness / blame / weak completeness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Counterexample:
    report: StuckReport
    detail: str = ""

    def __str__(self) -> str:
        text = str(self.report)
        return f"{text}: {self.detail}" if self.detail else text


@dataclass(frozen=True)
class Witness:
    report: StuckReport

    def __str__(self) -> str:
        return str(self.report)


@dataclass(frozen=True)
class NotFoundWithinBudget:
    exhausted: bool  # the state space was fully explored and holds no witness

    def __str__(self) -> str:
        return "state space exhausted, no witness" if self.exhausted else "not found within budget"


def _assertion_free(s: SessionType) -> bool:
    if isinstance(s, (Select, Branch)):
        return all(b.assertion == TT and _assertion_free(b.cont) for b in s.branches)
    if isinstance(s, RecType):
        return _assertion_free(s.body)
    return True


def check_soundness(
    p: Process,
    s: SessionType,
    depth: int = 16,
    domains: ValueDomain = DEFAULT_DOMAIN,
    monitor: Optional[Monitor] = None,
) -> Optional[Counterexample]:
    """None when no process-blaming verdict is reachable; the witness trace
    otherwise. Requires a well-typed process and an assertion-free type.

    `monitor` substitutes a hand-written monitor for the synthesized one
    (used to demonstrate that the suite catches unsound monitors).
    """
    if not typecheck(EMPTY_ENVS, p, s):
        raise UsageError("check_soundness requires a well-typed process")
    if not _assertion_free(s):
        raise UsageError("check_soundness requires an assertion-free type")
    mon = monitor if monitor is not None else synthesize(s)
    result = explore(Configuration(p, mon), depth, domains)
    for report in result.reports:
        if isinstance(report.kind, VerdictReached) and report.kind.kind.blames_process():
            return Counterexample(report, "process-blaming verdict on a well-typed process")
    return None


def check_blame(
    p: Process,
    s: SessionType,
    depth: int = 16,
    domains: Optional[ValueDomain] = None,
) -> Optional[Counterexample]:
    """None when every stuck state with an unfinished process is an
    environment label violation. Injects ill-labelled and ill-typed external
    messages by extending the domains."""
    if not typecheck(EMPTY_ENVS, p, s):
        raise UsageError("check_blame requires a well-typed process")
    if not _assertion_free(s):
        raise UsageError("check_blame requires an assertion-free type")
    if domains is None:
        domains = DEFAULT_DOMAIN.extended()
    result = explore(Configuration(p, synthesize(s)), depth, domains)
    for report in result.reports:
        if isinstance(report.config.process, Nil):
            continue
        kind = report.kind
        if isinstance(kind, VerdictReached) and kind.kind == VerdictKind.NO_E_LABEL:
            continue
        return Counterexample(report, "stuck without an environment label violation")
    return None


def check_weak_completeness(
    p: Process,
    s: SessionType,
    depth: int = 32,
    domains: ValueDomain = DEFAULT_DOMAIN,
) -> Union[Witness, NotFoundWithinBudget]:
    """A stuck witness that is not an environment violation (the caller
    asserts the process is dead-code-free); NotFoundWithinBudget otherwise."""
    if typecheck(EMPTY_ENVS, p, s):
        raise UsageError("check_weak_completeness requires an ill-typed process")
    result = explore(Configuration(p, synthesize(s)), depth, domains)
    best: Optional[StuckReport] = None
    for report in result.reports:
        kind = report.kind
        if isinstance(kind, CleanTermination):
            continue
        if isinstance(kind, VerdictReached) and kind.kind.blames_environment():
            continue
        if best is None or len(report.trace) < len(best.trace):
            best = report
    if best is not None:
        return Witness(best)
    return NotFoundWithinBudget(exhausted=not result.truncated)


# ---------------------------------------------------------------------------
# Subject reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubjectReductionFailure:
    process: Process
    session_type: SessionType
    action: str

    def __str__(self) -> str:
        return (
            f"subject reduction failed on action {self.action} of "
            f"{render_process(self.process)} : {render_type(self.session_type)}"
        )


def _retypes_after(action_label, p2: Process, s: SessionType) -> bool:
    # case 1: a matching type transition retypes the successor
    t = s
    while isinstance(t, RecType):
        from .terms import unfold_type

        t = unfold_type(t)
    for (delta, cont) in step_type(t):
        if delta[0] == "tau":
            continue
        if delta == action_label and typecheck(EMPTY_ENVS, p2, cont):
            return True
    return False


def check_subject_reduction(
    samples: int = 500,
    seed: int = 42,
    domains: ValueDomain = DEFAULT_DOMAIN,
    walk_depth: int = 3,
) -> Optional[SubjectReductionFailure]:
    """Every accepted one-step transition of a generated well-typed process
    either matches a type transition that retypes the successor, or is
    silent and retypes at the same type. Each sample is additionally walked
    a few accepted steps deep, re-checking the property along the way."""
    rng = random.Random(seed)
    for _ in range(samples):
        p, s = gen_well_typed(rng)
        for _ in range(walk_depth + 1):
            failure = _check_sr_once(p, s, domains)
            if failure is not None:
                return failure
            nxt = _walk_one(rng, p, s, domains)
            if nxt is None:
                break
            p, s = nxt
    return None


def _walk_one(
    rng: random.Random, p: Process, s: SessionType, domains: ValueDomain
) -> Optional[tuple[Process, SessionType]]:
    """One random accepted transition, with the type stepped to match."""
    from .terms import unfold_type

    t = s
    while isinstance(t, RecType):
        t = unfold_type(t)
    options: list[tuple[Process, SessionType]] = []
    for step, cont in step_process(p):
        if step == TAU:
            options.append((cont, s))
        elif isinstance(step, ProcSend):
            if isinstance(t, Select):
                tb = t.branch(step.message.label)
                if tb is not None:
                    options.append((cont, tb.cont))
        elif isinstance(step, RecvSlot):
            if isinstance(t, Branch):
                tb = t.branch(step.label)
                if tb is not None and len(tb.params) == step.arity:
                    payload = tuple(sample_value(rng, param.base) for param in tb.params)
                    p2 = receive(p, Message(step.label, payload))
                    if p2 is not None:
                        options.append((p2, tb.cont))
    if not options:
        return None
    return rng.choice(options)


def _check_sr_once(p: Process, s: SessionType, domains: ValueDomain) -> Optional[SubjectReductionFailure]:
    from .terms import has_type, unfold_type

    t = s
    while isinstance(t, RecType):
        t = unfold_type(t)
    for step, cont in step_process(p):
        if step == TAU:
            if not typecheck(EMPTY_ENVS, cont, s):
                return SubjectReductionFailure(p, s, "tau")
        elif isinstance(step, ProcSend):
            if not action_accepted(step, s):
                continue
            if not _retypes_after(("select", step.message.label), cont, s):
                return SubjectReductionFailure(p, s, str(step))
        elif isinstance(step, RecvSlot):
            if not isinstance(t, Branch):
                continue
            tb = t.branch(step.label)
            if tb is None or len(tb.params) != step.arity:
                continue
            # accepted inputs only: domain values of the declared types
            combos = [domains.values_for(param.base) for param in tb.params]
            for payload in _product(combos):
                msg = Message(step.label, payload)
                p2 = receive(p, msg)
                if p2 is None:
                    return SubjectReductionFailure(p, s, f"receive {msg}")
                if not typecheck(EMPTY_ENVS, p2, tb.cont):
                    return SubjectReductionFailure(p, s, f"receive {msg}")
    return None


def _product(pools: list[tuple[Value, ...]]) -> list[tuple[Value, ...]]:
    import itertools

    return [tuple(combo) for combo in itertools.product(*pools)]


# ---------------------------------------------------------------------------
# Session log replay (proxy/semantics agreement)
# ---------------------------------------------------------------------------


def replay_outcome(
    s: SessionType,
    events: list[SessionEvent],
    predicates=None,
) -> Optional[VerdictKind]:
    """Re-run a proxy session's message sequence through the composite
    semantics and return the verdict it reaches (None when it does not
    reach one). The untrusted side's messages become a straight-line
    process; the trusted side's messages become the environment script."""
    sequence: list[tuple[str, Message]] = []
    for event in events:
        if isinstance(event, Forwarded):
            sequence.append((event.direction, event.message))
        elif isinstance(event, Flagged) and event.offending is not None:
            side = "untrusted" if event.kind in (VerdictKind.NO_P_LABEL, VerdictKind.NO_P_ASSERT) else "trusted"
            sequence.append((side, event.offending))

    script = [msg for side, msg in sequence if side == "trusted"]
    process = _replay_process(sequence)
    _log, outcome = run_trace(
        Configuration(process, synthesize(s)), script, predicates=predicates
    )
    if isinstance(outcome, StuckReport) and isinstance(outcome.kind, VerdictReached):
        return outcome.kind.kind
    return None


def _replay_process(sequence: list[tuple[str, Message]]) -> Process:
    process: Process = Nil()
    for side, msg in reversed(sequence):
        if side == "untrusted":
            process = Send(msg.label, tuple(value_to_expr(v) for v in msg.payload), process)
        else:
            params = tuple(f"r{i}" for i in range(len(msg.payload)))
            process = Recv((RecvBranch(msg.label, params, process),))
    return process


# ---------------------------------------------------------------------------
# Aggregated verification (the cmd_verify surface)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteOutcome:
    name: str
    passed: bool
    detail: str

    def __str__(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


REQUIRED_CLASSES = {"1", "2a", "2b", "3a", "3b", "3c", "4", "5"}
NEGATED_RULES = {
    "nBra0", "nBra1", "nBra2", "nSel0", "nSel1", "nSel2", "nSel3",
    "nRec", "nPVar", "nIf1", "nIf2", "nIf3", "nIf4", "nNil",
}


def run_verification(
    corpus_dir: Union[str, Path],
    depth: int = 16,
    completeness_depth: int = 32,
    seed: int = 42,
    generated: int = 200,
    blame_generated: int = 50,
    sr_samples: int = 500,
    monitor_override: Optional[Monitor] = None,
    override_entry: Optional[str] = None,
    emit: Optional[Callable[[str], None]] = None,
) -> list[SuiteOutcome]:
    """Run every suite over a corpus directory plus seeded random instances.

    `monitor_override` replaces the synthesized monitor for one well-typed
    entry in the soundness suite, to demonstrate that a planted bad monitor
    is caught.
    """
    outcomes: list[SuiteOutcome] = []

    def record(name: str, passed: bool, detail: str) -> None:
        outcome = SuiteOutcome(name, passed, detail)
        outcomes.append(outcome)
        if emit is not None:
            emit(str(outcome))

    try:
        corpus = load_corpus(corpus_dir)
    except CorpusError as exc:
        record("corpus", False, str(exc))
        return outcomes
    record(
        "corpus", True,
        f"{len(corpus.well_typed())} well-typed, {len(corpus.ill_typed())} ill-typed, self-validated",
    )

    # soundness: corpus + generated, exhaustive exploration, zero NoP verdicts
    rng = random.Random(seed)
    failures = []
    for entry in corpus.well_typed():
        override = None
        if monitor_override is not None and (override_entry is None or entry.name == override_entry):
            override = monitor_override
        cx = check_soundness(entry.process, entry.session_type, depth, monitor=override)
        if cx is not None:
            failures.append(f"{entry.name}: {cx}")
    for i in range(generated):
        p, s = gen_well_typed(rng)
        cx = check_soundness(p, s, depth)
        if cx is not None:
            failures.append(f"generated #{i}: {cx}")
    record(
        "soundness", not failures,
        failures[0] if failures else f"{len(corpus.well_typed())} corpus + {generated} generated entries, no process-blaming verdicts",
    )

    # blame: adversarial injections, only environment label verdicts stick
    failures = []
    for entry in corpus.well_typed():
        cx = check_blame(entry.process, entry.session_type, depth)
        if cx is not None:
            failures.append(f"{entry.name}: {cx}")
    rng_blame = random.Random(seed + 1)
    for i in range(blame_generated):
        p, s = gen_well_typed(rng_blame)
        cx = check_blame(p, s, depth)
        if cx is not None:
            failures.append(f"generated #{i}: {cx}")
    record(
        "blame", not failures,
        failures[0] if failures else "every stuck state with an unfinished process is an environment label violation",
    )

    # weak completeness: every ill-typed dead-code-free entry yields a witness
    failures = []
    classes: set[str] = set()
    rules: set[str] = set()
    from .typecheck import explain_failure

    for entry in corpus.ill_typed():
        if not entry.dead_code_free:
            continue
        report = explain_failure(EMPTY_ENVS, entry.process, entry.session_type)
        if report is not None:
            rules |= set(report.chain)
        witness: Union[Witness, NotFoundWithinBudget, None] = None
        for d in (8, 16, completeness_depth):
            if d > completeness_depth:
                break
            witness = check_weak_completeness(entry.process, entry.session_type, d)
            if isinstance(witness, Witness):
                break
        if isinstance(witness, Witness):
            classes.add(witness.report.classification)
        else:
            failures.append(f"{entry.name}: {witness}")
    missing_classes = REQUIRED_CLASSES - classes
    missing_rules = NEGATED_RULES - rules
    if missing_classes:
        failures.append(f"stuck classes never witnessed: {sorted(missing_classes)}")
    if missing_rules:
        failures.append(f"negated rules never exercised: {sorted(missing_rules)}")
    record(
        "weak-completeness", not failures,
        failures[0] if failures else f"witnesses for all entries; classes {sorted(classes)}",
    )

    # impossibility: the pruned-choice pair demonstrates the tension
    pruned = corpus.entry("pruned_choice")
    superset = corpus.entry("pruned_superset")
    if pruned is None or superset is None:
        record("impossibility", False, "corpus lacks pruned_choice/pruned_superset entries")
    else:
        problems = []
        if typecheck(EMPTY_ENVS, pruned.process, pruned.session_type):
            problems.append("pruned entry unexpectedly well-typed")
        result = explore(Configuration(pruned.process, synthesize(pruned.session_type)), depth)
        if any(isinstance(r.kind, VerdictReached) and r.kind.kind.blames_process() for r in result.reports):
            problems.append("pruned entry reached a process-blaming verdict")
        witness = check_weak_completeness(pruned.process, pruned.session_type, depth)
        if not (isinstance(witness, Witness) and witness.report.classification == "3a"):
            problems.append(f"expected a class-3a witness, got {witness}")
        if check_soundness(superset.process, superset.session_type, depth) is not None:
            problems.append("unpruned superset failed soundness")
        record(
            "impossibility", not problems,
            problems[0] if problems else "pruned choice deadlocks unflagged (3a); its superset is sound",
        )

    # subject reduction
    failure = check_subject_reduction(sr_samples, seed)
    record(
        "subject-reduction", failure is None,
        str(failure) if failure else f"{sr_samples} samples, retyping disjunction holds",
    )

    return outcomes


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------

PINGPONG_TYPE = "rec X. +{!Ping(). ?Pong(). X, !Quit()}"

SMTP_TYPE = """
!M220(msg:Str). &{
  ?Helo(host:Str). !M250(msg:Str). rec X. &{
      ?MailFrom(addr:Str). !M250(msg:Str). rec Y. &{
          ?RcptTo(addr:Str). !M250(msg:Str). Y,
          ?Data(). !M354(msg:Str). ?Content(txt:Str). !M250(msg:Str). X,
          ?Quit(). !M221(msg:Str)},
      ?Quit(). !M221(msg:Str)},
  ?Quit(). !M221(msg:Str)}
"""


@dataclass(frozen=True)
class BenchReport:
    protocol: str
    mode: str
    iterations: int
    mean_ms: float
    p99_ms: float
    cpu_s: float
    max_rss_kb: int
    verdicts: int

    def csv_row(self) -> str:
        return f"{self.protocol},{self.mode},{self.iterations},{self.mean_ms:.4f},{self.p99_ms:.4f}"

    def __str__(self) -> str:
        return (
            f"{self.protocol} {self.mode}: {self.iterations} iterations, "
            f"mean {self.mean_ms:.4f} ms, p99 {self.p99_ms:.4f} ms, "
            f"cpu {self.cpu_s:.2f} s, peak rss {self.max_rss_kb} KiB, "
            f"verdicts {self.verdicts}"
        )


class BenchError(Exception):
    pass


def _listener() -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind(("127.0.0.1", 0))
    sock.listen()
    return sock


def _connect(addr: tuple[str, int]) -> socket.socket:
    sock = socket.create_connection(addr, timeout=30)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    sock.settimeout(30)
    return sock


def _peak_rss_kb() -> int:
    import resource

    return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss)


def run_benchmark(protocol: str, mode: str, iterations: int) -> BenchReport:
    """Drive a scripted client against a scripted server over loopback,
    directly or through a synthesized-monitor proxy, and report latencies."""
    if iterations < 1:
        raise BenchError("iterations must be at least 1")
    if mode not in ("Unsafe", "Monitored"):
        raise BenchError(f"unknown mode: {mode}")
    if protocol == "PingPong":
        runner = _run_pingpong
        type_text = PINGPONG_TYPE
    elif protocol == "SmtpFragment":
        runner = _run_smtp
        type_text = SMTP_TYPE
    else:
        raise BenchError(f"unknown protocol: {protocol}")

    cpu0 = time.process_time()
    latencies, verdicts = runner(mode, iterations, type_text)
    cpu1 = time.process_time()

    latencies.sort()
    mean_ms = 1000.0 * sum(latencies) / len(latencies)
    p99_ms = 1000.0 * latencies[min(len(latencies) - 1, int(0.99 * (len(latencies) - 1)))]
    return BenchReport(
        protocol, mode, iterations, mean_ms, p99_ms, cpu1 - cpu0, _peak_rss_kb(), verdicts
    )


def _with_proxy(type_text: str, forward: tuple[str, int]):
    tmp = tempfile.NamedTemporaryFile("w", suffix=".st", delete=False)
    tmp.write(type_text)
    tmp.close()
    config = ProxyConfig(
        type_file=tmp.name,
        listen_endpoint=("127.0.0.1", 0),
        forward_endpoint=forward,
        predicates="none",
        session_limit=4,
        idle_timeout=30.0,
    )
    server = ProxyServer(config)
    addr = server.start()
    return server, addr


def _run_pingpong(mode: str, iterations: int, type_text: str) -> tuple[list[float], int]:
    codec = line_codec()
    server_listener = _listener()
    server_addr = server_listener.getsockname()

    def server() -> None:
        conn, _ = server_listener.accept()
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        conn.settimeout(30)
        reader = FrameReader(conn, codec)
        pong = codec.encode(Message("Pong", ()))
        while True:
            msg = reader.read_frame()
            if msg is None or msg.label == "Quit":
                break
            conn.sendall(pong)
        conn.close()

    server_thread = threading.Thread(target=server, daemon=True)
    server_thread.start()

    proxy = None
    target = server_addr
    if mode == "Monitored":
        proxy, target = _with_proxy(type_text, server_addr)

    latencies: list[float] = []
    client = _connect(target)
    reader = FrameReader(client, codec)
    ping = codec.encode(Message("Ping", ()))
    try:
        for _ in range(iterations):
            t0 = time.perf_counter()
            client.sendall(ping)
            msg = reader.read_frame()
            latencies.append(time.perf_counter() - t0)
            if msg is None or msg.label != "Pong":
                raise BenchError(f"expected Pong, got {msg}")
        client.sendall(codec.encode(Message("Quit", ())))
    finally:
        client.close()
    server_thread.join(timeout=10)

    verdicts = 0
    if proxy is not None:
        time.sleep(0.05)  # let the session thread log its completion
        proxy.stop()
        verdicts = sum(1 for log in proxy.logs if log.verdict is not None)
    return latencies, verdicts


def _run_smtp(mode: str, iterations: int, type_text: str) -> tuple[list[float], int]:
    codec = line_codec()
    client_listener = _listener()
    client_addr = client_listener.getsockname()

    proxy = None
    server_target = client_addr
    if mode == "Monitored":
        proxy, server_target = _with_proxy(type_text, client_addr)

    def server() -> None:
        # the untrusted peer: speaks the server side of the protocol but
        # initiates the TCP connection (towards the proxy or the client)
        sock = _connect(server_target)
        reader = FrameReader(sock, codec)
        replies = {
            "Helo": Message("M250", (_s("ok"),)),
            "MailFrom": Message("M250", (_s("ok"),)),
            "RcptTo": Message("M250", (_s("ok"),)),
            "Data": Message("M354", (_s("go ahead"),)),
            "Content": Message("M250", (_s("queued"),)),
        }
        sock.sendall(codec.encode(Message("M220", (_s("welcome"),))))
        while True:
            msg = reader.read_frame()
            if msg is None:
                break
            if msg.label == "Quit":
                sock.sendall(codec.encode(Message("M221", (_s("bye"),))))
                break
            sock.sendall(codec.encode(replies[msg.label]))
        sock.close()

    server_thread = threading.Thread(target=server, daemon=True)
    server_thread.start()

    conn, _ = client_listener.accept()
    conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    conn.settimeout(30)
    reader = FrameReader(conn, codec)
    latencies: list[float] = []

    def expect(label: str) -> None:
        msg = reader.read_frame()
        if msg is None or msg.label != label:
            raise BenchError(f"expected {label}, got {msg}")

    try:
        expect("M220")
        conn.sendall(codec.encode(Message("Helo", (_s("bench.local"),))))
        expect("M250")
        for _ in range(iterations):
            t0 = time.perf_counter()
            conn.sendall(codec.encode(Message("MailFrom", (_s("a@example"),))))
            expect("M250")
            conn.sendall(codec.encode(Message("RcptTo", (_s("b@example"),))))
            expect("M250")
            conn.sendall(codec.encode(Message("Data", ())))
            expect("M354")
            conn.sendall(codec.encode(Message("Content", (_s("hello world"),))))
            expect("M250")
            latencies.append(time.perf_counter() - t0)
        conn.sendall(codec.encode(Message("Quit", ())))
        expect("M221")
    finally:
        conn.close()
        client_listener.close()
    server_thread.join(timeout=10)

    verdicts = 0
    if proxy is not None:
        time.sleep(0.05)
        proxy.stop()
        verdicts = sum(1 for log in proxy.logs if log.verdict is not None)
    return latencies, verdicts


def _s(text: str):
    from .terms import StrV

    return StrV(text)
