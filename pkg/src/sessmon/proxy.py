"""Synthesized monitors deployed as TCP proxies.

The proxy sits between an untrusted peer (which connects to the listen
endpoint) and a trusted peer (which the proxy connects to). Each session
interprets the synthesized monitor directly: messages from the untrusted
side are run-time checked and forwarded to the trusted side, and vice
versa; the first violation halts the session with a verdict attributing
blame. Timeouts close the session without a verdict: a slow peer is not
evidence of a violation.
"""

from __future__ import annotations

import itertools
import os
import socket
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

from .parser import parse_type
from .synthesis import synthesize
from .terms import (
    BoolV,
    EvalError,
    Expr,
    IntV,
    INT64_MAX,
    INT64_MIN,
    IsType,
    Message,
    MonIf,
    MonNil,
    Monitor,
    MonVar,
    PredCall,
    PredicateFn,
    RecMon,
    RecvExternal,
    RecvInternal,
    SendExternal,
    SendInternal,
    SessionType,
    StrV,
    TupleV,
    Value,
    Verdict,
    VerdictKind,
    eval_expr,
    is_ident,
)
from .typecheck import check_well_formed

MAX_FRAME = 64 * 1024

UNTRUSTED = "untrusted"
TRUSTED = "trusted"


class FrameError(Exception):
    """A wire frame could not be decoded (malformed, oversize, bad escape)."""


class ConfigError(Exception):
    """The proxy configuration is unusable; raised before serving starts."""


# ---------------------------------------------------------------------------
# Line codec
# ---------------------------------------------------------------------------


class LineCodec:
    """One message per LF-terminated line: ``Label(v1,v2,...)``.

    Integers are decimal (optional leading ``-``), strings double-quoted
    with ``\\" \\\\ \\n \\t`` escapes, booleans ``true``/``false``. No
    whitespace outside strings; frames over 64 KiB are rejected.
    """

    def encode(self, msg: Message) -> bytes:
        parts = [msg.label, "("]
        for i, value in enumerate(msg.payload):
            if i:
                parts.append(",")
            parts.append(self._encode_value(value))
        parts.append(")\n")
        data = "".join(parts).encode("utf-8")
        if len(data) > MAX_FRAME:
            raise FrameError("frame exceeds 64 KiB")
        return data

    def _encode_value(self, value: Value) -> str:
        if isinstance(value, IntV):
            return str(value.value)
        if isinstance(value, StrV):
            out = ['"']
            for ch in value.value:
                out.append({'"': '\\"', "\\": "\\\\", "\n": "\\n", "\t": "\\t"}.get(ch, ch))
            out.append('"')
            return "".join(out)
        if isinstance(value, BoolV):
            return "true" if value.value else "false"
        if isinstance(value, TupleV):
            raise FrameError("tuple values are not wire-representable")
        raise FrameError(f"unknown value: {value!r}")

    def decode(self, data: bytes) -> tuple[Message, bytes]:
        """Consume exactly one frame from the head of `data`; return the
        message and the unconsumed remainder."""
        idx = data.find(b"\n")
        if idx < 0:
            if len(data) > MAX_FRAME:
                raise FrameError("frame exceeds 64 KiB")
            raise FrameError("incomplete frame")
        if idx > MAX_FRAME:
            raise FrameError("frame exceeds 64 KiB")
        return self.decode_line(data[:idx]), data[idx + 1 :]

    def decode_line(self, line: bytes) -> Message:
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FrameError(f"bad encoding: {exc}") from None
        pos = 0
        n = len(text)

        def fail(msg: str) -> FrameError:
            return FrameError(f"{msg} at offset {pos}: {text!r}")

        start = pos
        while pos < n and (text[pos].isalnum() or text[pos] == "_"):
            pos += 1
        label = text[start:pos]
        if not is_ident(label):
            raise fail("bad label")
        if pos >= n or text[pos] != "(":
            raise fail("expected '('")
        pos += 1
        values: list[Value] = []
        if pos < n and text[pos] != ")":
            while True:
                value, pos = self._decode_value(text, pos)
                values.append(value)
                if pos < n and text[pos] == ",":
                    pos += 1
                    continue
                break
        if pos >= n or text[pos] != ")":
            raise fail("expected ')'")
        pos += 1
        if pos != n:
            raise fail("trailing bytes after frame")
        return Message(label, tuple(values))

    def _decode_value(self, text: str, pos: int) -> tuple[Value, int]:
        n = len(text)
        if pos >= n:
            raise FrameError(f"expected a value at offset {pos}: {text!r}")
        ch = text[pos]
        if ch == "-" or ch.isdigit():
            start = pos
            if ch == "-":
                pos += 1
            digits = pos
            while pos < n and text[pos].isdigit():
                pos += 1
            if pos == digits:
                raise FrameError(f"bad integer at offset {start}: {text!r}")
            value = int(text[start:pos])
            if not INT64_MIN <= value <= INT64_MAX:
                raise FrameError("integer out of 64-bit range")
            return IntV(value), pos
        if ch == '"':
            pos += 1
            out: list[str] = []
            while True:
                if pos >= n:
                    raise FrameError(f"unterminated string: {text!r}")
                c = text[pos]
                if c == '"':
                    return StrV("".join(out)), pos + 1
                if c == "\\":
                    if pos + 1 >= n:
                        raise FrameError(f"unterminated escape: {text!r}")
                    esc = text[pos + 1]
                    mapped = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}.get(esc)
                    if mapped is None:
                        raise FrameError(f"unknown escape \\{esc}: {text!r}")
                    out.append(mapped)
                    pos += 2
                    continue
                out.append(c)
                pos += 1
        if text.startswith("true", pos):
            return BoolV(True), pos + 4
        if text.startswith("false", pos):
            return BoolV(False), pos + 5
        raise FrameError(f"bad value at offset {pos}: {text!r}")


def line_codec() -> LineCodec:
    return LineCodec()


class FrameReader:
    """Buffered single-frame reads off a socket."""

    def __init__(self, sock: socket.socket, codec: LineCodec):
        self.sock = sock
        self.codec = codec
        self.buffer = b""

    def read_frame(self) -> Optional[Message]:
        """The next message; None on clean EOF at a frame boundary.

        Raises FrameError on malformed or oversize input, ConnectionError
        on EOF inside a frame, socket.timeout on idle timeout.
        """
        while True:
            idx = self.buffer.find(b"\n")
            if idx >= 0:
                line, self.buffer = self.buffer[:idx], self.buffer[idx + 1 :]
                if len(line) > MAX_FRAME:
                    raise FrameError("frame exceeds 64 KiB")
                return self.codec.decode_line(line)
            if len(self.buffer) > MAX_FRAME:
                raise FrameError("frame exceeds 64 KiB")
            chunk = self.sock.recv(65536)
            if not chunk:
                if self.buffer:
                    raise ConnectionError("peer closed inside a frame")
                return None
            self.buffer += chunk


# ---------------------------------------------------------------------------
# Predicate registries
# ---------------------------------------------------------------------------


def _want(args: list[Value], *types) -> list:
    if len(args) != len(types):
        raise EvalError(f"expected {len(types)} argument(s), got {len(args)}")
    out = []
    for value, want in zip(args, types):
        if not isinstance(value, want):
            raise EvalError(f"argument {value} is not a {want.__name__}")
        out.append(value.value)
    return out


def builtin_predicates() -> dict[str, PredicateFn]:
    """Demo stand-ins for user-supplied predicates.

    The names follow the authentication example; the semantics here are
    placeholders: a valid username is a nonempty alphanumeric string, and
    a valid token is "tok-" followed by the username it was issued for.
    """

    def valid_uname(args: list[Value]) -> bool:
        (s,) = _want(args, StrV)
        return bool(s) and s.isalnum()

    def valid_tok(args: list[Value]) -> bool:
        t, u = _want(args, StrV, StrV)
        return t == "tok-" + u

    def non_empty(args: list[Value]) -> bool:
        (s,) = _want(args, StrV)
        return bool(s)

    def positive(args: list[Value]) -> bool:
        (i,) = _want(args, IntV)
        return i > 0

    return {
        "validUname": valid_uname,
        "validTok": valid_tok,
        "nonEmpty": non_empty,
        "positive": positive,
    }


REGISTRIES: dict[str, Callable[[], dict[str, PredicateFn]]] = {
    "builtin": builtin_predicates,
    "none": dict,
}


def _predicate_names(expr: Expr) -> set[str]:
    if isinstance(expr, PredCall):
        out = {expr.name}
        for a in expr.args:
            out |= _predicate_names(a)
        return out
    out = set()
    for attr in ("lhs", "rhs", "operand"):
        sub = getattr(expr, attr, None)
        if sub is not None:
            out |= _predicate_names(sub)
    if isinstance(expr, IsType):
        out |= _predicate_names(expr.operand)
    for attr in ("items", "args"):
        subs = getattr(expr, attr, None)
        if subs is not None:
            for sub in subs:
                out |= _predicate_names(sub)
    return out


def predicates_in_type(s: SessionType) -> set[str]:
    from .terms import Branch, RecType, Select

    if isinstance(s, (Select, Branch)):
        out: set[str] = set()
        for b in s.branches:
            out |= _predicate_names(b.assertion)
            out |= predicates_in_type(b.cont)
        return out
    if isinstance(s, RecType):
        return predicates_in_type(s.body)
    return set()


# ---------------------------------------------------------------------------
# Sessions and logging
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Forwarded:
    direction: str  # side that produced the message: untrusted | trusted
    message: Message

    def log_fields(self) -> tuple[str, str]:
        return ("forwarded", f"{self.direction} {self.message}")


@dataclass(frozen=True)
class Flagged:
    kind: VerdictKind
    offending: Optional[Message]

    def log_fields(self) -> tuple[str, str]:
        what = str(self.offending) if self.offending is not None else "<frame error>"
        return ("flagged", f"{self.kind.value} {what}")


@dataclass(frozen=True)
class Closed:
    reason: str  # completed | violation | peer_disconnect <side> | timeout

    def log_fields(self) -> tuple[str, str]:
        return ("closed", self.reason)


SessionEvent = Union[Forwarded, Flagged, Closed]


@dataclass
class SessionLog:
    session_id: int
    events: list[SessionEvent] = field(default_factory=list)

    @property
    def verdict(self) -> Optional[VerdictKind]:
        for event in self.events:
            if isinstance(event, Flagged):
                return event.kind
        return None

    def forwarded(self, direction: Optional[str] = None) -> list[Message]:
        return [
            e.message
            for e in self.events
            if isinstance(e, Forwarded) and (direction is None or e.direction == direction)
        ]


@dataclass(frozen=True)
class ProxyConfig:
    type_file: Union[str, Path]
    listen_endpoint: tuple[str, int]
    forward_endpoint: tuple[str, int]
    predicates: str = "builtin"
    session_limit: int = 8
    idle_timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.listen_endpoint == self.forward_endpoint:
            raise ConfigError("listen and forward endpoints must differ")
        if self.session_limit < 1:
            raise ConfigError("session_limit must be at least 1")
        if self.idle_timeout <= 0:
            raise ConfigError("idle_timeout must be positive")


class ProxySession:
    """One monitored connection pair, driven by interpreting the monitor."""

    def __init__(
        self,
        session_id: int,
        monitor: Monitor,
        untrusted: socket.socket,
        trusted: socket.socket,
        predicates: dict[str, PredicateFn],
        codec: LineCodec,
        emit: Callable[[int, SessionEvent], None],
    ):
        self.log = SessionLog(session_id)
        self.monitor = monitor
        self.untrusted = untrusted
        self.trusted = trusted
        self.predicates = predicates
        self.codec = codec
        self.emit = emit
        self.env: dict[str, Value] = {}
        self.last_side = UNTRUSTED
        self._last_message: Optional[Message] = None

    def _event(self, event: SessionEvent) -> None:
        self.log.events.append(event)
        self.emit(self.log.session_id, event)

    def run(self) -> SessionLog:
        try:
            self._interpret()
        finally:
            for sock in (self.untrusted, self.trusted):
                try:
                    sock.close()
                except OSError:
                    pass
        return self.log

    def _interpret(self) -> None:
        m = self.monitor
        bindings: dict[str, Monitor] = {}
        readers = {
            UNTRUSTED: FrameReader(self.untrusted, self.codec),
            TRUSTED: FrameReader(self.trusted, self.codec),
        }
        while True:
            if isinstance(m, RecMon):
                bindings[m.var] = m
                m = m.body
                continue
            if isinstance(m, MonVar):
                m = bindings[m.name].body
                continue
            if isinstance(m, MonIf):
                try:
                    cond = eval_expr(m.cond, self.env, self.predicates)
                    if not isinstance(cond, BoolV):
                        raise EvalError("assertion did not evaluate to a boolean")
                except EvalError:
                    # an unevaluable assertion cannot pass; blame the side
                    # whose message triggered it
                    kind = (
                        VerdictKind.NO_P_ASSERT
                        if self.last_side == UNTRUSTED
                        else VerdictKind.NO_E_ASSERT
                    )
                    self._flag(kind, self._last_message)
                    return
                m = m.then if cond.value else m.orelse
                continue
            if isinstance(m, Verdict):
                self._flag(m.kind, self._last_message)
                return
            if isinstance(m, MonNil):
                self._event(Closed("completed"))
                return
            if isinstance(m, (RecvInternal, RecvExternal)):
                side = UNTRUSTED if isinstance(m, RecvInternal) else TRUSTED
                label_verdict = (
                    VerdictKind.NO_P_LABEL if side == UNTRUSTED else VerdictKind.NO_E_LABEL
                )
                try:
                    msg = readers[side].read_frame()
                except FrameError:
                    self.last_side = side
                    self._last_message = None
                    self._flag(label_verdict, None)
                    return
                except socket.timeout:
                    self._event(Closed("timeout"))
                    return
                except (ConnectionError, OSError):
                    self._event(Closed(f"peer_disconnect {side}"))
                    return
                if msg is None:
                    self._event(Closed(f"peer_disconnect {side}"))
                    return
                self.last_side = side
                self._last_message = msg
                branch = m.branch(msg.label)
                if branch is None or len(branch.params) != len(msg.payload):
                    self._flag(label_verdict, msg)
                    return
                for name, value in zip(branch.params, msg.payload):
                    self.env[name] = value
                m = branch.cont
                continue
            if isinstance(m, (SendInternal, SendExternal)):
                target = TRUSTED if isinstance(m, SendExternal) else UNTRUSTED
                sock = self.trusted if target == TRUSTED else self.untrusted
                payload = tuple(eval_expr(a, self.env, self.predicates) for a in m.args)
                msg = Message(m.label, payload)
                try:
                    sock.sendall(self.codec.encode(msg))
                except (ConnectionError, OSError):
                    self._event(Closed(f"peer_disconnect {target}"))
                    return
                origin = UNTRUSTED if target == TRUSTED else TRUSTED
                self._event(Forwarded(origin, msg))
                m = m.cont
                continue
            raise TypeError(f"unknown monitor: {m!r}")

    def _flag(self, kind: VerdictKind, offending: Optional[Message]) -> None:
        self._event(Flagged(kind, offending))
        self._event(Closed("violation"))


class ProxyServer:
    """Accepts untrusted connections and runs one monitored session each."""

    def __init__(self, config: ProxyConfig, log_path: Optional[str] = None):
        self.config = config
        source = Path(config.type_file).read_text(encoding="utf-8")
        self.session_type = parse_type(source)
        violations = check_well_formed(self.session_type)
        if violations:
            raise ConfigError("; ".join(str(v) for v in violations))
        registry_factory = REGISTRIES.get(config.predicates)
        if registry_factory is None:
            raise ConfigError(f"unknown predicate registry: {config.predicates}")
        self.predicates = registry_factory()
        missing = predicates_in_type(self.session_type) - set(self.predicates)
        if missing:
            raise ConfigError(f"unresolved predicates: {', '.join(sorted(missing))}")
        self.monitor = synthesize(self.session_type)
        self.codec = line_codec()
        self.logs: list[SessionLog] = []
        self._lock = threading.Lock()
        self._ids = itertools.count(1)
        self._listener: Optional[socket.socket] = None
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()
        self._slots = threading.Semaphore(config.session_limit)
        self.log_path = log_path if log_path is not None else os.environ.get("SESSMON_LOG")
        self._log_file = None

    def start(self) -> tuple[str, int]:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(self.config.listen_endpoint)
        listener.listen()
        # a blocking accept() would not notice stop(); poll instead
        listener.settimeout(0.2)
        self._listener = listener
        if self.log_path:
            self._log_file = open(self.log_path, "a", encoding="utf-8")
        thread = threading.Thread(target=self._accept_loop, daemon=True)
        thread.start()
        self._threads.append(thread)
        return listener.getsockname()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, _addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            self._slots.acquire()
            if self._stopping.is_set():
                conn.close()
                self._slots.release()
                return
            thread = threading.Thread(target=self._run_session, args=(conn,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _run_session(self, untrusted: socket.socket) -> None:
        session_id = next(self._ids)
        try:
            untrusted.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            untrusted.settimeout(self.config.idle_timeout)
            try:
                trusted = socket.create_connection(self.config.forward_endpoint, timeout=self.config.idle_timeout)
            except OSError:
                untrusted.close()
                return
            trusted.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            trusted.settimeout(self.config.idle_timeout)
            session = ProxySession(
                session_id, self.monitor, untrusted, trusted,
                self.predicates, self.codec, self._emit,
            )
            log = session.run()
            with self._lock:
                self.logs.append(log)
        finally:
            self._slots.release()

    def _emit(self, session_id: int, event: SessionEvent) -> None:
        if self._log_file is None:
            return
        name, detail = event.log_fields()
        with self._lock:
            self._log_file.write(f"{session_id}\t{name}\t{detail}\n")
            self._log_file.flush()

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        for thread in self._threads:
            thread.join(timeout=5)
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    def serve_forever(self) -> None:
        self.start()
        try:
            while True:
                self._stopping.wait(1)
                if self._stopping.is_set():
                    return
        except KeyboardInterrupt:
            self.stop()


def serve(config: ProxyConfig) -> None:
    """Run the proxy until interrupted."""
    ProxyServer(config).serve_forever()
