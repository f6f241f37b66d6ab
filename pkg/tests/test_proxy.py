"""Proxy runtime: forwarding, verdicts, fail-fast, predicates, timeouts."""

import re
import socket
import threading
import time

import pytest
from hypothesis import given, settings, strategies as st

from sessmon.harness import replay_outcome
from sessmon.proxy import (
    ConfigError,
    Closed,
    Flagged,
    Forwarded,
    FrameReader,
    ProxyConfig,
    ProxyServer,
    builtin_predicates,
    line_codec,
)
from sessmon.terms import EvalError, IntV, Message, StrV, VerdictKind

codec = line_codec()


def send(sock, label, *values):
    payload = tuple(StrV(v) if isinstance(v, str) else IntV(v) for v in values)
    data = codec.encode(Message(label, payload))
    sock.sendall(data)
    return data


class EchoServerHandle:
    """A scripted trusted peer: replies to Auth per a plan, records bytes."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.received = b""
        self.sent = b""
        self.listener = socket.socket()
        self.listener.settimeout(10)
        self.listener.bind(("127.0.0.1", 0))
        self.listener.listen()
        self.addr = self.listener.getsockname()
        self.thread = threading.Thread(target=self._run, daemon=True)
        self.thread.start()

    def _run(self):
        try:
            conn, _ = self.listener.accept()
        except (OSError, socket.timeout):
            return
        conn.settimeout(10)
        reader = FrameReader(conn, codec)
        try:
            while self.replies:
                msg = reader.read_frame()
                if msg is None:
                    return
                self.received += codec.encode(msg)
                reply = self.replies.pop(0)
                data = codec.encode(reply)
                self.sent += data
                conn.sendall(data)
        except (OSError, socket.timeout):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def close(self):
        self.listener.close()
        self.thread.join(timeout=5)


@pytest.fixture()
def auth_proxy(corpus_dir):
    """Factory: spin a proxy for the asserted auth type against a scripted
    trusted peer; yields (proxy, connect_addr, peer)."""
    created = []

    def make(replies, idle_timeout=10.0):
        peer = EchoServerHandle(replies)
        server = ProxyServer(
            ProxyConfig(
                type_file=str(corpus_dir / "auth_asserted.st"),
                listen_endpoint=("127.0.0.1", 0),
                forward_endpoint=peer.addr,
                idle_timeout=idle_timeout,
            )
        )
        addr = server.start()
        created.append((server, peer))
        return server, addr, peer

    yield make
    for server, peer in created:
        server.stop()
        peer.close()


def wait_for_logs(server, count, timeout=5.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        if len(server.logs) >= count:
            return server.logs
        time.sleep(0.01)
    raise AssertionError(f"expected {count} session logs, have {len(server.logs)}")


class TestForwarding:
    def test_conforming_session_loops(self, auth_proxy):
        server, addr, peer = auth_proxy([
            Message("Fail", (IntV(1),)),
            Message("Succ", (StrV("tok-Bob"),)),
        ])
        client = socket.create_connection(addr, timeout=10)
        client.settimeout(10)
        reader = FrameReader(client, codec)
        sent = send(client, "Auth", "Bob", "pwd")
        assert reader.read_frame() == Message("Fail", (IntV(1),))
        sent += send(client, "Auth", "Bob", "pwd")
        assert reader.read_frame() == Message("Succ", (StrV("tok-Bob"),))
        assert reader.read_frame() is None  # protocol complete, session closed
        client.close()
        (log,) = wait_for_logs(server, 1)
        assert log.verdict is None
        assert [e for e in log.events if isinstance(e, Closed)][-1].reason == "completed"
        # partial identity: each peer got exactly the other's frames, in order
        assert peer.received == sent
        assert [str(m) for m in log.forwarded("trusted")] == ['Fail(1)', 'Succ("tok-Bob")']

    def test_wrong_label_is_flagged_and_not_forwarded(self, auth_proxy):
        server, addr, peer = auth_proxy([])
        client = socket.create_connection(addr, timeout=10)
        client.settimeout(10)
        send(client, "Login", "Bob")
        assert FrameReader(client, codec).read_frame() is None
        client.close()
        (log,) = wait_for_logs(server, 1)
        assert log.verdict == VerdictKind.NO_P_LABEL
        assert log.forwarded() == []
        assert peer.received == b""  # fail-fast: nothing reached the peer

    def test_payload_type_violation(self, auth_proxy):
        server, addr, peer = auth_proxy([])
        client = socket.create_connection(addr, timeout=10)
        send(client, "Auth", 1, "pwd")
        assert FrameReader(client, codec).read_frame() is None
        client.close()
        (log,) = wait_for_logs(server, 1)
        assert log.verdict == VerdictKind.NO_P_LABEL
        assert peer.received == b""

    def test_assertion_violation_by_process(self, auth_proxy):
        # empty username fails validUname
        server, addr, peer = auth_proxy([])
        client = socket.create_connection(addr, timeout=10)
        send(client, "Auth", "", "pwd")
        assert FrameReader(client, codec).read_frame() is None
        client.close()
        (log,) = wait_for_logs(server, 1)
        assert log.verdict == VerdictKind.NO_P_ASSERT
        assert peer.received == b""

    def test_assertion_violation_by_environment(self, auth_proxy):
        # token does not match the username: cross-message assertion
        server, addr, peer = auth_proxy([Message("Succ", (StrV("garbage"),))])
        client = socket.create_connection(addr, timeout=10)
        client.settimeout(10)
        send(client, "Auth", "Bob", "pwd")
        assert FrameReader(client, codec).read_frame() is None
        client.close()
        (log,) = wait_for_logs(server, 1)
        assert log.verdict == VerdictKind.NO_E_ASSERT

    def test_environment_label_violation(self, auth_proxy):
        server, addr, peer = auth_proxy([Message("Res", (IntV(227),))])
        client = socket.create_connection(addr, timeout=10)
        client.settimeout(10)
        send(client, "Auth", "Bob", "pwd")
        assert FrameReader(client, codec).read_frame() is None
        client.close()
        (log,) = wait_for_logs(server, 1)
        assert log.verdict == VerdictKind.NO_E_LABEL

    def test_malformed_frame_is_a_label_violation(self, auth_proxy):
        server, addr, peer = auth_proxy([])
        client = socket.create_connection(addr, timeout=10)
        client.sendall(b"this is not a frame\n")
        assert FrameReader(client, codec).read_frame() is None
        client.close()
        (log,) = wait_for_logs(server, 1)
        assert log.verdict == VerdictKind.NO_P_LABEL

    def test_idle_timeout_closes_without_verdict(self, auth_proxy):
        server, addr, peer = auth_proxy([], idle_timeout=0.3)
        client = socket.create_connection(addr, timeout=10)
        (log,) = wait_for_logs(server, 1, timeout=5)
        assert log.verdict is None
        assert [e for e in log.events if isinstance(e, Closed)][-1].reason == "timeout"
        client.close()

    def test_peer_disconnect(self, auth_proxy):
        server, addr, peer = auth_proxy([])
        client = socket.create_connection(addr, timeout=10)
        client.close()
        (log,) = wait_for_logs(server, 1)
        assert log.verdict is None
        reason = [e for e in log.events if isinstance(e, Closed)][-1].reason
        assert reason == "peer_disconnect untrusted"

    def test_session_isolation(self, auth_proxy):
        server, addr, _peer = auth_proxy([Message("Fail", (IntV(1),))])
        # session 1 starts and stays mid-protocol
        slow = socket.create_connection(addr, timeout=10)
        slow.settimeout(10)
        send(slow, "Auth", "Bob", "pwd")
        assert FrameReader(slow, codec).read_frame() == Message("Fail", (IntV(1),))
        # session 2 violates and gets flagged; needs its own trusted peer
        peer2 = EchoServerHandle([])
        server2 = ProxyServer(
            ProxyConfig(
                type_file=server.config.type_file,
                listen_endpoint=("127.0.0.1", 0),
                forward_endpoint=peer2.addr,
            )
        )
        addr2 = server2.start()
        bad = socket.create_connection(addr2, timeout=10)
        send(bad, "Login", "eve")
        assert FrameReader(bad, codec).read_frame() is None
        bad.close()
        # session 1 is unaffected: it can still talk
        send(slow, "Auth", "Bob", "pwd")
        slow.close()
        wait_for_logs(server2, 1)
        assert server2.logs[0].verdict == VerdictKind.NO_P_LABEL
        server2.stop()
        peer2.close()

    def test_replay_agreement(self, auth_proxy, s_auth_asserted):
        server, addr, peer = auth_proxy([Message("Fail", (IntV(1),))])
        client = socket.create_connection(addr, timeout=10)
        client.settimeout(10)
        send(client, "Auth", "Bob", "pwd")
        FrameReader(client, codec).read_frame()
        send(client, "Nonsense")
        client.close()
        (log,) = wait_for_logs(server, 1)
        assert log.verdict == VerdictKind.NO_P_LABEL
        assert replay_outcome(s_auth_asserted, log.events, builtin_predicates()) == log.verdict


class TestConfig:
    def test_endpoints_must_differ(self, corpus_dir):
        with pytest.raises(ConfigError):
            ProxyConfig(
                type_file=str(corpus_dir / "auth.st"),
                listen_endpoint=("127.0.0.1", 9),
                forward_endpoint=("127.0.0.1", 9),
            )

    def test_session_limit_positive(self, corpus_dir):
        with pytest.raises(ConfigError):
            ProxyConfig(
                type_file=str(corpus_dir / "auth.st"),
                listen_endpoint=("127.0.0.1", 1),
                forward_endpoint=("127.0.0.1", 2),
                session_limit=0,
            )

    def test_unresolved_predicates_rejected_at_start(self, corpus_dir):
        config = ProxyConfig(
            type_file=str(corpus_dir / "auth_asserted.st"),
            listen_endpoint=("127.0.0.1", 0),
            forward_endpoint=("127.0.0.1", 1),
            predicates="none",
        )
        with pytest.raises(ConfigError, match="validUname"):
            ProxyServer(config)

    def test_unknown_registry(self, corpus_dir):
        config = ProxyConfig(
            type_file=str(corpus_dir / "auth.st"),
            listen_endpoint=("127.0.0.1", 0),
            forward_endpoint=("127.0.0.1", 1),
            predicates="mystery",
        )
        with pytest.raises(ConfigError):
            ProxyServer(config)


class TestBuiltinPredicates:
    def test_valid_uname_examples(self):
        preds = builtin_predicates()
        assert preds["validUname"]([StrV("Bob")]) is True
        assert preds["validUname"]([StrV("")]) is False

    def test_valid_tok(self):
        preds = builtin_predicates()
        assert preds["validTok"]([StrV("tok-Bob"), StrV("Bob")]) is True
        assert preds["validTok"]([StrV("nope"), StrV("Bob")]) is False

    @settings(max_examples=200, deadline=None)
    @given(st.text(st.characters(min_codepoint=32, max_codepoint=126), max_size=12))
    def test_valid_uname_matches_regex_oracle(self, s):
        preds = builtin_predicates()
        assert preds["validUname"]([StrV(s)]) == bool(re.fullmatch(r"[0-9A-Za-z]+", s))

    def test_arity_mismatch_is_an_error(self):
        preds = builtin_predicates()
        with pytest.raises(EvalError):
            preds["validUname"]([])
        with pytest.raises(EvalError):
            preds["positive"]([StrV("not an int")])

    def test_remaining_builtins(self):
        preds = builtin_predicates()
        assert preds["nonEmpty"]([StrV("x")]) is True
        assert preds["nonEmpty"]([StrV("")]) is False
        assert preds["positive"]([IntV(3)]) is True
        assert preds["positive"]([IntV(0)]) is False
