"""Process, monitor, and composite transition semantics; exploration and
deterministic replay."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from sessmon.generators import gen_well_typed
from sessmon.parser import parse_monitor, parse_process, parse_type
from sessmon.semantics import (
    DEFAULT_DOMAIN,
    CleanTermination,
    Configuration,
    Deadlock,
    ExploreResult,
    RecvSlot,
    Running,
    StuckReport,
    ValueDomain,
    VerdictReached,
    classify_stuck,
    deliver_internal,
    explore,
    external_inputs,
    receive,
    run_trace,
    step_composite,
    step_monitor,
    step_process,
)
from sessmon.synthesis import synthesize
from sessmon.terms import (
    TAU,
    BoolV,
    ExtRecv,
    ExtSend,
    IntV,
    Message,
    Nil,
    ProcSend,
    StrV,
    Tau,
    Verdict,
    VerdictKind,
)


def msg(label, *values):
    out = []
    for v in values:
        if isinstance(v, bool):
            out.append(BoolV(v))
        elif isinstance(v, int):
            out.append(IntV(v))
        else:
            out.append(StrV(v))
    return Message(label, tuple(out))


class TestStepProcess:
    def test_rec_unfolds_silently(self, p_auth):
        steps = step_process(p_auth)
        assert len(steps) == 1
        action, cont = steps[0]
        assert action == TAU
        assert cont == parse_process(
            'send Auth("Bob","pwd"). recv { Succ(tok). 0, Fail(code).'
            ' rec X. send Auth("Bob","pwd"). recv { Succ(tok). 0, Fail(code). X } }'
        )

    def test_nil_has_no_steps(self):
        assert step_process(Nil()) == []

    def test_send_evaluates_arguments(self):
        p = parse_process('send Auth("Bob", "pwd"). 0')
        ((action, cont),) = step_process(p)
        assert action == ProcSend(msg("Auth", "Bob", "pwd"))
        assert cont == Nil()

    def test_receive_slots_and_domain_enumeration(self):
        p = parse_process("recv { Succ(tok). 0, Fail(code). 0 }")
        slots = [s for s, _ in step_process(p)]
        assert slots == [RecvSlot("Succ", 1), RecvSlot("Fail", 1)]
        for value in DEFAULT_DOMAIN.values_for(__import__("sessmon.terms", fromlist=["STR"]).STR):
            cont = receive(p, Message("Succ", (value,)))
            assert cont == Nil()

    def test_receive_substitutes_payload(self):
        p = parse_process("recv { Flag(b). send Echo(b) }")
        cont = receive(p, msg("Flag", True))
        assert cont == parse_process("send Echo(tt)")

    def test_conditional_eval_error_means_stuck(self):
        p = parse_process('if 1 == "a" then 0 else 0')
        assert step_process(p) == []

    def test_conditional_true_false(self):
        p = parse_process("if 1 < 2 then send A() else send B()")
        ((action, cont),) = step_process(p)
        assert action == TAU and cont == parse_process("send A()")


class TestStepMonitor:
    def test_label_violation_reaches_verdict(self):
        m_bad = parse_monitor("recvP { Login(uname). sendE Login(uname). 0 }")
        result = deliver_internal(m_bad, (), msg("Auth", "Bob", "pwd"))
        assert result is not None
        assert result[0] == Verdict(VerdictKind.NO_P_LABEL)

    def test_verdicts_halt(self):
        assert step_monitor(Verdict(VerdictKind.NO_P_LABEL), ()) == []
        assert deliver_internal(Verdict(VerdictKind.NO_E_LABEL), (), msg("A")) is None

    def test_conditional_true(self):
        m = parse_monitor("if tt then sendE A(). 0 else no_P")
        ((action, cont, env),) = step_monitor(m, ())
        assert action == TAU
        assert cont == parse_monitor("sendE A(). 0")

    def test_receive_extends_environment(self):
        m = parse_monitor("recvP { A(x). sendE A(x). 0 }")
        cont, env = deliver_internal(m, (), msg("A", 7))
        assert dict(env) == {"x": IntV(7)}
        ((action, _, _),) = step_monitor(cont, env)
        assert action == ExtSend(msg("A", 7))


class TestStepComposite:
    def test_auth_synchronization(self, p_auth, m_auth):
        c = Configuration(p_auth, m_auth)
        # unfold both sides, then the send synchronizes silently
        for _ in range(3):
            steps = step_composite(c)
            assert all(a == TAU for a, _ in steps)
            c = steps[0][1]
        # now the monitor checks payload types, still silent
        assert not isinstance(c.monitor, Verdict)

    def test_monitor_forwards_to_process(self):
        p = parse_process("recv { Fail(code). 0 }")
        m = parse_monitor("sendP Fail(1). 0")
        ((action, c2),) = step_composite(Configuration(p, m))
        assert action == TAU
        assert c2.process == Nil()

    def test_terminated_pair_has_no_steps(self):
        from sessmon.terms import MonNil

        assert step_composite(Configuration(Nil(), MonNil())) == []

    def test_verdict_config_has_no_successors(self, p_auth):
        c = Configuration(p_auth, Verdict(VerdictKind.NO_P_LABEL))
        assert step_composite(c) == []

    def test_external_inputs_enumerate_labels_and_domain(self):
        m = synthesize(parse_type("&{?A(x:Int). end, ?B(y:Str). end}"))
        inputs = external_inputs(m, DEFAULT_DOMAIN)
        labels = {i.label for i in inputs}
        assert labels == {"A", "B"}
        # each branch gets the whole value universe
        assert len(inputs) == 2 * len(DEFAULT_DOMAIN.universe())

    def test_alien_labels_only_with_extended_domains(self):
        m = synthesize(parse_type("?A(x:Int). end"))
        plain = external_inputs(m, DEFAULT_DOMAIN)
        extended = external_inputs(m, DEFAULT_DOMAIN.extended())
        assert all(i.label == "A" for i in plain)
        assert any(i.label == "Alien" for i in extended)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**9))
    def test_composite_actions_are_external_only(self, seed):
        rng = random.Random(seed)
        p, s = gen_well_typed(rng, max_depth=3)
        c = Configuration(p, synthesize(s))
        for _ in range(5):
            steps = step_composite(c)
            if not steps:
                break
            for action, _ in steps:
                assert isinstance(action, (Tau, ExtSend, ExtRecv))
            c = rng.choice(steps)[1]


class TestExplore:
    def test_bad_client_flagged(self, p_bad, m_auth):
        result = explore(Configuration(p_bad, m_auth), 8)
        assert result.has_verdict(VerdictKind.NO_P_LABEL)

    def test_nil_nil_clean(self):
        from sessmon.terms import MonNil

        for depth in (0, 1, 5):
            result = explore(Configuration(Nil(), MonNil()), depth)
            assert [r.kind for r in result.reports] == [CleanTermination()]

    def test_impossibility_counterexample(self):
        s = parse_type("&{?A(x:Int). end, ?B(y:Int). end}")
        p = parse_process("recv { A(x). 0 }")
        result = explore(Configuration(p, synthesize(s)), 8)
        deadlocks = [r for r in result.reports if isinstance(r.kind, Deadlock)]
        assert any(r.classification == "3a" for r in deadlocks)
        assert not result.has_verdict(VerdictKind.NO_P_LABEL)
        assert not result.has_verdict(VerdictKind.NO_P_ASSERT)

    def test_budget_marker(self, p_auth, m_auth):
        shallow = explore(Configuration(p_auth, m_auth), 1)
        assert shallow.truncated
        deep = explore(Configuration(p_auth, m_auth), 64)
        assert not deep.truncated  # the loop state space is finite

    def test_verdict_irrevocable(self, p_bad, m_auth):
        result = explore(Configuration(p_bad, m_auth), 32)
        for report in result.reports:
            if isinstance(report.kind, VerdictReached):
                assert step_composite(report.config) == []

    def test_deduplicates_visited(self, p_auth, m_auth):
        r1 = explore(Configuration(p_auth, m_auth), 24)
        r2 = explore(Configuration(p_auth, m_auth), 32)
        # the cyclic state space stops growing once covered
        assert r2.visited == r1.visited


class TestRunTrace:
    def test_auth_fail_loop(self, p_auth, m_auth):
        log, outcome = run_trace(Configuration(p_auth, m_auth), [msg("Fail", 1)])
        assert log == [
            ExtSend(msg("Auth", "Bob", "pwd")),
            ExtRecv(msg("Fail", 1)),
            ExtSend(msg("Auth", "Bob", "pwd")),
        ]
        assert outcome == Running()

    def test_wrong_environment_label(self, p_auth, m_auth):
        log, outcome = run_trace(Configuration(p_auth, m_auth), [msg("Res", 227)])
        assert isinstance(outcome, StuckReport)
        assert outcome.kind == VerdictReached(VerdictKind.NO_E_LABEL)

    def test_nil_nil_clean(self):
        from sessmon.terms import MonNil

        log, outcome = run_trace(Configuration(Nil(), MonNil()), [])
        assert log == []
        assert isinstance(outcome, StuckReport)
        assert outcome.kind == CleanTermination()

    def test_deterministic(self, p_auth, m_auth):
        script = [msg("Fail", 1), msg("Fail", 2), msg("Succ", "tok")]
        first = run_trace(Configuration(p_auth, m_auth), script)
        second = run_trace(Configuration(p_auth, m_auth), script)
        assert first == second

    def test_bad_client_immediate_verdict(self, p_bad, m_auth):
        log, outcome = run_trace(Configuration(p_bad, m_auth), [])
        assert log == []  # nothing externally visible happens
        assert isinstance(outcome, StuckReport)
        assert outcome.kind == VerdictReached(VerdictKind.NO_P_LABEL)
        # the verdict lands within two silent steps of the offending send
        assert len(outcome.trace) <= 3

    def test_step_budget(self, p_auth, m_auth):
        log, outcome = run_trace(Configuration(p_auth, m_auth), [msg("Fail", 1)] * 100, max_steps=10)
        assert outcome == Running(truncated=True)


class TestClassification:
    def test_taxonomy_cases(self):
        cases = [
            # (process, monitor-of-type, expected class)
            ("recv { A(v). 0 }", "!A(x:Int). end", "2a"),
            ("0", "!A(x:Int). end", "2b"),
            ("send A(1)", "?A(x:Int). end", "3b"),
            ("0", "?A(x:Int). end", "3c"),
            ("rec X. send A(1). X", "!A(x:Int). end", "4"),
            ('if 1 == "a" then 0 else 0', "end", "5"),
        ]
        for proc_src, type_src, expected in cases:
            p = parse_process(proc_src)
            m = synthesize(parse_type(type_src))
            result = explore(Configuration(p, m), 16)
            classes = {r.classification for r in result.reports}
            assert expected in classes, (proc_src, type_src, classes)

    def test_verdict_is_class_1(self, p_bad, m_auth):
        result = explore(Configuration(p_bad, m_auth), 8)
        verdicts = [r for r in result.reports if isinstance(r.kind, VerdictReached)]
        assert verdicts and all(r.classification == "1" for r in verdicts)


def test_value_domain_defaults():
    assert DEFAULT_DOMAIN.ints == (0, 1)
    assert DEFAULT_DOMAIN.strs == ("a", "b")
    assert DEFAULT_DOMAIN.bools == (True, False)
    with pytest.raises(ValueError):
        ValueDomain(ints=())


def test_payload_environment_in_dedup(m_auth, p_auth):
    # configurations differing only in payload bindings are distinct states
    c1 = Configuration(p_auth, m_auth, (("x", IntV(1)),))
    c2 = Configuration(p_auth, m_auth, (("x", IntV(2)),))
    assert c1 != c2
