"""Wire codec: framing, escapes, round trips."""

import pytest
from hypothesis import given, settings, strategies as st

from sessmon.proxy import MAX_FRAME, FrameError, line_codec
from sessmon.terms import BoolV, IntV, Message, StrV, TupleV

codec = line_codec()


class TestEncode:
    def test_auth(self):
        msg = Message("Auth", (StrV("Bob"), StrV("pwd")))
        assert codec.encode(msg) == b'Auth("Bob","pwd")\n'

    def test_empty_payload(self):
        assert codec.encode(Message("Ping", ())) == b"Ping()\n"

    def test_escapes(self):
        msg = Message("S", (StrV('a"b\\c\nd\te'),))
        assert codec.encode(msg) == b'S("a\\"b\\\\c\\nd\\te")\n'

    def test_booleans(self):
        assert codec.encode(Message("F", (BoolV(True), BoolV(False)))) == b"F(true,false)\n"

    def test_tuple_not_representable(self):
        with pytest.raises(FrameError):
            codec.encode(Message("T", (TupleV((IntV(1),)),)))

    def test_oversize(self):
        with pytest.raises(FrameError):
            codec.encode(Message("Big", (StrV("x" * (MAX_FRAME + 1)),)))


class TestDecode:
    def test_fail(self):
        msg, rest = codec.decode(b"Fail(1)\n")
        assert msg == Message("Fail", (IntV(1),))
        assert rest == b""

    def test_negative_int(self):
        assert codec.decode_line(b"N(-42)") == Message("N", (IntV(-42),))

    def test_consumes_exactly_one_frame(self):
        msg, rest = codec.decode(b"A(1)\nB(2)\n")
        assert msg == Message("A", (IntV(1),))
        assert rest == b"B(2)\n"

    def test_incomplete(self):
        with pytest.raises(FrameError):
            codec.decode(b"Fail(1)")

    @pytest.mark.parametrize(
        "line",
        [
            b"(1)",            # missing label
            b"A 1)",           # bad punctuation
            b"A(1",            # unterminated
            b"A(1) ",          # trailing bytes
            b'A("x\\q")',      # unknown escape
            b"A(01x)",         # junk value
            b"A(1,)",          # dangling comma
            b"a b(1)",         # whitespace outside strings
            b"A(99999999999999999999)",  # out of 64-bit range
        ],
    )
    def test_malformed(self, line):
        with pytest.raises(FrameError):
            codec.decode_line(line)

    def test_oversize(self):
        with pytest.raises(FrameError):
            codec.decode(b"A(" + b"1" * (MAX_FRAME + 8) + b")\n")


values = st.one_of(
    st.integers(min_value=-(2**63), max_value=2**63 - 1).map(IntV),
    st.text(max_size=30).map(StrV),
    st.booleans().map(BoolV),
)
messages = st.builds(
    Message,
    st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,10}", fullmatch=True),
    st.tuples() | st.tuples(values) | st.tuples(values, values) | st.tuples(values, values, values),
)


@settings(max_examples=300, deadline=None)
@given(messages)
def test_round_trip(msg):
    encoded = codec.encode(msg)
    decoded, rest = codec.decode(encoded)
    assert decoded == msg
    assert rest == b""
    assert codec.encode(decoded) == encoded
