import struct

import pytest
from hypothesis import given, settings, strategies as st

from eegscore.errors import MalformedPacket, UnsupportedArgType
from eegscore.ingest import (OscBundle, OscMessage, encode_osc_packet, iter_messages,
                             parse_osc_packet, read_replay, write_replay)

from osc_corpus import hand_message, malformed_fixtures, valid_fixtures


def test_int_message_hand_encoding():
    data = encode_osc_packet(OscMessage("/a", ",i", [7]))
    assert data == b"/a\x00\x00" + b",i\x00\x00" + b"\x00\x00\x00\x07"
    assert len(data) == 12


def test_empty_args_message_is_address_plus_comma_padding():
    assert encode_osc_packet(OscMessage("/x", ",", [])) == b"/x\x00\x00,\x00\x00\x00"


def test_eeg_message_parses_to_four_floats():
    msg = parse_osc_packet(hand_message("/muse/eeg", ",ffff", [1.0, 2.0, 3.0, 4.0]))
    assert isinstance(msg, OscMessage)
    assert msg.address == "/muse/eeg" and msg.type_tags == ",ffff"
    assert msg.args == [1.0, 2.0, 3.0, 4.0]


def test_bundle_with_two_messages():
    a = OscMessage("/a", ",i", [1])
    b = OscMessage("/b", ",f", [2.0])
    data = encode_osc_packet(OscBundle(1, [a, b]))
    assert data.startswith(b"#bundle\x00")
    parsed = parse_osc_packet(data)
    assert isinstance(parsed, OscBundle) and len(parsed.elements) == 2
    assert list(iter_messages(parsed)) == [a, b]


def test_missing_comma_rejected_with_offset():
    data = b"/a\x00\x00ffff\x00\x00\x00\x00" + b"\x00" * 16
    with pytest.raises(MalformedPacket) as err:
        parse_osc_packet(data)
    assert err.value.offset == 4


def test_truncated_argument_reports_offset():
    data = hand_message("/a", ",ii", [1, 2])[:-4]
    with pytest.raises(MalformedPacket) as err:
        parse_osc_packet(data)
    assert err.value.offset == 12


@pytest.mark.parametrize("name,packet,raw", valid_fixtures(), ids=lambda v: v if isinstance(v, str) else "")
def test_fixture_round_trip(name, packet, raw):
    assert encode_osc_packet(packet) == raw
    parsed = parse_osc_packet(raw)
    assert encode_osc_packet(parsed) == raw
    assert len(raw) % 4 == 0


@pytest.mark.parametrize("name,raw", malformed_fixtures(), ids=lambda v: v if isinstance(v, str) else "")
def test_malformed_fixture_rejected(name, raw):
    with pytest.raises(MalformedPacket) as err:
        parse_osc_packet(raw)
    assert 0 <= err.value.offset <= len(raw)


def test_unsupported_argument_types():
    with pytest.raises(UnsupportedArgType):
        encode_osc_packet(OscMessage.build("/a", [1, 2]))
    with pytest.raises(UnsupportedArgType):
        encode_osc_packet(OscMessage("/a", ",d", [1.0]))
    with pytest.raises(UnsupportedArgType):
        encode_osc_packet(OscMessage("/a", ",i", [2 ** 31]))


def test_build_infers_tags():
    msg = OscMessage.build("/m", 1, 2.5, "s", b"b")
    assert msg.type_tags == ",ifsb"


def test_replay_file_round_trip(tmp_path):
    datagrams = [raw for _, _, raw in valid_fixtures()]
    path = tmp_path / "cap.osc"
    write_replay(path, datagrams)
    blob = path.read_bytes()
    assert struct.unpack(">I", blob[:4])[0] == len(datagrams[0])
    assert list(read_replay(path)) == datagrams


_ascii = st.text(alphabet=st.characters(min_codepoint=33, max_codepoint=126), max_size=12)
_arg = st.one_of(
    st.integers(-(2 ** 31), 2 ** 31 - 1),
    st.floats(width=32, allow_nan=False),
    _ascii,
    st.binary(max_size=9),
)
_messages = st.builds(lambda a, args: OscMessage.build("/" + a, *args), _ascii, st.lists(_arg, max_size=6))
_packets = st.recursive(
    _messages,
    lambda children: st.builds(OscBundle, st.integers(0, 2 ** 64 - 1), st.lists(children, max_size=4)),
    max_leaves=8,
)


@settings(max_examples=300, deadline=None)
@given(_packets)
def test_encode_parse_identity(packet):
    data = encode_osc_packet(packet)
    assert len(data) % 4 == 0
    parsed = parse_osc_packet(data)
    assert parsed == packet
    assert encode_osc_packet(parsed) == data


@settings(max_examples=300, deadline=None)
@given(_messages, st.data())
def test_truncation_never_parses_silently(msg, data):
    raw = encode_osc_packet(msg)
    cut = data.draw(st.integers(0, len(raw) - 1))
    try:
        parsed = parse_osc_packet(raw[:cut])
    except MalformedPacket:
        return
    # only dropping trailing zero padding may still decode, and then to the same message
    assert raw[cut:].strip(b"\x00") == b"" or parsed == msg
