"""OSC 1.0 packet codec.

Only the four core argument types are supported: int32 (``i``), float32
(``f``), OSC-string (``s``) and blob (``b``). Everything on the wire is
big-endian and padded to a 4-byte boundary.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from ..errors import FormatError, MalformedPacket, UnsupportedArgType

BUNDLE_HEADER = b"#bundle\x00"
IMMEDIATELY = 1  # OSC timetag meaning "now"

_INT32_MIN, _INT32_MAX = -(2 ** 31), 2 ** 31 - 1


@dataclass
class OscMessage:
    address: str
    type_tags: str = ","
    args: list = field(default_factory=list)

    @classmethod
    def build(cls, address: str, *args) -> "OscMessage":
        """Make a message, inferring the type-tag string from the Python args."""
        return cls(address, "," + "".join(_infer_tag(a) for a in args), list(args))


@dataclass
class OscBundle:
    timetag: int = IMMEDIATELY
    elements: list = field(default_factory=list)


Packet = Union[OscMessage, OscBundle]


def _infer_tag(arg) -> str:
    if isinstance(arg, bool):
        raise UnsupportedArgType("bool arguments are not part of OSC 1.0 core types")
    if isinstance(arg, int):
        return "i"
    if isinstance(arg, float):
        return "f"
    if isinstance(arg, str):
        return "s"
    if isinstance(arg, (bytes, bytearray)):
        return "b"
    raise UnsupportedArgType(f"cannot encode {type(arg).__name__} as an OSC argument")


def _pad(n: int) -> int:
    return (4 - n % 4) % 4


def _encode_string(s: str) -> bytes:
    try:
        raw = s.encode("ascii")
    except UnicodeEncodeError as exc:
        raise UnsupportedArgType(f"OSC strings must be ASCII: {s!r}") from exc
    if b"\x00" in raw:
        raise UnsupportedArgType("OSC strings cannot contain NUL")
    raw += b"\x00"
    return raw + b"\x00" * _pad(len(raw))


def _encode_blob(b: bytes) -> bytes:
    b = bytes(b)
    return struct.pack(">i", len(b)) + b + b"\x00" * _pad(len(b))


def _encode_message(msg: OscMessage) -> bytes:
    if not msg.address.startswith("/"):
        raise UnsupportedArgType(f"OSC address must start with '/': {msg.address!r}")
    tags = msg.type_tags
    if not tags.startswith(","):
        raise UnsupportedArgType(f"type-tag string must start with ',': {tags!r}")
    if len(tags) - 1 != len(msg.args):
        raise UnsupportedArgType(
            f"{len(tags) - 1} type tags for {len(msg.args)} arguments")
    out = [_encode_string(msg.address), _encode_string(tags)]
    for tag, arg in zip(tags[1:], msg.args):
        if tag == "i":
            if isinstance(arg, bool) or not isinstance(arg, int):
                raise UnsupportedArgType(f"tag 'i' needs an int, got {arg!r}")
            if not _INT32_MIN <= arg <= _INT32_MAX:
                raise UnsupportedArgType(f"{arg} does not fit in int32")
            out.append(struct.pack(">i", arg))
        elif tag == "f":
            if isinstance(arg, bool) or not isinstance(arg, (int, float)):
                raise UnsupportedArgType(f"tag 'f' needs a float, got {arg!r}")
            try:
                out.append(struct.pack(">f", arg))
            except OverflowError as exc:
                raise UnsupportedArgType(f"{arg} overflows float32") from exc
        elif tag == "s":
            if not isinstance(arg, str):
                raise UnsupportedArgType(f"tag 's' needs a str, got {arg!r}")
            out.append(_encode_string(arg))
        elif tag == "b":
            if not isinstance(arg, (bytes, bytearray)):
                raise UnsupportedArgType(f"tag 'b' needs bytes, got {arg!r}")
            out.append(_encode_blob(arg))
        else:
            raise UnsupportedArgType(f"unsupported type tag {tag!r}")
    return b"".join(out)


def encode_osc_packet(packet: Packet) -> bytes:
    """Encode a message or (nested) bundle to its OSC 1.0 byte form."""
    if isinstance(packet, OscMessage):
        return _encode_message(packet)
    if isinstance(packet, OscBundle):
        if not 0 <= packet.timetag < 2 ** 64:
            raise UnsupportedArgType(f"timetag {packet.timetag} is not a uint64")
        out = [BUNDLE_HEADER, struct.pack(">Q", packet.timetag)]
        for element in packet.elements:
            body = encode_osc_packet(element)
            out.append(struct.pack(">i", len(body)))
            out.append(body)
        return b"".join(out)
    raise UnsupportedArgType(f"not an OSC packet: {type(packet).__name__}")


class _Reader:
    """Cursor over a packet slice; offsets in errors are absolute."""

    def __init__(self, data: bytes, base: int = 0):
        self.data = data
        self.pos = 0
        self.base = base

    def fail(self, message, pos=None):
        raise MalformedPacket(message, self.base + (self.pos if pos is None else pos))

    def string(self, what: str) -> str:
        data = self.data
        end = data.find(b"\x00", self.pos)
        if end < 0:
            self.fail(f"unterminated {what}")
        stop = end + 1 + _pad(end + 1 - self.pos)
        if stop > len(data):
            self.fail(f"{what} padding runs past end of packet", end)
        if any(data[end + 1:stop]):
            self.fail(f"misaligned {what}: non-zero padding", end + 1)
        try:
            text = data[self.pos:end].decode("ascii")
        except UnicodeDecodeError:
            self.fail(f"{what} is not ASCII")
        self.pos = stop
        return text

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            self.fail(f"truncated {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def _parse_message(reader: _Reader) -> OscMessage:
    address = reader.string("address")
    if not address.startswith("/"):
        reader.fail("address must start with '/'", 0)
    if reader.pos >= len(reader.data):
        reader.fail("missing type-tag string")
    tag_pos = reader.pos
    tags = reader.string("type-tag string")
    if not tags.startswith(","):
        reader.fail("type-tag string does not start with ','", tag_pos)
    args: list = []
    for tag in tags[1:]:
        if tag == "i":
            args.append(struct.unpack(">i", reader.take(4, "int32 argument"))[0])
        elif tag == "f":
            args.append(struct.unpack(">f", reader.take(4, "float32 argument"))[0])
        elif tag == "s":
            args.append(reader.string("string argument"))
        elif tag == "b":
            size_pos = reader.pos
            (size,) = struct.unpack(">i", reader.take(4, "blob size"))
            if size < 0:
                reader.fail("negative blob size", size_pos)
            blob = reader.take(size, "blob")
            padding = reader.take(_pad(size), "blob padding")
            if any(padding):
                reader.fail("misaligned blob: non-zero padding", reader.pos - len(padding))
            args.append(blob)
        else:
            reader.fail(f"unsupported type tag {tag!r}", tag_pos)
    rest = reader.data[reader.pos:]
    if any(rest):
        reader.fail("unconsumed bytes after last argument")
    return OscMessage(address, tags, args)


def _parse(data: bytes, base: int) -> Packet:
    if not data:
        raise MalformedPacket("empty packet", base)
    if len(data) % 4:
        raise MalformedPacket(f"packet length {len(data)} is not a multiple of 4",
                              base + len(data))
    if data[:1] == b"#":
        if data[:8] != BUNDLE_HEADER:
            raise MalformedPacket("bad bundle header", base)
        if len(data) < 16:
            raise MalformedPacket("truncated bundle timetag", base + 8)
        (timetag,) = struct.unpack(">Q", data[8:16])
        elements = []
        pos = 16
        while pos < len(data):
            if pos + 4 > len(data):
                raise MalformedPacket("truncated bundle element size", base + pos)
            (size,) = struct.unpack(">i", data[pos:pos + 4])
            if size <= 0 or size % 4:
                raise MalformedPacket(f"bad bundle element size {size}", base + pos)
            if pos + 4 + size > len(data):
                raise MalformedPacket("truncated bundle element", base + pos + 4)
            elements.append(_parse(data[pos + 4:pos + 4 + size], base + pos + 4))
            pos += 4 + size
        return OscBundle(timetag, elements)
    if data[:1] != b"/":
        raise MalformedPacket("packet is neither a message nor a bundle", base)
    return _parse_message(_Reader(data, base))


def parse_osc_packet(data: bytes) -> Packet:
    """Decode one OSC packet. Raises :class:`MalformedPacket` with the byte offset."""
    return _parse(bytes(data), 0)


def iter_messages(packet: Packet) -> Iterator[OscMessage]:
    """Depth-first walk over the messages contained in a packet."""
    if isinstance(packet, OscMessage):
        yield packet
    else:
        for element in packet.elements:
            yield from iter_messages(element)


# Replay files: repeated (uint32 big-endian size, payload).

def write_replay(path, datagrams: Iterable[bytes]) -> int:
    count = 0
    with open(path, "wb") as fh:
        for datagram in datagrams:
            fh.write(struct.pack(">I", len(datagram)))
            fh.write(datagram)
            count += 1
    return count


def read_replay(path) -> Iterator[bytes]:
    with open(path, "rb") as fh:
        index = 0
        while True:
            head = fh.read(4)
            if not head:
                return
            if len(head) < 4:
                raise FormatError(f"truncated size prefix of datagram {index}")
            (size,) = struct.unpack(">I", head)
            payload = fh.read(size)
            if len(payload) < size:
                raise FormatError(f"truncated payload of datagram {index}")
            yield payload
            index += 1
