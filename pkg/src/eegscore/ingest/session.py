"""Recording containers and the line-oriented session file format.

A session file looks like::

    #session v1 rate=220 channels=TP9,FP1,FP2,TP10
    F 0.0 1.5 -2.25 0.5 3.0
    ...
    S song-01 song 0.0 149.995
    S ad-01 advertisement 150.0 179.995
    R song-01 4
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import AddressMismatch, ArityMismatch, FormatError, InvariantViolation
from .osc import OscMessage

DEFAULT_RATE = 220.0
EEG_ADDRESS = "/muse/eeg"
SEGMENT_KINDS = ("song", "advertisement")
RATINGS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class ChannelLayout:
    channels: tuple = ("TP9", "FP1", "FP2", "TP10")
    pairs: tuple = (("temporal", "TP9", "TP10"), ("frontal", "FP1", "FP2"))

    def __post_init__(self):
        if len(self.channels) != 4 or len(set(self.channels)) != 4:
            raise InvariantViolation(f"need 4 distinct channels, got {self.channels}")
        members = [c for _, left, right in self.pairs for c in (left, right)]
        if sorted(members) != sorted(self.channels):
            raise InvariantViolation("every channel must belong to exactly one pair")

    def index(self, channel: str) -> int:
        return self.channels.index(channel)

    def pair(self, name: str) -> tuple:
        for pair_name, left, right in self.pairs:
            if pair_name == name:
                return left, right
        raise KeyError(name)

    @property
    def pair_names(self) -> tuple:
        return tuple(p[0] for p in self.pairs)


MUSE_LAYOUT = ChannelLayout()


@dataclass(frozen=True)
class SampleFrame:
    timestamp: float
    values: tuple

    def __post_init__(self):
        if len(self.values) != 4:
            raise ArityMismatch(f"frame carries {len(self.values)} values, expected 4")


@dataclass(frozen=True)
class Segment:
    song_id: str
    start: float
    end: float
    kind: str = "song"

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def is_song(self) -> bool:
        return self.kind == "song"


@dataclass
class Session:
    """A recording: sample timestamps, an (n, 4) value matrix and annotations."""

    times: np.ndarray
    data: np.ndarray
    segments: list = field(default_factory=list)
    ratings: dict = field(default_factory=dict)
    sampling_rate: float = DEFAULT_RATE
    layout: ChannelLayout = MUSE_LAYOUT

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.layout.channels))
        if len(self.times) != len(self.data):
            raise InvariantViolation("times and data disagree on frame count")
        self.validate()

    def validate(self) -> None:
        if self.sampling_rate <= 0:
            raise InvariantViolation(f"bad sampling rate {self.sampling_rate}")
        if len(self.times) > 1 and np.any(np.diff(self.times) < 0):
            raise InvariantViolation("frames are not time-ordered")
        ids = set()
        prev_end = -math.inf
        for seg in self.segments:
            if seg.kind not in SEGMENT_KINDS:
                raise InvariantViolation(f"unknown segment kind {seg.kind!r}")
            if not seg.start <= seg.end:
                raise InvariantViolation(f"segment {seg.song_id!r} ends before it starts")
            if seg.start <= prev_end:
                raise InvariantViolation(
                    f"segment {seg.song_id!r} overlaps or precedes its predecessor")
            if seg.song_id in ids:
                raise InvariantViolation(f"duplicate segment id {seg.song_id!r}")
            ids.add(seg.song_id)
            prev_end = seg.end
        songs = {s.song_id for s in self.segments if s.is_song}
        for song_id, rating in self.ratings.items():
            if song_id not in songs:
                raise InvariantViolation(f"rating for unknown song {song_id!r}")
            if isinstance(rating, bool) or rating not in RATINGS:
                raise InvariantViolation(f"rating {rating!r} for {song_id!r} not in 1..5")

    @property
    def n_frames(self) -> int:
        return len(self.times)

    @property
    def songs(self) -> list:
        return [s for s in self.segments if s.is_song]

    def segment(self, song_id: str) -> Segment:
        for seg in self.segments:
            if seg.song_id == song_id:
                return seg
        raise KeyError(song_id)

    def segment_slice(self, seg: Segment) -> slice:
        """Frame index range with ``seg.start <= t <= seg.end``."""
        lo = int(np.searchsorted(self.times, seg.start, side="left"))
        hi = int(np.searchsorted(self.times, seg.end, side="right"))
        return slice(lo, hi)

    def frames(self):
        for t, row in zip(self.times, self.data):
            yield SampleFrame(float(t), tuple(float(v) for v in row))

    def dropouts(self, max_gap_periods: float = 3.0) -> list:
        """(t_before, t_after) for every timestamp gap above the threshold."""
        if len(self.times) < 2:
            return []
        gaps = np.diff(self.times)
        idx = np.flatnonzero(gaps > max_gap_periods / self.sampling_rate)
        return [(float(self.times[i]), float(self.times[i + 1])) for i in idx]

    def equals(self, other: "Session", tol: float = 1e-9) -> bool:
        return (
            self.sampling_rate == other.sampling_rate
            and self.layout == other.layout
            and self.segments == other.segments
            and self.ratings == other.ratings
            and self.times.shape == other.times.shape
            and self.data.shape == other.data.shape
            and np.allclose(self.times, other.times, rtol=0, atol=tol)
            and np.allclose(self.data, other.data, rtol=0, atol=tol)
        )


def decode_eeg_message(msg: OscMessage, layout: ChannelLayout = MUSE_LAYOUT,
                       clock: float = 0.0, address: str = EEG_ADDRESS) -> SampleFrame:
    """Map one EEG message onto a frame, values in layout channel order."""
    if msg.address != address:
        raise AddressMismatch(f"expected {address!r}, got {msg.address!r}")
    n = len(layout.channels)
    floats = [a for t, a in zip(msg.type_tags[1:], msg.args) if t in "fi"]
    if len(msg.args) != n or len(floats) != n:
        raise ArityMismatch(f"{address} carries {len(msg.args)} args, layout has {n} channels")
    return SampleFrame(float(clock), tuple(float(v) for v in floats))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_session(session: Session, path) -> None:
    session.validate()
    rate = session.sampling_rate
    rate_txt = str(int(rate)) if float(rate).is_integer() else _fmt(rate)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#session v1 rate={rate_txt} channels={','.join(session.layout.channels)}\n")
        for t, row in zip(session.times.tolist(), session.data.tolist()):
            fh.write("F " + " ".join(map(repr, [t, *row])) + "\n")
        for seg in session.segments:
            fh.write(f"S {seg.song_id} {seg.kind} {_fmt(seg.start)} {_fmt(seg.end)}\n")
        for song_id, rating in session.ratings.items():
            fh.write(f"R {song_id} {rating}\n")


def _parse_header(line: str):
    parts = line.split()
    if len(parts) < 2 or parts[0] != "#session":
        raise FormatError("missing '#session' header", 1)
    if parts[1] != "v1":
        raise FormatError(f"unsupported session version {parts[1]!r}", 1)
    fields = {}
    for token in parts[2:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise FormatError(f"bad header field {token!r}", 1)
        fields[key] = value
    try:
        rate = float(fields.get("rate", DEFAULT_RATE))
    except ValueError as exc:
        raise FormatError(f"bad rate {fields['rate']!r}", 1) from exc
    channels = tuple(fields.get("channels", ",".join(MUSE_LAYOUT.channels)).split(","))
    if channels == MUSE_LAYOUT.channels:
        layout = MUSE_LAYOUT
    else:
        try:
            layout = ChannelLayout(channels=channels, pairs=(
                ("temporal", channels[0], channels[3]), ("frontal", channels[1], channels[2])))
        except InvariantViolation as exc:
            raise FormatError(str(exc), 1) from exc
    return rate, layout


def read_session(path) -> Session:
    times, rows, segments, ratings = [], [], [], {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        rate, layout = _parse_header(header)
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            try:
                if tag == "F":
                    if len(parts) != 6:
                        raise FormatError(f"frame line needs 5 numbers, got {len(parts) - 1}", lineno)
                    t, *vals = map(float, parts[1:])
                    times.append(t)
                    rows.append(vals)
                elif tag == "S":
                    if len(parts) != 5:
                        raise FormatError("segment line needs id, kind, start, end", lineno)
                    if parts[2] not in SEGMENT_KINDS:
                        raise FormatError(f"unknown segment kind {parts[2]!r}", lineno)
                    segments.append(Segment(parts[1], float(parts[3]), float(parts[4]), parts[2]))
                elif tag == "R":
                    if len(parts) != 3:
                        raise FormatError("rating line needs id and score", lineno)
                    if parts[1] in ratings:
                        raise InvariantViolation(f"duplicate rating for {parts[1]!r} (line {lineno})")
                    ratings[parts[1]] = int(parts[2])
                else:
                    raise FormatError(f"unknown record type {tag!r}", lineno)
            except ValueError as exc:
                if isinstance(exc, (FormatError, InvariantViolation)):
                    raise
                raise FormatError(f"bad number: {exc}", lineno) from exc
    data = np.array(rows, dtype=float).reshape(-1, 4)
    return Session(np.array(times, dtype=float), data, segments, ratings, rate, layout)
