"""Live assembly of a session from a stream of OSC datagrams."""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from ..errors import AddressMismatch, ArityMismatch, EegScoreError, MalformedPacket
from .osc import OscBundle, OscMessage, encode_osc_packet, iter_messages, parse_osc_packet
from .session import (DEFAULT_RATE, EEG_ADDRESS, MUSE_LAYOUT, ChannelLayout,
                      SampleFrame, Segment, Session, decode_eeg_message)

log = logging.getLogger(__name__)

MARKER_ADDRESS = "/bci/marker"


@dataclass(frozen=True)
class MarkerEvent:
    """Segment boundary. ``time`` None means "at the next frame"."""

    action: str  # "start" | "end"
    song_id: str
    kind: str = "song"
    time: Optional[float] = None


@dataclass(frozen=True)
class TaggedFrame:
    frame: SampleFrame
    song_id: Optional[str]
    kind: Optional[str]

    @property
    def excluded(self) -> bool:
        return self.kind != "song"


def marker_message(event: MarkerEvent) -> OscMessage:
    t = "" if event.time is None else repr(float(event.time))
    return OscMessage(MARKER_ADDRESS, ",ssss", [event.action, event.song_id, event.kind, t])


def _marker_from_message(msg: OscMessage) -> MarkerEvent:
    if msg.type_tags != ",ssss":
        raise ArityMismatch(f"marker needs ',ssss', got {msg.type_tags!r}")
    action, song_id, kind, t = msg.args
    if action not in ("start", "end"):
        raise ValueError(f"bad marker action {action!r}")
    return MarkerEvent(action, song_id, kind, float(t) if t else None)


class FrameStream:
    """Single-writer session builder fed one datagram at a time.

    Frames are stamped from a sample counter (``clock="sample"``, used for
    replay) or from arrival time on a monotonic clock with nominal spacing
    for frames sharing a datagram (``clock="arrival"``).
    """

    def __init__(self, layout: ChannelLayout = MUSE_LAYOUT, fs: float = DEFAULT_RATE,
                 eeg_address: str = EEG_ADDRESS, marker_address: str = MARKER_ADDRESS,
                 markers: Iterable[MarkerEvent] = (), clock: str = "sample",
                 t0: float = 0.0, max_gap_periods: float = 3.0,
                 monotonic: Callable[[], float] = time.monotonic):
        if clock not in ("sample", "arrival"):
            raise ValueError(f"unknown clock {clock!r}")
        self.layout = layout
        self.fs = float(fs)
        self.eeg_address = eeg_address
        self.marker_address = marker_address
        self.clock = clock
        self.t0 = t0
        self.max_gap = max_gap_periods / self.fs
        self._monotonic = monotonic
        self._origin = None
        self._pending = sorted(markers, key=lambda m: (m.time is None, m.time or 0.0))
        self._inband: list = []
        self.times: list = []
        self.rows: list = []
        self.segments: list = []
        self.active: Optional[list] = None  # [song_id, kind, start, last_t]
        self.parse_errors = 0
        self.dropouts: list = []

    # -- segment bookkeeping -------------------------------------------------
    def begin_segment(self, song_id: str, kind: str = "song", t: Optional[float] = None):
        self._inband.append(MarkerEvent("start", song_id, kind, t))

    def end_segment(self, song_id: str = "", t: Optional[float] = None):
        self._inband.append(MarkerEvent("end", song_id, "", t))

    def _close(self, end: Optional[float]):
        song_id, kind, start, last_t = self.active
        if end is None:
            end = last_t if last_t is not None else start
        if last_t is not None:
            end = max(end, last_t)
        self.segments.append(Segment(song_id, start, max(end, start), kind))
        self.active = None

    def _apply(self, event: MarkerEvent, t_next: float):
        if event.action == "start":
            if self.active is not None:
                self._close(None)
            start = t_next if event.time is None else event.time
            self.active = [event.song_id, event.kind, start, None]
        elif self.active is not None:
            self._close(event.time)

    def _apply_due(self, t: float):
        while self._inband:
            event = self._inband.pop(0)
            self._apply(event, t)
        while self._pending:
            event = self._pending[0]
            due = event.time is None or (
                event.time <= t if event.action == "start" else event.time < t)
            if not due:
                break
            self._pending.pop(0)
            self._apply(event, t)

    # -- frames ---------------------------------------------------------------
    def _stamp(self, k: int, base: Optional[float]) -> float:
        if self.clock == "sample":
            return self.t0 + len(self.times) / self.fs
        t = base + k / self.fs
        if self.times and t < self.times[-1]:
            t = self.times[-1]
        return t

    def _push(self, values, t: float) -> TaggedFrame:
        self._apply_due(t)
        if self.times and t - self.times[-1] > self.max_gap:
            self.dropouts.append((self.times[-1], t))
        self.times.append(t)
        self.rows.append(values)
        frame = SampleFrame(t, tuple(values))
        if self.active is None:
            return TaggedFrame(frame, None, None)
        self.active[3] = t
        return TaggedFrame(frame, self.active[0], self.active[1])

    def feed(self, datagram: bytes, arrival: Optional[float] = None) -> list:
        """Parse one datagram; returns the tagged frames it carried.

        Malformed packets are counted in ``parse_errors`` and skipped.
        """
        try:
            packet = parse_osc_packet(datagram)
        except MalformedPacket as exc:
            self.parse_errors += 1
            log.debug("skipping malformed datagram: %s", exc)
            return []
        base = None
        if self.clock == "arrival":
            now = self._monotonic() if arrival is None else arrival
            if self._origin is None:
                self._origin = now
            base = self.t0 + now - self._origin
        out = []
        k = 0
        for msg in iter_messages(packet):
            if msg.address == self.marker_address:
                try:
                    self._inband.append(_marker_from_message(msg))
                except (EegScoreError, ValueError) as exc:
                    self.parse_errors += 1
                    log.debug("bad marker: %s", exc)
                continue
            if msg.address != self.eeg_address:
                continue
            try:
                frame = _decode(msg, self.layout, self.eeg_address)
            except (AddressMismatch, ArityMismatch) as exc:
                self.parse_errors += 1
                log.debug("bad EEG message: %s", exc)
                continue
            out.append(self._push(frame, self._stamp(k, base)))
            k += 1
        return out

    def finish(self) -> Session:
        """Close any open segment and return the accumulated session."""
        t_last = self.times[-1] if self.times else self.t0
        self._apply_due(t_last)
        for event in self._pending:
            if event.action == "end" and self.active is not None:
                self._close(event.time)
        self._pending = []
        if self.active is not None:
            self._close(None)
        return self.session()

    def session(self) -> Session:
        segments = list(self.segments)
        if self.active is not None:
            song_id, kind, start, last_t = self.active
            segments.append(Segment(song_id, start, last_t if last_t is not None else start, kind))
        return Session(np.array(self.times), np.array(self.rows).reshape(-1, 4), segments,
                       {}, self.fs, self.layout)


def _decode(msg, layout, address):
    return [*decode_eeg_message(msg, layout, 0.0, address).values]


def frame_stream(datagram_source: Iterable[bytes], layout: ChannelLayout = MUSE_LAYOUT,
                 session_markers: Iterable[MarkerEvent] = (), **kwargs) -> Iterator[TaggedFrame]:
    """Yield tagged frames, in arrival order, from an iterable of datagrams.

    Pass ``builder=`` to keep a handle on the session and error counters.
    """
    builder = kwargs.pop("builder", None) or FrameStream(layout, markers=session_markers, **kwargs)
    for datagram in datagram_source:
        yield from builder.feed(datagram)


def session_datagrams(session: Session, frames_per_datagram: int = 1,
                      address: str = EEG_ADDRESS) -> Iterator[bytes]:
    """Encode a session as the datagram sequence a headset would have sent.

    Segment boundaries travel in-band as marker messages carrying their exact
    times, so a replay rebuilds the same segments. Values go out as float32.
    """
    boundaries = []
    for seg in session.segments:
        boundaries.append((seg.start, 0, MarkerEvent("start", seg.song_id, seg.kind, seg.start)))
        boundaries.append((seg.end, 1, MarkerEvent("end", seg.song_id, seg.kind, seg.end)))
    boundaries.sort(key=lambda b: (b[0], b[1]))
    bi = 0
    batch: list = []
    times = session.times
    for i in range(session.n_frames):
        t = times[i]
        # markers must precede the first frame they govern
        while bi < len(boundaries) and (
                boundaries[bi][0] <= t if boundaries[bi][1] == 0 else boundaries[bi][0] < t):
            if batch:
                yield _pack(batch)
                batch = []
            yield encode_osc_packet(marker_message(boundaries[bi][2]))
            bi += 1
        batch.append(OscMessage(address, ",ffff", [float(v) for v in session.data[i]]))
        if len(batch) >= frames_per_datagram:
            yield _pack(batch)
            batch = []
    if batch:
        yield _pack(batch)
    for _, _, event in boundaries[bi:]:
        yield encode_osc_packet(marker_message(event))


def _pack(batch):
    if len(batch) == 1:
        return encode_osc_packet(batch[0])
    return encode_osc_packet(OscBundle(elements=batch))


def udp_datagrams(host: str = "0.0.0.0", port: int = 5000, idle_timeout: float = 5.0,
                  bufsize: int = 65536) -> Iterator[bytes]:
    """Receive datagrams until nothing arrives for ``idle_timeout`` seconds."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.settimeout(idle_timeout)
    sock.bind((host, port))
    try:
        while True:
            try:
                data, _ = sock.recvfrom(bufsize)
            except socket.timeout:
                return
            yield data
    finally:
        sock.close()


def start_producer(source: Iterable[bytes], builder: FrameStream,
                   maxsize: int = 4096) -> "queue.Queue":
    """Run ``builder`` over ``source`` in a thread, handing frames to a bounded FIFO.

    A ``None`` item marks the end of the stream.
    """
    fifo: queue.Queue = queue.Queue(maxsize=maxsize)

    def run():
        try:
            for datagram in source:
                for tagged in builder.feed(datagram):
                    fifo.put(tagged)
        finally:
            fifo.put(None)

    threading.Thread(target=run, name="osc-producer", daemon=True).start()
    return fifo
