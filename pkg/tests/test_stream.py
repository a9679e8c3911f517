import numpy as np
import pytest

from eegscore.ingest import (FrameStream, MarkerEvent, OscBundle, OscMessage, Segment, Session,
                             encode_osc_packet, frame_stream, marker_message, session_datagrams,
                             start_producer)


def eeg(values):
    return encode_osc_packet(OscMessage("/muse/eeg", ",ffff", [float(v) for v in values]))


def test_one_second_within_a_song():
    markers = [MarkerEvent("start", "song-1", "song", 0.0)]
    frames = list(frame_stream((eeg([k] * 4) for k in range(220)), session_markers=markers))
    assert len(frames) == 220
    assert {f.song_id for f in frames} == {"song-1"}
    assert not any(f.excluded for f in frames)
    assert frames[-1].frame.timestamp == pytest.approx(219 / 220)


def test_advertisement_frames_are_excluded():
    markers = [MarkerEvent("start", "ad-1", "advertisement", 0.0)]
    frames = list(frame_stream((eeg([0] * 4) for _ in range(50)), session_markers=markers))
    assert all(f.excluded and f.kind == "advertisement" for f in frames)


def test_corrupt_datagram_is_counted_and_skipped():
    good = [eeg([k, 0, 0, 0]) for k in range(100)]
    good[37] = good[37][:-3]
    builder = FrameStream(markers=[MarkerEvent("start", "s", "song", 0.0)])
    frames = list(frame_stream(good, builder=builder))
    assert len(frames) == 99
    assert builder.parse_errors == 1
    assert [f.frame.values[0] for f in frames] == [k for k in range(100) if k != 37]


def test_in_band_markers_segment_the_stream():
    datagrams = [encode_osc_packet(marker_message(MarkerEvent("start", "a", "song")))]
    datagrams += [eeg([1] * 4) for _ in range(10)]
    datagrams += [encode_osc_packet(marker_message(MarkerEvent("end", "a")))]
    datagrams += [eeg([2] * 4) for _ in range(5)]
    datagrams += [encode_osc_packet(marker_message(MarkerEvent("start", "b", "advertisement")))]
    datagrams += [eeg([3] * 4) for _ in range(5)]
    builder = FrameStream()
    tags = [(f.song_id, f.frame.values[0]) for f in frame_stream(datagrams, builder=builder)]
    assert tags[:10] == [("a", 1.0)] * 10
    assert tags[10:15] == [(None, 2.0)] * 5
    assert tags[15:] == [("b", 3.0)] * 5
    session = builder.finish()
    assert [s.song_id for s in session.segments] == ["a", "b"]


def test_bundled_frames_and_arrival_clock():
    bundle = encode_osc_packet(OscBundle(elements=[
        OscMessage("/muse/eeg", ",ffff", [float(k)] * 4) for k in range(4)]))
    clock = iter([10.0, 10.5])
    builder = FrameStream(clock="arrival", monotonic=lambda: next(clock))
    first = builder.feed(bundle)
    second = builder.feed(bundle)
    stamps = [f.frame.timestamp for f in first + second]
    assert stamps[:4] == pytest.approx([0, 1 / 220, 2 / 220, 3 / 220])
    assert stamps[4] == pytest.approx(0.5)
    assert builder.dropouts == [(pytest.approx(3 / 220), pytest.approx(0.5))]


def test_dropout_annotation():
    builder = FrameStream(clock="arrival")
    for t in [0.0, 1 / 220, 2 / 220, 10 / 220, 11 / 220]:
        builder.feed(eeg([0] * 4), arrival=t)
    assert len(builder.dropouts) == 1


def test_replay_rebuilds_the_session_exactly():
    fs = 220.0
    n = 900
    rng = np.random.default_rng(4)
    data = rng.normal(size=(n, 4)).astype(np.float32).astype(float)
    segs = [Segment("a", 0.5, 1.5), Segment("ad", 1.6, 2.0, "advertisement"),
            Segment("b", 2.2, 4.0)]
    s = Session(np.arange(n) / fs, data, segs, {"a": 3, "b": 1}, fs)
    for per in (1, 7):
        builder = FrameStream()
        tagged = list(frame_stream(session_datagrams(s, per), builder=builder))
        back = builder.finish()
        assert back.segments == s.segments
        assert np.array_equal(back.data, s.data)
        assert np.array_equal(back.times, s.times)
        # never reorders frames; never tags a frame outside its segment
        times = [f.frame.timestamp for f in tagged]
        assert times == sorted(times)
        by_id = {seg.song_id: seg for seg in segs}
        for f in tagged:
            if f.song_id is not None:
                seg = by_id[f.song_id]
                assert seg.start <= f.frame.timestamp <= seg.end


def test_producer_thread_hands_off_in_order():
    datagrams = [eeg([k, 0, 0, 0]) for k in range(500)]
    fifo = start_producer(datagrams, FrameStream(), maxsize=16)
    got = []
    while (item := fifo.get(timeout=5)) is not None:
        got.append(item.frame.values[0])
    assert got == list(range(500))
