"""Band-limited rhythm extraction and window segmentation.

Every rhythm is obtained the same way: DC removal, 50 Hz notch, a zero-phase
Butterworth band-pass, then the analytic signal, whose modulus and argument
give the instantaneous amplitude and phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import signal as sps

from .errors import InvalidBand, InvalidFrequency, SongTooShort, TooShort

DEFAULT_FS = 220.0


@dataclass(frozen=True)
class BandDef:
    name: str
    low_hz: float
    high_hz: float

    def check(self, fs: float) -> None:
        if not 0 < self.low_hz < self.high_hz < fs / 2:
            raise InvalidBand(
                f"band {self.name} ({self.low_hz}-{self.high_hz} Hz) invalid at fs={fs}")

    @property
    def center_hz(self) -> float:
        return float(np.sqrt(self.low_hz * self.high_hz))


# 49-51 Hz is left out on purpose: it is the mains notch.
BANDS = (
    BandDef("delta", 0.5, 4.0),
    BandDef("theta", 4.0, 8.0),
    BandDef("alpha", 8.0, 13.0),
    BandDef("beta_low", 13.0, 20.0),
    BandDef("beta_high", 20.0, 30.0),
    BandDef("gamma_low", 30.0, 49.0),
    BandDef("gamma_high", 51.0, 90.0),
)
BAND_NAMES = tuple(b.name for b in BANDS)
_catalog = list(BANDS)


def catalog() -> tuple:
    """The band catalog in effect (the defaults unless overridden)."""
    return tuple(_catalog)


def get_band(name: str) -> BandDef:
    for band in _catalog:
        if band.name == name:
            return band
    raise InvalidBand(f"unknown band {name!r}")


def set_catalog(edges: dict, fs: float = DEFAULT_FS) -> tuple:
    """Override band edges by name, e.g. ``{"alpha": (8, 12)}``.

    Names are fixed; only the edges move. Returns the previous catalog.
    """
    previous = catalog()
    new = []
    for band in previous:
        lo, hi = edges.get(band.name, (band.low_hz, band.high_hz))
        new.append(BandDef(band.name, float(lo), float(hi)))
    unknown = set(edges) - set(BAND_NAMES)
    if unknown:
        raise InvalidBand(f"unknown band(s) {sorted(unknown)}")
    for band in new:
        band.check(fs)
    _catalog[:] = new
    return previous


def reset_catalog(bands=BANDS) -> None:
    _catalog[:] = list(bands)


def remove_dc(x):
    x = np.asarray(x, dtype=float)
    return x - x.mean()


def notch_sos(fs: float, center_hz: float = 50.0, quality: float = 30.0):
    if not 0 < center_hz < fs / 2:
        raise InvalidFrequency(f"notch at {center_hz} Hz impossible for fs={fs}")
    b, a = sps.iirnotch(center_hz, quality, fs=fs)
    return sps.tf2sos(b, a)


def notch_filter(x, fs: float = DEFAULT_FS, center_hz: float = 50.0, quality: float = 30.0):
    """Zero-phase IIR notch (applied forward and backward)."""
    return sps.sosfiltfilt(notch_sos(fs, center_hz, quality), np.asarray(x, dtype=float))


def bandpass_sos(band: BandDef, fs: float, order: int = 4):
    # 4th-order roll-off on each edge; forward-backward use squares the response
    band.check(fs)
    return sps.butter(order, [band.low_hz, band.high_hz], btype="bandpass", fs=fs, output="sos")


def bandpass(x, band: BandDef, fs: float = DEFAULT_FS, order: int = 4):
    """Zero-phase Butterworth band-pass."""
    return sps.sosfiltfilt(bandpass_sos(band, fs, order), np.asarray(x, dtype=float))


def analytic_signal(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 8:
        raise TooShort(f"analytic signal needs >= 8 samples, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("analytic signal of non-finite input")
    z = sps.hilbert(x)
    z.real = x  # exact by construction; removes FFT round-off
    return z


def envelope_phase(z, fs: float = DEFAULT_FS, edge_taper: float = 0.5):
    """Amplitude, phase in (-pi, pi] and a validity mask excluding the edges."""
    amplitude = np.abs(z)
    phase = np.angle(z)
    phase[phase <= -np.pi] = np.pi
    valid = np.ones(len(z), dtype=bool)
    k = int(round(edge_taper * fs))
    if k:
        valid[:k] = False
        valid[-k:] = False
    return amplitude, phase, valid


@dataclass
class RhythmSeries:
    channel: str
    band: BandDef
    amplitude: np.ndarray
    phase: np.ndarray
    valid_mask: np.ndarray

    def __len__(self):
        return len(self.amplitude)

    def sliced(self, start: int, stop: int) -> "RhythmSeries":
        return RhythmSeries(self.channel, self.band, self.amplitude[start:stop],
                            self.phase[start:stop], self.valid_mask[start:stop])


def preprocess(x, fs: float = DEFAULT_FS, notch_hz: Optional[float] = 50.0):
    x = remove_dc(x)
    if notch_hz:
        x = notch_filter(x, fs, notch_hz)
    return x


def taper_edges(x, n: int):
    """Raised-cosine ramp over the first and last ``n`` samples."""
    x = np.array(x, dtype=float)
    n = min(n, len(x) // 2)
    if n > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n) / n)
        x[:n] *= ramp
        x[-n:] *= ramp[::-1]
    return x


def rhythm(x, band: BandDef, fs: float = DEFAULT_FS, channel: str = "",
           edge_taper: float = 0.5) -> RhythmSeries:
    """Band-pass ``x`` and return its instantaneous amplitude and phase.

    The filtered series is ramped down over ``edge_taper`` seconds at both
    ends before the Hilbert step; the ramp removes the wrap-around jump of
    the FFT and those samples are flagged invalid.
    """
    filtered = taper_edges(bandpass(x, band, fs), int(round(edge_taper * fs)))
    amp, phase, valid = envelope_phase(analytic_signal(filtered), fs, edge_taper)
    return RhythmSeries(channel, band, amp, phase, valid)


def blockwise_rhythm(x, band: BandDef, fs: float = DEFAULT_FS, block_s: float = 90.0,
                     margin_s: float = 30.0, edge_taper: float = 0.5) -> RhythmSeries:
    """Process ``x`` block by block with ``margin_s`` of context on each side.

    Each block's output is taken from the interior of a padded span, so block
    seams fall far from the filter and Hilbert edge transients.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    block = max(1, int(round(block_s * fs)))
    margin = int(round(margin_s * fs))
    amp = np.empty(n)
    phase = np.empty(n)
    for start in range(0, n, block):
        stop = min(n, start + block)
        lo, hi = max(0, start - margin), min(n, stop + margin)
        part = rhythm(x[lo:hi], band, fs, edge_taper=edge_taper)
        amp[start:stop] = part.amplitude[start - lo:stop - lo]
        phase[start:stop] = part.phase[start - lo:stop - lo]
    _, _, valid = envelope_phase(np.zeros(n, dtype=complex), fs, edge_taper)
    return RhythmSeries("", band, amp, phase, valid)


@dataclass
class AnalysisWindow:
    """One window of one song, with the rhythms of every (channel, band)."""

    song_id: str
    start_time: float
    length: float
    fs: float
    start_index: int
    n_samples: int
    rhythms: dict = field(default_factory=dict)  # (channel, band name) -> RhythmSeries

    def get(self, channel: str, band) -> RhythmSeries:
        name = band if isinstance(band, str) else band.name
        return self.rhythms[(channel, name)]


def window_offsets(n_song: int, fs: float, window_s: float = 90.0, overlap: float = 0.5,
                   drop_head_s: float = 5.0) -> list:
    """Song-relative start indices of every full window after the head drop."""
    if not 30.0 <= window_s <= 100.0:
        raise ValueError(f"window length {window_s} s outside [30, 100]")
    if not 0.0 <= overlap <= 0.9:
        raise ValueError(f"overlap {overlap} outside [0, 0.9]")
    step = window_s * (1.0 - overlap)
    n_win = int(round(window_s * fs))
    out = []
    k = 0
    while True:
        start = int(round((drop_head_s + k * step) * fs))
        if start + n_win > n_song:
            return out
        out.append(start)
        k += 1


def window_starts(duration: float, window_s: float = 90.0, overlap: float = 0.5,
                  drop_head_s: float = 5.0) -> list:
    """Start times (seconds from song start) of the windows a song of ``duration`` holds."""
    step = window_s * (1.0 - overlap)
    out = []
    k = 0
    while drop_head_s + k * step + window_s <= duration + 1e-9:
        out.append(drop_head_s + k * step)
        k += 1
    return out


def build_window(song_id: str, song_times, song_data, start: int, n_samples: int,
                 fs: float, channels, bands=None, context_s: float = 5.0,
                 edge_taper: float = 0.5, notch_hz: Optional[float] = 50.0,
                 wanted=None, global_offset: int = 0) -> AnalysisWindow:
    """Compute the rhythms of one window from its song's samples.

    The processed span is the window plus up to ``context_s`` of preceding
    song samples; nothing after the window end is used, so a live stream can
    evaluate the window as soon as its last sample arrives.
    ``wanted`` restricts the work to a set of (channel, band name) keys.
    """
    bands = catalog() if bands is None else bands
    ctx = min(start, int(round(context_s * fs)))
    lo, hi = start - ctx, start + n_samples
    span = np.asarray(song_data[lo:hi], dtype=float)
    rhythms = {}
    for ci, channel in enumerate(channels):
        keys = [b for b in bands if wanted is None or (channel, b.name) in wanted]
        if not keys:
            continue
        x = preprocess(span[:, ci], fs, notch_hz)
        for band in keys:
            r = rhythm(x, band, fs, channel, edge_taper)
            rhythms[(channel, band.name)] = r.sliced(ctx, ctx + n_samples)
    return AnalysisWindow(song_id, float(song_times[start]), n_samples / fs, fs,
                          global_offset + start, n_samples, rhythms)


def segment_windows(session, window_s: float = 90.0, overlap: float = 0.5,
                    drop_head_s: float = 5.0, context_s: float = 5.0,
                    edge_taper: float = 0.5, notch_hz: Optional[float] = 50.0,
                    bands=None, wanted=None):
    """Cut every song of ``session`` into overlapping analysis windows.

    Returns ``(windows, too_short)`` where ``too_short`` lists a
    :class:`SongTooShort` report for each song that yields no window.
    Advertisements never produce windows.
    """
    fs = session.sampling_rate
    n_win = int(round(window_s * fs))
    windows, too_short = [], []
    for seg in session.songs:
        sl = session.segment_slice(seg)
        times, data = session.times[sl], session.data[sl]
        offsets = window_offsets(len(times), fs, window_s, overlap, drop_head_s)
        if not offsets:
            too_short.append(SongTooShort(seg.song_id, len(times) / fs, drop_head_s + window_s))
            continue
        for start in offsets:
            windows.append(build_window(seg.song_id, times, data, start, n_win, fs,
                                        session.layout.channels, bands, context_s,
                                        edge_taper, notch_hz, wanted, sl.start))
    return windows, too_short


def filter_report(fs: float = DEFAULT_FS, bands=None, notch_hz: float = 50.0) -> str:
    """Plain-text dump of every filter's second-order sections."""
    bands = catalog() if bands is None else bands
    lines = [f"# filter coefficients, fs={fs} Hz, sections: b0 b1 b2 a0 a1 a2"]
    sections = [(f"notch {notch_hz} Hz", notch_sos(fs, notch_hz))]
    sections += [(f"bandpass {b.name} {b.low_hz}-{b.high_hz} Hz", bandpass_sos(b, fs))
                 for b in bands]
    for title, sos in sections:
        lines.append(f"[{title}]")
        lines.extend(" ".join(repr(float(c)) for c in row) for row in sos)
    return "\n".join(lines) + "\n"
