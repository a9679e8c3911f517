"""Synthetic EEG with known band content, coupling and score linkage.

Band components are Gaussian noise confined to their band in the frequency
domain and rescaled to an exact RMS, so every generated quantity has a
ground truth the pipeline can be checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dsp import DEFAULT_FS, BandDef, analytic_signal, catalog, get_band
from .errors import InvalidBand
from .ingest.session import MUSE_LAYOUT, Segment, Session

# Typical resting amplitudes (RMS, uV) roughly following a 1/f profile.
BASELINE_UV = {
    "delta": 10.0, "theta": 6.0, "alpha": 8.0, "beta_low": 4.0,
    "beta_high": 3.0, "gamma_low": 1.5, "gamma_high": 1.0,
}


@dataclass
class SynthSpec:
    amplitudes: dict  # (channel, band name) -> RMS uV
    duration: float
    fs: float = DEFAULT_FS
    pac_links: list = field(default_factory=list)  # (channel, low, high, coupling)
    noise_floor: float = 0.5
    seed: int = 0

    def __post_init__(self):
        n = self.duration * self.fs
        if abs(n - round(n)) > 1e-6:
            raise ValueError(f"{self.duration} s at {self.fs} Hz is not a whole number of samples")
        for link in self.pac_links:
            if not 0.0 <= link[3] <= 1.0:
                raise ValueError(f"coupling {link[3]} outside [0, 1]")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.fs))


def _band_mask(n: int, fs: float, band: BandDef) -> np.ndarray:
    f = np.fft.rfftfreq(n, 1.0 / fs)
    return (f >= band.low_hz) & (f <= band.high_hz)


def _band_limited(rng, band: BandDef, amplitude: float, n: int, fs: float) -> np.ndarray:
    if amplitude == 0:
        return np.zeros(n)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    spectrum[~_band_mask(n, fs, band)] = 0.0
    x = np.fft.irfft(spectrum, n)
    rms = np.sqrt(np.mean(x ** 2))
    return x * (amplitude / rms) if rms > 0 else x


def gen_band_noise(band, amplitude: float, duration: float, fs: float = DEFAULT_FS,
                   seed: int = 0) -> np.ndarray:
    """Gaussian noise confined to ``band`` with RMS equal to ``amplitude``."""
    band = get_band(band) if isinstance(band, str) else band
    band.check(fs)
    n = int(round(duration * fs))
    return _band_limited(np.random.default_rng(seed), band, amplitude, n, fs)


def _pac_components(rng, low: BandDef, high: BandDef, coupling: float, n: int, fs: float,
                    low_amp: float, high_amp: float):
    x_low = _band_limited(rng, low, low_amp, n, fs)
    x_high = _band_limited(rng, high, high_amp, n, fs)
    phase = np.angle(analytic_signal(x_low))
    return x_low + (1.0 + coupling * np.cos(phase)) * x_high


def gen_pac_signal(low_band, high_band, coupling: float, duration: float,
                   fs: float = DEFAULT_FS, seed: int = 0, low_amp: float = 5.0,
                   high_amp: float = 2.0, noise: float = 0.5) -> np.ndarray:
    """low(t) + [1 + coupling cos(phase_low(t))] high(t) + white noise."""
    low = get_band(low_band) if isinstance(low_band, str) else low_band
    high = get_band(high_band) if isinstance(high_band, str) else high_band
    low.check(fs)
    high.check(fs)
    if low.high_hz > high.low_hz:
        raise InvalidBand(f"bands overlap: {low.name} -> {high.name}")
    if not 0.0 <= coupling <= 1.0:
        raise ValueError(f"coupling {coupling} outside [0, 1]")
    n = int(round(duration * fs))
    rng = np.random.default_rng(seed)
    s = _pac_components(rng, low, high, coupling, n, fs, low_amp, high_amp)
    return s + noise * rng.standard_normal(n)


def render(spec: SynthSpec, layout=MUSE_LAYOUT) -> np.ndarray:
    """(n, 4) samples for a spec; coupled band pairs replace their plain components."""
    n, fs = spec.n_samples, spec.fs
    rng = np.random.default_rng(spec.seed)
    out = np.zeros((n, len(layout.channels)))
    coupled = {}
    for channel, low, high, c in spec.pac_links:
        coupled[(channel, low)] = coupled[(channel, high)] = (low, high, c)
    for ci, channel in enumerate(layout.channels):
        done = set()
        for band in catalog():
            amp = spec.amplitudes.get((channel, band.name), 0.0)
            link = coupled.get((channel, band.name))
            if link is None:
                out[:, ci] += _band_limited(rng, band, amp, n, fs)
            elif link not in done:
                low, high, c = link
                out[:, ci] += _pac_components(
                    rng, get_band(low), get_band(high), c, n, fs,
                    spec.amplitudes.get((channel, low), 0.0),
                    spec.amplitudes.get((channel, high), 0.0))
                done.add(link)
        out[:, ci] += spec.noise_floor * rng.standard_normal(n)
    return out


@dataclass
class SongDesign:
    """What a score rule decides for one song."""

    rating: int
    band_gain: dict = field(default_factory=dict)        # band -> multiplier, all channels
    channel_gain: dict = field(default_factory=dict)     # (channel, band) -> multiplier
    pac_links: list = field(default_factory=list)


def _rating(u: float) -> int:
    return 1 + min(4, int(5 * u))


def alpha_rule(u: float, slope: float = 0.1) -> SongDesign:
    """Monotone alpha linkage: alpha strength grows by ``slope`` per rating step."""
    rating = _rating(u)
    return SongDesign(rating, {"alpha": 1.0 + slope * (rating - 1)})


def alpha_rule_nonlinear(u: float) -> SongDesign:
    """Monotone but saturating alpha linkage."""
    rating = _rating(u)
    return SongDesign(rating, {"alpha": 1.0 + 0.5 * (1.0 - np.exp(-0.6 * (rating - 1)))})


def null_rule(u: float) -> SongDesign:
    """Ratings carry no trace in the signal."""
    return SongDesign(_rating(u))


SCORE_RULES = {"alpha": alpha_rule, "alpha_nonlinear": alpha_rule_nonlinear, "null": null_rule}


def gen_synthetic_session(n_songs: int, score_rule: Callable[[float], SongDesign] = alpha_rule,
                          seed: int = 0, song_duration: float = 150.0,
                          fs: float = DEFAULT_FS, ad_duration: Optional[float] = None,
                          ad_every: int = 0, baseline: Optional[dict] = None,
                          layout=MUSE_LAYOUT) -> Session:
    """A session of ``n_songs`` songs whose signals follow ``score_rule``.

    Latent levels are drawn uniformly on [0, 1]. With ``ad_every=k`` an
    advertisement of ``ad_duration`` seconds follows every k-th song. Values
    are rounded to float32, the precision they would have on the wire.
    """
    rng = np.random.default_rng(seed)
    baseline = dict(BASELINE_UV if baseline is None else baseline)
    # per-participant spread of resting levels
    levels = {(ch, b.name): baseline[b.name] * rng.uniform(0.8, 1.2)
              for ch in layout.channels for b in catalog()}
    latents = rng.uniform(0.0, 1.0, n_songs)
    song_seeds = rng.integers(0, 2 ** 32, size=n_songs)
    ad_seeds = rng.integers(0, 2 ** 32, size=n_songs)
    ad_duration = song_duration / 5 if ad_duration is None else ad_duration
    blocks, segments, ratings = [], [], {}
    t_index = 0
    for i in range(n_songs):
        design = score_rule(float(latents[i]))
        amps = {}
        for (ch, band), level in levels.items():
            amps[(ch, band)] = (level * design.band_gain.get(band, 1.0)
                                * design.channel_gain.get((ch, band), 1.0))
        spec = SynthSpec(amps, song_duration, fs, design.pac_links, seed=int(song_seeds[i]))
        x = render(spec, layout)
        song_id = f"song-{i + 1:03d}"
        segments.append(Segment(song_id, t_index / fs, (t_index + len(x) - 1) / fs, "song"))
        ratings[song_id] = int(design.rating)
        blocks.append(x)
        t_index += len(x)
        if ad_every and (i + 1) % ad_every == 0:
            spec = SynthSpec(dict(levels), ad_duration, fs, seed=int(ad_seeds[i]))
            x = render(spec, layout)
            segments.append(Segment(f"ad-{i + 1:03d}", t_index / fs,
                                    (t_index + len(x) - 1) / fs, "advertisement"))
            blocks.append(x)
            t_index += len(x)
    data = np.vstack(blocks) if blocks else np.zeros((0, len(layout.channels)))
    data = data.astype(np.float32).astype(float)
    times = np.arange(len(data)) / fs
    return Session(times, data, segments, ratings, fs, layout)


def gen_corpus(n_participants: int = 5, n_songs: int = 30, score_rule=alpha_rule,
               seed: int = 0, **kwargs) -> list:
    """One synthetic session per participant, seeds derived from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(n_participants)
    return [gen_synthetic_session(n_songs, score_rule, int(s), **kwargs) for s in seeds]
