"""Per-window brainwave descriptors.

Five descriptor kinds are produced for every window:

* ``abs_energy``  mean envelope of a band at one channel (uV)
* ``rel_energy``  the same, divided by the sum over all seven bands
* ``asym``        mean left-minus-right envelope for a homologous pair
* ``asym_norm``   mean of (L - R) / (L + R)
* ``pac``         phase-amplitude coupling, normalized mean vector length
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dsp import AnalysisWindow, catalog, get_band
from .errors import (DegenerateTotal, EegScoreError, IncompleteVector,
                     InsufficientValidSamples, TooFewCycles)
from .ingest.session import MUSE_LAYOUT

KINDS = ("abs_energy", "rel_energy", "asym", "asym_norm", "pac")
MIN_VALID_FRACTION = 0.9
MIN_PRESENT_FRACTION = 0.95
DEGENERATE_TOTAL = 1e-12


@dataclass(frozen=True, order=True)
class DescriptorId:
    kind: str
    band: str
    site: str
    band2: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown descriptor kind {self.kind!r}")
        get_band(self.band)
        if self.kind == "pac":
            if self.band2 is None:
                raise ValueError("pac needs a band pair")
            if get_band(self.band).high_hz > get_band(self.band2).low_hz:
                raise ValueError(f"pac bands overlap: {self.band}->{self.band2}")
        elif self.band2 is not None:
            raise ValueError(f"{self.kind} takes a single band")

    def __str__(self):
        bands = self.band if self.band2 is None else f"{self.band}:{self.band2}"
        return f"{self.kind}:{bands}@{self.site}"

    @classmethod
    def parse(cls, text: str) -> "DescriptorId":
        head, sep, site = text.strip().partition("@")
        if not sep:
            raise ValueError(f"descriptor id {text!r} lacks '@site'")
        parts = head.split(":")
        if len(parts) == 2:
            return cls(parts[0], parts[1], site)
        if len(parts) == 3:
            return cls(parts[0], parts[1], site, parts[2])
        raise ValueError(f"bad descriptor id {text!r}")

    def rhythms_needed(self, layout=MUSE_LAYOUT) -> set:
        """(channel, band) pairs whose rhythm series this descriptor reads."""
        if self.kind == "abs_energy":
            return {(self.site, self.band)}
        if self.kind == "rel_energy":
            return {(self.site, b.name) for b in catalog()}
        if self.kind in ("asym", "asym_norm"):
            left, right = layout.pair(self.site)
            return {(left, self.band), (right, self.band)}
        return {(self.site, self.band), (self.site, self.band2)}


def pac_band_pairs(bands=None) -> list:
    """Ordered (low, high) band pairs with non-overlapping support."""
    bands = catalog() if bands is None else bands
    return [(lo.name, hi.name) for lo, hi in itertools.combinations(bands, 2)
            if lo.high_hz <= hi.low_hz]


def all_descriptor_ids(layout=MUSE_LAYOUT, bands=None) -> list:
    bands = catalog() if bands is None else bands
    ids = []
    for kind in ("abs_energy", "rel_energy"):
        ids += [DescriptorId(kind, b.name, ch) for ch in layout.channels for b in bands]
    for kind in ("asym", "asym_norm"):
        ids += [DescriptorId(kind, b.name, p) for p in layout.pair_names for b in bands]
    ids += [DescriptorId("pac", lo, ch, hi) for ch in layout.channels
            for lo, hi in pac_band_pairs(bands)]
    return ids


def _valid_values(series, min_fraction=MIN_VALID_FRACTION):
    mask = series.valid_mask
    if len(mask) == 0 or mask.mean() < min_fraction:
        raise InsufficientValidSamples(
            f"{series.channel}/{series.band.name}: valid coverage below {min_fraction:.0%}")
    return mask


def band_amplitude(window: AnalysisWindow, channel: str, band) -> float:
    """Mean envelope over the window's valid samples."""
    series = window.get(channel, band)
    mask = _valid_values(series)
    return float(series.amplitude[mask].mean())


def relative_energy(window: AnalysisWindow, channel: str, band, bands=None) -> float:
    name = band if isinstance(band, str) else band.name
    bands = catalog() if bands is None else bands
    amps = {b.name: band_amplitude(window, channel, b) for b in bands}
    total = sum(amps.values())
    if total < DEGENERATE_TOTAL:
        raise DegenerateTotal(f"{channel}: total band strength {total:.3g} uV")
    return amps[name] / total


def asymmetry_index(window: AnalysisWindow, pair: str, band, layout=MUSE_LAYOUT):
    """(ai, ai_norm) for a homologous pair: left-minus-right envelope and its
    normalized form, each averaged over jointly valid samples."""
    left, right = layout.pair(pair)
    a, b = window.get(left, band), window.get(right, band)
    mask = a.valid_mask & b.valid_mask
    if len(mask) == 0 or mask.mean() < MIN_VALID_FRACTION:
        raise InsufficientValidSamples(f"{pair}: valid coverage below {MIN_VALID_FRACTION:.0%}")
    L, R = a.amplitude[mask], b.amplitude[mask]
    ai = float(np.mean(L - R))
    total = L + R
    keep = total >= DEGENERATE_TOTAL
    ai_norm = float(np.mean((L[keep] - R[keep]) / total[keep])) if keep.any() else 0.0
    return ai, ai_norm


def pac_mvl(phase_low, amp_high, *, fs: Optional[float] = None, low_band=None,
            min_cycles: float = 10.0) -> float:
    """Amplitude-normalized mean vector length |sum a e^{i phi}| / sum a.

    When ``fs`` and ``low_band`` are given, the series must span at least
    ``min_cycles`` periods of the low band's lower edge.
    """
    phase = np.asarray(phase_low, dtype=float)
    amp = np.asarray(amp_high, dtype=float)
    if phase.shape != amp.shape:
        raise ValueError("phase and amplitude series differ in length")
    if fs is not None and low_band is not None:
        band = get_band(low_band) if isinstance(low_band, str) else low_band
        cycles = len(phase) / fs * band.low_hz
        if cycles < min_cycles:
            raise TooFewCycles(f"{cycles:.1f} cycles of {band.name}, need {min_cycles}")
    total = amp.sum()
    if total <= 0:
        return 0.0
    return float(abs(np.sum(amp * np.exp(1j * phase))) / total)


def pac_surrogates(phase_low, amp_high, n: int = 200, seed: int = 0,
                   method: str = "shift", min_shift: int = 1) -> np.ndarray:
    """MVL values under surrogate pairings that destroy phase-amplitude alignment.

    ``shift`` rotates the amplitude series by a random lag (at least
    ``min_shift`` samples from either end); ``shuffle`` permutes it.
    """
    phase = np.asarray(phase_low, dtype=float)
    amp = np.asarray(amp_high, dtype=float)
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    for i in range(n):
        if method == "shift":
            lag = int(rng.integers(min_shift, len(amp) - min_shift))
            surrogate = np.roll(amp, lag)
        elif method == "shuffle":
            surrogate = rng.permutation(amp)
        else:
            raise ValueError(f"unknown surrogate method {method!r}")
        out[i] = pac_mvl(phase, surrogate)
    return out


def pac_is_significant(phase_low, amp_high, n: int = 200, seed: int = 0,
                       percentile: float = 95.0, min_shift: int = 1) -> bool:
    observed = pac_mvl(phase_low, amp_high)
    null = pac_surrogates(phase_low, amp_high, n, seed, "shift", min_shift)
    return bool(observed > np.percentile(null, percentile))


def window_pac(window: AnalysisWindow, channel: str, low: str, high: str) -> float:
    lo, hi = window.get(channel, low), window.get(channel, high)
    mask = lo.valid_mask & hi.valid_mask
    if len(mask) == 0 or mask.mean() < MIN_VALID_FRACTION:
        raise InsufficientValidSamples(f"{channel}: valid coverage below {MIN_VALID_FRACTION:.0%}")
    return pac_mvl(lo.phase[mask], hi.amplitude[mask], fs=window.fs, low_band=low)


@dataclass
class DescriptorVector:
    song_id: str
    start_time: float
    values: dict = field(default_factory=dict)   # DescriptorId -> float
    missing: dict = field(default_factory=dict)  # DescriptorId -> reason

    def __len__(self):
        return len(self.values) + len(self.missing)

    def get(self, did: DescriptorId) -> float:
        return self.values.get(did, float("nan"))


def compute_descriptors(window: AnalysisWindow, ids, layout=MUSE_LAYOUT) -> DescriptorVector:
    """Evaluate ``ids`` on ``window``; failures are recorded as missing."""
    vec = DescriptorVector(window.song_id, window.start_time)
    amp_cache: dict = {}
    rel_cache: dict = {}

    def amplitude(channel, band):
        key = (channel, band)
        if key not in amp_cache:
            amp_cache[key] = band_amplitude(window, channel, band)
        return amp_cache[key]

    for did in ids:
        try:
            if did.kind == "abs_energy":
                value = amplitude(did.site, did.band)
            elif did.kind == "rel_energy":
                if did.site not in rel_cache:
                    amps = [amplitude(did.site, b.name) for b in catalog()]
                    rel_cache[did.site] = amps
                amps = rel_cache[did.site]
                total = sum(amps)
                if total < DEGENERATE_TOTAL:
                    raise DegenerateTotal(f"{did.site}: total band strength {total:.3g} uV")
                value = amplitude(did.site, did.band) / total
            elif did.kind in ("asym", "asym_norm"):
                ai, ai_norm = asymmetry_index(window, did.site, did.band, layout)
                value = ai if did.kind == "asym" else ai_norm
            else:
                value = window_pac(window, did.site, did.band, did.band2)
        except EegScoreError as exc:
            vec.missing[did] = f"{type(exc).__name__}: {exc}"
            continue
        vec.values[did] = value
    return vec


def descriptor_vector(window: AnalysisWindow, layout=MUSE_LAYOUT) -> DescriptorVector:
    """All 168 descriptors of a window.

    Raises :class:`IncompleteVector` when fewer than 95% could be computed.
    """
    ids = all_descriptor_ids(layout)
    vec = compute_descriptors(window, ids, layout)
    if len(vec.values) < MIN_PRESENT_FRACTION * len(ids):
        raise IncompleteVector(
            f"window {window.song_id}@{window.start_time:.2f}: only "
            f"{len(vec.values)}/{len(ids)} descriptors present")
    return vec


def rhythms_for(ids, layout=MUSE_LAYOUT) -> set:
    need = set()
    for did in ids:
        need |= did.rhythms_needed(layout)
    return need


__all__ = [
    "DescriptorId", "DescriptorVector", "KINDS", "all_descriptor_ids",
    "asymmetry_index", "band_amplitude", "compute_descriptors", "descriptor_vector",
    "pac_band_pairs", "pac_is_significant", "pac_mvl", "pac_surrogates", "relative_energy",
    "rhythms_for", "window_pac",
]
