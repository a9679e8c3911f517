"""Pipeline configuration, loaded from ``key = value`` text files."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError


@dataclass
class PipelineConfig:
    window_s: float = 90.0
    overlap: float = 0.5
    head_drop_s: float = 5.0
    context_s: float = 5.0
    edge_taper_s: float = 0.5
    notch_hz: float = 50.0
    bands: dict = field(default_factory=dict)  # name -> (low, high) overrides
    selection_mode: str = "greedy"
    epsilon_gain: float = 1e-3
    max_features: int = 8
    top_k: int = 12
    elm_candidates: tuple = (1, 2, 3, 4, 6, 8, 10, 15, 20, 30, 40)
    elm_lambda: float = 1e-6
    activation: str = "logistic"
    seed: int = 0
    train_fraction: float = 0.6
    repetitions: int = 10
    inner_val_fraction: float = 0.25
    aggregate: str = "mean"
    osc_host: str = "0.0.0.0"
    osc_port: int = 5000
    osc_address: str = "/muse/eeg"
    marker_address: str = "/bci/marker"
    sink: str = ""
    spool: str = "scores.spool"

    def __post_init__(self):
        self.validate()

    def validate(self):
        checks = [
            (30.0 <= self.window_s <= 100.0, "window_s must lie in [30, 100]"),
            (0.0 <= self.overlap <= 0.9, "overlap must lie in [0, 0.9]"),
            (self.head_drop_s >= 0, "head_drop_s must be >= 0"),
            (self.context_s >= 0, "context_s must be >= 0"),
            (self.selection_mode in ("greedy", "exhaustive", "fixed"),
             "selection_mode must be greedy, exhaustive or fixed"),
            (self.max_features >= 1, "max_features must be >= 1"),
            (1 <= self.top_k <= 12, "top_k must lie in [1, 12]"),
            (len(self.elm_candidates) > 0 and list(self.elm_candidates) == sorted(self.elm_candidates)
             and min(self.elm_candidates) >= 1, "elm_candidates must be ascending and >= 1"),
            (self.elm_lambda >= 0, "elm_lambda must be >= 0"),
            (0 < self.train_fraction < 1, "train_fraction must lie in (0, 1)"),
            (self.repetitions >= 1, "repetitions must be >= 1"),
            (self.aggregate in ("mean", "median"), "aggregate must be mean or median"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(message)

    def rng_seeds(self, stage: str, n: int) -> list:
        """Per-stage seeds derived from the root seed."""
        tag = sum(ord(c) * 31 ** i for i, c in enumerate(stage)) % (2 ** 32)
        return [int(s) for s in np.random.SeedSequence([self.seed, tag]).generate_state(n)]

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"expected key = value, got {raw!r}", lineno)
            try:
                values.update(_parse_item(key.strip(), value.strip(), values))
            except ValueError as exc:
                raise FormatError(str(exc), lineno) from exc
        return cls(**values)

    def updated(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _parse_item(key: str, value: str, current: dict) -> dict:
    if key.startswith("band."):
        lo, _, hi = value.partition("-")
        bands = dict(current.get("bands", {}))
        bands[key[5:]] = (float(lo), float(hi))
        return {"bands": bands}
    if key not in _FIELDS:
        raise ValueError(f"unknown config key {key!r}")
    default = _FIELDS[key].default
    if key == "elm_candidates":
        return {key: tuple(int(v) for v in value.replace(",", " ").split())}
    if isinstance(default, bool):
        return {key: value.lower() in ("1", "true", "yes")}
    if isinstance(default, int):
        return {key: int(value)}
    if isinstance(default, float):
        return {key: float(value)}
    return {key: value}
