"""End-to-end flows: per-listener training, split evaluation and live scoring."""

from __future__ import annotations

import json
import logging
import time
import urllib.request
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dsp
from .config import PipelineConfig
from .descriptors import compute_descriptors, rhythms_for
from .elm import (ElmModel, HiddenCountReport, clip_scores, elm_train, nrmse,
                  predict_raw, select_hidden_count)
from .errors import ModelMismatch, TooFewSongs
from .features import FeatureMatrix, extract_features
from .ingest.session import MUSE_LAYOUT

log = logging.getLogger(__name__)

PRIMARY_MODULES = ("ingest", "dsp", "descriptors", "stats", "elm", "synth", "cli")


class StageLog:
    """Records which module each command touched, for flow audits."""

    def __init__(self):
        self.entries: list = []

    def record(self, command: str, module: str) -> None:
        if (command, module) not in self.entries:
            self.entries.append((command, module))

    def modules(self, command: Optional[str] = None) -> set:
        return {m for c, m in self.entries if command is None or c == command}

    def lines(self) -> list:
        return [f"{c}\t{m}" for c, m in self.entries]


@contextmanager
def band_catalog(edges: dict):
    """Temporarily apply band-edge overrides."""
    if not edges:
        yield
        return
    previous = dsp.set_catalog(edges)
    try:
        yield
    finally:
        dsp.reset_catalog(previous)


# -- training -----------------------------------------------------------------

def song_split(songs, fraction: float, seed: int):
    """Shuffle songs and cut them into (first, second) with ``fraction`` first."""
    songs = list(songs)
    order = np.random.default_rng(seed).permutation(len(songs))
    k = int(round(fraction * len(songs)))
    k = min(max(k, 1), len(songs) - 1)
    first = [songs[i] for i in order[:k]]
    second = [songs[i] for i in order[k:]]
    return first, second


def _rows_for(mat: FeatureMatrix, songs) -> np.ndarray:
    keep = set(songs)
    return np.array([s in keep for s in mat.song_ids], dtype=bool)


@dataclass
class TrainedListener:
    model: ElmModel
    report: HiddenCountReport
    ids: list


def train_listener(mat: FeatureMatrix, ids, config: PipelineConfig, seed: int) -> TrainedListener:
    """Pick the hidden width on a song-wise inner split, then fit on all rows."""
    mat = mat.complete(ids)
    songs = mat.songs
    if len(songs) < 2:
        raise TooFewSongs(f"{mat.participant or 'matrix'}: {len(songs)} song(s), need >= 2")
    fit_songs, val_songs = song_split(songs, 1.0 - config.inner_val_fraction, seed)
    fit, val = _rows_for(mat, fit_songs), _rows_for(mat, val_songs)
    hidden, report = select_hidden_count(
        mat.values[fit], mat.ratings[fit], mat.values[val], mat.ratings[val],
        config.elm_candidates, seed, config.elm_lambda, config.activation)
    model = elm_train(mat.values, mat.ratings, hidden, seed, config.elm_lambda, config.activation)
    return TrainedListener(model, report, list(ids))


def aggregate_scores(values, how: str = "mean") -> float:
    return float(np.median(values) if how == "median" else np.mean(values))


def song_level(song_ids, ratings, scores, how: str = "mean"):
    """(ratings, aggregated scores) with one entry per song, in first-seen order."""
    order = list(dict.fromkeys(song_ids))
    song_ids = np.asarray(song_ids)
    r = [float(np.asarray(ratings)[song_ids == s][0]) for s in order]
    p = [aggregate_scores(np.asarray(scores)[song_ids == s], how) for s in order]
    return np.array(r), np.array(p)


# -- evaluation ---------------------------------------------------------------

@dataclass
class EvalReport:
    window_s: float
    biomarker: list
    per_participant: dict = field(default_factory=dict)   # name -> list of window nrmse
    per_participant_song: dict = field(default_factory=dict)
    splits: list = field(default_factory=list)           # (participant, rep, train, test)
    hidden_counts: dict = field(default_factory=dict)
    baseline: dict = field(default_factory=dict)         # name -> list, mean-rating predictor

    @property
    def per_repetition(self) -> list:
        return [v for vals in self.per_participant.values() for v in vals]

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_repetition))

    @property
    def std(self) -> float:
        return float(np.std(self.per_repetition))

    @property
    def song_mean(self) -> float:
        return float(np.mean([v for vals in self.per_participant_song.values() for v in vals]))

    @property
    def baseline_mean(self) -> float:
        return float(np.mean([v for vals in self.baseline.values() for v in vals]))

    def participant_means(self) -> dict:
        return {k: float(np.mean(v)) for k, v in self.per_participant.items()}

    @property
    def participant_std(self) -> float:
        return float(np.std(list(self.participant_means().values())))

    def to_text(self) -> str:
        lines = ["#eval v1", f"window_s\t{self.window_s!r}",
                 "biomarker\t" + ",".join(map(str, self.biomarker)),
                 f"nrmse_window_mean\t{self.mean!r}", f"nrmse_window_std\t{self.std!r}",
                 f"nrmse_song_mean\t{self.song_mean!r}",
                 f"participant_std\t{self.participant_std!r}",
                 f"baseline_mean\t{self.baseline_mean!r}",
                 "participant\trep\tnrmse_window\tnrmse_song\tbaseline\thidden"]
        for name, vals in self.per_participant.items():
            for rep, v in enumerate(vals):
                lines.append("\t".join([name, str(rep), repr(v),
                                        repr(self.per_participant_song[name][rep]),
                                        repr(self.baseline[name][rep]),
                                        str(self.hidden_counts[name][rep])]))
        lines.append("split\tparticipant\trep\ttrain_songs\ttest_songs")
        for name, rep, train, test in self.splits:
            lines.append(f"split\t{name}\t{rep}\t{','.join(train)}\t{','.join(test)}")
        return "\n".join(lines) + "\n"


def evaluate(mats, ids, config: PipelineConfig, log_stages: Optional[StageLog] = None) -> EvalReport:
    """Repeated song-wise train/test splits per participant."""
    report = EvalReport(config.window_s, list(ids))
    for pi, raw in enumerate(mats):
        name = raw.participant or f"p{pi}"
        mat = raw.complete(ids)
        songs = mat.songs
        if mat.n_rows < 10 or len(songs) < 3:
            raise TooFewSongs(f"{name}: {mat.n_rows} rows over {len(songs)} songs "
                              "(need >= 10 rows and >= 3 songs)")
        seeds = config.rng_seeds(f"evaluate/{name}", config.repetitions)
        for rep, seed in enumerate(seeds):
            train_songs, test_songs = song_split(songs, config.train_fraction, seed)
            train, test = _rows_for(mat, train_songs), _rows_for(mat, test_songs)
            listener = train_listener(mat.subset(rows=train), ids, config, seed)
            pred = clip_scores(predict_raw(listener.model, mat.values[test]))
            y = mat.ratings[test]
            r_song, p_song = song_level([mat.song_ids[i] for i in np.flatnonzero(test)],
                                        y, pred, config.aggregate)
            report.per_participant.setdefault(name, []).append(nrmse(y, pred))
            report.per_participant_song.setdefault(name, []).append(nrmse(r_song, p_song))
            report.baseline.setdefault(name, []).append(
                nrmse(y, np.full(len(y), mat.ratings[train].mean())))
            report.hidden_counts.setdefault(name, []).append(listener.model.hidden_count)
            report.splits.append((name, rep, sorted(train_songs), sorted(test_songs)))
    if log_stages is not None:
        log_stages.record("evaluate", "elm")
    return report


# -- live scoring -------------------------------------------------------------

@dataclass(frozen=True)
class WindowScore:
    song_id: str
    window_start: float
    raw: float
    score: float
    latency_s: float = 0.0


@dataclass(frozen=True)
class SongScore:
    song_id: str
    score: float
    n_windows: int


class FileSink:
    """Appends ``song_id, score[, window_start]`` lines to a file."""

    def __init__(self, path):
        self.path = path

    def emit(self, song_id: str, score: float, window_start: Optional[float] = None) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(format_record(song_id, score, window_start) + "\n")


class HttpSink:
    """POSTs each record as JSON; spools to a file when the target is unreachable."""

    def __init__(self, url: str, spool_path, timeout: float = 2.0):
        self.url = url
        self.spool = FileSink(spool_path)
        self.timeout = timeout
        self.failures = 0

    def emit(self, song_id: str, score: float, window_start: Optional[float] = None) -> None:
        record = {"song_id": song_id, "score": score}
        if window_start is not None:
            record["window_start"] = window_start
        req = urllib.request.Request(self.url, data=json.dumps(record).encode(),
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout):
                pass
        except OSError as exc:
            self.failures += 1
            log.warning("rating sink %s unreachable (%s); spooling to %s",
                        self.url, exc, self.spool.path)
            self.spool.emit(song_id, score, window_start)


class ListSink:
    def __init__(self):
        self.records: list = []

    def emit(self, song_id, score, window_start=None):
        self.records.append((song_id, score, window_start))


def format_record(song_id: str, score: float, window_start: Optional[float] = None) -> str:
    if window_start is None:
        return f"{song_id}, {score!r}"
    return f"{song_id}, {score!r}, {window_start!r}"


def make_sink(target: str, spool):
    if not target:
        return None
    if target.startswith(("http://", "https://")):
        return HttpSink(target, spool)
    return FileSink(target)


class StreamScorer:
    """Scores each song window as soon as its last sample has arrived.

    Windows are laid out exactly as in offline extraction (same offsets,
    same look-back context), so live and offline scores coincide.
    """

    def __init__(self, model: ElmModel, ids, config: PipelineConfig, fs: float = 220.0,
                 layout=None, sink=None):
        if model.input_dim != len(ids):
            raise ModelMismatch(f"model takes {model.input_dim} inputs, biomarker has {len(ids)}")
        self.model = model
        self.ids = list(ids)
        self.config = config
        self.fs = fs
        self.layout = layout or MUSE_LAYOUT
        self.sink = sink
        self.wanted = rhythms_for(self.ids, self.layout)
        self.n_win = int(round(config.window_s * fs))
        self.window_scores: list = []
        self.song_scores: list = []
        self.skipped_windows = 0
        self._song = None
        self._times: list = []
        self._rows: list = []
        self._next = 0
        self._current_scores: list = []

    def _offset(self, k: int) -> int:
        step = self.config.window_s * (1.0 - self.config.overlap)
        return int(round((self.config.head_drop_s + k * step) * self.fs))

    def _finish_song(self):
        if self._song is not None and self._current_scores:
            score = aggregate_scores(self._current_scores, self.config.aggregate)
            result = SongScore(self._song, score, len(self._current_scores))
            self.song_scores.append(result)
            if self.sink is not None:
                self.sink.emit(self._song, score)
        self._song = None
        self._times, self._rows, self._current_scores = [], [], []
        self._next = 0

    def push(self, tagged) -> list:
        """Consume one tagged frame; returns any window scores it completed."""
        if tagged.excluded:
            if self._song is not None:
                self._finish_song()
            return []
        if tagged.song_id != self._song:
            self._finish_song()
            self._song = tagged.song_id
        self._times.append(tagged.frame.timestamp)
        self._rows.append(tagged.frame.values)
        start = self._offset(self._next)
        if len(self._rows) < start + self.n_win:
            return []
        self._next += 1
        began = time.perf_counter()
        times = np.asarray(self._times)
        data = np.asarray(self._rows, dtype=float)
        window = dsp.build_window(self._song, times, data, start, self.n_win, self.fs,
                                  self.layout.channels, None, self.config.context_s,
                                  self.config.edge_taper_s, self.config.notch_hz, self.wanted)
        vec = compute_descriptors(window, self.ids, self.layout)
        if vec.missing:
            self.skipped_windows += 1
            log.warning("window %s@%.2f skipped: %s", self._song, window.start_time,
                        "; ".join(vec.missing.values()))
            return []
        raw = float(predict_raw(self.model, np.array([[vec.values[d] for d in self.ids]]))[0])
        score = float(clip_scores(raw))
        result = WindowScore(self._song, window.start_time, raw, score,
                             time.perf_counter() - began)
        self.window_scores.append(result)
        self._current_scores.append(score)
        if self.sink is not None:
            self.sink.emit(self._song, score, window.start_time)
        return [result]

    def close(self) -> None:
        self._finish_song()


def offline_scores(session, model: ElmModel, ids, config: PipelineConfig) -> list:
    """Window scores computed from a stored session, for parity checks."""
    mat = extract_features(session, ids, "", config.window_s, config.overlap,
                           config.head_drop_s, config.context_s, config.edge_taper_s,
                           config.notch_hz, rated_only=False)
    ok = mat.complete_rows(ids)
    raw = predict_raw(model, mat.values[ok])
    return [WindowScore(str(s), float(t), float(r), float(clip_scores(r)))
            for s, t, r in zip(np.asarray(mat.song_ids)[ok], mat.window_starts[ok], raw)]
