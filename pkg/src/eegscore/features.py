"""Descriptor matrices: one row per analysis window, one column per descriptor."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .descriptors import (MIN_PRESENT_FRACTION, DescriptorId, all_descriptor_ids,
                          compute_descriptors, rhythms_for)
from .dsp import segment_windows
from .errors import FormatError, MissingFeature, SchemaMismatch

log = logging.getLogger(__name__)


@dataclass
class FeatureMatrix:
    ids: list
    values: np.ndarray
    ratings: np.ndarray
    song_ids: list
    window_starts: np.ndarray
    participant: str = ""
    window_s: float = 90.0
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.song_ids), len(self.ids))
        self.ratings = np.asarray(self.ratings, dtype=float).reshape(-1)
        self.window_starts = np.asarray(self.window_starts, dtype=float).reshape(-1)
        self.window_s = float(self.window_s)
        if not len(self.ratings) == len(self.song_ids) == len(self.window_starts):
            raise SchemaMismatch("rows, ratings and window starts are misaligned")

    @property
    def n_rows(self) -> int:
        return len(self.song_ids)

    def column_index(self, ids) -> list:
        lookup = {d: i for i, d in enumerate(self.ids)}
        try:
            return [lookup[d] for d in ids]
        except KeyError as exc:
            raise MissingFeature(f"{self.participant or 'matrix'} lacks column {exc.args[0]}") from None

    def columns(self, ids) -> np.ndarray:
        return self.values[:, self.column_index(ids)]

    def complete_rows(self, ids) -> np.ndarray:
        return np.all(np.isfinite(self.columns(ids)), axis=1)

    def subset(self, ids=None, rows=None) -> "FeatureMatrix":
        ids = list(self.ids if ids is None else ids)
        rows = np.arange(self.n_rows) if rows is None else np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return FeatureMatrix(ids, self.columns(ids)[rows], self.ratings[rows],
                             [self.song_ids[i] for i in rows], self.window_starts[rows],
                             self.participant, self.window_s)

    def complete(self, ids) -> "FeatureMatrix":
        """Rows with no missing value among ``ids``, restricted to those columns."""
        return self.subset(ids, self.complete_rows(ids))

    @property
    def songs(self) -> list:
        return list(dict.fromkeys(self.song_ids))


def extract_features(session, ids=None, participant: str = "", window_s: float = 90.0,
                     overlap: float = 0.5, drop_head_s: float = 5.0, context_s: float = 5.0,
                     edge_taper: float = 0.5, notch_hz=50.0,
                     rated_only: bool = True) -> FeatureMatrix:
    """Windows -> descriptor vectors -> matrix for the rated songs of a session.

    Too-short songs, unrated songs and incomplete vectors are noted in
    ``matrix.notes`` rather than raised. With ``rated_only=False`` unrated
    songs are kept with a NaN rating.
    """
    ids = list(all_descriptor_ids(session.layout) if ids is None else ids)
    wanted = rhythms_for(ids, session.layout)
    windows, too_short = segment_windows(session, window_s, overlap, drop_head_s, context_s,
                                         edge_taper, notch_hz, wanted=wanted)
    notes = [f"SongTooShort {r.song_id} {r.duration:.3f}" for r in too_short]
    rows, ratings, song_ids, starts = [], [], [], []
    unrated = set()
    for window in windows:
        if window.song_id not in session.ratings:
            unrated.add(window.song_id)
            if rated_only:
                continue
        vec = compute_descriptors(window, ids, session.layout)
        if len(vec.values) < MIN_PRESENT_FRACTION * len(ids):
            notes.append(f"IncompleteVector {window.song_id} {window.start_time!r}")
            continue
        for did, reason in vec.missing.items():
            log.debug("%s@%.2f missing %s: %s", window.song_id, window.start_time, did, reason)
        rows.append([vec.get(d) for d in ids])
        ratings.append(session.ratings.get(window.song_id, np.nan))
        song_ids.append(window.song_id)
        starts.append(window.start_time)
    notes += [f"Unrated {s}" for s in sorted(unrated)]
    return FeatureMatrix(ids, np.array(rows, dtype=float).reshape(len(rows), len(ids)),
                         ratings, song_ids, starts, participant, window_s, notes)


def check_same_schema(mats) -> list:
    if not mats:
        raise SchemaMismatch("no feature matrices given")
    ids = list(mats[0].ids)
    for m in mats[1:]:
        if set(m.ids) != set(ids):
            raise SchemaMismatch(f"participant {m.participant!r} has a different descriptor set")
    return ids


# Text table: "#features v1 participant=<p> window_s=<s>", a header row, then
# tab-separated rows "song_id window_start rating <values...>".

def write_matrix(mat: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#features v1 participant={mat.participant or '-'} window_s={mat.window_s!r}\n")
        for note in mat.notes:
            fh.write(f"#note {note}\n")
        fh.write("\t".join(["song_id", "window_start", "rating", *map(str, mat.ids)]) + "\n")
        for i in range(mat.n_rows):
            cells = [mat.song_ids[i], repr(float(mat.window_starts[i])), repr(float(mat.ratings[i]))]
            cells += [repr(float(v)) for v in mat.values[i]]
            fh.write("\t".join(cells) + "\n")


def read_matrix(path) -> FeatureMatrix:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#features v1"):
        raise FormatError("missing '#features v1' header", 1)
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[2:] if "=" in tok)
    notes, lineno = [], 1
    while lineno < len(lines) and lines[lineno].startswith("#"):
        if lines[lineno].startswith("#note "):
            notes.append(lines[lineno][6:])
        lineno += 1
    if lineno >= len(lines):
        raise FormatError("missing column header", lineno + 1)
    header = lines[lineno].split("\t")
    if header[:3] != ["song_id", "window_start", "rating"]:
        raise FormatError("column header must start with song_id, window_start, rating", lineno + 1)
    try:
        ids = [DescriptorId.parse(h) for h in header[3:]]
    except ValueError as exc:
        raise FormatError(str(exc), lineno + 1) from exc
    song_ids, starts, ratings, rows = [], [], [], []
    for k, line in enumerate(lines[lineno + 1:], start=lineno + 2):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != len(header):
            raise FormatError(f"expected {len(header)} cells, got {len(cells)}", k)
        try:
            song_ids.append(cells[0])
            starts.append(float(cells[1]))
            ratings.append(float(cells[2]))
            rows.append([float(c) for c in cells[3:]])
        except ValueError as exc:
            raise FormatError(str(exc), k) from exc
    participant = meta.get("participant", "")
    return FeatureMatrix(ids, np.array(rows, dtype=float).reshape(len(rows), len(ids)), ratings,
                         song_ids, starts, "" if participant == "-" else participant,
                         float(meta.get("window_s", 90.0)), notes)
