"""Distance correlation and biomarker synthesis.

Descriptors are ranked by their distance correlation with the ratings,
averaged over participants; the composite biomarker is then grown greedily
along that ranking, keeping a descriptor only if it lifts the mean
multivariate distance correlation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .descriptors import DescriptorId
from .errors import FormatError, NonFinite, TooFewSamples
from .features import check_same_schema, extract_features

FIXED_BIOMARKER = (
    DescriptorId("asym_norm", "beta_low", "temporal"),
    DescriptorId("rel_energy", "alpha", "TP9"),
    DescriptorId("rel_energy", "alpha", "TP10"),
    DescriptorId("pac", "gamma_low", "FP1", "gamma_high"),
    DescriptorId("rel_energy", "theta", "TP9"),
)


def _as_sample(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"sample must be 1-D or 2-D, got shape {a.shape}")
    return a


def _centered_distances(a: np.ndarray) -> np.ndarray:
    d = squareform(pdist(a))
    return d - d.mean(axis=0, keepdims=True) - d.mean(axis=1, keepdims=True) + d.mean()


def _unit_scale(a: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(a))
    return a / peak if peak > 0 else a


def distance_correlation(x, y) -> float:
    """Sample distance correlation (V-statistic) of two paired samples.

    ``x`` is n x p and ``y`` is n x q (1-D inputs are single columns).
    Returns 0 when either sample has zero distance variance.
    """
    x, y = _as_sample(x), _as_sample(y)
    n = len(x)
    if len(y) != n:
        raise ValueError(f"samples differ in size: {n} vs {len(y)}")
    if n < 2:
        raise TooFewSamples(f"distance correlation needs n >= 2, got {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFinite("distance correlation of non-finite values")
    # dCor is scale-free; rescaling keeps the variance products clear of under/overflow
    a = _centered_distances(_unit_scale(x))
    b = _centered_distances(_unit_scale(y))
    dcov2 = (a * b).mean()
    dvar_x = (a * a).mean()
    dvar_y = (b * b).mean()
    if dvar_x <= 0 or dvar_y <= 0:
        return 0.0
    # dcov2 >= 0 in exact arithmetic; round-off can leave it a hair below
    return float(np.sqrt(max(dcov2, 0.0) / np.sqrt(dvar_x * dvar_y)))


def zscore(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    sd = a.std(axis=0)
    sd[sd == 0] = 1.0
    return (a - a.mean(axis=0)) / sd


def participant_r(mat, ids, standardize: bool = True) -> float:
    sub = mat.complete(ids)
    x = sub.values
    if standardize and len(ids) > 1:
        x = zscore(x)
    return distance_correlation(x, sub.ratings)


def mean_r(mats, ids, standardize: bool = True) -> tuple:
    """(mean R over participants, per-participant R list)."""
    rs = [participant_r(m, ids, standardize) for m in mats]
    return float(np.mean(rs)), rs


def rank_descriptors(mats) -> list:
    """(DescriptorId, mean R) sorted by descending R, ties by id string."""
    ids = check_same_schema(mats)
    ranked = [(did, mean_r(mats, [did])[0]) for did in ids]
    ranked.sort(key=lambda item: (-item[1], str(item[0])))
    return ranked


@dataclass
class BiomarkerSpec:
    ids: list
    selection_r: float = float("nan")
    participant_r: dict = field(default_factory=dict)
    window_s: float = 90.0
    mode: str = "greedy"

    def __post_init__(self):
        self.ids = list(self.ids)
        if not self.ids:
            raise ValueError("a biomarker needs at least one descriptor")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate descriptor in biomarker")


def select_biomarker(ranked, mats, mode: str = "greedy", epsilon_gain: float = 1e-3,
                     max_features: int = 8, top_k: int = 12, window_s=None) -> BiomarkerSpec:
    """Grow the composite biomarker along ``ranked``.

    ``greedy`` walks the ranking once, keeping an id iff the mean multivariate
    R rises by at least ``epsilon_gain``; ``exhaustive`` scores every subset
    (up to ``max_features``) of the top ``top_k`` ids; ``fixed`` returns the
    fixed five-descriptor set.
    """
    window_s = window_s if window_s is not None else (mats[0].window_s if mats else 90.0)
    if mode == "fixed":
        ids = list(FIXED_BIOMARKER)
        r, rs = mean_r(mats, ids) if mats else (float("nan"), [])
        return _spec(ids, r, rs, mats, window_s, mode)
    if not ranked:
        raise ValueError("ranked descriptor list is empty")
    order = [did for did, _ in ranked]
    if mode == "greedy":
        chosen = [order[0]]
        best, best_rs = mean_r(mats, chosen)
        for did in order[1:]:
            if len(chosen) >= max_features:
                break
            r, rs = mean_r(mats, chosen + [did])
            if r >= best + epsilon_gain:
                chosen.append(did)
                best, best_rs = r, rs
        return _spec(chosen, best, best_rs, mats, window_s, mode)
    if mode == "exhaustive":
        if top_k > 12:
            raise ValueError("exhaustive search is limited to the top 12 descriptors")
        pool = order[:top_k]
        best_key, best = None, None
        for size in range(1, min(max_features, len(pool)) + 1):
            for combo in itertools.combinations(pool, size):
                r, rs = mean_r(mats, list(combo))
                key = (r, -size)
                if best_key is None or key > best_key:
                    best_key, best = key, (list(combo), r, rs)
        return _spec(best[0], best[1], best[2], mats, window_s, mode)
    raise ValueError(f"unknown selection mode {mode!r}")


def _spec(ids, r, rs, mats, window_s, mode):
    names = [m.participant or f"p{i}" for i, m in enumerate(mats)]
    return BiomarkerSpec(ids, float(r), dict(zip(names, map(float, rs))), window_s, mode)


def write_biomarker(spec: BiomarkerSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#biomarker v1\n")
        fh.write(f"mode {spec.mode}\n")
        fh.write(f"window_s {spec.window_s!r}\n")
        fh.write(f"selection_R {spec.selection_r!r}\n")
        for name, r in spec.participant_r.items():
            fh.write(f"participant_R {name} {r!r}\n")
        for did in spec.ids:
            fh.write(f"id {did}\n")


def read_biomarker(path) -> BiomarkerSpec:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "#biomarker v1":
        raise FormatError("missing '#biomarker v1' header", 1)
    ids, prs, fields = [], {}, {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "id":
                ids.append(DescriptorId.parse(parts[1]))
            elif parts[0] == "participant_R":
                prs[parts[1]] = float(parts[2])
            elif parts[0] in ("mode", "window_s", "selection_R"):
                fields[parts[0]] = parts[1]
            else:
                raise FormatError(f"unknown record {parts[0]!r}", lineno)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(str(exc), lineno) from exc
    return BiomarkerSpec(ids, float(fields.get("selection_R", "nan")), prs,
                         float(fields.get("window_s", 90.0)), fields.get("mode", "greedy"))


@dataclass
class SweepPoint:
    length: float
    mean_r: float
    participant_r: list
    n_windows: list
    too_short: int


def r_vs_window_length(sessions, biomarker, lengths, overlap: float = 0.5,
                       drop_head_s: float = 5.0, context_s: float = 5.0,
                       names=None) -> list:
    """Mean multivariate R of the biomarker for each window length.

    ``sessions`` holds one session per participant. Whether the curve rises
    is left to the caller to judge; see :func:`monotone_points`.
    """
    ids = list(biomarker.ids if isinstance(biomarker, BiomarkerSpec) else biomarker)
    names = names or [f"p{i}" for i in range(len(sessions))]
    curve = []
    for length in lengths:
        mats = [extract_features(s, ids, name, length, overlap, drop_head_s, context_s)
                for s, name in zip(sessions, names)]
        short = sum(1 for m in mats for note in m.notes if note.startswith("SongTooShort"))
        r, rs = mean_r(mats, ids)
        curve.append(SweepPoint(float(length), r, rs, [m.n_rows for m in mats], short))
    return curve


def monotone_points(values) -> int:
    """Points not below their predecessor; the first point always counts."""
    values = list(values)
    if not values:
        return 0
    return 1 + sum(1 for a, b in zip(values, values[1:]) if b >= a)
