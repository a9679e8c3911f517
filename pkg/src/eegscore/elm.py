"""Extreme learning machine regression.

The hidden layer (weights and biases, uniform on [-1, 1]) is drawn once from
the seed and frozen; training only solves a linear least-squares problem for
the readout. Inputs are standardized with training statistics and the
readout is fitted to mean-centered targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import (DimensionMismatch, EmptyInput, FormatError, LengthMismatch,
                     NonFinite)

SCORE_MIN, SCORE_MAX = 1.0, 5.0
SCORE_RANGE = SCORE_MAX - SCORE_MIN

ACTIVATIONS = {
    "logistic": lambda z: 0.5 * (1.0 + np.tanh(0.5 * z)),
    "tanh": np.tanh,
    "relu": lambda z: np.maximum(z, 0.0),
}


@dataclass(frozen=True)
class ScorePrediction:
    raw: float
    clipped: float

    @classmethod
    def from_raw(cls, raw: float) -> "ScorePrediction":
        return cls(float(raw), float(min(SCORE_MAX, max(SCORE_MIN, raw))))


@dataclass
class ElmModel:
    input_dim: int
    hidden_count: int
    input_weights: np.ndarray
    biases: np.ndarray
    output_weights: np.ndarray
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    target_offset: float = 0.0
    activation: str = "logistic"
    rng_seed: int = 0
    ridge_lambda: float = 0.0
    degenerate_features: list = field(default_factory=list)

    def standardize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.feature_mean) / self.feature_scale

    def hidden(self, x) -> np.ndarray:
        z = self.standardize(x) @ self.input_weights.T + self.biases
        return ACTIVATIONS[self.activation](z)


def hidden_layer(input_dim: int, hidden_count: int, seed: int):
    """Frozen random layer. Row k depends only on (seed, k), so wider layers
    extend narrower ones drawn from the same seed."""
    params = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(hidden_count, input_dim + 1))
    return params[:, :input_dim].copy(), params[:, input_dim].copy()


def _check_xy(x, y=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionMismatch(f"features must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFinite("non-finite feature value")
    if y is None:
        return x
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) != len(x):
        raise LengthMismatch(f"{len(x)} feature rows but {len(y)} targets")
    if not np.all(np.isfinite(y)):
        raise NonFinite("non-finite target value")
    return x, y


def solve_readout(h: np.ndarray, t: np.ndarray, ridge_lambda: float = 0.0) -> np.ndarray:
    """Minimum-norm (ridge) least squares via a pivoted orthogonal factorization."""
    if ridge_lambda > 0:
        k = h.shape[1]
        h = np.vstack([h, np.sqrt(ridge_lambda) * np.eye(k)])
        t = np.concatenate([t, np.zeros(k)])
    beta, *_ = la.lstsq(h, t, lapack_driver="gelsy")
    return beta


def elm_train(x, y, hidden_count: int, seed: int = 0, ridge_lambda: float = 1e-6,
              activation: str = "logistic") -> ElmModel:
    x, y = _check_xy(x, y)
    n, d = x.shape
    if n < 1 or d < 1:
        raise EmptyInput("training needs at least one row and one column")
    if hidden_count < 1:
        raise ValueError("hidden_count must be >= 1")
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be >= 0")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    degenerate = [int(i) for i in np.flatnonzero(scale == 0)]
    scale[scale == 0] = 1.0
    w, b = hidden_layer(d, hidden_count, seed)
    model = ElmModel(d, hidden_count, w, b, np.zeros(hidden_count), mean, scale,
                     float(y.mean()), activation, int(seed), float(ridge_lambda), degenerate)
    model.output_weights = solve_readout(model.hidden(x), y - model.target_offset, ridge_lambda)
    return model


def predict_raw(model: ElmModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, model.input_dim) if x.size else x.reshape(0, model.input_dim)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionMismatch(f"model expects {model.input_dim} columns, got shape {x.shape}")
    if len(x) == 0:
        return np.zeros(0)
    return model.hidden(x) @ model.output_weights + model.target_offset


def elm_predict(model: ElmModel, x) -> list:
    return [ScorePrediction.from_raw(r) for r in predict_raw(model, x)]


def clip_scores(raw) -> np.ndarray:
    return np.clip(np.asarray(raw, dtype=float), SCORE_MIN, SCORE_MAX)


def nrmse(y_true, y_pred) -> float:
    """Root-mean-square error divided by the rating range (4)."""
    y_true = np.asarray(y_true, dtype=float).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=float).reshape(-1)
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} targets vs {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise EmptyInput("nrmse of empty sequences")
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)) / SCORE_RANGE)


@dataclass
class HiddenCountReport:
    rows: list  # (candidate, nrmse_train, nrmse_val)
    chosen: int
    converged: bool

    @property
    def not_converged(self) -> bool:
        return not self.converged


def select_hidden_count(x_train, y_train, x_val, y_val, candidates, seed: int = 0,
                        ridge_lambda: float = 1e-6, activation: str = "logistic",
                        train_tol: float = 0.01, convergence_tol: float = 0.02,
                        val_slack: float = 0.005):
    """Smallest width whose training error is below ``train_tol``, whose
    train/validation gap is below ``convergence_tol`` and whose validation
    error is within ``val_slack`` of the best seen so far.

    Without such a width, the one with the lowest validation error is
    returned and the report is flagged as not converged.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no hidden-count candidates")
    if candidates != sorted(candidates):
        raise ValueError("candidates must be sorted ascending")
    rows = []
    best_val = np.inf
    for h in candidates:
        model = elm_train(x_train, y_train, h, seed, ridge_lambda, activation)
        e_train = nrmse(y_train, clip_scores(predict_raw(model, x_train)))
        e_val = nrmse(y_val, clip_scores(predict_raw(model, x_val)))
        rows.append((h, e_train, e_val))
        best_val = min(best_val, e_val)
        if (e_train < train_tol and abs(e_train - e_val) < convergence_tol
                and e_val <= best_val + val_slack):
            return h, HiddenCountReport(rows, h, True)
    h = min(rows, key=lambda r: (r[2], r[0]))[0]
    return h, HiddenCountReport(rows, h, False)


def _vec(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def save_model(model: ElmModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#elm v1\n")
        fh.write(f"input_dim {model.input_dim}\n")
        fh.write(f"hidden_count {model.hidden_count}\n")
        fh.write(f"activation {model.activation}\n")
        fh.write(f"seed {model.rng_seed}\n")
        fh.write(f"lambda {model.ridge_lambda!r}\n")
        fh.write(f"target_offset {model.target_offset!r}\n")
        fh.write(f"degenerate {' '.join(map(str, model.degenerate_features)) or '-'}\n")
        fh.write(f"feature_mean {_vec(model.feature_mean)}\n")
        fh.write(f"feature_scale {_vec(model.feature_scale)}\n")
        for row in model.input_weights:
            fh.write(f"W {_vec(row)}\n")
        fh.write(f"b {_vec(model.biases)}\n")
        fh.write(f"beta {_vec(model.output_weights)}\n")


def load_model(path) -> ElmModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "#elm v1":
        raise FormatError("missing '#elm v1' header", 1)
    fields, w_rows = {}, []
    for lineno, line in enumerate(lines[1:], start=2):
        key, _, rest = line.partition(" ")
        if not key:
            continue
        try:
            if key == "W":
                w_rows.append([float(v) for v in rest.split()])
            else:
                fields[key] = rest
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from exc
    try:
        d = int(fields["input_dim"])
        h = int(fields["hidden_count"])
        vec = lambda k: np.array([float(v) for v in fields[k].split()])
        model = ElmModel(
            d, h, np.array(w_rows).reshape(h, d), vec("b"), vec("beta"),
            vec("feature_mean"), vec("feature_scale"), float(fields["target_offset"]),
            fields["activation"], int(fields["seed"]), float(fields["lambda"]),
            [] if fields.get("degenerate", "-") == "-" else [int(v) for v in fields["degenerate"].split()])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad model file: {exc}") from exc
    if len(model.biases) != h or len(model.output_weights) != h or len(model.feature_mean) != d:
        raise FormatError("model vectors disagree with declared sizes")
    return model
