"""Report figures, rendered off-screen to image files next to the text reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 7,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
}


def _figure(width=6.4, height=3.6):
    with plt.rc_context(STYLE):
        return plt.subplots(figsize=(width, height))


def _save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path)
    plt.close(fig)
    return path


def plot_ranking(ranked, path, top: int = 40, selected=()):
    """Bar chart of mean distance correlation per descriptor, best first."""
    ranked = list(ranked)[:top]
    fig, ax = _figure(max(6.4, 0.18 * len(ranked)), 3.8)
    names = [str(d) for d, _ in ranked]
    values = [r for _, r in ranked]
    chosen = {str(d) for d in selected}
    colors = ["tab:red" if n in chosen else "tab:gray" for n in names]
    ax.bar(np.arange(len(values)), values, color=colors)
    ax.set_xticks(np.arange(len(values)))
    ax.set_xticklabels(names, rotation=90)
    ax.set_ylabel("mean distance correlation R")
    ax.set_ylim(0, 1)
    ax.set_title("Descriptor ranking (selected in red)")
    return _save(fig, path)


def plot_sweep(curve, path):
    """R of the biomarker against window length, with per-participant traces."""
    fig, ax = _figure()
    lengths = [p.length for p in curve]
    if curve:
        per = np.array([p.participant_r for p in curve])
        for j in range(per.shape[1]):
            ax.plot(lengths, per[:, j], color="0.75", lw=0.8)
        ax.plot(lengths, [p.mean_r for p in curve], "o-", color="tab:blue", label="mean")
        ax.legend(loc="lower right")
    ax.set_xlabel("window length (s)")
    ax.set_ylabel("distance correlation R")
    ax.set_title("Biomarker relevance vs. window length")
    return _save(fig, path)


def plot_evaluation(report, path):
    """Per-participant NRMSE over the repeated splits, against the mean-rating baseline."""
    fig, ax = _figure()
    names = list(report.per_participant)
    data = [report.per_participant[n] for n in names]
    ax.boxplot(data, tick_labels=names)
    base = [np.mean(report.baseline[n]) for n in names]
    ax.plot(np.arange(1, len(names) + 1), base, "x", color="tab:red", label="constant predictor")
    ax.set_ylabel("NRMSE")
    ax.set_title(f"Held-out error, {report.window_s:g} s windows")
    ax.legend(loc="upper right")
    return _save(fig, path)


def plot_stream(window_scores, path):
    """Window scores over time, one marker colour per song."""
    fig, ax = _figure()
    songs = list(dict.fromkeys(w.song_id for w in window_scores))
    for song in songs:
        ws = [w for w in window_scores if w.song_id == song]
        ax.plot([w.window_start for w in ws], [w.score for w in ws], "o-", ms=3, label=song)
    ax.set_ylim(0.8, 5.2)
    ax.set_xlabel("window start (s)")
    ax.set_ylabel("predicted score")
    if 0 < len(songs) <= 10:
        ax.legend(loc="upper right", ncol=2)
    return _save(fig, path)
