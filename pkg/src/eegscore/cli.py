"""Command-line entry point: ``eegscore <command> ...``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import plotting, stats
from .config import PipelineConfig
from .elm import load_model, nrmse, save_model
from .errors import EegScoreError, SchemaMismatch
from .features import extract_features, read_matrix, write_matrix
from .ingest import (FrameStream, read_replay, read_session, session_datagrams,
                     udp_datagrams, write_replay, write_session)
from .pipeline import (ListSink, StageLog, StreamScorer, band_catalog, evaluate,
                       make_sink, train_listener)
from .synth import SCORE_RULES, gen_synthetic_session

log = logging.getLogger("eegscore")


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = cfg.updated(seed=args.seed)
    return cfg


def _stem(path) -> str:
    name = Path(path).name
    for suffix in (".features.tsv", ".session", ".tsv", ".txt"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem


def _write_stage_log(stages: StageLog, out: Path):
    with open(out.with_name(out.name + ".stages"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(stages.lines()) + "\n")


def cmd_synth(args, cfg, stages):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rule = SCORE_RULES[args.rule]
    seeds = np.random.SeedSequence(cfg.seed).generate_state(args.participants)
    written = []
    for i, seed in enumerate(seeds):
        session = gen_synthetic_session(args.songs, rule, int(seed), args.song_duration,
                                        ad_every=args.ads_every)
        path = out / f"p{i + 1}.session"
        write_session(session, path)
        written.append(path)
        if args.replay:
            write_replay(out / f"p{i + 1}.osc", session_datagrams(session))
    stages.record("synth", "synth")
    stages.record("synth", "ingest")
    for path in written:
        print(path)
    return 0


def cmd_extract(args, cfg, stages):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for path in args.sessions:
        try:
            session = read_session(path)
            mat = extract_features(session, None, _stem(path), cfg.window_s, cfg.overlap,
                                   cfg.head_drop_s, cfg.context_s, cfg.edge_taper_s, cfg.notch_hz)
        except (EegScoreError, OSError) as exc:
            failures += 1
            print(f"error\t{path}\t{type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        target = out / f"{_stem(path)}.features.tsv"
        write_matrix(mat, target)
        for note in mat.notes:
            print(f"note\t{path}\t{note}", file=sys.stderr)
        print(f"{target}\t{mat.n_rows} rows\t{len(mat.ids)} columns")
    for module in ("ingest", "dsp", "descriptors"):
        stages.record("extract", module)
    return 1 if failures == len(args.sessions) else 0


def cmd_select(args, cfg, stages):
    mats = [read_matrix(p) for p in args.matrices]
    mode = args.mode or cfg.selection_mode
    ranked = stats.rank_descriptors(mats)
    spec = stats.select_biomarker(ranked, mats, mode, cfg.epsilon_gain, cfg.max_features,
                                  cfg.top_k)
    out = Path(args.out)
    stats.write_biomarker(spec, out)
    ranking = out.with_name(out.name + ".ranking.tsv")
    with open(ranking, "w", encoding="utf-8") as fh:
        fh.write("rank\tdescriptor\tmean_R\n")
        for k, (did, r) in enumerate(ranked, start=1):
            fh.write(f"{k}\t{did}\t{r!r}\n")
    plotting.plot_ranking(ranked, out.with_name(out.name + ".ranking.png"), selected=spec.ids)
    stages.record("select", "stats")
    print(f"biomarker ({mode}, R={spec.selection_r:.4f}):")
    for did in spec.ids:
        print(f"  {did}")
    return 0


def cmd_train(args, cfg, stages):
    mat = read_matrix(args.matrix)
    spec = stats.read_biomarker(args.biomarker)
    mat.column_index(spec.ids)  # raises MissingFeature
    listener = train_listener(mat, spec.ids, cfg, cfg.rng_seeds("train", 1)[0])
    save_model(listener.model, args.out)
    complete = mat.complete(spec.ids)
    from .elm import clip_scores, predict_raw
    train_err = nrmse(complete.ratings, clip_scores(predict_raw(listener.model, complete.values)))
    with open(f"{args.out}.report", "w", encoding="utf-8") as fh:
        fh.write("hidden\tnrmse_train\tnrmse_val\n")
        for h, e_t, e_v in listener.report.rows:
            fh.write(f"{h}\t{e_t!r}\t{e_v!r}\n")
        fh.write(f"chosen\t{listener.report.chosen}\tconverged={listener.report.converged}\n")
        fh.write(f"final_train_nrmse\t{train_err!r}\n")
    stages.record("train", "elm")
    flag = "" if listener.report.converged else " (NotConverged)"
    print(f"hidden={listener.model.hidden_count}{flag} train_nrmse={train_err:.4f} -> {args.out}")
    return 0


def cmd_evaluate(args, cfg, stages):
    mats = [read_matrix(p) for p in args.matrices]
    spec = stats.read_biomarker(args.biomarker)
    report = evaluate(mats, spec.ids, cfg, stages)
    out = Path(args.out)
    out.write_text(report.to_text(), encoding="utf-8")
    plotting.plot_evaluation(report, out.with_name(out.name + ".png"))
    print(f"nrmse (window) {report.mean:.4f} +/- {report.std:.4f}; "
          f"per-song {report.song_mean:.4f}; constant predictor {report.baseline_mean:.4f}")
    return 0


def _source(args, cfg):
    if args.replay:
        return read_replay(args.replay)
    if args.session:
        return session_datagrams(read_session(args.session))
    return udp_datagrams(cfg.osc_host, args.port or cfg.osc_port, args.idle_timeout)


def cmd_score_stream(args, cfg, stages):
    model = load_model(args.model)
    spec = stats.read_biomarker(args.biomarker)
    out = Path(args.out)
    sink = make_sink(args.sink if args.sink is not None else cfg.sink,
                     out.with_name(out.name + ".spool"))
    builder = FrameStream(eeg_address=cfg.osc_address, marker_address=cfg.marker_address,
                          clock="sample" if (args.replay or args.session) else "arrival")
    scorer = StreamScorer(model, spec.ids, cfg, builder.fs, builder.layout, sink or ListSink())
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("song_id\twindow_start\tscore\traw\n")
        for datagram in _source(args, cfg):
            for tagged in builder.feed(datagram):
                for w in scorer.push(tagged):
                    fh.write(f"{w.song_id}\t{w.window_start!r}\t{w.score!r}\t{w.raw!r}\n")
                    fh.flush()
        scorer.close()
        fh.write("song_id\tfinal_score\tn_windows\n")
        for s in scorer.song_scores:
            fh.write(f"{s.song_id}\t{s.score!r}\t{s.n_windows}\n")
    plotting.plot_stream(scorer.window_scores, out.with_name(out.name + ".png"))
    for module in ("ingest", "dsp", "descriptors", "elm"):
        stages.record("score-stream", module)
    worst = max((w.latency_s for w in scorer.window_scores), default=0.0)
    print(f"{len(scorer.window_scores)} window scores, {len(scorer.song_scores)} songs, "
          f"{builder.parse_errors} parse errors, {scorer.skipped_windows} skipped windows, "
          f"max scoring latency {worst:.3f} s")
    return 0


def cmd_sweep(args, cfg, stages):
    sessions = [read_session(p) for p in args.sessions]
    spec = stats.read_biomarker(args.biomarker)
    lengths = [float(v) for v in args.lengths.split(",") if v.strip()] if args.lengths else []
    curve = stats.r_vs_window_length(sessions, spec, lengths, cfg.overlap, cfg.head_drop_s,
                                     cfg.context_s, names=[_stem(p) for p in args.sessions])
    out = Path(args.out)
    names = [_stem(p) for p in args.sessions]
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("\t".join(["length_s", "mean_R", *names, "too_short"]) + "\n")
        for p in curve:
            fh.write("\t".join([repr(p.length), repr(p.mean_r), *map(repr, p.participant_r),
                                str(p.too_short)]) + "\n")
    plotting.plot_sweep(curve, out.with_name(out.name + ".png"))
    for module in ("dsp", "descriptors", "stats"):
        stages.record("sweep", module)
    rising = stats.monotone_points([p.mean_r for p in curve])
    print(f"{len(curve)} lengths; {rising} of {len(curve)} points non-decreasing")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eegscore", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="root seed (overrides config)")
        p.add_argument("--out", required=True, help="output file or directory")
        p.set_defaults(func=func)
        return p

    p = command("synth", cmd_synth, "write synthetic session files")
    p.add_argument("--participants", type=int, default=5)
    p.add_argument("--songs", type=int, default=30)
    p.add_argument("--song-duration", type=float, default=150.0)
    p.add_argument("--rule", choices=sorted(SCORE_RULES), default="alpha")
    p.add_argument("--ads-every", type=int, default=0)
    p.add_argument("--replay", action="store_true", help="also write OSC replay files")

    p = command("extract", cmd_extract, "sessions -> descriptor matrices")
    p.add_argument("sessions", nargs="+")

    p = command("select", cmd_select, "rank descriptors and synthesize the biomarker")
    p.add_argument("matrices", nargs="+")
    p.add_argument("--mode", choices=("greedy", "exhaustive", "fixed"))

    p = command("train", cmd_train, "fit one listener's ELM")
    p.add_argument("matrix")
    p.add_argument("--biomarker", required=True)

    p = command("evaluate", cmd_evaluate, "repeated 60/40 song-wise evaluation")
    p.add_argument("matrices", nargs="+")
    p.add_argument("--biomarker", required=True)

    p = command("score-stream", cmd_score_stream, "score a live or replayed stream")
    p.add_argument("--model", required=True)
    p.add_argument("--biomarker", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--replay", help="length-prefixed datagram capture")
    src.add_argument("--session", help="session file replayed as datagrams")
    p.add_argument("--port", type=int, help="UDP port (live mode)")
    p.add_argument("--idle-timeout", type=float, default=5.0)
    p.add_argument("--sink", help="rating sink: file path or http(s) URL")

    p = command("sweep", cmd_sweep, "biomarker R as a function of window length")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--biomarker", required=True)
    p.add_argument("--lengths", default="30,50,70,90,100")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        stages = StageLog()
        with band_catalog(cfg.bands):
            code = args.func(args, cfg, stages)
        out = Path(args.out)
        if out.suffix or not out.is_dir():
            _write_stage_log(stages, out)
        return code
    except (EegScoreError, SchemaMismatch, ValueError, OSError) as exc:
        print(f"eegscore {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
