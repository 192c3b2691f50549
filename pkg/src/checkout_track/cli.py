"""Command-line front end.

    checkout-track simulate --seed 3 --out run/
    checkout-track resolve run/detections.jsonl --config run/pipeline.cfg --out run/submission.txt
    checkout-track evaluate run/submission.txt --truth run/truth.jsonl

Data goes to files (``--out``); diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from checkout_track.config import ConfigError, PipelineConfig, dump_config, load_config
from checkout_track.io import (
    RecordError,
    group_by_video,
    parse_detection_stream,
    read_ground_truth,
    read_submission,
    read_tracks,
    read_truth_boxes,
    write_detection_stream,
    write_ground_truth,
    write_submission,
    write_tracks,
)
from checkout_track.metrics import evaluate
from checkout_track.pipeline import fuse_streams, meta_for, process_stream, track_items
from checkout_track.sim import generate_scenario, load_scenario
from checkout_track.voting import resolve_events

log = logging.getLogger("checkout_track")

EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_INVALID = 4


class MissingInput(Exception):
    pass


def _check_inputs(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise MissingInput(f"input file not found: {p}")


def _config(args) -> PipelineConfig:
    _check_inputs(args.config)
    return load_config(args.config)


def _read_streams(paths):
    streams = []
    for p in paths:
        try:
            streams.append((Path(p).stem, parse_detection_stream(p)))
        except RecordError as exc:
            raise exc.in_source(p) from None
    return streams


def cmd_fuse(args) -> int:
    _check_inputs(*args.models, args.truth)
    cfg = _config(args)
    streams = _read_streams(args.models)
    truth = read_truth_boxes(args.truth) if args.truth else None
    items, result = fuse_streams(streams, cfg, truth)
    if result is not None:
        log.info("selected models: %s (mAP %.4f)", ", ".join(result.selected), result.score)
    write_detection_stream(items, args.out)
    return 0


def cmd_track(args) -> int:
    _check_inputs(*args.inputs)
    cfg = _config(args)
    items = [it for _, s in _read_streams(args.inputs) for it in s]
    per_video = []
    for vid, v_items in group_by_video(items).items():
        tracks, counts = track_items(v_items, meta_for(vid, cfg), cfg)
        log.info("video %s: %d tracks", vid, len(tracks))
        per_video.append((vid, tracks, counts))
    write_tracks(per_video, args.out)
    return 0


def cmd_vote(args) -> int:
    _check_inputs(args.tracks)
    cfg = _config(args)
    events = []
    for vid, tracks, counts in read_tracks(args.tracks):
        events.extend(resolve_events(tracks, meta_for(vid, cfg), cfg, freqs=counts or None))
    write_submission(events, args.out)
    return 0


def cmd_resolve(args) -> int:
    inputs = list(args.inputs) + list(args.models or [])
    if not inputs:
        raise ValueError("resolve needs at least one detection stream")
    _check_inputs(*inputs, args.truth)
    cfg = _config(args)
    streams = _read_streams(inputs)
    if len(streams) > 1:
        truth = read_truth_boxes(args.truth) if args.truth else None
        items, _ = fuse_streams(streams, cfg, truth)
    else:
        items = streams[0][1]
    results = process_stream(items, cfg, jobs=args.jobs)
    for r in results:
        log.info("video %s: %d tracks, %d events", r.video_id, len(r.tracks), len(r.events))
    write_submission([ev for r in results for ev in r.events], args.out)
    return 0


def cmd_simulate(args) -> int:
    _check_inputs(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    items, truths = [], []
    spec = None
    for k in range(args.videos):
        spec = load_scenario(args.config, seed=args.seed + k)
        if args.videos > 1:
            spec = replace(spec, video_id=str(k + 1))
        t, it = generate_scenario(spec)
        truths.extend(t)
        items.extend(it)
    write_detection_stream(items, out / "detections.jsonl")
    write_ground_truth(truths, out / "truth.jsonl")
    cfg = replace(PipelineConfig(), fps=spec.fps, image_width=spec.width,
                  image_height=spec.height, roi_fraction=spec.roi_fraction)
    (out / "pipeline.cfg").write_text(dump_config(cfg), encoding="utf-8")
    log.info("wrote %d detections and %d truth events to %s", len(items), len(truths), out)
    return 0


def cmd_evaluate(args) -> int:
    _check_inputs(args.submission, args.truth)
    cfg = _config(args)
    report = evaluate(
        read_submission(args.submission), read_ground_truth(args.truth),
        cfg.match_rule, cfg.match_window_s,
    )
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="checkout-track", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", parents=[common], help="fuse several detectors' streams (WBF)")
    p.add_argument("--models", nargs="+", required=True, help="per-model detection JSONL files")
    p.add_argument("--truth", help="validation boxes JSONL; enables greedy model selection")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("track", parents=[common], help="link detections into tracks")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("vote", parents=[common], help="vote track labels, write submission")
    p.add_argument("tracks")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_vote)

    p = sub.add_parser("resolve", parents=[common], help="fuse -> track -> vote in one pass")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--models", nargs="+", help="per-model streams to fuse first")
    p.add_argument("--truth", help="validation boxes JSONL for greedy model selection")
    p.add_argument("--jobs", type=int, default=1, help="videos processed concurrently")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("simulate", parents=[common], help="generate a seeded synthetic scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--videos", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", parents=[common], help="score a submission against ground truth")
    p.add_argument("submission")
    p.add_argument("--truth", required=True)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RecordError as exc:
        print(f"error: malformed input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
