"""Command-line entry point: ``lowrate-mot {track,synth,eval,subsample,config}``.

Exit codes: 0 success, 2 usage error, 3 malformed input, 4 internal failure.
The ``LOWRATE_MOT_LOG`` environment variable (error, warn, info, debug)
sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io_formats as iof
from .config import ConfigError, config_items, dump_config, load_config
from .core import MalformedInputError
from .metrics import METRIC_NAMES, EmptyGroundTruthError, evaluate, format_csv, format_text
from .runner import track_sequence
from .synth import PRESETS, ScenarioError, ScenarioSpec, generate
from .tracker import PipelineConfig

log = logging.getLogger("lowrate_mot")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3, 4
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("lowrate-mot")
    except metadata.PackageNotFoundError:
        return "unknown"


def _parse_hz(text: str) -> float | None:
    if text == "full":
        return None
    try:
        hz = float(text)
    except ValueError:
        raise UsageError(f"--hz must be a positive number or 'full', got {text!r}") from None
    if not hz > 0:
        raise UsageError("--hz must be positive")
    return hz


class _Embedded:
    """Detection record joined with its embedding."""

    __slots__ = ("bbox", "confidence", "embedding")

    def __init__(self, rec: iof.DetRecord, emb: np.ndarray):
        self.bbox, self.confidence, self.embedding = rec.bbox, rec.confidence, emb


# ---------------------------------------------------------------------- track
def cmd_track(args) -> int:
    t_start = time.perf_counter()
    hz = _parse_hz(args.hz)
    seq = Path(args.seq)
    meta = iof.read_seqinfo(seq)
    if hz is not None and hz > meta.source_fps + 1e-9:
        raise UsageError(f"--hz {hz} exceeds the sequence rate of {meta.source_fps} FPS")
    config = load_config(args.config) if args.config else PipelineConfig()
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        config = replace(config, threads=args.threads)

    t0 = time.perf_counter()
    det_path = Path(args.det) if args.det else seq / "det" / "det.txt"
    emb_path = Path(args.emb) if args.emb else seq / "det" / "emb.bin"
    dets = iof.read_detections(det_path)
    total = sum(len(v) for v in dets.values())
    emb = iof.read_embeddings(emb_path, expected_count=total)
    joined = {f: [_Embedded(r, emb[r.index]) for r in rows] for f, rows in dets.items()}
    if joined and max(joined) > meta.frame_count:
        raise iof.ParseError(f"{det_path}: frame {max(joined)} beyond sequence length {meta.frame_count}")
    read_ms = (time.perf_counter() - t0) * 1e3

    out = track_sequence(meta, joined, lambda k: iof.read_image(meta.image_path(seq, k)), hz, config)
    t0 = time.perf_counter()
    iof.write_results(args.out, out.results)
    write_ms = (time.perf_counter() - t0) * 1e3

    timings = dict(out.timings_ms)
    timings["io"] = timings.get("io", 0.0) + read_ms + write_ms
    timings["total"] = (time.perf_counter() - t_start) * 1e3
    manifest = {
        "tool": "lowrate-mot",
        "version": _version(),
        "command": "track",
        "inputs": {"seq": str(seq), "det": str(det_path), "emb": str(emb_path), "config": args.config},
        "output": str(args.out),
        "hz": args.hz,
        "seed": args.seed,
        "config": config_items(config),
        "schedule": {"stride": out.schedule.stride, "detection_frames": len(out.schedule.detection_frames)},
        "frames_read": out.frames_read,
        "timings_ms": {k: round(max(v, 0.0), 3) for k, v in timings.items()},
        "step_ms": {
            "count": len(out.step_ms),
            "max": round(max(out.step_ms, default=0.0), 3),
            "median": round(float(np.median(out.step_ms)) if out.step_ms else 0.0, 3),
        },
    }
    manifest_path = Path(args.manifest) if args.manifest else Path(str(args.out) + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    log.info("wrote %d rows to %s", len(out.results), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------- synth
def cmd_synth(args) -> int:
    if bool(args.scenario) == bool(args.preset):
        raise UsageError("give exactly one of --scenario or --preset")
    if args.preset:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {', '.join(PRESETS)}")
        spec = PRESETS[args.preset](args.seed or 0)
    else:
        spec = ScenarioSpec.from_json(args.scenario)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    seq = generate(spec)
    out = Path(args.out)
    iof.write_seqinfo(out, seq.meta)
    frames = range(1, seq.meta.frame_count + 1)
    hz = _parse_hz(args.hz) if args.hz else None
    if hz is not None:
        sched = iof.subsample(seq.meta, hz)
        frames = sorted(set(sched.detection_frames) | set(sched.intermediate_frames))
    img_dir = out / seq.meta.im_dir
    img_dir.mkdir(parents=True, exist_ok=True)
    for k in frames:
        iof.write_image(seq.meta.image_path(out, k), seq.frame(k))
    (out / "gt").mkdir(exist_ok=True)
    iof.write_gt(out / "gt" / "gt.txt", seq.gt)
    (out / "det").mkdir(exist_ok=True)
    iof.write_detections(out / "det" / "det.txt", seq.det_records())
    iof.write_embeddings(out / "det" / "emb.bin", seq.embedding_matrix())
    (out / "scenario.json").write_text(spec.to_json() + "\n")
    log.info("wrote %d frames, %d gt rows, %d detections to %s", len(frames), len(seq.gt), len(seq.detections), out)
    return EXIT_OK


# ---------------------------------------------------------------------- eval
def cmd_eval(args) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = [m for m in metrics if m not in METRIC_NAMES]
    if unknown or not metrics:
        raise UsageError(f"unknown metric(s) {unknown}; choose from {', '.join(METRIC_NAMES)}")
    if args.stride < 1:
        raise UsageError("--stride must be at least 1")
    gt = iof.read_gt(args.gt)
    res = iof.read_results(args.res)
    if gt and res and (min(res) < min(gt) or max(res) > max(gt)):
        raise iof.ParseError(
            f"result frames {min(res)}-{max(res)} fall outside ground-truth frames {min(gt)}-{max(gt)}"
        )
    if args.stride > 1:
        first = min(gt) if gt else 1
        gt = {f: v for f, v in gt.items() if (f - first) % args.stride == 0}
        res = {f: v for f, v in res.items() if (f - first) % args.stride == 0}
    if args.min_visibility > 0:
        gt = {f: [g for g in v if g.visibility >= args.min_visibility] for f, v in gt.items()}
    report = evaluate(gt, res, metrics, args.iou)
    text = format_text(report)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    if args.csv:
        Path(args.csv).write_text(format_csv(report))
    return EXIT_OK


# ---------------------------------------------------------------------- subsample
def cmd_subsample(args) -> int:
    hz = _parse_hz(args.hz)
    meta = iof.SequenceMeta("cli", args.fps, 1, 1, args.frames)
    if hz is not None and hz > args.fps + 1e-9:
        raise UsageError(f"--hz {hz} exceeds --fps {args.fps}")
    sched = iof.subsample(meta, args.fps if hz is None else hz)
    text = (
        f"stride {sched.stride}\n"
        f"detection {' '.join(map(str, sched.detection_frames))}\n"
        f"intermediate {' '.join(map(str, sched.intermediate_frames))}\n"
    )
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(dump_config(load_config(args.config) if args.config else PipelineConfig()))
    return EXIT_OK


# ---------------------------------------------------------------------- plumbing
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lowrate-mot", description="Multi-object tracking on sparse detections.")
    p.add_argument("--version", action="version", version=_version())
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("track", help="track a sequence")
    t.add_argument("--seq", required=True, help="sequence directory with seqinfo.ini and images")
    t.add_argument("--det", help="MOT detection file (default: SEQ/det/det.txt)")
    t.add_argument("--emb", help="EMB1 embedding sidecar (default: SEQ/det/emb.bin)")
    t.add_argument("--hz", default="1", help="detection rate in Hz, or 'full' (default: 1)")
    t.add_argument("--config", help="flat key = value config file")
    t.add_argument("--out", required=True, help="result file")
    t.add_argument("--manifest", help="run manifest path (default: OUT.manifest.json)")
    t.add_argument("--threads", type=int, help="cap on worker threads")
    t.add_argument("--seed", type=int, default=0, help="recorded in the manifest; tracking is deterministic")
    t.set_defaults(func=cmd_track)

    s = sub.add_parser("synth", help="generate a synthetic benchmark sequence")
    s.add_argument("--scenario", help="scenario JSON file")
    s.add_argument("--preset", help=f"built-in scenario: {', '.join(PRESETS)}")
    s.add_argument("--seed", type=int, help="overrides the scenario seed")
    s.add_argument("--out", required=True, help="output sequence directory")
    s.add_argument("--hz", help="only write the images a run at this rate reads")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="score results against ground truth")
    e.add_argument("--gt", required=True)
    e.add_argument("--res", required=True)
    e.add_argument("--metrics", default=",".join(METRIC_NAMES), help="comma list of mota, idf1, hota")
    e.add_argument("--iou", type=float, default=0.5, help="IoU gate for MOTA and IDF1 matching")
    e.add_argument("--stride", type=int, default=1, help="score every STRIDE-th frame from the first")
    e.add_argument("--min-visibility", type=float, default=0.0, help="drop ground truth less visible than this")
    e.add_argument("--out", help="also write the text report here")
    e.add_argument("--csv", help="also write a CSV report here")
    e.set_defaults(func=cmd_eval)

    u = sub.add_parser("subsample", help="print a detection schedule")
    u.add_argument("--fps", type=float, required=True)
    u.add_argument("--frames", type=int, required=True)
    u.add_argument("--hz", required=True)
    u.add_argument("--out")
    u.set_defaults(func=cmd_subsample)

    c = sub.add_parser("config", help="print the effective configuration")
    c.add_argument("--config", help="file to apply over the defaults")
    c.set_defaults(func=cmd_config)
    return p


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("LOWRATE_MOT_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"lowrate-mot: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MalformedInputError, ScenarioError, ConfigError, EmptyGroundTruthError, OSError) as exc:
        print(f"lowrate-mot: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"lowrate-mot: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort report
        log.debug("internal failure", exc_info=True)
        print(f"lowrate-mot: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
