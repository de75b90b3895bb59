"""Command line entry point: `domescan <subcommand>`.

Exit codes: 0 success, 1 usage error, 2 data error. Reports are printed as
human-readable text, or as JSON when --json is given. The metadata path may
come from the DOMESCAN_META environment variable instead of --meta.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import evaluation as ev
from . import ingest, synth
from .errors import DomescanError
from .intrinsics import load_metadata
from .projection import project
from .representation import (ALL_CHANNELS, RepresentationConfig,
                             build_representation, read_representation,
                             write_representation, write_tensors)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def _meta_path(args):
    path = getattr(args, "meta", None) or os.environ.get("DOMESCAN_META")
    if not path:
        raise SystemExit("error: no metadata file (--meta or DOMESCAN_META)")
    return path


def _add_meta(parser):
    parser.add_argument("--meta", help="sensor metadata JSON "
                        "(default: $DOMESCAN_META)")


def _emit(args, payload, text):
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        print(text)


def cmd_decode(args):
    intr = load_metadata(_meta_path(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats = ingest.IngestStats()
    count = 0
    for scan in ingest.assemble_file(getattr(args, "in"), intr, stats):
        ingest.write_scan(scan, out / ingest.scan_filename(scan.frame_id))
        count += 1
    _emit(args, {"frames": count, "decode_errors": stats.decode_errors},
          f"decoded {count} frames ({stats.decode_errors} bad packets)")
    return EXIT_OK


def cmd_listen(args):
    intr = load_metadata(_meta_path(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats = ingest.IngestStats()
    count = 0
    for scan in ingest.listen(args.port, intr, stats,
                              max_frames=args.frames, timeout=args.timeout):
        ingest.write_scan(scan, out / ingest.scan_filename(scan.frame_id))
        count += 1
    _emit(args, {"frames": count, "decode_errors": stats.decode_errors},
          f"received {count} frames ({stats.decode_errors} bad datagrams)")
    return EXIT_OK


def cmd_project(args):
    intr = load_metadata(_meta_path(args))
    mode = "paper" if args.mode == "paper" else "standard"
    scan = ingest.read_scan(getattr(args, "in"), intr)
    points = project(scan, intr, mode)
    write_tensors(args.out, [points.xyz.astype(np.float32),
                             points.valid.astype(np.uint8)])
    _emit(args, {"frame_id": scan.frame_id, "mode": mode,
                 "valid_pixels": int(points.valid.sum())},
          f"projected frame {scan.frame_id} ({mode} mode, "
          f"{int(points.valid.sum())} valid pixels)")
    return EXIT_OK


def cmd_export(args):
    intr = load_metadata(_meta_path(args))
    channels = [c.strip() for c in args.channels.split(",") if c.strip()]
    if "pos" in channels:
        channels.remove("pos")
        channels += ["posx", "posy", "posz"]
    config = RepresentationConfig(channels=tuple(channels))
    if args.exclude:
        config = RepresentationConfig(channels=tuple(
            c for c in config.channels
            if c != ds.canonical_channel(args.exclude)))
    out = Path(args.out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    frames = []
    for path in sorted(Path(getattr(args, "in")).glob("frame_*.ldt")):
        scan = ingest.read_scan(path, intr)
        points = project(scan, intr, args.mode) \
            if config.wants_positions else None
        rep = build_representation(scan, points, config)
        write_representation(rep, out / "frames" / path.name)
        if args.png:
            _dump_png(rep, Path(args.png) / (path.stem + ".png"))
        frames.append(scan.frame_id)
    _emit(args, {"frames": frames, "channels": list(config.channels)},
          f"exported {len(frames)} frames with channels "
          f"{','.join(config.channels)}")
    return EXIT_OK


def _dump_png(rep, path):
    # Debug-only dump of the first three channels; no contract attached.
    from PIL import Image
    path.parent.mkdir(parents=True, exist_ok=True)
    rgb = (np.clip(rep.channels[:3], 0, 1) * 255).astype(np.uint8)
    Image.fromarray(np.moveaxis(rgb, 0, -1), "RGB").save(path)


def cmd_split(args):
    manifest = ds.DatasetManifest.load(args.root)
    ds.assign_splits(manifest, args.seed)
    sizes = {k: len(v) for k, v in manifest.splits.items()}
    _emit(args, sizes, "split sizes: " + ", ".join(
        f"{k}={v}" for k, v in sizes.items()))
    return EXIT_OK


def cmd_augment(args):
    if not args.flip:
        print("nothing to do (only --flip is implemented)", file=sys.stderr)
        return EXIT_USAGE
    manifest = ds.DatasetManifest.load(args.root)
    out = Path(args.out or args.root)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(parents=True, exist_ok=True)
    done = 0
    for frame_id in manifest.frames:
        rep = read_representation(manifest.frame_path(frame_id))
        ann = ds.load_annotations(manifest.annotation_path(frame_id))
        frep, fann = ds.hflip(rep, ann)
        flip_id = f"{frame_id}_flip"
        write_representation(frep, out / "frames" / f"frame_{flip_id}.ldt")
        ds.save_annotations(fann, out / "annotations" / f"{flip_id}.json")
        done += 1
    _emit(args, {"flipped": done}, f"flipped {done} frames")
    return EXIT_OK


def cmd_ablate(args):
    manifest = ds.DatasetManifest.load(args.root)
    out = args.out or str(Path(args.root).with_name(
        Path(args.root).name + f"_no_{args.exclude}"))
    result = ds.ablation_export(manifest, args.exclude, out)
    _emit(args, {"out": out, "channels": result.channels},
          f"wrote ablation dataset to {out} "
          f"(channels {','.join(result.channels)})")
    return EXIT_OK


def cmd_eval(args):
    gt_root = Path(args.gt)
    gt = {}
    for path in sorted((gt_root / "annotations").glob("*.json")):
        ann = ds.load_annotations(path)
        ann.validate(args.task)
        gt[ann.frame_id] = ann
    if not gt:
        print("error: no annotations found under --gt", file=sys.stderr)
        return EXIT_DATA
    any_ann = next(iter(gt.values()))
    preds = ev.load_predictions(args.pred, any_ann.height, any_ann.width)
    rep = ev.evaluate(gt, preds, iou_threshold=args.iou,
                      score_threshold=args.score)
    _emit(args, rep.to_dict(), rep.format_table())
    return EXIT_OK


def cmd_synth(args):
    intr = load_metadata(_meta_path(args))
    scene = synth.load_scene(args.scene)
    frames = synth.make_stream([scene] * args.frames, intr, args.out,
                               mode=args.mode)
    _emit(args, {"frames": frames, "out": args.out},
          f"wrote {frames} frames to {args.out}")
    return EXIT_OK


def cmd_bench(args):
    intr = load_metadata(_meta_path(args))
    report = ingest.bench(getattr(args, "in"), intr, mode=args.mode)
    _emit(args, report.to_dict(),
          f"{report.frames} frames: {report.scans_per_second:.1f} scans/s, "
          f"mean {report.mean_latency_s * 1e3:.2f} ms, "
          f"p99 {report.p99_latency_s * 1e3:.2f} ms")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="domescan",
        description="Hemisphere FoV LiDAR processing pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(fn=fn)
        p.add_argument("--json", action="store_true",
                       help="machine-readable output")
        return p

    p = add("decode", cmd_decode, help="decode a recorded stream into frames")
    p.add_argument("--in", required=True, help="recorded stream file")
    _add_meta(p)
    p.add_argument("--out", required=True, help="output frame directory")

    p = add("listen", cmd_listen, help="assemble frames from UDP datagrams")
    p.add_argument("--port", type=int, required=True)
    _add_meta(p)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=None,
                   help="stop after N frames")
    p.add_argument("--timeout", type=float, default=5.0)

    p = add("project", cmd_project, help="reconstruct XYZ for one frame")
    p.add_argument("--in", required=True, help="frame_<id>.ldt file")
    _add_meta(p)
    p.add_argument("--mode", choices=["standard", "paper"],
                   default="standard")
    p.add_argument("--out", required=True, help="output points .ldt")

    p = add("export", cmd_export, help="build channel representations")
    p.add_argument("--in", required=True, help="directory of frame .ldt files")
    _add_meta(p)
    p.add_argument("--channels", default=",".join(ALL_CHANNELS),
                   help="comma list, e.g. nir,refl,signal,revrange,pos")
    p.add_argument("--exclude", default=None, help="drop one channel")
    p.add_argument("--mode", choices=["standard", "paper"],
                   default="standard")
    p.add_argument("--png", default=None,
                   help="also dump debug PNGs to this directory")
    p.add_argument("--out", required=True)

    p = add("split", cmd_split, help="assign deterministic 70/15/15 splits")
    p.add_argument("--root", required=True, help="dataset root")
    p.add_argument("--seed", type=int, required=True)

    p = add("augment", cmd_augment, help="augment a dataset")
    p.add_argument("--root", required=True)
    p.add_argument("--flip", action="store_true",
                   help="add horizontally flipped copies")
    p.add_argument("--out", default=None)

    p = add("ablate", cmd_ablate, help="export a channel-ablation dataset")
    p.add_argument("--root", required=True)
    p.add_argument("--exclude", required=True)
    p.add_argument("--out", default=None)

    p = add("eval", cmd_eval, help="score predictions against ground truth")
    p.add_argument("--gt", required=True, help="dataset root with annotations")
    p.add_argument("--pred", required=True, help="JSON-lines prediction file")
    p.add_argument("--iou", type=float, default=ev.DEFAULT_IOU_THRESHOLD)
    p.add_argument("--score", type=float, default=ev.DEFAULT_SCORE_THRESHOLD)
    p.add_argument("--task", choices=["person", "action"], default="person")

    p = add("synth", cmd_synth, help="render a synthetic packet stream")
    p.add_argument("--scene", required=True, help="scene JSON")
    _add_meta(p)
    p.add_argument("--frames", type=int, default=1)
    p.add_argument("--mode", choices=["standard", "paper"],
                   default="standard")
    p.add_argument("--out", required=True)

    p = add("bench", cmd_bench, help="measure preprocessing throughput")
    p.add_argument("--in", required=True, help="recorded stream file")
    _add_meta(p)
    p.add_argument("--mode", choices=["standard", "paper"],
                   default="standard")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except SystemExit as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DomescanError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
