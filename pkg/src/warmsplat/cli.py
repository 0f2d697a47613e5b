"""Command-line entry point.

Subcommands:

    generate      synthesize a dataset from a YAML config (plus optional exports)
    train         warm-chain optimization of a dataset into a frame archive
    render        retrospective novel-view renders from an archive
    eval          held-out PSNR/SSIM report for an archive against its dataset
    archive-info  manifest and size statistics of an archive

Exit codes: 0 success, 2 invalid input or config, 3 malformed/corrupt data,
4 numerical failure during optimization.

The --workers flag is accepted for interface compatibility; rendering and
training are sequential and deterministic, so outputs are byte-identical for
any worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
from PIL import Image

from . import dataset as ds
from .archive import Archive, export_frame_ply, write_archive
from .config import config_to_dict, load_config
from .errors import (ConfigError, DataFormatError, FrameNotFoundError,
                     IntegrityError, InvalidInputError, NumericalError)
from .metrics import archive_stats, evaluate_views, write_eval_csv, write_loss_csv
from .render import rasterize
from .rig import load_camera_track, make_rig
from .scene import GroundTruthScene
from .training import warm_chain


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="warmsplat",
                                description="warm-start dynamic Gaussian "
                                            "splatting pipeline")
    p.add_argument("--workers", type=int, default=1,
                   help="accepted for compatibility; output is identical for "
                        "any value")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a multi-view dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--export", action="append", default=[], metavar="FMT",
                   help="nerf | colmap[:MODE] | depth (repeatable); MODE is "
                        "poses_only, surface, or depth_fused")
    g.add_argument("--colmap-mode", default="poses_only",
                   choices=["poses_only", "surface", "depth_fused"])

    t = sub.add_parser("train", help="warm-chain training into an archive")
    t.add_argument("--config", required=True)
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True, help="output archive path")
    t.add_argument("--loss-csv", default=None)

    r = sub.add_parser("render", help="render archived frames")
    r.add_argument("--archive", required=True)
    r.add_argument("--out", required=True, help="output directory for PNGs")
    r.add_argument("--t", type=int, default=None,
                   help="single time index (default: all)")
    r.add_argument("--track", required=True,
                   help="camera track JSON (one camera per output frame when "
                        "it matches the archive length, else all cameras per t)")

    e = sub.add_parser("eval", help="held-out view metrics")
    e.add_argument("--archive", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", default="test", choices=["train", "val", "test"])
    e.add_argument("--out", required=True, help="output CSV path")

    a = sub.add_parser("archive-info", help="inspect an archive")
    a.add_argument("--archive", required=True)
    a.add_argument("--export-ply", default=None,
                   help="also export frame t0 as splat PLY to this path")
    return p


def _cmd_generate(args) -> int:
    cfg = load_config(args.config)
    rig = make_rig(cfg.rig)
    scene = GroundTruthScene(cfg.scene)
    bundle = ds.synthesize_dataset(scene, rig, cfg.num_timesteps,
                                   test_indices=cfg.test_indices,
                                   val_indices=cfg.val_indices)
    bundle.manifest["config"] = config_to_dict(cfg)
    ds.save_bundle(bundle, args.out)
    for fmt in args.export:
        fmt, _, mode = fmt.partition(":")
        sub = os.path.join(args.out, f"export_{fmt}")
        if fmt == "nerf":
            ds.export_nerf_synthetic(bundle, sub)
        elif fmt == "colmap":
            ds.export_colmap(bundle, sub, mode=mode or args.colmap_mode)
        elif fmt == "depth":
            ds.export_depth_only(bundle, sub)
        else:
            raise InvalidInputError(f"unknown export format {fmt!r}")
    counts = {s: len(bundle.cameras_for_split(s)) for s in ("train", "val", "test")}
    print(f"wrote dataset: {bundle.num_cameras} cameras x "
          f"{bundle.num_timesteps} timesteps -> {args.out} (splits {counts})")
    return 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    bundle = ds.load_bundle(args.dataset)
    if bundle.point_cloud is None:
        raise DataFormatError("dataset has no point cloud for initialization")
    loss_log = [] if args.loss_csv else None
    frames = warm_chain(bundle, cfg.train, bundle.point_cloud, cfg.init,
                        loss_log=loss_log)
    manifest = {
        "budget": cfg.init.budget,
        "sh_degree": cfg.init.sh_degree,
        "t0": frames[0].t,
        "config": config_to_dict(cfg),
    }
    write_archive(args.out, frames, manifest)
    if args.loss_csv:
        write_loss_csv(loss_log, args.loss_csv)
    print(f"trained {len(frames)} frames (budget {cfg.init.budget}) -> {args.out}")
    return 0


def _cmd_render(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    track = load_camera_track(args.track)
    count = 0
    with Archive(args.archive) as arch:
        times = [args.t] if args.t is not None else list(arch.times())
        paired = args.t is None and len(track) == len(times)
        for i, t in enumerate(times):
            frame = arch.load_frame(t)
            cams = [track[i]] if paired else track
            for cam in cams:
                img = rasterize(frame, cam)
                path = os.path.join(args.out, f"render_t{t:03d}_{cam.name}.png")
                Image.fromarray(ds.quantize_image(img.pixels)).save(path)
                count += 1
    print(f"rendered {count} views -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    bundle = ds.load_bundle(args.dataset)
    with Archive(args.archive) as arch:
        frames = [arch.load_frame(t) for t in arch.times()]
    rows = evaluate_views(frames, bundle, split=args.split)
    means = write_eval_csv(rows, args.out)
    parts = ", ".join(f"mean {k} {v:.3f}" for k, v in means.items())
    print(f"evaluated {len(rows)} views ({args.split}): {parts} -> {args.out}")
    return 0


def _cmd_archive_info(args) -> int:
    with Archive(args.archive) as arch:
        stats = archive_stats(arch)
        stats["t_range"] = [arch.t0, arch.t0 + arch.num_frames - 1]
        stats["manifest"] = arch.manifest
        if args.export_ply:
            export_frame_ply(arch, arch.t0, args.export_ply)
            stats["exported_ply"] = args.export_ply
    print(json.dumps(stats, indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "render": _cmd_render,
    "eval": _cmd_eval,
    "archive-info": _cmd_archive_info,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return 2
    np.seterr(over="ignore")  # sigmoid/exp saturation is handled explicitly
    try:
        return _COMMANDS[args.command](args)
    except (InvalidInputError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DataFormatError, IntegrityError, FrameNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
