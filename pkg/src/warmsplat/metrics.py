"""Image quality metrics, throughput accounting, archive statistics, and CSV
evaluation reports."""

from __future__ import annotations

import csv

import numpy as np

from .errors import InvalidInputError
from .losses import ssim

PSNR_CAP_DB = 99.0


def psnr(pred, gt) -> float:
    """Peak signal-to-noise ratio for images in [0, 1], capped at 99 dB so an
    exact match stays finite."""
    pred = np.asarray(pred.pixels if hasattr(pred, "pixels") else pred, dtype=float)
    gt = np.asarray(gt.pixels if hasattr(gt, "pixels") else gt, dtype=float)
    if pred.shape != gt.shape:
        raise InvalidInputError("image dimensions differ")
    mse = float(np.mean((pred - gt) ** 2))
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def throughput_mpix(fps: float, width: int, height: int) -> float:
    """Rendering throughput in megapixels per second."""
    if fps < 0 or width <= 0 or height <= 0:
        raise InvalidInputError("fps must be non-negative, dimensions positive")
    return fps * width * height / 1e6


def archive_stats(archive) -> dict:
    """Size accounting for a frame archive (bytes are payload, not file size)."""
    rec = archive.record_size
    return {
        "num_frames": archive.num_frames,
        "budget": archive.budget,
        "sh_degree": archive.sh_degree,
        "bytes_per_frame": rec,
        "mb_per_frame": rec / 1e6,
        "payload_bytes": rec * archive.num_frames,
    }


def evaluate_views(frames, dataset, split: str = "test",
                   compute_ssim: bool = True) -> list[dict]:
    """Per-(t, camera) PSNR/SSIM rows for held-out views of a dataset."""
    from .render import rasterize

    cams = dataset.cameras_for_split(split)
    if not cams:
        raise InvalidInputError(f"dataset has no cameras in split {split!r}")
    rows = []
    for frame in frames:
        for cam in cams:
            gt = dataset.image(frame.t, cam.name)
            pred = rasterize(frame, cam)
            row = {"t": frame.t, "camera": cam.name,
                   "psnr": psnr(pred.pixels, gt)}
            if compute_ssim:
                row["ssim"] = ssim(pred.pixels, gt)
            rows.append(row)
    return rows


def write_eval_csv(rows: list[dict], path) -> dict:
    """Write per-view rows plus a trailing mean-summary row; returns the means."""
    if not rows:
        raise InvalidInputError("no evaluation rows to write")
    fields = list(rows[0].keys())
    metric_fields = [f for f in fields if f not in ("t", "camera")]
    means = {f: float(np.mean([r[f] for r in rows])) for f in metric_fields}
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for r in rows:
            writer.writerow(r)
        summary = {"t": "mean", "camera": "all"}
        summary.update({f: f"{means[f]:.6f}" for f in metric_fields})
        writer.writerow(summary)
    return means


def write_loss_csv(loss_log, path) -> None:
    """Training curve rows (t, step, loss)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "step", "loss"])
        for t, step, loss in loss_log:
            writer.writerow([t, step, f"{loss:.8f}"])
