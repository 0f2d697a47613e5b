"""Static/dynamic A/B scene decomposition: residual masks, multi-view voting,
AABB boundary filtering, and the render-time merge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .gaussians import GaussianFrame
from .geometry import Z_NEAR, Camera


@dataclass
class ResidualMask:
    camera_name: str
    mask: np.ndarray  # (H, W) bool, True = dynamic residual


@dataclass
class VoteConfig:
    diff_threshold: float = 0.05
    morph_radius: int = 2
    quorum: float = 0.6
    aabb: "AABB | None" = None

    def __post_init__(self):
        if not 0 < self.diff_threshold < 1:
            raise InvalidInputError("diff_threshold must lie in (0, 1)")
        if not 0 < self.quorum <= 1:
            raise InvalidInputError("quorum must lie in (0, 1]")
        if self.morph_radius < 0:
            raise InvalidInputError("morph_radius must be non-negative")


@dataclass
class AABB:
    lo: np.ndarray  # (3,)
    hi: np.ndarray  # (3,)
    margin: float = 0.0

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float).reshape(3)
        self.hi = np.asarray(self.hi, dtype=float).reshape(3)
        if not np.all(self.lo < self.hi):
            raise InvalidInputError("AABB must satisfy lo < hi per axis")

    def contains(self, points: np.ndarray) -> np.ndarray:
        lo = self.lo - self.margin
        hi = self.hi + self.margin
        return np.all((points >= lo) & (points <= hi), axis=1)


def _disk(radius: int) -> np.ndarray:
    if radius == 0:
        return np.ones((1, 1), dtype=bool)
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius ** 2


def build_residual_mask(gt, a_only, cfg: VoteConfig,
                        camera_name: str = "") -> ResidualMask:
    """Max-channel RGB difference threshold, then binary open + close with a
    disk of radius morph_radius."""
    gt = np.asarray(gt.pixels if hasattr(gt, "pixels") else gt, dtype=float)
    a_only = np.asarray(a_only.pixels if hasattr(a_only, "pixels") else a_only,
                        dtype=float)
    if gt.shape != a_only.shape:
        raise InvalidInputError("image dimensions differ")
    mask = np.abs(gt - a_only).max(axis=-1) > cfg.diff_threshold
    if cfg.morph_radius > 0:
        disk = _disk(cfg.morph_radius)
        mask = ndimage.binary_opening(mask, structure=disk)
        mask = ndimage.binary_closing(mask, structure=disk)
    return ResidualMask(camera_name, mask)


def multi_view_vote(b_frame: GaussianFrame, cameras: list[Camera],
                    masks: list[ResidualMask], cfg: VoteConfig) -> np.ndarray:
    """Indices of Gaussians whose projected centers land on mask=1 in at least
    a `quorum` fraction of the views where they are visible.

    Gaussians visible in no view are dropped. Visibility uses projected
    centers only, not elliptical footprints.
    """
    if len(cameras) == 0:
        raise InvalidInputError("empty camera list")
    if len(cameras) != len(masks):
        raise InvalidInputError("cameras and masks must align")
    K = b_frame.size
    votes = np.zeros(K)
    seen = np.zeros(K)
    for cam, rm in zip(cameras, masks):
        intr = cam.intrinsics
        if rm.mask.shape != (intr.height, intr.width):
            raise InvalidInputError(
                f"mask shape {rm.mask.shape} does not match camera {cam.name}")
        x_cam = b_frame.mu @ cam.pose.rotation.T + cam.pose.translation
        z = x_cam[:, 2]
        front = z > Z_NEAR
        zs = np.where(front, z, 1.0)
        u = intr.fx * x_cam[:, 0] / zs + intr.cx
        v = intr.fy * x_cam[:, 1] / zs + intr.cy
        col = np.round(u).astype(int)
        row = np.round(v).astype(int)
        vis = front & (col >= 0) & (col < intr.width) & (row >= 0) & (row < intr.height)
        seen += vis
        idx = np.nonzero(vis)[0]
        votes[idx] += rm.mask[row[idx], col[idx]]
    visible = seen > 0
    retained = visible & (votes >= cfg.quorum * np.maximum(seen, 1))
    return np.nonzero(retained)[0]


def aabb_filter(indices: np.ndarray, b_frame: GaussianFrame, box: AABB) -> np.ndarray:
    """Restrict an index set to Gaussians inside the margin-expanded box."""
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        return indices
    keep = box.contains(b_frame.mu[indices])
    return indices[keep]


def merge_ab(a_frame: GaussianFrame, b_frame: GaussianFrame,
             retained: np.ndarray) -> GaussianFrame:
    """Concatenate the static component with the retained dynamic Gaussians.

    Parameters are copied bit-exactly; no re-fitting happens at merge time.
    """
    if a_frame.sh_degree != b_frame.sh_degree:
        raise InvalidInputError("sh_degree mismatch between A and B")
    r = np.asarray(retained, dtype=int)
    return GaussianFrame(
        b_frame.t,
        np.concatenate([a_frame.mu, b_frame.mu[r]]),
        np.concatenate([a_frame.q, b_frame.q[r]]),
        np.concatenate([a_frame.log_s, b_frame.log_s[r]]),
        np.concatenate([a_frame.alpha_logit, b_frame.alpha_logit[r]]),
        np.concatenate([a_frame.sh, b_frame.sh[r]]),
        a_frame.sh_degree,
    )
