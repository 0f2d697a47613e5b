"""Point-cloud initialization, per-frame optimization, and warm-chain training.

The Gaussian budget K is fixed for the whole chain: no densification,
splitting, or pruning. Warm start transfers parameters only; every frame gets
a fresh optimizer state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError, NumericalError
from .gaussians import GaussianFrame
from .geometry import Z_NEAR, normalize_quaternion
from .losses import LossConfig, photometric_loss, regularizer
from .render import rasterize, rasterize_backward
from .optim import OptimizerState, adam_step
from .sh import SH_C0, num_sh_coeffs

# Scale clamp interval, as fractions of the scene extent.
SCALE_MIN_FRAC = 1e-6
SCALE_MAX_FRAC = 0.5

DEFAULT_LEARNING_RATES = {
    "mu": 1.6e-4,  # multiplied by scene extent
    "q": 1e-3,
    "log_s": 5e-3,
    "alpha_logit": 5e-2,
    "sh": 2.5e-3,
}


@dataclass
class PointCloud:
    points: np.ndarray            # (N, 3)
    colors: np.ndarray | None = None  # (N, 3) in [0, 1]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=float).reshape(-1, 3)
            if self.colors.shape[0] != self.points.shape[0]:
                raise InvalidInputError("colors must align with points")
        if not np.isfinite(self.points).all():
            raise InvalidInputError("point cloud contains non-finite coordinates")

    def __len__(self):
        return self.points.shape[0]


@dataclass
class InitConfig:
    budget: int
    sh_degree: int = 3
    alpha0: float = 0.1
    scale_factor: float = 0.5  # initial scale as a fraction of the 3rd-NN distance
    jitter_frac: float = 1e-3  # jitter when oversampling a small cloud

    def __post_init__(self):
        if self.budget <= 0:
            raise InvalidInputError("Gaussian budget must be positive")
        if not 0 < self.alpha0 < 1:
            raise InvalidInputError("alpha0 must lie in (0, 1)")
        if self.scale_factor <= 0:
            raise InvalidInputError("scale_factor must be positive")


@dataclass
class TrainConfig:
    iters_init: int = 8000
    iters_warm: int = 8000
    learning_rates: dict = field(default_factory=lambda: dict(DEFAULT_LEARNING_RATES))
    loss: LossConfig = field(default_factory=LossConfig)
    chain_direction: str = "forward"  # "forward" | "backward"
    seed: int = 0

    def __post_init__(self):
        if self.iters_init <= 0 or self.iters_warm <= 0:
            raise InvalidInputError("iteration counts must be positive")
        if self.chain_direction not in ("forward", "backward"):
            raise InvalidInputError("chain_direction must be 'forward' or 'backward'")


def scene_extent_of(points: np.ndarray) -> float:
    """Radius of the bounding sphere around the centroid."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    center = points.mean(axis=0)
    return float(np.linalg.norm(points - center, axis=1).max())


def clamp_scales_(frame: GaussianFrame, scene_extent: float) -> None:
    lo = np.log(SCALE_MIN_FRAC * scene_extent)
    hi = np.log(SCALE_MAX_FRAC * scene_extent)
    np.clip(frame.log_s, lo, hi, out=frame.log_s)


def init_from_points(cloud: PointCloud, images, cameras,
                     cfg: InitConfig, seed: int = 0) -> GaussianFrame:
    """Cold-start frame: K positions sampled from the cloud, isotropic scales
    from local point density, opacity alpha0, SH DC from median observed color.
    """
    if len(cloud) == 0:
        raise InvalidInputError("point cloud is empty")
    if len(images) != len(cameras):
        raise InvalidInputError("images and cameras must align")
    rng = np.random.default_rng(seed)
    K = cfg.budget
    n = len(cloud)
    extent = scene_extent_of(cloud.points)
    if extent <= 0:
        extent = 1.0
    if n >= K:
        pick = rng.choice(n, size=K, replace=False)
        mu = cloud.points[pick].copy()
    else:
        pick = rng.choice(n, size=K, replace=True)
        mu = cloud.points[pick] + rng.normal(
            0.0, cfg.jitter_frac * extent, size=(K, 3))

    # isotropic initial scale: distance to the 3rd nearest neighbor
    if n >= 4:
        tree = cKDTree(cloud.points)
        d, _ = tree.query(mu, k=4)
        s0 = cfg.scale_factor * np.maximum(d[:, 3], 1e-12)
    else:
        s0 = np.full(K, 0.1 * extent)
    log_s = np.log(s0)[:, None].repeat(3, axis=1)

    q = np.zeros((K, 4))
    q[:, 0] = 1.0
    alpha_logit = np.full(K, np.log(cfg.alpha0 / (1.0 - cfg.alpha0)))

    if cloud.colors is not None:
        rgb = cloud.colors[pick]
    else:
        rgb = _observed_median_colors(mu, images, cameras)
    B = num_sh_coeffs(cfg.sh_degree)
    sh = np.zeros((K, B, 3))
    sh[:, 0, :] = rgb / SH_C0

    frame = GaussianFrame(0, mu, q, log_s, alpha_logit, sh, cfg.sh_degree)
    clamp_scales_(frame, extent)
    return frame


def _observed_median_colors(points: np.ndarray, images, cameras) -> np.ndarray:
    """Median RGB over views where the projected point is in front and in-bounds;
    (0.5, 0.5, 0.5) for points visible in no view."""
    K = points.shape[0]
    obs = [[] for _ in range(K)]
    for img, cam in zip(images, cameras):
        pix = np.asarray(img.pixels if hasattr(img, "pixels") else img, dtype=float)
        intr = cam.intrinsics
        x_cam = points @ cam.pose.rotation.T + cam.pose.translation
        z = x_cam[:, 2]
        front = z > Z_NEAR
        zs = np.where(front, z, 1.0)
        u = intr.fx * x_cam[:, 0] / zs + intr.cx
        v = intr.fy * x_cam[:, 1] / zs + intr.cy
        col = np.clip(np.round(u).astype(int), 0, intr.width - 1)
        row = np.clip(np.round(v).astype(int), 0, intr.height - 1)
        visible = front & (u >= -0.5) & (u < intr.width - 0.5) \
            & (v >= -0.5) & (v < intr.height - 0.5)
        for k in np.nonzero(visible)[0]:
            obs[k].append(pix[row[k], col[k]])
    rgb = np.full((K, 3), 0.5)
    for k in range(K):
        if obs[k]:
            rgb[k] = np.median(np.stack(obs[k]), axis=0)
    return rgb


def _effective_lrs(cfg: TrainConfig, scene_extent: float) -> dict:
    lrs = dict(cfg.learning_rates)
    lrs["mu"] = lrs["mu"] * scene_extent
    return lrs


def optimize_frame(init: GaussianFrame, images, cameras, cfg: TrainConfig,
                   steps: int, scene_extent: float,
                   loss_log: list | None = None,
                   rng: np.random.Generator | None = None) -> GaussianFrame:
    """Run `steps` Adam updates with stochastic view sampling (uniform without
    replacement per epoch). Output has exactly the input's K Gaussians."""
    if len(images) != len(cameras) or len(cameras) == 0:
        raise InvalidInputError("images and cameras must align and be nonempty")
    frame = init.copy()
    state = OptimizerState.for_frame(frame)
    lrs = _effective_lrs(cfg, scene_extent)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n_views = len(cameras)
    epoch = []
    for step in range(steps):
        if not epoch:
            epoch = list(rng.permutation(n_views))
        i = epoch.pop()
        pred = rasterize(frame, cameras[i])
        gt = images[i].pixels if hasattr(images[i], "pixels") else images[i]
        loss, d_img = photometric_loss(pred.pixels, gt, cfg.loss)
        reg, grads = regularizer(frame, cfg.loss.lambda_reg)
        loss += reg
        if not np.isfinite(loss):
            raise NumericalError(
                f"non-finite loss at frame t={frame.t} step {step} (view {i})")
        grads.add_(rasterize_backward(frame, cameras[i], d_img))
        if not grads.all_finite():
            bad = [g for g in ("mu", "q", "log_s", "alpha_logit", "sh")
                   if not np.isfinite(getattr(grads, g)).all()]
            raise NumericalError(
                f"non-finite gradient at frame t={frame.t} step {step}, groups {bad}")
        adam_step(frame, grads, state, lrs)
        frame.q[:] = normalize_quaternion(frame.q)
        clamp_scales_(frame, scene_extent)
        if loss_log is not None:
            loss_log.append((frame.t, step, float(loss)))
    return frame


def warm_chain(dataset, cfg: TrainConfig, init_cloud: PointCloud,
               init_cfg: InitConfig, loss_log: list | None = None,
               on_frame=None) -> list[GaussianFrame]:
    """Optimize all frames of a synchronized dataset as a warm chain.

    The chain-start frame is cold-initialized from the point cloud and trained
    for iters_init steps; every other frame starts from its neighbor's
    converged parameters (fresh optimizer) and trains for iters_warm steps.
    Returns frames ordered by t; `on_frame(frame)` fires as each one finishes.
    """
    T = dataset.num_timesteps
    if T < 1:
        raise InvalidInputError("dataset must contain at least one time step")
    train_cams = dataset.cameras_for_split("train")
    if not train_cams:
        raise InvalidInputError("dataset has no training cameras")
    names = [c.name for c in train_cams]
    extent = scene_extent_of(init_cloud.points)
    if extent <= 0:
        extent = 1.0

    order = list(range(T)) if cfg.chain_direction == "forward" \
        else list(range(T - 1, -1, -1))
    frames: dict[int, GaussianFrame] = {}
    prev: GaussianFrame | None = None
    rng = np.random.default_rng(cfg.seed)
    for chain_pos, t in enumerate(order):
        images = dataset.images_at(t, names)
        if chain_pos == 0:
            start = init_from_points(init_cloud, images, train_cams, init_cfg,
                                     seed=cfg.seed)
            start.t = t
            steps = cfg.iters_init
        else:
            start = prev.copy(t=t)
            steps = cfg.iters_warm
        frame = optimize_frame(start, images, train_cams, cfg, steps, extent,
                               loss_log=loss_log, rng=rng)
        frames[t] = frame
        prev = frame
        if on_frame is not None:
            on_frame(frame)
    return [frames[t] for t in range(T)]
