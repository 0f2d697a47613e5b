"""Procedural Gaussian-native ground-truth scenes for closed-loop experiments.

Scenes are built directly from Gaussians (no meshes), so the rasterizer is an
exact forward model and end-to-end recovery is a well-posed oracle: a static
backdrop cluster plus a configurable number of moving clusters whose per-step
displacement is bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .gaussians import GaussianFrame
from .geometry import normalize_quaternion
from .sh import SH_C0, num_sh_coeffs
from .training import PointCloud

_PALETTE = np.array([
    [0.85, 0.30, 0.25],
    [0.25, 0.70, 0.35],
    [0.25, 0.40, 0.85],
    [0.85, 0.75, 0.25],
    [0.70, 0.30, 0.75],
    [0.30, 0.75, 0.75],
])


@dataclass
class SceneConfig:
    n_static: int = 300
    n_dynamic: int = 200
    n_clusters: int = 2
    scene_radius: float = 1.5
    cluster_radius: float = 0.35
    motion_step: float = 0.05   # max center displacement between adjacent t
    cluster_height: float = 0.15  # cluster center z, as a fraction of scene_radius
    sh_degree: int = 1
    seed: int = 0
    opacity_logit_range: tuple = (0.5, 2.5)
    log_scale_range: tuple = (-2.6, -1.8)

    def __post_init__(self):
        if self.n_static < 0 or self.n_dynamic < 0 or self.n_static + self.n_dynamic == 0:
            raise InvalidInputError("scene must contain at least one Gaussian")
        if self.n_clusters < 1 and self.n_dynamic > 0:
            raise InvalidInputError("need at least one cluster for dynamic Gaussians")
        if self.motion_step < 0:
            raise InvalidInputError("motion_step must be non-negative")


class GroundTruthScene:
    """Time-parameterized generator producing one GaussianFrame per t."""

    def __init__(self, cfg: SceneConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        n = cfg.n_static + cfg.n_dynamic
        B = num_sh_coeffs(cfg.sh_degree)

        base_mu = np.empty((n, 3))
        # flat-ish static backdrop spread through the scene volume
        base_mu[:cfg.n_static] = rng.uniform(-1, 1, (cfg.n_static, 3)) \
            * np.array([cfg.scene_radius, cfg.scene_radius, 0.4 * cfg.scene_radius])
        self._cluster_of = np.full(n, -1)
        self._cluster_centers = []
        self._cluster_phase = []
        k = cfg.n_static
        for c in range(cfg.n_clusters if cfg.n_dynamic else 0):
            size = cfg.n_dynamic // cfg.n_clusters
            if c == cfg.n_clusters - 1:
                size = cfg.n_static + cfg.n_dynamic - k
            ang = 2 * np.pi * c / max(cfg.n_clusters, 1)
            # raising cluster_height hoists the clusters above the backdrop
            # slab, making the dynamic volume spatially distinct
            center = np.array([0.5 * cfg.scene_radius * np.cos(ang),
                               0.5 * cfg.scene_radius * np.sin(ang),
                               cfg.cluster_height * cfg.scene_radius])
            pts = center + rng.normal(0, cfg.cluster_radius / 2.0, (size, 3))
            base_mu[k:k + size] = pts
            self._cluster_of[k:k + size] = c
            self._cluster_centers.append(center)
            self._cluster_phase.append(rng.uniform(0, 2 * np.pi))
            k += size

        q = normalize_quaternion(rng.normal(size=(n, 4)))
        log_s = rng.uniform(*cfg.log_scale_range, (n, 3))
        alpha_logit = rng.uniform(*cfg.opacity_logit_range, n)
        sh = np.zeros((n, B, 3))
        colors = _PALETTE[rng.integers(0, len(_PALETTE), n)]
        colors = np.clip(colors + rng.normal(0, 0.05, (n, 3)), 0.1, 0.9)
        sh[:, 0, :] = colors / SH_C0
        if B > 1:
            sh[:, 1:, :] = rng.normal(0, 0.04, (n, B - 1, 3))

        self._base = GaussianFrame(0, base_mu, q, log_s, alpha_logit, sh,
                                   cfg.sh_degree)
        # orbital motion with per-step arc length bounded by motion_step
        self._orbit_radius = 0.35 * cfg.scene_radius
        self._omega = cfg.motion_step / max(self._orbit_radius, 1e-9)

    @property
    def size(self) -> int:
        return self._base.size

    @property
    def dynamic_indices(self) -> np.ndarray:
        return np.nonzero(self._cluster_of >= 0)[0]

    @property
    def static_indices(self) -> np.ndarray:
        return np.nonzero(self._cluster_of < 0)[0]

    def _offset(self, cluster: int, t: float) -> np.ndarray:
        ph = self._cluster_phase[cluster]
        r = self._orbit_radius
        return np.array([
            r * (np.cos(self._omega * t + ph) - np.cos(ph)),
            r * (np.sin(self._omega * t + ph) - np.sin(ph)),
            0.15 * r * (np.sin(0.5 * self._omega * t + ph)
                        - np.sin(ph)),
        ])

    def frame_at(self, t: int) -> GaussianFrame:
        frame = self._base.copy(t=t)
        for c in range(len(self._cluster_centers)):
            sel = self._cluster_of == c
            frame.mu[sel] += self._offset(c, float(t))
        return frame

    def static_frame(self, t: int = 0) -> GaussianFrame:
        """Backdrop-only frame (the A component's ground truth)."""
        f = self.frame_at(t)
        idx = self.static_indices
        return GaussianFrame(t, f.mu[idx], f.q[idx], f.log_s[idx],
                             f.alpha_logit[idx], f.sh[idx], f.sh_degree)

    def point_cloud(self, t: int = 0) -> PointCloud:
        """Gaussian centers with their DC colors; the SfM stand-in."""
        frame = self.frame_at(t)
        colors = np.clip(frame.sh[:, 0, :] * SH_C0, 0.0, 1.0)
        return PointCloud(frame.mu.copy(), colors)
