"""Shared builders for the test suite."""

import numpy as np
import pytest

from warmsplat.gaussians import GaussianFrame
from warmsplat.geometry import (Camera, CameraIntrinsics, look_at_pose,
                                normalize_quaternion)
from warmsplat.sh import SH_C0, num_sh_coeffs


def random_frame(rng, K=10, sh_degree=1, spread=0.5, t=0):
    """Random well-conditioned Gaussian frame centered on the origin."""
    B = num_sh_coeffs(sh_degree)
    mu = rng.uniform(-spread, spread, (K, 3))
    q = normalize_quaternion(rng.normal(size=(K, 4)))
    log_s = rng.uniform(np.log(0.05), np.log(0.2), (K, 3))
    alpha_logit = rng.uniform(-1.0, 1.5, K)
    sh = np.zeros((K, B, 3))
    sh[:, 0, :] = rng.uniform(0.15, 0.85, (K, 3)) / SH_C0
    if B > 1:
        sh[:, 1:, :] = rng.normal(0, 0.05, (K, B - 1, 3))
    return GaussianFrame(t, mu, q, log_s, alpha_logit, sh, sh_degree)


def ring_cameras(n_cams=2, res=32, radius=3.0, height=1.2, focal_mult=1.2,
                 phase=0.3):
    intr = CameraIntrinsics(res * focal_mult, res * focal_mult,
                            res / 2, res / 2, res, res)
    cams = []
    for i in range(n_cams):
        ang = 2 * np.pi * i / n_cams + phase
        pos = np.array([radius * np.cos(ang), radius * np.sin(ang), height])
        cams.append(Camera(f"cam_{i:03d}", intr, look_at_pose(pos, np.zeros(3))))
    return cams


def single_splat_frame(mu, alpha_logit, rgb, log_s=-1.0, sh_degree=0, t=0):
    """One isotropic Gaussian with a direction-independent color."""
    sh = np.zeros((1, num_sh_coeffs(sh_degree), 3))
    sh[0, 0, :] = np.asarray(rgb, dtype=float) / SH_C0
    return GaussianFrame(t, np.asarray(mu, dtype=float).reshape(1, 3),
                         np.array([[1.0, 0.0, 0.0, 0.0]]),
                         np.full((1, 3), float(log_s)),
                         np.array([float(alpha_logit)]), sh, sh_degree)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
