"""Initialization, per-frame optimization, and warm-chain tests."""

import numpy as np
import pytest

from conftest import random_frame, ring_cameras
from warmsplat.dataset import synthesize_dataset
from warmsplat.errors import InvalidInputError
from warmsplat.gaussians import PARAM_GROUPS
from warmsplat.losses import LossConfig
from warmsplat.render import rasterize
from warmsplat.rig import RigSpec, make_rig
from warmsplat.scene import GroundTruthScene, SceneConfig
from warmsplat.sh import SH_C0
from warmsplat.training import (SCALE_MAX_FRAC, SCALE_MIN_FRAC, InitConfig,
                                PointCloud, TrainConfig, clamp_scales_,
                                init_from_points, optimize_frame,
                                scene_extent_of, warm_chain)


def tiny_bundle(T=3, cameras=6, res=24, seed=0):
    scene = GroundTruthScene(SceneConfig(n_static=40, n_dynamic=20,
                                         n_clusters=1, sh_degree=0, seed=seed))
    rig = make_rig(RigSpec("hemisphere", camera_count=cameras, radius=4.0,
                           image_width=res, image_height=res, focal=1.25 * res))
    return synthesize_dataset(scene, rig, T, test_indices=(cameras - 1,),
                              val_indices=())


class TestPointCloud:
    def test_len_and_shapes(self, rng):
        pc = PointCloud(rng.normal(size=(7, 3)))
        assert len(pc) == 7

    def test_color_mismatch_rejected(self, rng):
        with pytest.raises(InvalidInputError):
            PointCloud(rng.normal(size=(7, 3)), colors=np.zeros((6, 3)))

    def test_nonfinite_rejected(self):
        pts = np.zeros((3, 3))
        pts[1, 1] = np.inf
        with pytest.raises(InvalidInputError):
            PointCloud(pts)


class TestSceneExtent:
    def test_unit_cube_corners(self):
        pts = np.array([[1, 1, 1], [-1, -1, -1], [1, -1, 1], [-1, 1, -1]],
                       dtype=float)
        assert abs(scene_extent_of(pts) - np.sqrt(3)) < 1e-12

    def test_clamp_scales(self, rng):
        frame = random_frame(rng, K=4)
        frame.log_s[0] = 50.0
        frame.log_s[1] = -50.0
        clamp_scales_(frame, 2.0)
        assert frame.log_s.max() <= np.log(SCALE_MAX_FRAC * 2.0) + 1e-12
        assert frame.log_s.min() >= np.log(SCALE_MIN_FRAC * 2.0) - 1e-12


class TestInit:
    def test_budget_respected_when_cloud_large(self, rng):
        cloud = PointCloud(rng.normal(size=(100, 3)),
                           colors=rng.uniform(size=(100, 3)))
        frame = init_from_points(cloud, [], [], InitConfig(budget=30))
        assert frame.size == 30
        # all positions come from the cloud (sampling without replacement)
        d = np.linalg.norm(frame.mu[:, None] - cloud.points[None], axis=2)
        assert d.min(axis=1).max() < 1e-12
        assert len({tuple(m) for m in frame.mu}) == 30

    def test_oversampling_small_cloud(self, rng):
        cloud = PointCloud(rng.normal(size=(5, 3)))
        frame = init_from_points(cloud, [], [], InitConfig(budget=20))
        assert frame.size == 20

    def test_empty_cloud_rejected(self):
        with pytest.raises(InvalidInputError):
            init_from_points(PointCloud(np.zeros((0, 3))), [], [],
                             InitConfig(budget=4))

    def test_colors_become_dc_coefficients(self):
        cloud = PointCloud(np.array([[0.0, 0.0, 2.0]] * 4),
                           colors=np.array([[1.0, 0.0, 0.0]] * 4))
        frame = init_from_points(cloud, [], [], InitConfig(budget=4))
        assert np.allclose(frame.sh[:, 0, :], np.array([1, 0, 0]) / SH_C0)
        assert np.allclose(frame.sh[:, 1:, :], 0.0)

    def test_alpha0_applied(self, rng):
        cloud = PointCloud(rng.normal(size=(10, 3)), colors=rng.uniform(size=(10, 3)))
        frame = init_from_points(cloud, [], [], InitConfig(budget=5, alpha0=0.25))
        assert np.allclose(frame.opacities(), 0.25, atol=1e-12)

    def test_point_behind_all_cameras_gets_gray(self):
        # no colors in the cloud, point projects into no view -> 0.5 fallback
        cams = ring_cameras(3, res=16)
        images = [np.zeros((16, 16, 3)) for _ in cams]
        cloud = PointCloud(np.array([[0.0, 0.0, 100.0]] * 4))
        frame = init_from_points(cloud, images, cams, InitConfig(budget=4))
        assert np.allclose(frame.sh[:, 0, :] * SH_C0, 0.5, atol=1e-12)

    def test_observed_color_median(self):
        # a point at the origin seen by ring cameras over solid-color images
        cams = ring_cameras(3, res=16)
        colors = [0.2, 0.4, 0.9]
        images = [np.full((16, 16, 3), c) for c in colors]
        cloud = PointCloud(np.zeros((6, 3)))
        frame = init_from_points(cloud, images, cams, InitConfig(budget=6))
        assert np.allclose(frame.sh[:, 0, :] * SH_C0, 0.4, atol=1e-12)

    def test_scale_factor_scales_init(self, rng):
        pts = rng.normal(size=(50, 3))
        cloud = PointCloud(pts, colors=rng.uniform(size=(50, 3)))
        # factors small enough that the scale clamp never engages
        a = init_from_points(cloud, [], [], InitConfig(budget=20, scale_factor=0.1),
                             seed=3)
        b = init_from_points(cloud, [], [], InitConfig(budget=20, scale_factor=0.2),
                             seed=3)
        assert np.allclose(np.exp(a.log_s) * 2.0, np.exp(b.log_s))

    def test_determinism(self, rng):
        pts = rng.normal(size=(50, 3))
        cloud = PointCloud(pts, colors=rng.uniform(size=(50, 3)))
        a = init_from_points(cloud, [], [], InitConfig(budget=20), seed=1)
        b = init_from_points(cloud, [], [], InitConfig(budget=20), seed=1)
        for g in PARAM_GROUPS:
            assert np.array_equal(getattr(a, g), getattr(b, g))


class TestOptimizeFrame:
    def test_budget_conserved_and_loss_decreases(self, rng):
        frame = random_frame(rng, K=12, spread=1.0)
        cams = ring_cameras(4, res=24)
        target = random_frame(rng, K=12, spread=1.0)
        gts = [rasterize(target, c).pixels for c in cams]
        cfg = TrainConfig(loss=LossConfig(ssim_weight=0.0))
        log = []
        out = optimize_frame(frame, gts, cams, cfg, steps=60,
                             scene_extent=2.0, loss_log=log)
        assert out.size == 12
        first = np.mean([l[2] for l in log[:8]])
        last = np.mean([l[2] for l in log[-8:]])
        assert last < first

    def test_empty_views_rejected(self, rng):
        frame = random_frame(rng, K=3)
        with pytest.raises(InvalidInputError):
            optimize_frame(frame, [], [], TrainConfig(), 5, 1.0)

    def test_quaternions_stay_normalized(self, rng):
        frame = random_frame(rng, K=8)
        cams = ring_cameras(2, res=16)
        gts = [rng.uniform(0, 1, (16, 16, 3)) for _ in cams]
        out = optimize_frame(frame, gts, cams, TrainConfig(), 25, 2.0)
        norms = np.linalg.norm(out.q, axis=1)
        assert np.abs(norms - 1.0).max() < 1e-12

    def test_scales_stay_clamped(self, rng):
        frame = random_frame(rng, K=8)
        cams = ring_cameras(2, res=16)
        gts = [rng.uniform(0, 1, (16, 16, 3)) for _ in cams]
        ext = 2.0
        out = optimize_frame(frame, gts, cams, TrainConfig(), 25, ext)
        assert out.log_s.max() <= np.log(SCALE_MAX_FRAC * ext) + 1e-12


class TestWarmChain:
    def test_chain_output_shape_and_order(self):
        bundle = tiny_bundle(T=3)
        cfg = TrainConfig(iters_init=15, iters_warm=5, seed=0)
        frames = warm_chain(bundle, cfg, bundle.point_cloud,
                            InitConfig(budget=30, sh_degree=0))
        assert [f.t for f in frames] == [0, 1, 2]
        assert all(f.size == 30 for f in frames)

    def test_backward_chain_covers_all_frames(self):
        bundle = tiny_bundle(T=3)
        cfg = TrainConfig(iters_init=15, iters_warm=5,
                          chain_direction="backward", seed=0)
        seen = []
        frames = warm_chain(bundle, cfg, bundle.point_cloud,
                            InitConfig(budget=30, sh_degree=0),
                            on_frame=lambda f: seen.append(f.t))
        assert seen == [2, 1, 0]
        assert [f.t for f in frames] == [0, 1, 2]

    def test_chain_determinism(self):
        bundle = tiny_bundle(T=2)
        cfg = TrainConfig(iters_init=10, iters_warm=5, seed=0)
        a = warm_chain(bundle, cfg, bundle.point_cloud,
                       InitConfig(budget=20, sh_degree=0))
        b = warm_chain(bundle, cfg, bundle.point_cloud,
                       InitConfig(budget=20, sh_degree=0))
        for fa, fb in zip(a, b):
            for g in PARAM_GROUPS:
                assert np.array_equal(getattr(fa, g), getattr(fb, g))

    def test_invalid_chain_direction_rejected(self):
        with pytest.raises(InvalidInputError):
            TrainConfig(chain_direction="sideways")

    def test_zero_iters_rejected(self):
        with pytest.raises(InvalidInputError):
            TrainConfig(iters_init=0)
