"""Procedural ground-truth scene tests."""

import numpy as np
import pytest

from warmsplat.errors import InvalidInputError
from warmsplat.gaussians import PARAM_GROUPS
from warmsplat.scene import GroundTruthScene, SceneConfig


class TestSceneConfig:
    def test_empty_scene_rejected(self):
        with pytest.raises(InvalidInputError):
            SceneConfig(n_static=0, n_dynamic=0)

    def test_negative_motion_rejected(self):
        with pytest.raises(InvalidInputError):
            SceneConfig(motion_step=-0.1)

    def test_dynamic_without_clusters_rejected(self):
        with pytest.raises(InvalidInputError):
            SceneConfig(n_dynamic=10, n_clusters=0)


class TestScene:
    def test_size_and_index_partition(self):
        scene = GroundTruthScene(SceneConfig(n_static=30, n_dynamic=20,
                                             n_clusters=2))
        assert scene.size == 50
        s, d = scene.static_indices, scene.dynamic_indices
        assert len(s) == 30 and len(d) == 20
        assert sorted(np.concatenate([s, d]).tolist()) == list(range(50))

    def test_static_gaussians_do_not_move(self):
        scene = GroundTruthScene(SceneConfig(n_static=20, n_dynamic=10))
        f0, f5 = scene.frame_at(0), scene.frame_at(5)
        s = scene.static_indices
        assert np.array_equal(f0.mu[s], f5.mu[s])

    def test_dynamic_gaussians_move(self):
        scene = GroundTruthScene(SceneConfig(n_static=20, n_dynamic=10,
                                             motion_step=0.05))
        f0, f5 = scene.frame_at(0), scene.frame_at(5)
        d = scene.dynamic_indices
        assert np.linalg.norm(f5.mu[d] - f0.mu[d], axis=1).max() > 1e-4

    def test_per_step_displacement_bounded(self):
        step = 0.05
        scene = GroundTruthScene(SceneConfig(n_static=10, n_dynamic=30,
                                             n_clusters=3, motion_step=step))
        for t in range(7):
            a, b = scene.frame_at(t), scene.frame_at(t + 1)
            disp = np.linalg.norm(b.mu - a.mu, axis=1)
            # chord length <= arc length = motion_step (plus small z wobble)
            assert disp.max() <= 1.2 * step

    def test_only_positions_change_over_time(self):
        scene = GroundTruthScene(SceneConfig(n_static=10, n_dynamic=10))
        f0, f3 = scene.frame_at(0), scene.frame_at(3)
        for g in ("q", "log_s", "alpha_logit", "sh"):
            assert np.array_equal(getattr(f0, g), getattr(f3, g))

    def test_frame_at_zero_matches_base_positions(self):
        scene = GroundTruthScene(SceneConfig(n_static=10, n_dynamic=10))
        f0 = scene.frame_at(0)
        # offsets vanish at t=0 by construction
        assert np.array_equal(f0.mu, scene._base.mu)

    def test_determinism_across_instances(self):
        a = GroundTruthScene(SceneConfig(seed=7))
        b = GroundTruthScene(SceneConfig(seed=7))
        fa, fb = a.frame_at(4), b.frame_at(4)
        for g in PARAM_GROUPS:
            assert np.array_equal(getattr(fa, g), getattr(fb, g))

    def test_seed_changes_scene(self):
        a = GroundTruthScene(SceneConfig(seed=0))
        b = GroundTruthScene(SceneConfig(seed=1))
        assert not np.array_equal(a.frame_at(0).mu, b.frame_at(0).mu)

    def test_static_frame_is_backdrop_subset(self):
        scene = GroundTruthScene(SceneConfig(n_static=15, n_dynamic=10))
        sf = scene.static_frame(2)
        assert sf.size == 15
        full = scene.frame_at(2)
        assert np.array_equal(sf.mu, full.mu[scene.static_indices])

    def test_point_cloud_matches_centers_and_colors(self):
        scene = GroundTruthScene(SceneConfig(n_static=8, n_dynamic=4))
        pc = scene.point_cloud(0)
        assert len(pc) == 12
        assert np.array_equal(pc.points, scene.frame_at(0).mu)
        assert pc.colors.min() >= 0.0 and pc.colors.max() <= 1.0

    def test_colors_in_valid_range(self):
        scene = GroundTruthScene(SceneConfig())
        from warmsplat.sh import SH_C0
        dc = scene._base.sh[:, 0, :] * SH_C0
        assert dc.min() >= 0.1 - 1e-12 and dc.max() <= 0.9 + 1e-12

    def test_static_only_scene(self):
        scene = GroundTruthScene(SceneConfig(n_static=10, n_dynamic=0))
        assert scene.dynamic_indices.size == 0
        assert np.array_equal(scene.frame_at(0).mu, scene.frame_at(9).mu)
