"""Static/dynamic decomposition tests: masks, voting, AABB, merge."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_frame, ring_cameras, single_splat_frame
from warmsplat.decompose import (AABB, ResidualMask, VoteConfig, aabb_filter,
                                 build_residual_mask, merge_ab,
                                 multi_view_vote)
from warmsplat.errors import InvalidInputError
from warmsplat.gaussians import PARAM_GROUPS, GaussianFrame
from warmsplat.geometry import Camera, CameraIntrinsics, CameraPose


def frontal_camera(res=9, focal=50.0, name="cam_000"):
    intr = CameraIntrinsics(focal, focal, (res - 1) / 2.0, (res - 1) / 2.0,
                            res, res)
    return Camera(name, intr, CameraPose(np.eye(3), np.zeros(3)))


class TestVoteConfig:
    def test_invalid_threshold(self):
        with pytest.raises(InvalidInputError):
            VoteConfig(diff_threshold=0.0)
        with pytest.raises(InvalidInputError):
            VoteConfig(quorum=0.0)
        with pytest.raises(InvalidInputError):
            VoteConfig(morph_radius=-1)


class TestResidualMask:
    def test_identical_images_empty_mask(self, rng):
        img = rng.uniform(0, 1, (16, 16, 3))
        rm = build_residual_mask(img, img, VoteConfig())
        assert not rm.mask.any()

    def test_block_difference_detected(self):
        gt = np.zeros((20, 20, 3))
        gt[5:15, 5:15, 0] = 1.0  # a 10x10 red square only in the GT
        rm = build_residual_mask(gt, np.zeros((20, 20, 3)),
                                 VoteConfig(morph_radius=2))
        assert rm.mask[10, 10]
        assert not rm.mask[0, 0]
        assert not rm.mask[19, 19]

    def test_single_pixel_speckle_removed_by_opening(self):
        gt = np.zeros((20, 20, 3))
        gt[10, 10, 1] = 1.0
        rm = build_residual_mask(gt, np.zeros((20, 20, 3)),
                                 VoteConfig(morph_radius=2))
        assert not rm.mask.any()

    def test_threshold_respected(self):
        gt = np.full((12, 12, 3), 0.04)
        rm = build_residual_mask(gt, np.zeros((12, 12, 3)),
                                 VoteConfig(diff_threshold=0.05, morph_radius=0))
        assert not rm.mask.any()
        rm = build_residual_mask(gt * 2, np.zeros((12, 12, 3)),
                                 VoteConfig(diff_threshold=0.05, morph_radius=0))
        assert rm.mask.all()

    def test_symmetry_in_arguments(self, rng):
        a = rng.uniform(0, 1, (16, 16, 3))
        b = rng.uniform(0, 1, (16, 16, 3))
        m1 = build_residual_mask(a, b, VoteConfig())
        m2 = build_residual_mask(b, a, VoteConfig())
        assert np.array_equal(m1.mask, m2.mask)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            build_residual_mask(np.zeros((8, 8, 3)), np.zeros((9, 9, 3)),
                                VoteConfig())


def two_splat_frame():
    """Gaussian 0 on the optical axis (center pixel), Gaussian 1 slightly
    off-axis so it projects to a different pixel that is still in-image."""
    mu = np.array([[0.0, 0.0, 3.0], [0.1, 0.0, 3.0]])
    q = np.tile([1.0, 0, 0, 0], (2, 1))
    return GaussianFrame(0, mu, q, np.full((2, 3), -2.0), np.zeros(2),
                         np.zeros((2, 1, 3)), 0)


class TestVote:
    def test_unanimous_vote_retains(self):
        frame = two_splat_frame()
        cams = [frontal_camera(name=f"c{i}") for i in range(3)]
        full = np.ones((9, 9), dtype=bool)
        masks = [ResidualMask(c.name, full) for c in cams]
        kept = multi_view_vote(frame, cams, masks, VoteConfig())
        assert list(kept) == [0, 1]

    def test_no_votes_drops_all(self):
        frame = two_splat_frame()
        cams = [frontal_camera(name=f"c{i}") for i in range(3)]
        masks = [ResidualMask(c.name, np.zeros((9, 9), dtype=bool)) for c in cams]
        kept = multi_view_vote(frame, cams, masks, VoteConfig())
        assert kept.size == 0

    def test_quorum_fraction_counted_per_view(self):
        # Gaussian 0 projects to the center pixel; flag it in 2 of 3 views.
        frame = two_splat_frame()
        cams = [frontal_camera(name=f"c{i}") for i in range(3)]
        center_on = np.zeros((9, 9), dtype=bool)
        center_on[4, 4] = True
        masks = [ResidualMask("c0", center_on), ResidualMask("c1", center_on),
                 ResidualMask("c2", np.zeros((9, 9), dtype=bool))]
        kept_06 = multi_view_vote(frame, cams, masks, VoteConfig(quorum=0.6))
        assert list(kept_06) == [0]  # 2/3 >= 0.6
        kept_07 = multi_view_vote(frame, cams, masks, VoteConfig(quorum=0.7))
        assert kept_07.size == 0     # 2/3 < 0.7

    def test_invisible_gaussian_dropped(self):
        frame = two_splat_frame()
        frame.mu[1] = [0.0, 0.0, -5.0]  # behind the camera
        cams = [frontal_camera(name="c0")]
        masks = [ResidualMask("c0", np.ones((9, 9), dtype=bool))]
        kept = multi_view_vote(frame, cams, masks, VoteConfig())
        assert list(kept) == [0]

    def test_mask_camera_shape_mismatch_rejected(self):
        frame = two_splat_frame()
        cams = [frontal_camera(name="c0")]
        masks = [ResidualMask("c0", np.ones((8, 8), dtype=bool))]
        with pytest.raises(InvalidInputError):
            multi_view_vote(frame, cams, masks, VoteConfig())

    def test_empty_camera_list_rejected(self):
        with pytest.raises(InvalidInputError):
            multi_view_vote(two_splat_frame(), [], [], VoteConfig())

    @given(st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_quorum_monotonicity(self, q_lo, q_hi, seed):
        # raising the quorum can only shrink the retained set
        if q_lo > q_hi:
            q_lo, q_hi = q_hi, q_lo
        rng = np.random.default_rng(seed)
        frame = random_frame(rng, K=12, sh_degree=0, spread=1.0)
        frame.mu[:, 2] = np.abs(frame.mu[:, 2]) + 2.0
        cams = [frontal_camera(res=16, focal=10.0, name=f"c{i}")
                for i in range(4)]
        masks = [ResidualMask(c.name, rng.uniform(size=(16, 16)) > 0.5)
                 for c in cams]
        lo = set(multi_view_vote(frame, cams, masks, VoteConfig(quorum=q_lo)))
        hi = set(multi_view_vote(frame, cams, masks, VoteConfig(quorum=q_hi)))
        assert hi <= lo


class TestAABB:
    def test_invalid_box_rejected(self):
        with pytest.raises(InvalidInputError):
            AABB([0, 0, 0], [1, -1, 1])

    def test_contains_with_margin(self):
        box = AABB([0, 0, 0], [1, 1, 1], margin=0.5)
        pts = np.array([[0.5, 0.5, 0.5], [1.4, 0.5, 0.5], [1.6, 0.5, 0.5],
                        [-0.4, -0.4, -0.4]])
        assert list(box.contains(pts)) == [True, True, False, True]

    def test_filter_restricts_indices(self, rng):
        frame = random_frame(rng, K=10, spread=2.0)
        box = AABB([-1, -1, -1], [1, 1, 1])
        idx = np.arange(10)
        kept = aabb_filter(idx, frame, box)
        inside = box.contains(frame.mu)
        assert list(kept) == list(np.nonzero(inside)[0])

    def test_filter_empty_input(self, rng):
        frame = random_frame(rng, K=4)
        out = aabb_filter(np.array([], dtype=int), frame,
                          AABB([-1, -1, -1], [1, 1, 1]))
        assert out.size == 0


class TestMerge:
    def test_merge_concatenates_bit_exact(self, rng):
        a = random_frame(rng, K=5, sh_degree=1, t=2)
        b = random_frame(rng, K=7, sh_degree=1, t=2)
        retained = np.array([1, 4, 6])
        m = merge_ab(a, b, retained)
        assert m.size == 8
        assert m.t == 2
        for g in PARAM_GROUPS:
            ga, gb, gm = getattr(a, g), getattr(b, g), getattr(m, g)
            assert np.array_equal(gm[:5], ga)
            assert np.array_equal(gm[5:], gb[retained])

    def test_merge_empty_retained(self, rng):
        a = random_frame(rng, K=5, sh_degree=0)
        b = random_frame(rng, K=3, sh_degree=0)
        m = merge_ab(a, b, np.array([], dtype=int))
        assert m.size == 5
        assert np.array_equal(m.mu, a.mu)

    def test_merge_degree_mismatch_rejected(self, rng):
        a = random_frame(rng, K=2, sh_degree=0)
        b = random_frame(rng, K=2, sh_degree=1)
        with pytest.raises(InvalidInputError):
            merge_ab(a, b, np.array([0]))
