import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from depthwarp.core import (
    CameraIntrinsics,
    DepthImage,
    DisplacementField,
    PixelMask,
    Pose,
    intrinsics_scale,
    pose_compose,
    pose_inverse,
)

yaws = st.floats(min_value=-180, max_value=180, allow_nan=False)
offsets = st.floats(min_value=-10, max_value=10, allow_nan=False)
scales = st.floats(min_value=0.05, max_value=20, allow_nan=False)


def random_pose(yaw, tx, ty, tz):
    return Pose.from_yaw(yaw, (tx, ty, tz))


class TestDepthImage:
    def test_valid_construction(self):
        img = DepthImage(np.ones((2, 3)))
        assert img.width == 3 and img.height == 2
        assert img.data.dtype == np.float32

    def test_zero_means_unknown(self):
        img = DepthImage(np.array([[0.0, 1.5]]))
        assert img.known().tolist() == [[False, True]]
        assert img.known_count() == 1

    @pytest.mark.parametrize("bad", [-1.0, np.nan, np.inf, -np.inf])
    def test_rejects_invalid_values(self, bad):
        with pytest.raises(ValueError):
            DepthImage(np.array([[1.0, bad]]))

    def test_rejects_empty_and_wrong_rank(self):
        with pytest.raises(ValueError):
            DepthImage(np.ones((0, 4)))
        with pytest.raises(ValueError):
            DepthImage(np.ones(4))

    def test_immutable(self):
        img = DepthImage(np.ones((2, 2)))
        with pytest.raises(ValueError):
            img.data[0, 0] = 3.0


class TestPixelMask:
    def test_count(self):
        mask = PixelMask(np.array([[True, False], [True, True]]))
        assert mask.count() == 3
        assert mask.width == 2 and mask.height == 2


class TestDisplacementField:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            DisplacementField(np.zeros((2, 2), int), np.zeros((2, 3), int))


class TestIntrinsics:
    def test_scale_by_two_matches_doubled_matrix(self):
        scaled = intrinsics_scale(CameraIntrinsics(500, 320, 240), 2)
        assert (scaled.f, scaled.cx, scaled.cy) == (1000, 640, 480)

    def test_scale_identity(self, intrinsics):
        scaled = intrinsics_scale(intrinsics, 1)
        assert scaled == intrinsics

    def test_scale_half(self):
        scaled = intrinsics_scale(CameraIntrinsics(500, 320, 240), 0.5)
        assert (scaled.f, scaled.cx, scaled.cy) == (250, 160, 120)

    @pytest.mark.parametrize("factor", [0.0, -1.0, np.nan])
    def test_rejects_bad_factor(self, intrinsics, factor):
        with pytest.raises(ValueError):
            intrinsics_scale(intrinsics, factor)

    def test_rejects_nonpositive_focal(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(0.0, 10, 10)

    @given(a=scales, b=scales)
    def test_scaling_composes_multiplicatively(self, a, b):
        k = CameraIntrinsics(500, 320, 240)
        once = intrinsics_scale(k, a * b)
        twice = intrinsics_scale(intrinsics_scale(k, a), b)
        assert_allclose(
            (twice.f, twice.cx, twice.cy), (once.f, once.cx, once.cy), rtol=1e-9
        )


class TestPose:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 1.001, np.zeros(3))

    def test_rejects_reflection(self):
        refl = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            Pose(refl, np.zeros(3))

    def test_compose_with_identity(self):
        p = Pose.from_yaw(30, (1, 2, 3))
        q = pose_compose(Pose.identity(), p)
        assert_allclose(q.rotation, p.rotation)
        assert_allclose(q.translation, p.translation)

    def test_compose_with_inverse_is_identity(self):
        p = Pose.from_yaw(17, (0.3, -1.2, 2.0))
        q = pose_compose(p, pose_inverse(p))
        assert_allclose(q.rotation, np.eye(3), atol=1e-9)
        assert_allclose(q.translation, np.zeros(3), atol=1e-9)

    def test_pure_translations_add(self):
        a = Pose(np.eye(3), np.array([0.0, 0.0, 1.0]))
        b = Pose(np.eye(3), np.array([0.0, 0.0, 2.0]))
        assert_allclose(pose_compose(a, b).translation, [0, 0, 3])

    def test_inverse_of_identity(self):
        q = pose_inverse(Pose.identity())
        assert_allclose(q.rotation, np.eye(3))
        assert_allclose(q.translation, np.zeros(3))

    def test_inverse_of_translation(self):
        q = pose_inverse(Pose(np.eye(3), np.array([1.0, 0.0, 0.0])))
        assert_allclose(q.translation, [-1, 0, 0])

    @given(yaw=yaws, tx=offsets, ty=offsets, tz=offsets)
    def test_inverse_is_involution(self, yaw, tx, ty, tz):
        p = random_pose(yaw, tx, ty, tz)
        q = pose_inverse(pose_inverse(p))
        assert_allclose(q.rotation, p.rotation, atol=1e-12)
        assert_allclose(q.translation, p.translation, atol=1e-12)

    @given(
        y1=yaws, y2=yaws, y3=yaws,
        t1=offsets, t2=offsets, t3=offsets,
    )
    def test_compose_associative(self, y1, y2, y3, t1, t2, t3):
        a = random_pose(y1, t1, 0, 0)
        b = random_pose(y2, 0, t2, 0)
        c = random_pose(y3, 0, 0, t3)
        left = pose_compose(pose_compose(a, b), c)
        right = pose_compose(a, pose_compose(b, c))
        assert_allclose(left.rotation, right.rotation, atol=1e-9)
        assert_allclose(left.translation, right.translation, atol=1e-9)

    def test_apply_matches_matrix_form(self):
        p = Pose.from_yaw(40, (0.5, -0.3, 1.0))
        pts = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 1.0]])
        expected = (p.rotation @ pts.T).T + p.translation
        assert_allclose(p.apply(pts), expected)
