import numpy as np
import pytest
from numpy.testing import assert_allclose

from depthwarp.complete import (
    NoValidSourceError,
    apply_displacement,
    complete_diffuse,
    complete_nearest,
    default_fusion_poses,
    diffuse_inpaint,
    fuse_views,
    median_merge,
    nearest_valid_field,
)
from depthwarp.core import CameraIntrinsics, DepthImage, DisplacementField, PixelMask, Pose


def field_of(dx, dy):
    return DisplacementField(np.asarray(dx, dtype=np.int32), np.asarray(dy, dtype=np.int32))


def brute_force_nearest(known, y, x):
    """Reference search: scan every known pixel, order by (d2, dy, dx)."""
    best = None
    for sy in range(known.shape[0]):
        for sx in range(known.shape[1]):
            if not known[sy, sx]:
                continue
            d2 = (sy - y) ** 2 + (sx - x) ** 2
            key = (d2, sy - y, sx - x)
            if best is None or key < best:
                best = key
    return best


class TestApplyDisplacement:
    def test_zero_field_keeps_mask_unknown(self):
        occ = DepthImage(np.array([[1.0, 0.0], [2.0, 3.0]]))
        mask = PixelMask(np.array([[False, True], [False, False]]))
        zeros = np.zeros((2, 2), np.int32)
        out, unresolved = apply_displacement(occ, mask, field_of(zeros, zeros))
        assert np.array_equal(out.data, occ.data)
        assert unresolved.bits[0, 1]
        assert unresolved.count() == 1

    def test_copy_from_known_neighbor(self):
        occ = DepthImage(np.array([[1.7, 0.0]]))
        mask = PixelMask(np.array([[False, True]]))
        out, unresolved = apply_displacement(occ, mask, field_of([[0, -1]], [[0, 0]]))
        assert out.data[0, 1] == np.float32(1.7)
        assert unresolved.count() == 0

    def test_reference_to_unknown_reported(self):
        occ = DepthImage(np.array([[0.0, 0.0, 5.0]]))
        mask = PixelMask(np.array([[True, False, False]]))
        out, unresolved = apply_displacement(occ, mask, field_of([[1, 0, 0]], [[0, 0, 0]]))
        assert out.data[0, 0] == 0.0
        assert unresolved.bits[0, 0]

    def test_known_pixels_never_touched_even_if_masked(self):
        occ = DepthImage(np.array([[1.5, 2.5]]))
        mask = PixelMask(np.array([[True, True]]))
        out, _ = apply_displacement(occ, mask, field_of([[1, -1]], [[0, 0]]))
        assert np.array_equal(out.data, occ.data)

    def test_dimension_mismatch_rejected(self):
        occ = DepthImage(np.ones((2, 2)))
        mask = PixelMask(np.ones((2, 3), dtype=bool))
        zeros = np.zeros((2, 2), np.int32)
        with pytest.raises(ValueError):
            apply_displacement(occ, mask, field_of(zeros, zeros))

    def test_out_of_bounds_reference_rejected(self):
        occ = DepthImage(np.array([[0.0, 1.0]]))
        mask = PixelMask(np.array([[True, False]]))
        with pytest.raises(ValueError):
            apply_displacement(occ, mask, field_of([[-1, 0]], [[0, 0]]))

    def test_post_fill_resolves_reported_pixels(self):
        occ = DepthImage(np.array([[0.0, 0.0, 4.0], [4.0, 4.0, 4.0]]))
        mask = PixelMask(np.array([[True, True, False], [False, False, False]]))
        zeros = np.zeros((2, 3), np.int32)
        out, unresolved = apply_displacement(
            occ, mask, field_of(zeros, zeros), fill_unresolved=True, fill_iterations=50
        )
        assert unresolved.count() == 2  # report reflects the pre-fill state
        assert (out.data > 0).all()

    def test_every_fill_is_a_known_input_value(self):
        rng = np.random.default_rng(4)
        data = rng.uniform(1, 5, (12, 16)).astype(np.float32)
        data[rng.random((12, 16)) < 0.3] = 0.0
        occ = DepthImage(data)
        mask = PixelMask(data == 0.0)
        field = nearest_valid_field(occ, mask)
        out, _ = apply_displacement(occ, mask, field)
        filled = mask.bits & out.known()
        ys, xs = np.nonzero(filled)
        src_vals = occ.data[ys + field.dy[ys, xs], xs + field.dx[ys, xs]]
        assert np.array_equal(out.data[ys, xs], src_vals)


class TestNearestValidField:
    def test_left_neighbor(self):
        occ = DepthImage(np.array([[3.0, 0.0]]))
        mask = PixelMask(np.array([[False, True]]))
        field = nearest_valid_field(occ, mask)
        assert (field.dx[0, 1], field.dy[0, 1]) == (-1, 0)

    def test_tie_prefers_up_over_left(self):
        grid = np.array([[0.0, 2.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        occ = DepthImage(grid)
        mask = PixelMask(grid == 0.0)
        field = nearest_valid_field(occ, mask)
        assert (field.dx[1, 1], field.dy[1, 1]) == (0, -1)

    def test_center_of_known_border(self):
        grid = np.ones((5, 5), dtype=np.float32)
        grid[1:4, 1:4] = 0.0
        occ = DepthImage(grid)
        mask = PixelMask(grid == 0.0)
        field = nearest_valid_field(occ, mask)
        assert field.dx[2, 2] ** 2 + field.dy[2, 2] ** 2 == 4

    def test_matches_brute_force_on_random_grids(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            data = rng.uniform(1, 5, (9, 11)).astype(np.float32)
            data[rng.random((9, 11)) < 0.45] = 0.0
            if not (data > 0).any():
                continue
            occ = DepthImage(data)
            mask = PixelMask(data == 0.0)
            field = nearest_valid_field(occ, mask)
            known = data > 0
            for y, x in zip(*np.nonzero(mask.bits)):
                d2, dy, dx = brute_force_nearest(known, y, x)
                assert (field.dy[y, x], field.dx[y, x]) == (dy, dx)
                assert field.dy[y, x] ** 2 + field.dx[y, x] ** 2 == d2

    def test_all_unknown_raises(self):
        occ = DepthImage(np.zeros((3, 3)))
        with pytest.raises(NoValidSourceError):
            nearest_valid_field(occ, PixelMask(np.ones((3, 3), bool)))

    def test_non_mask_pixels_get_zero(self):
        occ = DepthImage(np.array([[1.0, 0.0]]))
        mask = PixelMask(np.array([[False, False]]))
        field = nearest_valid_field(occ, mask)
        assert not field.dx.any() and not field.dy.any()


class TestDiffuseInpaint:
    def test_single_pixel_surrounded_by_equal_boundary(self):
        grid = np.full((3, 3), 2.5, dtype=np.float32)
        grid[1, 1] = 0.0
        out, unreached = diffuse_inpaint(
            DepthImage(grid), PixelMask(grid == 0.0), iterations=50, tolerance=1e-9
        )
        assert out.data[1, 1] == pytest.approx(2.5, abs=1e-6)
        assert unreached.count() == 0

    def test_one_dimensional_ramp(self):
        grid = np.array([[1.0, 0.0, 0.0, 0.0, 3.0]], dtype=np.float32)
        out, _ = diffuse_inpaint(
            DepthImage(grid), PixelMask(grid == 0.0), iterations=500, tolerance=1e-10
        )
        assert_allclose(out.data[0], [1.0, 1.5, 2.0, 2.5, 3.0], atol=1e-5)

    def test_empty_mask_returns_input(self):
        img = DepthImage(np.array([[1.0, 2.0], [0.0, 3.0]]))
        out, unreached = diffuse_inpaint(img, PixelMask(np.zeros((2, 2), bool)), 10, 1e-6)
        assert np.array_equal(out.data, img.data)
        assert unreached.count() == 0

    def test_unreachable_region_reported(self):
        grid = np.zeros((3, 3), dtype=np.float32)  # nothing known at all
        out, unreached = diffuse_inpaint(
            DepthImage(grid), PixelMask(np.ones((3, 3), bool)), 10, 1e-6
        )
        assert out.known_count() == 0
        assert unreached.count() == 9

    def test_known_pixels_preserved_exactly(self):
        rng = np.random.default_rng(3)
        data = rng.uniform(1, 4, (10, 10)).astype(np.float32)
        data[3:6, 4:8] = 0.0
        img = DepthImage(data)
        out, _ = diffuse_inpaint(img, PixelMask(data == 0.0), 200, 1e-8)
        known = img.known()
        assert np.array_equal(out.data[known], img.data[known])

    def test_maximum_principle_at_every_iteration_budget(self):
        grid = np.zeros((9, 9), dtype=np.float32)
        grid[0, :] = 5.0
        grid[-1, :] = 1.0
        grid[:, 0] = 3.0
        grid[:, -1] = 3.0
        mask = PixelMask(grid == 0.0)
        for iterations in (1, 3, 10, 200):
            out, _ = diffuse_inpaint(DepthImage(grid), mask, iterations, 1e-12)
            interior = out.data[1:-1, 1:-1]
            assert interior.min() >= 1.0 - 1e-6
            assert interior.max() <= 5.0 + 1e-6


class TestMedianMerge:
    def test_odd_count_median(self):
        layers = [np.full((1, 1), v) for v in (9.0, 1.0, 2.0)]
        assert median_merge(layers)[0, 0] == 2.0

    def test_even_count_takes_lower_median(self):
        layers = [np.full((1, 1), v) for v in (1.0, 2.0, 3.0, 4.0)]
        assert median_merge(layers)[0, 0] == 2.0

    def test_unknowns_ignored(self):
        layers = [np.array([[0.0]]), np.array([[4.0]]), np.array([[0.0]])]
        assert median_merge(layers)[0, 0] == 4.0

    def test_all_unknown_stays_unknown(self):
        assert median_merge([np.zeros((1, 1)), np.zeros((1, 1))])[0, 0] == 0.0


class TestFuseViews:
    def test_identity_pose_returns_base(self, intrinsics):
        rng = np.random.default_rng(6)
        base = DepthImage(rng.uniform(1, 4, (16, 20)).astype(np.float32))
        from depthwarp.warp import WarpConfig

        fused = fuse_views(
            base, intrinsics, [Pose.identity()], complete_nearest, WarpConfig(supersample=1)
        )
        assert np.array_equal(fused.data, base.data)

    def test_identical_candidates_survive(self, intrinsics):
        base = DepthImage(np.full((8, 8), 2.0, dtype=np.float32))
        from depthwarp.warp import WarpConfig

        fused = fuse_views(
            base,
            CameraIntrinsics(100.0, 3.5, 3.5),
            [Pose.identity(), Pose.identity()],
            complete_nearest,
            WarpConfig(supersample=1),
        )
        assert_allclose(fused.data, 2.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        base = DepthImage(rng.uniform(1.0, 5.0, (24, 32)).astype(np.float32))
        intr = CameraIntrinsics(60.0, 15.5, 11.5)
        poses = default_fusion_poses(4, seed=3)
        from depthwarp.warp import WarpConfig

        cfg = WarpConfig(supersample=2)
        a = fuse_views(base, intr, poses, complete_nearest, cfg)
        b = fuse_views(base, intr, poses[::-1], complete_nearest, cfg)
        assert np.array_equal(a.data, b.data)

    def test_requires_at_least_one_pose(self, intrinsics):
        base = DepthImage(np.ones((4, 4)))
        with pytest.raises(ValueError):
            fuse_views(base, intrinsics, [], complete_nearest)

    def test_default_poses_deterministic(self):
        a = default_fusion_poses(8, seed=0)
        b = default_fusion_poses(8, seed=0)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.rotation, pb.rotation)
            assert np.array_equal(pa.translation, pb.translation)


class TestCompleterContracts:
    @pytest.mark.parametrize("completer", [complete_nearest, complete_diffuse])
    def test_known_pixels_preserved(self, completer):
        rng = np.random.default_rng(13)
        data = rng.uniform(0.5, 6.0, (14, 18)).astype(np.float32)
        data[5:9, 6:12] = 0.0
        img = DepthImage(data)
        mask = PixelMask(data == 0.0)
        out = completer(img, mask)
        known = img.known()
        assert np.array_equal(out.data[known], img.data[known])


class TestFuseJobs:
    def test_job_count_does_not_change_result(self):
        rng = np.random.default_rng(21)
        base = DepthImage(rng.uniform(1.0, 5.0, (24, 32)).astype(np.float32))
        intr = CameraIntrinsics(60.0, 15.5, 11.5)
        poses = default_fusion_poses(3, seed=9)
        from depthwarp.warp import WarpConfig

        cfg = WarpConfig(supersample=2)
        serial = fuse_views(base, intr, poses, complete_nearest, cfg, jobs=1)
        parallel = fuse_views(base, intr, poses, complete_nearest, cfg, jobs=2)
        assert np.array_equal(serial.data, parallel.data)
