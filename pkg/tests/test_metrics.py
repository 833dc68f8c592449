import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from depthwarp.core import DepthImage, PixelMask
from depthwarp.metrics import (
    FeaturePyramid,
    LossConfig,
    MaskedErrors,
    feature_pyramid,
    gradient_magnitude,
    loss_content,
    loss_total,
    loss_tv,
    masked_errors,
    psnr,
)


def naive_gradient(values):
    h, w = values.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            gx = values[y, x + 1] - values[y, x] if x + 1 < w else (
                values[y, x] - values[y, x - 1] if w > 1 else 0.0
            )
            gy = values[y + 1, x] - values[y, x] if y + 1 < h else (
                values[y, x] - values[y - 1, x] if h > 1 else 0.0
            )
            out[y, x] = abs(gx) + abs(gy)
    return out


def naive_pyramid(values, scales):
    grad = naive_gradient(values)
    levels = {}
    for s in scales:
        h, w = grad.shape
        oh, ow = math.ceil(h / s), math.ceil(w / s)
        level = np.zeros((oh, ow))
        for by in range(oh):
            for bx in range(ow):
                block = grad[by * s : min((by + 1) * s, h), bx * s : min((bx + 1) * s, w)]
                level[by, bx] = block.mean()
        levels[s] = level
    return levels


def naive_content_loss(pred, truth, mask, cfg):
    total = 0.0
    for s in cfg.feature_scales:
        pl = naive_pyramid(pred, (s,))[s]
        tl = naive_pyramid(truth, (s,))[s]
        h, w = mask.shape
        for by in range(pl.shape[0]):
            for bx in range(pl.shape[1]):
                block = mask[by * s : min((by + 1) * s, h), bx * s : min((bx + 1) * s, w)]
                if block.any():
                    total += abs(tl[by, bx] - pl[by, bx])
    return cfg.content_weight * total


class TestMaskedErrors:
    def test_perfect_prediction_is_zero(self):
        img = DepthImage(np.array([[1.0, 2.0], [3.0, 4.0]]))
        mask = PixelMask(np.ones((2, 2), bool))
        res = masked_errors(img, img, mask)
        assert res.mean == 0.0 and res.median == 0.0
        assert res.count == 4 and res.excluded == 0

    def test_three_pixel_statistics(self):
        # values are stored as float32, so the decimal case holds to
        # float32 precision; a binary-exact case holds to 1e-9
        truth = DepthImage(np.array([[1.0, 1.0, 1.0]]))
        pred = DepthImage(np.array([[1.1, 1.2, 1.9]]))
        res = masked_errors(pred, truth, PixelMask(np.array([[True, True, True]])))
        assert res.mean == pytest.approx(0.4, rel=1e-6)
        assert res.median == pytest.approx(0.2, rel=1e-6)

        pred2 = DepthImage(np.array([[1.125, 1.25, 1.875]]))
        res2 = masked_errors(pred2, truth, PixelMask(np.array([[True, True, True]])))
        assert res2.mean == pytest.approx((0.125 + 0.25 + 0.875) / 3, rel=1e-12)
        assert res2.median == pytest.approx(0.25, rel=1e-12)

    def test_unknown_predictions_excluded_and_counted(self):
        truth = DepthImage(np.array([[2.0, 2.0, 2.0]]))
        pred = DepthImage(np.array([[0.0, 2.5, 2.5]]))
        res = masked_errors(pred, truth, PixelMask(np.array([[True, True, True]])))
        assert res.excluded == 1
        assert res.count == 2
        assert res.mean == pytest.approx(0.5)

    def test_empty_mask_rejected(self):
        img = DepthImage(np.ones((2, 2)))
        with pytest.raises(ValueError):
            masked_errors(img, img, PixelMask(np.zeros((2, 2), bool)))

    def test_median_invariant_under_pixel_permutation(self):
        rng = np.random.default_rng(0)
        truth_vals = rng.uniform(1, 5, 16)
        pred_vals = truth_vals + rng.uniform(-0.5, 0.5, 16)
        order = rng.permutation(16)
        truth_a = DepthImage(truth_vals.reshape(4, 4))
        pred_a = DepthImage(pred_vals.reshape(4, 4))
        truth_b = DepthImage(truth_vals[order].reshape(4, 4))
        pred_b = DepthImage(pred_vals[order].reshape(4, 4))
        mask = PixelMask(np.ones((4, 4), bool))
        assert masked_errors(pred_a, truth_a, mask).median == pytest.approx(
            masked_errors(pred_b, truth_b, mask).median, rel=1e-12
        )


class TestPsnr:
    def test_identical_images_infinite(self):
        img = np.full((4, 4, 3), 100, dtype=np.uint8)
        assert psnr(img, img, PixelMask(np.ones((4, 4), bool))) == math.inf

    def test_unit_error_everywhere(self):
        truth = np.full((4, 4, 3), 100, dtype=np.uint8)
        pred = truth + 1
        value = psnr(pred, truth, PixelMask(np.ones((4, 4), bool)))
        assert value == pytest.approx(10 * math.log10(255.0**2), rel=1e-9)

    def test_monotone_in_noise_magnitude(self):
        rng = np.random.default_rng(1)
        truth = rng.integers(30, 220, (8, 8, 3)).astype(np.uint8)
        mask = PixelMask(np.ones((8, 8), bool))
        prev = math.inf
        for step in (1, 3, 9, 27):
            pred = np.clip(truth.astype(int) + step, 0, 255).astype(np.uint8)
            value = psnr(pred, truth, mask)
            assert value < prev
            prev = value

    def test_requires_uint8(self):
        img = np.ones((2, 2, 3), dtype=np.float32)
        with pytest.raises(ValueError):
            psnr(img, img, PixelMask(np.ones((2, 2), bool)))

    def test_empty_mask_rejected(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            psnr(img, img, PixelMask(np.zeros((2, 2), bool)))


class TestLossTv:
    def test_perfect_prediction_leaves_gradient_term(self):
        truth = DepthImage(np.array([[1.0, 1.2], [1.3, 1.5]]))
        mask = PixelMask(np.array([[True, False], [False, False]]))
        cfg = LossConfig(tv_weight=1e-3)
        expected = 1e-3 * gradient_magnitude(truth.data.astype(np.float64))[0, 0]
        assert loss_tv(truth, truth, mask, cfg) == pytest.approx(expected, rel=1e-9)

    def test_constant_offset_scales_linearly(self):
        pred = DepthImage(np.full((3, 3), 2.0))
        truth = DepthImage(np.full((3, 3), 2.75))
        mask = PixelMask(np.ones((3, 3), bool))
        assert loss_tv(pred, truth, mask) == pytest.approx(9 * 0.75, rel=1e-9)

    def test_single_pixel_hand_computed(self):
        pred = np.array([[1.0, 1.2], [1.3, 9.9]], dtype=np.float64)
        truth = pred.copy()
        truth[0, 0] = 1.1  # data error 0.1 at the mask pixel
        mask = PixelMask(np.array([[True, False], [False, False]]))
        cfg = LossConfig(tv_weight=1e-3)
        value = loss_tv(DepthImage(pred), DepthImage(truth), mask, cfg)
        assert value == pytest.approx(0.1 + 1e-3 * 0.5, rel=1e-6)

    def test_one_homogeneous_in_residual(self):
        rng = np.random.default_rng(2)
        pred = DepthImage(rng.uniform(1, 3, (5, 5)))
        mask = PixelMask(rng.random((5, 5)) < 0.5)
        if not mask.bits.any():
            mask = PixelMask(np.ones((5, 5), bool))
        cfg = LossConfig(tv_weight=0.0)
        base = loss_tv(pred, DepthImage(pred.data + np.float32(0.25)), mask, cfg)
        tripled = loss_tv(pred, DepthImage(pred.data + np.float32(0.75)), mask, cfg)
        assert tripled == pytest.approx(3 * base, rel=1e-5)


class TestLossContent:
    def test_perfect_prediction_is_zero(self):
        rng = np.random.default_rng(3)
        img = DepthImage(rng.uniform(1, 4, (12, 16)))
        mask = PixelMask(rng.random((12, 16)) < 0.3)
        assert loss_content(img, img, mask) == 0.0

    def test_zero_weight_annihilates(self):
        rng = np.random.default_rng(4)
        pred = DepthImage(rng.uniform(1, 4, (12, 16)))
        truth = DepthImage(rng.uniform(1, 4, (12, 16)))
        mask = PixelMask(np.ones((12, 16), bool))
        assert loss_content(pred, truth, mask, LossConfig(content_weight=0.0)) == 0.0

    def test_step_edge_matches_naive_reimplementation(self):
        truth = np.ones((12, 16))
        truth[:, 8:] = 3.0
        pred = np.ones((12, 16))
        for x in range(16):  # smoothed edge
            pred[:, x] = 1.0 + 2.0 * min(max((x - 4) / 8.0, 0.0), 1.0)
        mask = np.zeros((12, 16), bool)
        mask[:, 5:11] = True
        cfg = LossConfig()
        got = loss_content(DepthImage(pred), DepthImage(truth), PixelMask(mask), cfg)
        want = naive_content_loss(
            np.float32(pred).astype(np.float64), np.float32(truth).astype(np.float64), mask, cfg
        )
        assert got > 0
        assert got == pytest.approx(want, rel=1e-9)

    def test_occluded_feature_source(self):
        rng = np.random.default_rng(5)
        pred = DepthImage(rng.uniform(1, 4, (8, 8)))
        truth = DepthImage(rng.uniform(1, 4, (8, 8)))
        occluded = DepthImage(rng.uniform(1, 4, (8, 8)))
        mask = PixelMask(np.ones((8, 8), bool))
        cfg = LossConfig(feature_source="occluded")
        with pytest.raises(ValueError):
            loss_content(pred, truth, mask, cfg)
        value = loss_content(pred, truth, mask, cfg, occluded=occluded)
        same_as_pred_route = loss_content(occluded, truth, mask, LossConfig())
        assert value == pytest.approx(same_as_pred_route, rel=1e-12)

    def test_pyramid_shapes_use_ceil_division(self):
        img = DepthImage(np.ones((10, 13)))
        pyr = feature_pyramid(img, (4, 8))
        assert pyr.levels[4].shape == (3, 4)
        assert pyr.levels[8].shape == (2, 2)


class TestLossTotal:
    def test_sum_of_parts(self):
        rng = np.random.default_rng(6)
        pred = DepthImage(rng.uniform(1, 4, (9, 9)))
        truth = DepthImage(rng.uniform(1, 4, (9, 9)))
        mask = PixelMask(rng.random((9, 9)) < 0.4)
        if not mask.bits.any():
            mask = PixelMask(np.ones((9, 9), bool))
        cfg = LossConfig()
        assert loss_total(pred, truth, mask, cfg) == pytest.approx(
            loss_tv(pred, truth, mask, cfg) + loss_content(pred, truth, mask, cfg), rel=1e-12
        )

    @given(seed=st.integers(min_value=0, max_value=10_000))
    def test_losses_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        pred = DepthImage(rng.uniform(0.1, 5, (6, 6)))
        truth = DepthImage(rng.uniform(0.1, 5, (6, 6)))
        mask = PixelMask(rng.random((6, 6)) < 0.5)
        assert loss_tv(pred, truth, mask) >= 0.0
        assert loss_content(pred, truth, mask) >= 0.0


class TestLossConfig:
    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            LossConfig(tv_weight=-1e-3)

    def test_rejects_bad_scales(self):
        with pytest.raises(ValueError):
            LossConfig(feature_scales=(0,))

    def test_rejects_unknown_source(self):
        with pytest.raises(ValueError):
            LossConfig(feature_source="network")
