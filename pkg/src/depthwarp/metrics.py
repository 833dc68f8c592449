"""Evaluation functionals: masked depth errors, PSNR, training losses.

All losses and errors are evaluated only on a pixel mask (the completion
target set); pixels outside the mask never contribute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DepthImage, PixelMask


@dataclass(frozen=True)
class LossConfig:
    """Weights and feature scales of the completion loss.

    feature_source selects whose features the structure term compares
    against the truth: the prediction (default) or the occluded input.
    """

    tv_weight: float = 1e-3
    content_weight: float = 1e-5
    feature_scales: tuple = (4, 8)
    feature_source: str = "prediction"

    def __post_init__(self) -> None:
        if self.tv_weight < 0 or self.content_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if not self.feature_scales or any(int(s) != s or s < 1 for s in self.feature_scales):
            raise ValueError("feature scales must be integers >= 1")
        if self.feature_source not in ("prediction", "occluded"):
            raise ValueError(f"unknown feature source {self.feature_source!r}")


@dataclass(frozen=True)
class MaskedErrors:
    """Masked absolute-error statistics.

    `excluded` counts mask pixels where the truth is known but the
    prediction is not; they carry no error value and are left out of the
    statistics, so reporting them is mandatory.
    """

    mean: float
    median: float
    count: int
    excluded: int


def _check_same_shape(*arrays) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")


def masked_errors(pred: DepthImage, truth: DepthImage, mask: PixelMask) -> MaskedErrors:
    """Mean/median absolute depth error over mask pixels where both
    prediction and truth are known."""
    _check_same_shape(pred.data, truth.data, mask.bits)
    if not mask.bits.any():
        raise ValueError("mask is empty")
    evaluable = mask.bits & truth.known()
    scored = evaluable & pred.known()
    excluded = int(np.count_nonzero(evaluable & ~pred.known()))
    errors = np.abs(
        pred.data[scored].astype(np.float64) - truth.data[scored].astype(np.float64)
    )
    if errors.size == 0:
        return MaskedErrors(math.nan, math.nan, 0, excluded)
    return MaskedErrors(
        mean=float(errors.mean()),
        median=float(np.median(errors)),
        count=int(errors.size),
        excluded=excluded,
    )


def psnr(pred: np.ndarray, truth: np.ndarray, mask: PixelMask) -> float:
    """Peak signal-to-noise ratio in dB over mask pixels of two 8-bit
    RGB images; identical content yields +inf."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.dtype != np.uint8 or truth.dtype != np.uint8:
        raise ValueError("psnr expects 8-bit channel data")
    if pred.ndim != 3 or pred.shape[2] != 3 or pred.shape != truth.shape:
        raise ValueError(f"expected matching (H, W, 3) images, got {pred.shape} vs {truth.shape}")
    if pred.shape[:2] != mask.bits.shape:
        raise ValueError("mask dimensions do not match the images")
    if not mask.bits.any():
        raise ValueError("mask is empty")
    diff = pred[mask.bits].astype(np.float64) - truth[mask.bits].astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def gradient_magnitude(values: np.ndarray) -> np.ndarray:
    """L1 gradient magnitude |dx| + |dy| by forward differences, falling
    back to the backward difference on the last row/column."""
    values = np.asarray(values, dtype=np.float64)
    gx = np.zeros_like(values)
    gy = np.zeros_like(values)
    if values.shape[1] > 1:
        gx[:, :-1] = values[:, 1:] - values[:, :-1]
        gx[:, -1] = values[:, -1] - values[:, -2]
    if values.shape[0] > 1:
        gy[:-1, :] = values[1:, :] - values[:-1, :]
        gy[-1, :] = values[-1, :] - values[-2, :]
    return np.abs(gx) + np.abs(gy)


def loss_tv(
    pred: DepthImage, truth: DepthImage, mask: PixelMask, config: LossConfig = LossConfig()
) -> float:
    """Masked L1 data term plus weighted L1 gradient penalty on the
    prediction, both summed over mask pixels."""
    _check_same_shape(pred.data, truth.data, mask.bits)
    bits = mask.bits
    pred64 = pred.data.astype(np.float64)
    data_term = float(np.abs(truth.data.astype(np.float64) - pred64)[bits].sum())
    grad_term = float(gradient_magnitude(pred64)[bits].sum())
    return data_term + config.tv_weight * grad_term


def _pool_mean(values: np.ndarray, scale: int) -> np.ndarray:
    """Average pooling with ceil-division output size; edge cells average
    over their partial block."""
    h, w = values.shape
    oh, ow = -(-h // scale), -(-w // scale)
    padded = np.zeros((oh * scale, ow * scale))
    padded[:h, :w] = values
    counts = np.zeros((oh * scale, ow * scale))
    counts[:h, :w] = 1.0
    sums = padded.reshape(oh, scale, ow, scale).sum(axis=(1, 3))
    norms = counts.reshape(oh, scale, ow, scale).sum(axis=(1, 3))
    return sums / norms


def _pool_any(bits: np.ndarray, scale: int) -> np.ndarray:
    h, w = bits.shape
    oh, ow = -(-h // scale), -(-w // scale)
    padded = np.zeros((oh * scale, ow * scale), dtype=bool)
    padded[:h, :w] = bits
    return padded.reshape(oh, scale, ow, scale).any(axis=(1, 3))


@dataclass(frozen=True)
class FeaturePyramid:
    """Average-pooled gradient-magnitude maps keyed by pooling scale."""

    levels: dict

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", dict(self.levels))


def feature_pyramid(image: DepthImage, scales=(4, 8)) -> FeaturePyramid:
    grad = gradient_magnitude(image.data)
    return FeaturePyramid({int(s): _pool_mean(grad, int(s)) for s in scales})


def loss_content(
    pred: DepthImage,
    truth: DepthImage,
    mask: PixelMask,
    config: LossConfig = LossConfig(),
    occluded: DepthImage | None = None,
) -> float:
    """Weighted L1 difference of coarse structural descriptors, summed
    over coarse cells that contain at least one mask pixel.

    With ``config.feature_source == "occluded"`` the descriptor of the
    occluded input (which must then be supplied) replaces the
    prediction's.
    """
    _check_same_shape(pred.data, truth.data, mask.bits)
    if config.content_weight == 0.0:
        return 0.0
    if config.feature_source == "occluded":
        if occluded is None:
            raise ValueError("feature_source 'occluded' requires the occluded image")
        compared = occluded
    else:
        compared = pred
    truth_pyr = feature_pyramid(truth, config.feature_scales)
    other_pyr = feature_pyramid(compared, config.feature_scales)
    total = 0.0
    for scale in config.feature_scales:
        cell_mask = _pool_any(mask.bits, int(scale))
        diff = np.abs(truth_pyr.levels[int(scale)] - other_pyr.levels[int(scale)])
        total += float(diff[cell_mask].sum())
    return config.content_weight * total


def loss_total(
    pred: DepthImage,
    truth: DepthImage,
    mask: PixelMask,
    config: LossConfig = LossConfig(),
    occluded: DepthImage | None = None,
) -> float:
    """Sum of the data/smoothness term and the structural term."""
    return loss_tv(pred, truth, mask, config) + loss_content(
        pred, truth, mask, config, occluded
    )
