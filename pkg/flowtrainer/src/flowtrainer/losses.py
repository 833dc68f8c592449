"""Torch mirror of the toolkit's completion losses.

The definitions replicate `depthwarp.metrics` exactly (same edge rules,
same pooling) so the loss minimized during training is the loss the
evaluation pipeline reports; a parity test pins the two within 1e-4
relative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class LossWeights:
    tv_weight: float = 1e-3
    content_weight: float = 1e-5
    feature_scales: tuple = (4, 8)


def gradient_magnitude(values: torch.Tensor) -> torch.Tensor:
    """|dx| + |dy| by forward differences, backward on the last row/col.
    Accepts (..., H, W)."""
    gx = torch.zeros_like(values)
    gy = torch.zeros_like(values)
    if values.shape[-1] > 1:
        gx[..., :, :-1] = values[..., :, 1:] - values[..., :, :-1]
        gx[..., :, -1] = values[..., :, -1] - values[..., :, -2]
    if values.shape[-2] > 1:
        gy[..., :-1, :] = values[..., 1:, :] - values[..., :-1, :]
        gy[..., -1, :] = values[..., -1, :] - values[..., -2, :]
    return gx.abs() + gy.abs()


def _pool_mean(values: torch.Tensor, scale: int) -> torch.Tensor:
    """Average pooling with ceil-division output; edge cells average over
    their partial block (matches the reference pooling)."""
    h, w = values.shape[-2:]
    oh, ow = math.ceil(h / scale), math.ceil(w / scale)
    pad = (0, ow * scale - w, 0, oh * scale - h)
    padded = F.pad(values, pad)
    counts = F.pad(torch.ones_like(values), pad)
    lead = values.shape[:-2]
    sums = padded.reshape(*lead, oh, scale, ow, scale).sum(dim=(-3, -1))
    norms = counts.reshape(*lead, oh, scale, ow, scale).sum(dim=(-3, -1))
    return sums / norms


def _pool_any(bits: torch.Tensor, scale: int) -> torch.Tensor:
    h, w = bits.shape[-2:]
    oh, ow = math.ceil(h / scale), math.ceil(w / scale)
    pad = (0, ow * scale - w, 0, oh * scale - h)
    padded = F.pad(bits.float(), pad)
    lead = bits.shape[:-2]
    return padded.reshape(*lead, oh, scale, ow, scale).amax(dim=(-3, -1)) > 0.5


def loss_tv(
    pred: torch.Tensor,
    truth: torch.Tensor,
    mask: torch.Tensor,
    weights: LossWeights = LossWeights(),
) -> torch.Tensor:
    """Masked L1 data term plus weighted L1 gradient of the prediction,
    summed over mask pixels. Shapes (..., H, W), mask boolean."""
    data_term = ((truth - pred).abs() * mask).sum()
    grad_term = (gradient_magnitude(pred) * mask).sum()
    return data_term + weights.tv_weight * grad_term


def loss_content(
    pred: torch.Tensor,
    truth: torch.Tensor,
    mask: torch.Tensor,
    weights: LossWeights = LossWeights(),
) -> torch.Tensor:
    """Weighted L1 difference of pooled gradient-magnitude descriptors
    over coarse cells containing at least one mask pixel."""
    total = pred.new_zeros(())
    pred_grad = gradient_magnitude(pred)
    truth_grad = gradient_magnitude(truth)
    for scale in weights.feature_scales:
        cells = _pool_any(mask, int(scale))
        diff = (_pool_mean(truth_grad, int(scale)) - _pool_mean(pred_grad, int(scale))).abs()
        total = total + (diff * cells).sum()
    return weights.content_weight * total


def loss_total(
    pred: torch.Tensor,
    truth: torch.Tensor,
    mask: torch.Tensor,
    weights: LossWeights = LossWeights(),
) -> torch.Tensor:
    return loss_tv(pred, truth, mask, weights) + loss_content(pred, truth, mask, weights)
