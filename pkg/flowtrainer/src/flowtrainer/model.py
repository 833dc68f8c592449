"""Small encoder-decoder with skip connections.

Two heads share the same trunk:

* the flow model predicts a 2-channel displacement field (pixels); the
  depth at a masked pixel is then *sampled* from the known input at the
  displaced location (bilinear during training, rounded to integers at
  export);
* the depth model regresses depth directly (ablation baseline).

The trunk downsamples three times, so inputs must have sides divisible
by 8 (the trainer's 128x96 crops are).
"""

from __future__ import annotations

import torch
from torch import nn
import torch.nn.functional as F


def _block(cin: int, cout: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1),
        nn.LeakyReLU(0.1, inplace=True),
    )


class EncoderDecoder(nn.Module):
    def __init__(self, out_channels: int, base: int = 16):
        super().__init__()
        self.enc0 = _block(1, base)
        self.enc1 = _block(base, base * 2, stride=2)
        self.enc2 = _block(base * 2, base * 4, stride=2)
        self.enc3 = _block(base * 4, base * 4, stride=2)
        self.up2 = nn.ConvTranspose2d(base * 4, base * 4, 2, stride=2)
        self.dec2 = _block(base * 8, base * 2)
        self.up1 = nn.ConvTranspose2d(base * 2, base * 2, 2, stride=2)
        self.dec1 = _block(base * 4, base)
        self.up0 = nn.ConvTranspose2d(base, base, 2, stride=2)
        self.dec0 = _block(base * 2, base)
        self.head = nn.Conv2d(base, out_channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        e0 = self.enc0(x)
        e1 = self.enc1(e0)
        e2 = self.enc2(e1)
        e3 = self.enc3(e2)
        d2 = self.dec2(torch.cat([self.up2(e3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        d0 = self.dec0(torch.cat([self.up0(d1), e0], dim=1))
        return self.head(d0)


class FlowModel(nn.Module):
    """Predicts per-pixel displacements (dx, dy) in pixels.

    The head is linear and unbounded (a tanh bound saturates and stalls
    learning on wide occlusions); `max_displacement` only scales the
    head so a unit activation means a useful shift.  Out-of-frame
    references are clamped at export time.
    """

    def __init__(self, max_displacement: float = 32.0, base: int = 16):
        super().__init__()
        self.max_displacement = float(max_displacement)
        self.trunk = EncoderDecoder(out_channels=2, base=base)

    def forward(self, occluded: torch.Tensor) -> torch.Tensor:
        return self.trunk(occluded) * self.max_displacement

    def sample_at(self, image: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
        """Bilinearly sample (B, C, H, W) values at per-pixel displaced
        locations; out-of-frame samples clamp to the border."""
        b, _, h, w = image.shape
        ys, xs = torch.meshgrid(
            torch.arange(h, dtype=image.dtype, device=image.device),
            torch.arange(w, dtype=image.dtype, device=image.device),
            indexing="ij",
        )
        sample_x = xs.unsqueeze(0) + flow[:, 0]
        sample_y = ys.unsqueeze(0) + flow[:, 1]
        # normalize to [-1, 1] with align_corners=True pixel-center grid
        grid = torch.stack(
            [sample_x / (w - 1) * 2 - 1, sample_y / (h - 1) * 2 - 1], dim=-1
        )
        return F.grid_sample(
            image, grid, mode="bilinear", padding_mode="border", align_corners=True
        )

    def reconstruct(self, occluded: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
        """Differentiable completion: sample the occluded depth at the
        displaced locations; known pixels pass through unchanged."""
        sampled = self.sample_at(occluded, flow)
        known = occluded > 0
        return torch.where(known, occluded, sampled)


class DepthModel(nn.Module):
    """Regresses masked depth directly (ablation baseline)."""

    def __init__(self, base: int = 16):
        super().__init__()
        self.trunk = EncoderDecoder(out_channels=1, base=base)

    def forward(self, occluded: torch.Tensor) -> torch.Tensor:
        return F.softplus(self.trunk(occluded))

    def reconstruct(self, occluded: torch.Tensor, prediction: torch.Tensor) -> torch.Tensor:
        known = occluded > 0
        return torch.where(known, occluded, prediction)


def build_model(kind: str, base: int = 16, max_displacement: float = 32.0) -> nn.Module:
    if kind == "flow":
        return FlowModel(max_displacement=max_displacement, base=base)
    if kind == "depth":
        return DepthModel(base=base)
    raise ValueError(f"unknown model kind {kind!r}")
