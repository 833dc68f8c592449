"""Training loops for the displacement and direct-depth models.

The budget is fixed by (epochs, steps_per_epoch, batch_size) regardless
of dataset size; batches are drawn with a portable seeded generator so
two datasets can be compared under an identical schedule.  Validation
uses the export contract (integer displacements, exact copy), with
unresolved pixels penalized by the full truth depth, so the reported
number is the one the completion pipeline would realize.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from depthwarp.complete import apply_displacement
from depthwarp.core import DepthImage, DisplacementField, PixelMask
from depthwarp.datagen import TrainingSample
from depthwarp.rng import SplitMix64, derive_seed

from .data import crop_sample, load_dataset, sample_to_tensors, split_indices
from .losses import LossWeights, loss_total
from .model import FlowModel, build_model


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 10
    steps_per_epoch: int = 40
    learning_rate: float = 1e-3
    lr_decay: float = 0.1
    decay_every_epochs: int = 10
    weight_decay: float = 1e-5
    crop_width: int = 128
    crop_height: int = 96
    flip: bool = True
    base_channels: int = 16
    max_displacement: float = 32.0
    # weight (meters per pixel of distance) of the reach term: the
    # distance-to-known transform of the input, sampled at the displaced
    # location.  Bilinear depth sampling has zero gradient deep inside a
    # hole; this term pulls every displacement toward known territory
    # and vanishes once it arrives.  It uses only the occluded input,
    # never ground truth.
    reach_weight: float = 0.02
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self) -> None:
        if min(self.epochs, self.batch_size, self.steps_per_epoch) < 0:
            raise ValueError("budget fields must be non-negative")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("optimizer fields must be positive")


@dataclass
class TrainResult:
    kind: str
    model: torch.nn.Module
    history: list
    val_initial: float
    val_final: float
    config: TrainConfig


def _distance_to_known(occluded: torch.Tensor) -> torch.Tensor:
    """Per-pixel Euclidean distance (in pixels) to the nearest known
    pixel of each (B, 1, H, W) depth grid; zero on known pixels."""
    from scipy import ndimage

    stacked = [
        ndimage.distance_transform_edt((layer[0] <= 0).numpy())
        for layer in occluded
    ]
    return torch.from_numpy(np.stack(stacked)[:, None]).to(occluded.dtype)


def _pad_to_multiple(tensor: torch.Tensor, multiple: int = 8) -> tuple[torch.Tensor, int, int]:
    h, w = tensor.shape[-2:]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph or pw:
        tensor = torch.nn.functional.pad(tensor, (0, pw, 0, ph), mode="replicate")
    return tensor, h, w


def predict_field(model: FlowModel, occluded: DepthImage) -> DisplacementField:
    """Full-resolution integer displacement field under the export
    contract: round half up, then clamp so every reference stays
    in-frame."""
    model.eval()
    with torch.no_grad():
        tensor = torch.from_numpy(np.array(occluded.data)).unsqueeze(0).unsqueeze(0)
        padded, h, w = _pad_to_multiple(tensor)
        flow = model(padded)[0, :, :h, :w].numpy()
    dx = np.floor(flow[0] + 0.5).astype(np.int64)
    dy = np.floor(flow[1] + 0.5).astype(np.int64)
    xs = np.arange(w)[None, :]
    ys = np.arange(h)[:, None]
    dx = np.clip(xs + dx, 0, w - 1) - xs
    dy = np.clip(ys + dy, 0, h - 1) - ys
    return DisplacementField(dx.astype(np.int32), dy.astype(np.int32))


def _completed_sample(model: torch.nn.Module, sample: TrainingSample) -> DepthImage:
    if isinstance(model, FlowModel):
        field = predict_field(model, sample.occluded)
        filled, _ = apply_displacement(sample.occluded, sample.mask, field)
        return filled
    model.eval()
    with torch.no_grad():
        tensor = torch.from_numpy(np.array(sample.occluded.data)).unsqueeze(0).unsqueeze(0)
        padded, h, w = _pad_to_multiple(tensor)
        pred = model(padded)[0, 0, :h, :w].numpy()
    out = np.array(sample.occluded.data)
    fill = sample.mask.bits & ~sample.occluded.known()
    out[fill] = np.maximum(pred[fill], 0.0)
    return DepthImage(out)


def masked_l1_with_missing_penalty(completed: DepthImage, truth: DepthImage, mask: PixelMask) -> float:
    """Mean |completed - truth| over mask pixels with known truth;
    pixels the completion left unknown contribute their full truth
    depth (unlike the evaluation metric, nothing is excluded)."""
    evaluable = mask.bits & truth.known()
    if not evaluable.any():
        return 0.0
    diff = np.abs(
        completed.data.astype(np.float64) - truth.data.astype(np.float64)
    )
    return float(diff[evaluable].mean())


def validate(model: torch.nn.Module, samples: list[TrainingSample]) -> float:
    scores = [
        masked_l1_with_missing_penalty(_completed_sample(model, s), s.complete, s.mask)
        for s in samples
    ]
    return float(np.mean(scores)) if scores else 0.0


def _train(kind: str, manifest_path, config: TrainConfig) -> TrainResult:
    _, _, samples = load_dataset(manifest_path)
    train_idx, val_idx = split_indices(len(samples))
    train_samples = [samples[i] for i in train_idx]
    val_samples = [samples[i] for i in val_idx]

    torch.manual_seed(config.seed)
    model = build_model(kind, base=config.base_channels, max_displacement=config.max_displacement)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=max(1, config.decay_every_epochs), gamma=config.lr_decay
    )

    val_initial = validate(model, val_samples)
    history = [{"epoch": 0, "train_loss": None, "val_l1": val_initial}]
    gen = SplitMix64(derive_seed(config.seed, 0xD47A))

    for epoch in range(1, config.epochs + 1):
        model.train()
        epoch_losses = []
        for _ in range(config.steps_per_epoch):
            batch = []
            for _ in range(config.batch_size):
                sample = train_samples[gen.randint(0, len(train_samples) - 1)]
                flip = config.flip and gen.randint(0, 1) == 1
                crop_seed = gen.next_u64()
                cropped = crop_sample(
                    sample, (config.crop_width, config.crop_height), flip, crop_seed
                )
                if cropped.mask.count() == 0:
                    continue
                batch.append(sample_to_tensors(cropped))
            if not batch:
                continue
            occluded = torch.stack([b[0] for b in batch])
            truth = torch.stack([b[1] for b in batch])
            mask = torch.stack([b[2] for b in batch])

            optimizer.zero_grad()
            prediction = model(occluded)
            recon = model.reconstruct(occluded, prediction)
            loss = loss_total(recon, truth, mask, config.weights)
            if isinstance(model, FlowModel) and config.reach_weight > 0:
                distance = _distance_to_known(occluded)
                reach = (model.sample_at(distance, prediction) * mask).sum()
                loss = loss + config.reach_weight * reach
            # normalize by masked pixel count to keep lr scale-free
            denom = mask.sum().clamp(min=1).to(loss.dtype)
            (loss / denom).backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()) / float(denom))
        scheduler.step()
        val_l1 = validate(model, val_samples)
        history.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(epoch_losses)) if epoch_losses else None,
                "val_l1": val_l1,
            }
        )

    return TrainResult(
        kind=kind,
        model=model,
        history=history,
        val_initial=val_initial,
        val_final=history[-1]["val_l1"],
        config=config,
    )


def train_flow(manifest_path, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Train the displacement predictor."""
    return _train("flow", manifest_path, config)


def train_depthnet(manifest_path, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Train the direct depth regressor (ablation baseline)."""
    return _train("depth", manifest_path, config)


def save_checkpoint(result: TrainResult, path) -> None:
    payload = {
        "kind": result.kind,
        "state_dict": result.model.state_dict(),
        "base_channels": result.config.base_channels,
        "max_displacement": result.config.max_displacement,
        "history": result.history,
        "config": asdict(result.config),
    }
    torch.save(payload, Path(path))


def load_checkpoint(path) -> torch.nn.Module:
    payload = torch.load(Path(path), weights_only=False)
    model = build_model(
        payload["kind"],
        base=payload["base_channels"],
        max_displacement=payload["max_displacement"],
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
