"""Manifest-backed sample loading for the trainer.

All file parsing goes through the toolkit's format layer; the trainer
itself never reads or writes any other representation.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from depthwarp.datagen import TrainingSample, augment, load_sample
from depthwarp.fileio import DatasetManifest, read_manifest


def load_dataset(manifest_path) -> tuple[Path, DatasetManifest, list[TrainingSample]]:
    """Read a manifest and load every referenced triple into memory."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    if not manifest.entries:
        raise ValueError(f"{manifest_path}: manifest is empty")
    base = manifest_path.parent
    samples = [load_sample(base, entry) for entry in manifest.entries]
    return base, manifest, samples


def split_indices(count: int, val_every: int = 5) -> tuple[list[int], list[int]]:
    """Deterministic train/validation split: every `val_every`-th entry
    validates, the rest train."""
    val = [i for i in range(count) if i % val_every == val_every - 1]
    train = [i for i in range(count) if i % val_every != val_every - 1]
    if not val:
        val = [count - 1]
        train = list(range(count - 1))
    return train, val


def sample_to_tensors(sample: TrainingSample) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(occluded, complete, mask) as (1, H, W) tensors."""
    occluded = torch.from_numpy(np.array(sample.occluded.data)).unsqueeze(0)
    complete = torch.from_numpy(np.array(sample.complete.data)).unsqueeze(0)
    mask = torch.from_numpy(np.array(sample.mask.bits)).unsqueeze(0)
    return occluded, complete, mask


def crop_sample(sample: TrainingSample, crop: tuple[int, int], flip: bool, seed: int) -> TrainingSample:
    """Seeded crop/flip; falls back to the full frame when the image is
    smaller than the requested crop."""
    width = min(crop[0], sample.complete.width)
    height = min(crop[1], sample.complete.height)
    return augment(sample, (width, height), flip, seed)
