"""Bulk generation of (complete, occluded, mask) training triples.

Two generation strategies share the output layout and manifest schema:

* round-trip warping — each image is warped to a random nearby pose and
  back, so the pixels lost in transit form a realistic occlusion mask
  whose ground truth is the original image itself;
* random block removal — axis-aligned rectangles are blanked until a
  removed-pixel budget is reached.

Every entry derives its own splitmix64 stream from (global seed, image
index, pair index), so parallel and serial runs emit byte-identical
trees.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import CameraIntrinsics, DepthImage, PixelMask, Pose
from .fileio import (
    DatasetManifest,
    ManifestEntry,
    read_depth_raw,
    read_mask,
    write_depth_raw,
    write_manifest,
    write_mask,
)
from .rng import SplitMix64, derive_seed
from .warp import WarpConfig, dual_warp

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class PoseSamplerConfig:
    """Uniform pose sampling on the horizontal plane: translation in
    camera x/z within +-translation_range meters (vertical translation
    is zero) and yaw about the vertical axis within +-yaw_range degrees."""

    translation_range: float = 1.0
    yaw_range: float = 15.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.translation_range < 0 or self.yaw_range < 0:
            raise ValueError("sampling ranges must be non-negative")


@dataclass(frozen=True)
class BlockRemovalConfig:
    """Random rectangle removal: sides uniform in [block_side_min,
    block_side_max] pixels, blocks may overlap, and unique removed
    pixels never exceed max_removed_fraction of the image."""

    max_removed_fraction: float = 0.20
    block_side_min: int = 1
    block_side_max: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.max_removed_fraction <= 1.0):
            raise ValueError("max_removed_fraction must be in (0, 1]")
        if not (1 <= self.block_side_min <= self.block_side_max):
            raise ValueError("need 1 <= block_side_min <= block_side_max")


def sample_pose(config: PoseSamplerConfig, index: int) -> Pose:
    """Deterministic pose draw; the stream is (seed, index)-specific.

    Draw order: translation x, translation z, yaw degrees.
    """
    gen = SplitMix64(derive_seed(config.seed, index))
    tx = gen.uniform(-config.translation_range, config.translation_range)
    tz = gen.uniform(-config.translation_range, config.translation_range)
    yaw = gen.uniform(-config.yaw_range, config.yaw_range)
    return Pose.from_yaw(yaw, (tx, 0.0, tz))


def _default_intrinsics(image: DepthImage) -> CameraIntrinsics:
    return CameraIntrinsics(500.0, (image.width - 1) / 2.0, (image.height - 1) / 2.0)


def _dual_pairs_for_image(args) -> tuple[int, list]:
    (index, image, intrinsics, pose_cfg, warp_cfg, pairs, out_dir) = args
    out = Path(out_dir)
    complete_name = f"complete_{index:04d}.dpm"
    write_depth_raw(out / complete_name, image)
    entries = []
    for pair in range(pairs):
        entry_seed = derive_seed(pose_cfg.seed, index, pair)
        pose = sample_pose(replace(pose_cfg, seed=entry_seed), 0)
        occluded, mask = dual_warp(image, intrinsics, pose, warp_cfg)
        if occluded.known_count() == 0:
            log.warning(
                "image %d pair %d: round trip left no known pixels, skipping", index, pair
            )
            continue
        occ_name = f"occluded_{index:04d}_{pair:02d}.dpm"
        mask_name = f"mask_{index:04d}_{pair:02d}.pgm"
        write_depth_raw(out / occ_name, occluded)
        write_mask(out / mask_name, mask)
        entries.append(
            ManifestEntry(
                complete=complete_name,
                occluded=occ_name,
                mask=mask_name,
                pose=pose,
                intrinsics=intrinsics,
                strategy="dual",
                seed=entry_seed,
            )
        )
    return index, entries


def generate_strategy1(
    images: list[DepthImage],
    intrinsics: CameraIntrinsics,
    pose_cfg: PoseSamplerConfig = PoseSamplerConfig(),
    warp_cfg: WarpConfig = WarpConfig(),
    pairs_per_image: int = 25,
    out_dir="dataset",
    jobs: int = 1,
) -> DatasetManifest:
    """Round-trip-warp every image at `pairs_per_image` sampled poses and
    write (complete, occluded, mask) triples plus the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (i, image, intrinsics, pose_cfg, warp_cfg, pairs_per_image, str(out))
        for i, image in enumerate(images)
    ]
    results = _run_tasks(_dual_pairs_for_image, tasks, jobs)
    entries = [entry for _, group in sorted(results) for entry in group]
    manifest = DatasetManifest(tuple(entries))
    write_manifest(out / MANIFEST_NAME, manifest)
    return manifest


def _remove_blocks(shape: tuple[int, int], config: BlockRemovalConfig, seed: int) -> np.ndarray:
    """Removed-pixel grid for one image; unique removed pixels stay at or
    below the budget (the first block that would exceed it stops the
    process). Draw order per block: side x, side y, corner x, corner y."""
    height, width = shape
    gen = SplitMix64(seed)
    removed = np.zeros(shape, dtype=bool)
    budget = int(np.floor(config.max_removed_fraction * width * height))
    total = 0
    for _ in range(100_000):
        if total >= budget:
            break
        side_x = gen.randint(config.block_side_min, config.block_side_max)
        side_y = gen.randint(config.block_side_min, config.block_side_max)
        x0 = gen.randint(0, width - 1)
        y0 = gen.randint(0, height - 1)
        block = np.zeros(shape, dtype=bool)
        block[y0 : min(y0 + side_y, height), x0 : min(x0 + side_x, width)] = True
        gain = int(np.count_nonzero(block & ~removed))
        if total + gain > budget:
            break
        removed |= block
        total += gain
    return removed


def _blocks_for_image(args) -> tuple[int, list]:
    (index, image, config, intrinsics, out_dir) = args
    out = Path(out_dir)
    entry_seed = derive_seed(config.seed, index)
    removed = _remove_blocks(image.data.shape, config, entry_seed)
    mask_bits = removed & image.known()

    occluded_data = np.array(image.data)
    occluded_data[mask_bits] = 0.0

    complete_name = f"complete_{index:04d}.dpm"
    occ_name = f"occluded_{index:04d}_00.dpm"
    mask_name = f"mask_{index:04d}_00.pgm"
    write_depth_raw(out / complete_name, image)
    write_depth_raw(out / occ_name, DepthImage(occluded_data))
    write_mask(out / mask_name, PixelMask(mask_bits))
    entry = ManifestEntry(
        complete=complete_name,
        occluded=occ_name,
        mask=mask_name,
        pose=Pose.identity(),
        intrinsics=intrinsics if intrinsics is not None else _default_intrinsics(image),
        strategy="blocks",
        seed=entry_seed,
    )
    return index, [entry]


def generate_strategy2(
    images: list[DepthImage],
    config: BlockRemovalConfig = BlockRemovalConfig(),
    out_dir="dataset",
    intrinsics: CameraIntrinsics | None = None,
    jobs: int = 1,
) -> DatasetManifest:
    """Blank random rectangles out of every image and write the triples
    plus the manifest. The mask records removed pixels that were known."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(i, image, config, intrinsics, str(out)) for i, image in enumerate(images)]
    results = _run_tasks(_blocks_for_image, tasks, jobs)
    entries = [entry for _, group in sorted(results) for entry in group]
    manifest = DatasetManifest(tuple(entries))
    write_manifest(out / MANIFEST_NAME, manifest)
    return manifest


def _run_tasks(fn, tasks, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


@dataclass(frozen=True)
class TrainingSample:
    """One loaded manifest entry."""

    complete: DepthImage
    occluded: DepthImage
    mask: PixelMask


def load_sample(manifest_dir, entry: ManifestEntry) -> TrainingSample:
    base = Path(manifest_dir)
    return TrainingSample(
        complete=read_depth_raw(base / entry.complete),
        occluded=read_depth_raw(base / entry.occluded),
        mask=read_mask(base / entry.mask),
    )


def augment(
    sample: TrainingSample,
    crop_size: tuple[int, int],
    flip: bool,
    seed: int,
) -> TrainingSample:
    """Identical random crop (drawn from `seed`) and optional left/right
    flip applied to all three grids."""
    crop_w, crop_h = crop_size
    width, height = sample.complete.width, sample.complete.height
    if crop_w > width or crop_h > height or crop_w < 1 or crop_h < 1:
        raise ValueError(f"crop {crop_size} does not fit inside {width}x{height}")
    gen = SplitMix64(seed)
    x0 = gen.randint(0, width - crop_w)
    y0 = gen.randint(0, height - crop_h)

    def cut(arr: np.ndarray) -> np.ndarray:
        window = arr[y0 : y0 + crop_h, x0 : x0 + crop_w]
        return window[:, ::-1] if flip else window

    return TrainingSample(
        complete=DepthImage(cut(sample.complete.data)),
        occluded=DepthImage(cut(sample.occluded.data)),
        mask=PixelMask(cut(sample.mask.bits)),
    )
