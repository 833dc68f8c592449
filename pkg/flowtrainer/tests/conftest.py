from pathlib import Path

import pytest

from depthwarp.core import CameraIntrinsics, Pose
from depthwarp.datagen import (
    BlockRemovalConfig,
    PoseSamplerConfig,
    generate_strategy1,
    generate_strategy2,
)
from depthwarp.rng import derive_seed
from depthwarp.scene import random_scene, render_depth
from depthwarp.warp import WarpConfig

WIDTH, HEIGHT, FOCAL = 160, 120, 130.0  # ~63 degree FOV, indoor-camera-like
INTR = CameraIntrinsics(FOCAL, (WIDTH - 1) / 2.0, (HEIGHT - 1) / 2.0)


def oracle_images(base_seed: int, count: int):
    return [
        render_depth(random_scene(derive_seed(base_seed, i)), INTR, Pose.identity(), WIDTH, HEIGHT)
        for i in range(count)
    ]


@pytest.fixture(scope="session")
def dataset_dual(tmp_path_factory) -> Path:
    """Round-trip-warp training set: 16 scenes x 6 poses."""
    out = tmp_path_factory.mktemp("dual")
    generate_strategy1(
        oracle_images(101, 16), INTR, PoseSamplerConfig(0.5, 10.0, seed=11),
        WarpConfig(supersample=2), pairs_per_image=6, out_dir=out,
    )
    return out / "manifest.jsonl"


@pytest.fixture(scope="session")
def dataset_blocks(tmp_path_factory) -> Path:
    """Block-removal training set over the same source images."""
    out = tmp_path_factory.mktemp("blocks")
    generate_strategy2(
        oracle_images(101, 16), BlockRemovalConfig(seed=11), out_dir=out, intrinsics=INTR
    )
    return out / "manifest.jsonl"


@pytest.fixture(scope="session")
def dataset_validation(tmp_path_factory) -> Path:
    """Held-out dual-warp pairs from unseen scenes."""
    out = tmp_path_factory.mktemp("val")
    generate_strategy1(
        oracle_images(777, 8), INTR, PoseSamplerConfig(0.5, 10.0, seed=23),
        WarpConfig(supersample=2), pairs_per_image=2, out_dir=out,
    )
    return out / "manifest.jsonl"
