import numpy as np
import pytest

from depthwarp.core import CameraIntrinsics, DepthImage, Pose
from depthwarp.scene import Box, Plane, Scene


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(500.0, 320.0, 240.0)


@pytest.fixture
def random_depth():
    rng = np.random.default_rng(11)
    return DepthImage(rng.uniform(0.5, 6.0, (24, 32)).astype(np.float32))


def make_wall_scene(wall_z: float = 6.0) -> Scene:
    return Scene((Plane(Pose(np.eye(3), np.array([0.0, 0.0, wall_z]))),))


def make_box_scene(
    box_center=(0.0, 0.0, 3.0),
    box_half=(0.5, 0.5, 0.5),
    wall_z: float = 6.0,
) -> Scene:
    return Scene(
        (
            Plane(Pose(np.eye(3), np.array([0.0, 0.0, wall_z]))),
            Box(np.asarray(box_half, dtype=float), Pose(np.eye(3), np.asarray(box_center, dtype=float))),
        )
    )
