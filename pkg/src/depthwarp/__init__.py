"""Depth-image warping, occlusion synthesis, completion and fusion."""

from .core import (
    CameraIntrinsics,
    DepthImage,
    DisplacementField,
    PixelMask,
    Pose,
    intrinsics_scale,
    pose_compose,
    pose_inverse,
)
from .warp import CONSISTENCY_TOL, WarpConfig, dual_warp, project_pixel, warp_depth

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "DepthImage",
    "DisplacementField",
    "PixelMask",
    "Pose",
    "intrinsics_scale",
    "pose_compose",
    "pose_inverse",
    "CONSISTENCY_TOL",
    "WarpConfig",
    "dual_warp",
    "project_pixel",
    "warp_depth",
    "__version__",
]
