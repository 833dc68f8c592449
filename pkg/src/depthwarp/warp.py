"""Forward depth warping with z-buffered point splatting.

A depth pixel (x, y, s) backprojects to the camera-frame point
``s * K^-1 @ (x, y, 1)``, moves through the rigid pose into the target
frame, and reprojects; the target-frame z coordinate is the new depth.
Warping a whole image scatters every known pixel into the target grid
("splatting"), keeping the nearest depth wherever several points land on
the same pixel.

Aliasing holes are reduced by warping at an upscaled resolution
(nearest-neighbor replication, intrinsics scaled accordingly) and
min-depth pooling back to the base resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CameraIntrinsics,
    DepthImage,
    PixelMask,
    Pose,
    intrinsics_scale,
    pose_inverse,
)

# Reprojected depth may move by quantization when points are splatted to
# pixel centers; round-trip pixels further off than this are treated as
# unreliable and dropped back to unknown.
CONSISTENCY_TOL = 1e-3


@dataclass(frozen=True)
class WarpConfig:
    """Warp parameters.

    supersample: resolution multiple used while splatting (1 = off).
    zbuffer_tie: collision rule; only "keep-nearest" is defined (exact
        depth ties keep the first writer in row-major source order, which
        is indistinguishable in the output since tied depths are equal).
    out_of_frame: only "drop" is defined; points that round outside the
        target frame or end up behind the camera are discarded.
    """

    supersample: int = 2
    zbuffer_tie: str = "keep-nearest"
    out_of_frame: str = "drop"

    def __post_init__(self) -> None:
        if int(self.supersample) != self.supersample or self.supersample < 1:
            raise ValueError(f"supersample must be a positive integer, got {self.supersample}")
        if self.zbuffer_tie != "keep-nearest":
            raise ValueError(f"unsupported z-buffer tie rule: {self.zbuffer_tie}")
        if self.out_of_frame != "drop":
            raise ValueError(f"unsupported out-of-frame rule: {self.out_of_frame}")


def _transform_points(
    xs: np.ndarray,
    ys: np.ndarray,
    depths: np.ndarray,
    intrinsics: CameraIntrinsics,
    pose: Pose,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map pixel samples through the pose; returns continuous target
    coordinates and target depth. Coordinates are NaN where the point
    lands behind the camera (depth <= 0)."""
    f, cx, cy = intrinsics.f, intrinsics.cx, intrinsics.cy
    px = depths * (xs - cx) / f
    py = depths * (ys - cy) / f
    rot, trans = pose.rotation, pose.translation
    qx = rot[0, 0] * px + rot[0, 1] * py + rot[0, 2] * depths + trans[0]
    qy = rot[1, 0] * px + rot[1, 1] * py + rot[1, 2] * depths + trans[1]
    qz = rot[2, 0] * px + rot[2, 1] * py + rot[2, 2] * depths + trans[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        xp = np.where(qz > 0, f * qx / qz + cx, np.nan)
        yp = np.where(qz > 0, f * qy / qz + cy, np.nan)
    return xp, yp, qz


def project_pixel(
    x: float,
    y: float,
    depth: float,
    intrinsics: CameraIntrinsics,
    pose: Pose,
) -> tuple[float, float, float]:
    """Project one pixel sample into the target view.

    Returns continuous target coordinates (x', y') and the target-frame
    depth s'. If s' <= 0 the point is behind the target camera and the
    coordinates are NaN.
    """
    if not (np.isfinite(depth) and depth > 0):
        raise ValueError(f"depth must be positive, got {depth}")
    xp, yp, zp = _transform_points(
        np.asarray([float(x)]), np.asarray([float(y)]), np.asarray([float(depth)]),
        intrinsics, pose,
    )
    return float(xp[0]), float(yp[0]), float(zp[0])


def _upsample(data: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return data
    return np.repeat(np.repeat(data, n, axis=0), n, axis=1)


def _min_pool(grid: np.ndarray, n: int) -> np.ndarray:
    """Min-depth pooling over n x n blocks, ignoring unknowns (0)."""
    if n == 1:
        return grid
    h, w = grid.shape
    blocks = grid.reshape(h // n, n, w // n, n)
    filled = np.where(blocks > 0, blocks, np.inf)
    pooled = filled.min(axis=(1, 3))
    return np.where(np.isfinite(pooled), pooled, 0.0)


def _splat_grid(data: np.ndarray, intrinsics: CameraIntrinsics, pose: Pose) -> np.ndarray:
    """Scatter every known pixel of a grid into an equally sized target
    grid at `pose`: project, round to the nearest pixel, keep the
    nearest depth per pixel, drop out-of-frame and behind-camera points.

    Runs in float32 (the storage precision): coordinate resolution is
    ~1e-4 px and depth resolution ~1e-6 m at indoor scales, both far
    inside the consistency tolerance; identity poses stay bit-exact.
    """
    height, width = data.shape
    data = np.asarray(data, dtype=np.float32)
    out = np.full(height * width, np.inf, dtype=np.float32)
    ys, xs = np.nonzero(data > 0)
    if xs.size:
        depths = data[ys, xs]
        f = np.float32(intrinsics.f)
        cx, cy = np.float32(intrinsics.cx), np.float32(intrinsics.cy)
        px = depths * (xs.astype(np.float32) - cx) / f
        py = depths * (ys.astype(np.float32) - cy) / f
        rot = pose.rotation.astype(np.float32)
        trans = pose.translation.astype(np.float32)
        qz = rot[2, 0] * px + rot[2, 1] * py + rot[2, 2] * depths + trans[2]
        valid = qz > 0
        px, py, depths, qz = px[valid], py[valid], depths[valid], qz[valid]
        xs, ys = xs[valid], ys[valid]
        qx = rot[0, 0] * px + rot[0, 1] * py + rot[0, 2] * depths + trans[0]
        qy = rot[1, 0] * px + rot[1, 1] * py + rot[1, 2] * depths + trans[1]
        # round-half-up to the nearest pixel center
        ix = np.floor(f * qx / qz + cx + np.float32(0.5)).astype(np.int64)
        iy = np.floor(f * qy / qz + cy + np.float32(0.5)).astype(np.int64)
        in_frame = (ix >= 0) & (ix < width) & (iy >= 0) & (iy < height)
        np.minimum.at(out, iy[in_frame] * width + ix[in_frame], qz[in_frame])
    return np.where(np.isfinite(out), out, np.float32(0.0)).reshape(height, width)


def warp_depth(
    src: DepthImage,
    intrinsics: CameraIntrinsics,
    pose: Pose,
    config: WarpConfig = WarpConfig(),
) -> DepthImage:
    """Scatter every known pixel of `src` into the view at `pose`.

    Collisions keep the nearest depth; points that round outside the
    frame or fall behind the camera are dropped. With supersampling the
    splat runs at n times the resolution and the result is min-pooled
    back to the source resolution (all-unknown blocks stay unknown).
    """
    n = config.supersample
    data = _upsample(np.asarray(src.data, dtype=np.float32), n)
    intr = intrinsics_scale(intrinsics, n) if n > 1 else intrinsics
    grid = _splat_grid(data, intr, pose)
    return DepthImage(_min_pool(grid, n))


def dual_warp(
    src: DepthImage,
    intrinsics: CameraIntrinsics,
    pose: Pose,
    config: WarpConfig = WarpConfig(),
    consistency_tol: float = CONSISTENCY_TOL,
) -> tuple[DepthImage, PixelMask]:
    """Warp to `pose` and back, producing an occluded copy of `src`.

    The whole round trip runs at the supersampled resolution (upscale
    once, splat out and back, min-pool once at the end); pooling the
    intermediate to base resolution instead would dilate near-surface
    silhouettes and strike out background the second pose actually sees.
    Pixels lost in transit become unknown; the returned mask marks
    exactly the pixels known in `src` but unknown in the round trip.
    A consistency pass re-classifies round-trip pixels whose depth moved
    more than `consistency_tol` from the source (quantization
    casualties) as unknown, so every surviving pixel matches the source
    within the tolerance.  Round-trip depths at pixels unknown in the
    source carry no ground truth and are dropped as well.
    """
    n = config.supersample
    data = _upsample(np.asarray(src.data, dtype=np.float32), n)
    intr = intrinsics_scale(intrinsics, n) if n > 1 else intrinsics
    forth = _splat_grid(data, intr, pose)
    back = _splat_grid(forth, intr, pose_inverse(pose))
    # compare at storage precision so surviving pixels honor the
    # tolerance after the float32 round as well
    round_trip = _min_pool(back, n).astype(np.float32).astype(np.float64)

    src_known = src.known()
    diff = np.abs(round_trip - np.asarray(src.data, dtype=np.float64))
    inconsistent = src_known & (round_trip > 0) & (diff > consistency_tol)
    round_trip[inconsistent] = 0.0
    round_trip[~src_known] = 0.0

    occluded = DepthImage(round_trip)
    mask = PixelMask(src_known & ~occluded.known())
    return occluded, mask
