"""Core geometry types: depth grids, pinhole intrinsics, rigid poses.

Conventions used throughout the toolkit and by the on-disk formats:

* The camera frame is right-handed with x right, y down and z forward
  (the camera looks along +z), so the vertical axis is y.
* Pixel (0, 0) is the *center* of the top-left pixel; pixel x grows to
  the right and pixel y downward.
* Depth is the camera-frame z coordinate in meters, stored as float32.
  The value 0.0 encodes "unknown"; every operation treats depth <= 0 as
  unknown.
* A :class:`Pose` (R, T) maps source-frame points into the target frame,
  ``p_target = R @ p_source + T``.

All types are immutable after construction (array payloads are marked
read-only), so they are safe to share across worker processes/threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHONORMAL_TOL = 1e-9


def _readonly(arr: np.ndarray) -> np.ndarray:
    """Own a contiguous copy (never the caller's buffer) and freeze it."""
    arr = np.array(arr, order="C")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DepthImage:
    """Row-major H x W grid of metric depths; 0.0 encodes unknown.

    Values must be finite and non-negative and are stored as float32.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"depth data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("depth image must be at least 1x1")
        if not np.isfinite(arr).all():
            raise ValueError("depth values must be finite")
        if (arr < 0).any():
            raise ValueError("depth values must be non-negative")
        object.__setattr__(self, "data", _readonly(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def known(self) -> np.ndarray:
        """Boolean grid, True where the pixel has a valid (> 0) depth."""
        return self.data > 0.0

    def known_count(self) -> int:
        return int(np.count_nonzero(self.data > 0.0))


@dataclass(frozen=True)
class PixelMask:
    """Boolean grid marking a pixel subset (e.g. occluded pixels)."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("mask must be at least 1x1")
        object.__setattr__(self, "bits", _readonly(arr))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: focal length and principal point, in pixels."""

    f: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.f) and self.f > 0):
            raise ValueError(f"focal length must be positive, got {self.f}")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValueError("principal point must be finite")

    def matrix(self) -> np.ndarray:
        """3x3 projection matrix [[f, 0, cx], [0, f, cy], [0, 0, 1]]."""
        return np.array(
            [[self.f, 0.0, self.cx], [0.0, self.f, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class Pose:
    """Rigid transform: ``p_out = rotation @ p_in + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if trans.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got {trans.shape}")
        if not (np.isfinite(rot).all() and np.isfinite(trans).all()):
            raise ValueError("pose entries must be finite")
        if np.abs(rot.T @ rot - np.eye(3)).max() > ORTHONORMAL_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", _readonly(rot))
        object.__setattr__(self, "translation", _readonly(trans))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_yaw(cls, yaw_degrees: float, translation=(0.0, 0.0, 0.0)) -> "Pose":
        """Pure rotation about the vertical (y) axis plus a translation.

        Positive yaw follows the right-hand rule about +y; with y pointing
        down this turns the view toward the camera's left.
        """
        a = np.deg2rad(yaw_degrees)
        c, s = np.cos(a), np.sin(a)
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return cls(rot, np.asarray(translation, dtype=np.float64))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array of points (or a single 3-vector)."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


@dataclass(frozen=True)
class DisplacementField:
    """Per-pixel integer source offsets: pixel (x, y) copies depth from
    (x + dx[y, x], y + dy[y, x])."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self) -> None:
        dx = np.asarray(self.dx, dtype=np.int32)
        dy = np.asarray(self.dy, dtype=np.int32)
        if dx.ndim != 2 or dx.shape != dy.shape:
            raise ValueError("dx and dy must be 2-D arrays of identical shape")
        if dx.shape[0] < 1 or dx.shape[1] < 1:
            raise ValueError("displacement field must be at least 1x1")
        object.__setattr__(self, "dx", _readonly(dx))
        object.__setattr__(self, "dy", _readonly(dy))

    @property
    def width(self) -> int:
        return self.dx.shape[1]

    @property
    def height(self) -> int:
        return self.dx.shape[0]


def intrinsics_scale(intrinsics: CameraIntrinsics, factor: float) -> CameraIntrinsics:
    """Intrinsics after resampling the image by `factor` (> 0)."""
    if not (np.isfinite(factor) and factor > 0):
        raise ValueError(f"scale factor must be positive, got {factor}")
    return CameraIntrinsics(
        intrinsics.f * factor, intrinsics.cx * factor, intrinsics.cy * factor
    )


def pose_compose(a: Pose, b: Pose) -> Pose:
    """Pose applying `b` first, then `a`: R = Ra Rb, T = Ra Tb + Ta."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def pose_inverse(p: Pose) -> Pose:
    """Inverse transform (R^T, -R^T T)."""
    rot = p.rotation.T
    return Pose(rot, -(rot @ p.translation))
