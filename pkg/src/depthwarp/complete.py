"""Depth completion of masked regions.

Three interchangeable fillers share one contract: pixels known in the
input are returned bit-exactly unaltered, only unknown mask pixels are
filled.

* :func:`apply_displacement` copies depth from per-pixel source offsets
  (the output of a displacement predictor).  Copy semantics are exact:
  every filled value equals some known input value.  Offsets may point
  at missing data themselves; such pixels stay unknown and are reported.
* :func:`nearest_valid_field` is the deterministic non-learned stand-in
  for a predictor: each mask pixel points at its nearest known pixel.
* :func:`diffuse_inpaint` solves the 4-neighbor Laplace equation on the
  unknown pixels (harmonic fill) by Jacobi iteration.

:func:`fuse_views` merges several completed nearby views back into the
source pose with a per-pixel median.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import ndimage

from .core import (
    CameraIntrinsics,
    DepthImage,
    DisplacementField,
    PixelMask,
    Pose,
    pose_inverse,
)
from .warp import WarpConfig, warp_depth

Completer = Callable[[DepthImage, PixelMask], DepthImage]


class NoValidSourceError(ValueError):
    """Raised when an image holds no known pixel to copy from."""


def _check_dims(image: DepthImage, mask: PixelMask, field: DisplacementField | None = None):
    if mask.bits.shape != image.data.shape:
        raise ValueError(
            f"mask {mask.bits.shape} does not match image {image.data.shape}"
        )
    if field is not None and field.dx.shape != image.data.shape:
        raise ValueError(
            f"field {field.dx.shape} does not match image {image.data.shape}"
        )


def apply_displacement(
    occluded: DepthImage,
    mask: PixelMask,
    field: DisplacementField,
    fill_unresolved: bool = False,
    fill_iterations: int = 1000,
    fill_tolerance: float = 1e-6,
) -> tuple[DepthImage, PixelMask]:
    """Copy known depth into unknown mask pixels along the field.

    Every unknown mask pixel (x, y) receives ``occluded[y + dy, x + dx]``.
    Pixels known in the input are never altered, even when masked.  If a
    referenced source pixel is itself unknown the target stays unknown;
    those pixels are returned in the second element, and optionally
    post-filled by harmonic diffusion (the report always reflects the
    state *before* the post-fill).
    """
    _check_dims(occluded, mask, field)
    targets = mask.bits & ~occluded.known()
    ty, tx = np.nonzero(targets)
    sy = ty + field.dy[ty, tx]
    sx = tx + field.dx[ty, tx]
    h, w = occluded.data.shape
    if ((sy < 0) | (sy >= h) | (sx < 0) | (sx >= w)).any():
        raise ValueError("displacement field points outside the image on mask pixels")

    out = np.array(occluded.data, dtype=np.float32)
    values = occluded.data[sy, sx]
    out[ty, tx] = values

    unresolved = np.zeros_like(targets)
    unresolved[ty[values <= 0], tx[values <= 0]] = True
    report = PixelMask(unresolved)

    if fill_unresolved and unresolved.any():
        filled, _ = diffuse_inpaint(
            DepthImage(out), report, fill_iterations, fill_tolerance
        )
        return filled, report
    return DepthImage(out), report


def _offsets_at_squared_distance(d2: int) -> list[tuple[int, int]]:
    """Integer offsets (dy, dx) with dy^2 + dx^2 == d2, in tie-break
    order: smaller dy first, then smaller dx."""
    out = []
    r = math.isqrt(d2)
    for dy in range(-r, r + 1):
        rem = d2 - dy * dy
        dx = math.isqrt(rem)
        if dx * dx != rem:
            continue
        if dx == 0:
            out.append((dy, 0))
        else:
            out.append((dy, -dx))
            out.append((dy, dx))
    return out


def nearest_valid_field(occluded: DepthImage, mask: PixelMask) -> DisplacementField:
    """Displacement of every mask pixel to its nearest known pixel
    (Euclidean distance; ties prefer smaller dy, then smaller dx).
    Non-mask pixels get (0, 0)."""
    _check_dims(occluded, mask)
    known = occluded.known()
    if not known.any():
        raise NoValidSourceError("image has no known pixel to copy from")

    h, w = known.shape
    dx = np.zeros((h, w), dtype=np.int32)
    dy = np.zeros((h, w), dtype=np.int32)
    ty, tx = np.nonzero(mask.bits)
    if ty.size == 0:
        return DisplacementField(dx, dy)

    _, (ny, nx) = ndimage.distance_transform_edt(~known, return_indices=True)
    d2 = (ny[ty, tx] - ty) ** 2 + (nx[ty, tx] - tx) ** 2

    assigned = np.zeros(ty.size, dtype=bool)
    for d2_value in np.unique(d2):
        group = np.nonzero(d2 == d2_value)[0]
        for oy, ox in _offsets_at_squared_distance(int(d2_value)):
            open_ = group[~assigned[group]]
            if open_.size == 0:
                break
            yy = ty[open_] + oy
            xx = tx[open_] + ox
            ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            ok[ok] = known[yy[ok], xx[ok]]
            hit = open_[ok]
            dy[ty[hit], tx[hit]] = oy
            dx[ty[hit], tx[hit]] = ox
            assigned[hit] = True
    if not assigned.all():
        raise RuntimeError("nearest-known search failed to assign every mask pixel")
    return DisplacementField(dx, dy)


def diffuse_inpaint(
    occluded: DepthImage,
    mask: PixelMask,
    iterations: int,
    tolerance: float,
) -> tuple[DepthImage, PixelMask]:
    """Harmonic fill of unknown mask pixels: Jacobi iteration of the
    4-neighbor Laplace equation with known pixels as Dirichlet boundary.

    Iteration stops after `iterations` rounds or once the largest
    per-pixel update drops below `tolerance`.  Unknown regions with no
    known 4-neighbor anywhere cannot be solved; they are left unknown
    and returned in the second element.  Each region is seeded at the
    mean of its boundary values, so intermediate iterates already obey
    the discrete maximum principle.
    """
    _check_dims(occluded, mask)
    known = occluded.known()
    variables = mask.bits & ~known
    if not variables.any():
        return occluded, PixelMask(np.zeros_like(variables))

    labels, count = ndimage.label(variables)  # 4-connected components
    grid = occluded.data.astype(np.float64)

    # Boundary contact per component: sum/count of known 4-neighbors.
    sums = np.zeros(count + 1)
    counts = np.zeros(count + 1)
    h, w = grid.shape
    shifts = ((-1, 0), (1, 0), (0, -1), (0, 1))
    neighbor_known = {}
    for sy, sx in shifts:
        nk = np.zeros((h, w), dtype=bool)
        nv = np.zeros((h, w))
        ys0, ys1 = max(sy, 0), h + min(sy, 0)
        xs0, xs1 = max(sx, 0), w + min(sx, 0)
        nk[ys0 - sy : ys1 - sy, xs0 - sx : xs1 - sx] = known[ys0:ys1, xs0:xs1]
        nv[ys0 - sy : ys1 - sy, xs0 - sx : xs1 - sx] = grid[ys0:ys1, xs0:xs1]
        neighbor_known[(sy, sx)] = nk
        contact = variables & nk
        np.add.at(sums, labels[contact], nv[contact])
        np.add.at(counts, labels[contact], 1.0)

    reachable_labels = counts > 0
    reachable_labels[0] = False
    active = variables & reachable_labels[labels]
    unreached = variables & ~active

    with np.errstate(invalid="ignore"):
        seed_values = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)

    u = grid.copy()
    u[active] = seed_values[labels[active]]
    u[unreached] = 0.0

    # A neighbor participates in the stencil iff it is known or active.
    denom = np.zeros((h, w))
    neighbor_valid = {}
    for sy, sx in shifts:
        nv = np.zeros((h, w), dtype=bool)
        ys0, ys1 = max(sy, 0), h + min(sy, 0)
        xs0, xs1 = max(sx, 0), w + min(sx, 0)
        nv[ys0 - sy : ys1 - sy, xs0 - sx : xs1 - sx] = (known | active)[ys0:ys1, xs0:xs1]
        neighbor_valid[(sy, sx)] = nv
        denom += nv
    ay, ax = np.nonzero(active)

    for _ in range(max(0, int(iterations))):
        acc = np.zeros((h, w))
        for sy, sx in shifts:
            shifted = np.zeros((h, w))
            ys0, ys1 = max(sy, 0), h + min(sy, 0)
            xs0, xs1 = max(sx, 0), w + min(sx, 0)
            shifted[ys0 - sy : ys1 - sy, xs0 - sx : xs1 - sx] = u[ys0:ys1, xs0:xs1]
            acc += np.where(neighbor_valid[(sy, sx)], shifted, 0.0)
        new_values = acc[ay, ax] / denom[ay, ax]
        delta = np.abs(new_values - u[ay, ax]).max() if ay.size else 0.0
        u[ay, ax] = new_values
        if delta < tolerance:
            break

    out = grid.copy()
    out[ay, ax] = u[ay, ax]
    out[unreached] = 0.0
    return DepthImage(out), PixelMask(unreached)


def complete_nearest(occluded: DepthImage, mask: PixelMask) -> DepthImage:
    """Nearest-known copy completion (field search + exact copy)."""
    field = nearest_valid_field(occluded, mask)
    filled, _ = apply_displacement(occluded, mask, field)
    return filled


def complete_diffuse(
    occluded: DepthImage,
    mask: PixelMask,
    iterations: int = 1000,
    tolerance: float = 1e-6,
) -> DepthImage:
    """Harmonic-fill completion."""
    filled, _ = diffuse_inpaint(occluded, mask, iterations, tolerance)
    return filled


def default_fusion_poses(count: int = 8, seed: int = 0) -> list[Pose]:
    """Nearby poses drawn from the default pose sampler."""
    from .datagen import PoseSamplerConfig, sample_pose

    cfg = PoseSamplerConfig(seed=seed)
    return [sample_pose(cfg, i) for i in range(count)]


def _fuse_one_view(args) -> np.ndarray | None:
    base, intrinsics, pose, completer, warp_config = args
    warped = warp_depth(base, intrinsics, pose, warp_config)
    if not warped.known().any():
        return None  # view left the frame entirely; contributes nothing
    holes = PixelMask(~warped.known())
    completed = completer(warped, holes)
    back = warp_depth(completed, intrinsics, pose_inverse(pose), warp_config)
    return np.asarray(back.data, dtype=np.float64)


def fuse_views(
    base: DepthImage,
    intrinsics: CameraIntrinsics,
    poses: list[Pose],
    completer: Completer,
    warp_config: WarpConfig = WarpConfig(),
    jobs: int = 1,
) -> DepthImage:
    """Warp `base` to each pose, complete the induced holes, warp back,
    and merge all candidates per pixel with the lower median.

    The original base value participates wherever it is known.  Pixels
    with no known candidate stay unknown.  The merge sorts candidate
    values, so the result does not depend on the pose order or on
    `jobs` (per-view work is independent; with jobs > 1 the completer
    must be picklable, e.g. a module-level function).
    """
    if not poses:
        raise ValueError("fuse_views needs at least one pose")
    tasks = [(base, intrinsics, pose, completer, warp_config) for pose in poses]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            views = list(pool.map(_fuse_one_view, tasks))
    else:
        views = [_fuse_one_view(t) for t in tasks]
    layers = [np.asarray(base.data, dtype=np.float64)]
    layers.extend(view for view in views if view is not None)
    return DepthImage(median_merge(layers))


def median_merge(layers) -> np.ndarray:
    """Per-pixel lower median over the known (> 0) values of the stacked
    grids; pixels with no known value anywhere stay unknown.  Sorting
    makes the result independent of the layer order, and the lower
    median (index (k-1)//2) keeps even counts deterministic."""
    stack = np.stack([np.asarray(layer, dtype=np.float64) for layer in layers])
    counts = (stack > 0).sum(axis=0)
    stack = np.where(stack > 0, stack, np.inf)
    stack.sort(axis=0)
    pick = np.clip((counts - 1) // 2, 0, None)
    fused = np.take_along_axis(stack, pick[None, :, :], axis=0)[0]
    return np.where(counts > 0, fused, 0.0)
