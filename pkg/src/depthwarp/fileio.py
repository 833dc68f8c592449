"""Bit-exact file formats and the dataset manifest schema.

These formats are the interchange boundary with other tools (including
the trainer package), so they are normative: little-endian everywhere,
each binary format opens with a 4-byte magic that versions it, and every
writer is deterministic (same value, same bytes).  Readers reject
malformed input instead of repairing it.

Formats
-------
depth raw    "DPM1" | u32 width | u32 height | f32[width*height] meters,
             row-major, 0.0 = unknown.
depth png16  16-bit grayscale PNG, stored = round(depth * 1000 / scale),
             0 = unknown (scale is millimeters per stored unit).
mask         8-bit binary PGM (P5), 255 = masked, 0 = clear.
flow         "DFL1" | u32 width | u32 height | i16 (dx, dy) pairs,
             row-major interleaved.
manifest     UTF-8 text, one JSON record per line with exactly the keys
             complete, occluded, mask, pose (12 numbers, row-major
             rotation then translation), intrinsics (f, cx, cy),
             strategy, seed.
scene        UTF-8 text, first line "SCN1", then one primitive per line:
             "plane <12 pose numbers>" or "box <hx hy hz> <12 pose numbers>".
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import CameraIntrinsics, DepthImage, DisplacementField, PixelMask, Pose

DEPTH_MAGIC = b"DPM1"
FLOW_MAGIC = b"DFL1"
SCENE_MAGIC = "SCN1"

MANIFEST_FIELDS = ("complete", "occluded", "mask", "pose", "intrinsics", "strategy", "seed")


class FormatError(Exception):
    """Raised when a file does not conform to its declared format."""


# -- depth: raw binary --------------------------------------------------

def write_depth_raw(path, image: DepthImage) -> None:
    payload = np.ascontiguousarray(image.data, dtype="<f4").tobytes()
    header = DEPTH_MAGIC + struct.pack("<II", image.width, image.height)
    Path(path).write_bytes(header + payload)


def read_depth_raw(path) -> DepthImage:
    blob = Path(path).read_bytes()
    if blob[:4] != DEPTH_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated header")
    width, height = struct.unpack("<II", blob[4:12])
    if width < 1 or height < 1:
        raise FormatError(f"{path}: invalid dimensions {width}x{height}")
    expected = 12 + 4 * width * height
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=12).reshape(height, width)
    if not np.isfinite(data).all() or (data < 0).any():
        raise FormatError(f"{path}: depth values must be finite and non-negative")
    return DepthImage(data)


# -- depth: 16-bit PNG ---------------------------------------------------

def write_depth_png16(path, image: DepthImage, scale: float = 1.0) -> None:
    """Quantized interchange export; `scale` is millimeters per stored
    unit, so the round-trip error is at most 0.5 * scale / 1000 m."""
    if not (np.isfinite(scale) and scale > 0):
        raise ValueError(f"scale must be positive, got {scale}")
    values = np.floor(image.data.astype(np.float64) * 1000.0 / scale + 0.5)
    if (values > 65535).any():
        raise FormatError(f"{path}: depth exceeds 16-bit range at scale {scale}")
    Image.fromarray(values.astype(np.uint16)).save(Path(path), format="PNG")


def read_depth_png16(path, scale: float = 1.0) -> DepthImage:
    if not (np.isfinite(scale) and scale > 0):
        raise ValueError(f"scale must be positive, got {scale}")
    try:
        img = Image.open(Path(path))
        img.load()
    except Exception as exc:
        raise FormatError(f"{path}: not a readable PNG ({exc})") from exc
    if img.format != "PNG" or img.mode not in ("I;16", "I;16B", "I"):
        raise FormatError(f"{path}: expected a 16-bit grayscale PNG, got {img.format}/{img.mode}")
    values = np.asarray(img, dtype=np.int64)
    if values.ndim != 2 or (values < 0).any() or (values > 65535).any():
        raise FormatError(f"{path}: stored values exceed 16-bit range")
    return DepthImage(values.astype(np.float64) * scale / 1000.0)


# -- mask: binary PGM ----------------------------------------------------

def write_mask(path, mask: PixelMask) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    payload = np.where(mask.bits, 255, 0).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


def read_mask(path) -> PixelMask:
    blob = Path(path).read_bytes()
    if not blob.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM")
    # header: magic, width, height, maxval, one whitespace, then payload
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            raise FormatError(f"{path}: comments are not allowed")
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header")
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed header") from exc
    if maxval != 255 or width < 1 or height < 1:
        raise FormatError(f"{path}: unsupported PGM header")
    payload = blob[pos:]
    if len(payload) != width * height:
        raise FormatError(f"{path}: expected {width * height} pixels, found {len(payload)}")
    values = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    if not np.isin(values, (0, 255)).all():
        raise FormatError(f"{path}: mask values must be 0 or 255")
    return PixelMask(values == 255)


# -- displacement field --------------------------------------------------

def write_flow(path, field: DisplacementField) -> None:
    if (np.abs(field.dx) > 32767).any() or (np.abs(field.dy) > 32767).any():
        raise FormatError(f"{path}: displacement exceeds 16-bit range")
    interleaved = np.stack([field.dx, field.dy], axis=2).astype("<i2")
    header = FLOW_MAGIC + struct.pack("<II", field.width, field.height)
    Path(path).write_bytes(header + np.ascontiguousarray(interleaved).tobytes())


def read_flow(path) -> DisplacementField:
    blob = Path(path).read_bytes()
    if blob[:4] != FLOW_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated header")
    width, height = struct.unpack("<II", blob[4:12])
    if width < 1 or height < 1:
        raise FormatError(f"{path}: invalid dimensions {width}x{height}")
    expected = 12 + 4 * width * height
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    pairs = np.frombuffer(blob, dtype="<i2", offset=12).reshape(height, width, 2)
    return DisplacementField(pairs[:, :, 0], pairs[:, :, 1])


# -- dataset manifest ----------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    """One (complete, occluded, mask) triple with its generation data.

    Paths are stored relative to the manifest's directory.
    """

    complete: str
    occluded: str
    mask: str
    pose: Pose
    intrinsics: CameraIntrinsics
    strategy: str
    seed: int


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)


def _entry_record(entry: ManifestEntry) -> dict:
    pose_numbers = [float(v) for v in entry.pose.rotation.ravel()]
    pose_numbers += [float(v) for v in entry.pose.translation]
    return {
        "complete": entry.complete,
        "occluded": entry.occluded,
        "mask": entry.mask,
        "pose": pose_numbers,
        "intrinsics": [entry.intrinsics.f, entry.intrinsics.cx, entry.intrinsics.cy],
        "strategy": entry.strategy,
        "seed": entry.seed,
    }


def write_manifest(path, manifest: DatasetManifest) -> None:
    lines = [
        json.dumps(_entry_record(e), separators=(",", ":")) for e in manifest.entries
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_manifest(path) -> DatasetManifest:
    entries = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            raise FormatError(f"{path}:{lineno}: blank line")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: invalid record ({exc})") from exc
        if not isinstance(record, dict):
            raise FormatError(f"{path}:{lineno}: record must be an object")
        unknown = set(record) - set(MANIFEST_FIELDS)
        if unknown:
            raise FormatError(f"{path}:{lineno}: unknown field(s) {sorted(unknown)}")
        missing = set(MANIFEST_FIELDS) - set(record)
        if missing:
            raise FormatError(f"{path}:{lineno}: missing field(s) {sorted(missing)}")
        pose_numbers = record["pose"]
        intr = record["intrinsics"]
        if not (isinstance(pose_numbers, list) and len(pose_numbers) == 12):
            raise FormatError(f"{path}:{lineno}: pose must be 12 numbers")
        if not (isinstance(intr, list) and len(intr) == 3):
            raise FormatError(f"{path}:{lineno}: intrinsics must be 3 numbers")
        try:
            pose = Pose(
                np.asarray(pose_numbers[:9], dtype=np.float64).reshape(3, 3),
                np.asarray(pose_numbers[9:], dtype=np.float64),
            )
            intrinsics = CameraIntrinsics(*(float(v) for v in intr))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        entries.append(
            ManifestEntry(
                complete=str(record["complete"]),
                occluded=str(record["occluded"]),
                mask=str(record["mask"]),
                pose=pose,
                intrinsics=intrinsics,
                strategy=str(record["strategy"]),
                seed=int(record["seed"]),
            )
        )
    return DatasetManifest(tuple(entries))


def validate_manifest(manifest: DatasetManifest, base_dir) -> None:
    """Check that every referenced file exists, parses, and that the
    dimensions within each entry agree."""
    base = Path(base_dir)
    for i, entry in enumerate(manifest.entries):
        complete = read_depth_raw(base / entry.complete)
        occluded = read_depth_raw(base / entry.occluded)
        mask = read_mask(base / entry.mask)
        shapes = {complete.data.shape, occluded.data.shape, mask.bits.shape}
        if len(shapes) != 1:
            raise FormatError(f"entry {i}: mismatched dimensions {shapes}")


# -- scene description ---------------------------------------------------

def _pose_tokens(pose: Pose) -> list[str]:
    numbers = list(pose.rotation.ravel()) + list(pose.translation)
    return [repr(float(v)) for v in numbers]


def _pose_from_tokens(tokens, where: str) -> Pose:
    if len(tokens) != 12:
        raise FormatError(f"{where}: expected 12 pose numbers, got {len(tokens)}")
    try:
        numbers = [float(t) for t in tokens]
        return Pose(
            np.asarray(numbers[:9]).reshape(3, 3), np.asarray(numbers[9:])
        )
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from exc


def write_scene(path, scene) -> None:
    from .scene import Box, Plane  # local import to avoid a cycle

    lines = [SCENE_MAGIC]
    for prim in scene.primitives:
        if isinstance(prim, Plane):
            lines.append(" ".join(["plane"] + _pose_tokens(prim.placement)))
        elif isinstance(prim, Box):
            halves = [repr(float(v)) for v in prim.half_extents]
            lines.append(" ".join(["box"] + halves + _pose_tokens(prim.placement)))
        else:
            raise FormatError(f"unsupported primitive {type(prim).__name__}")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_scene(path):
    from .scene import Box, Plane, Scene

    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != SCENE_MAGIC:
        raise FormatError(f"{path}: missing {SCENE_MAGIC} header")
    prims = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            raise FormatError(f"{path}:{lineno}: blank line")
        kind, rest = tokens[0], tokens[1:]
        where = f"{path}:{lineno}"
        if kind == "plane":
            prims.append(Plane(_pose_from_tokens(rest, where)))
        elif kind == "box":
            if len(rest) != 15:
                raise FormatError(f"{where}: box needs 3 half extents + 12 pose numbers")
            try:
                halves = np.asarray([float(t) for t in rest[:3]])
            except ValueError as exc:
                raise FormatError(f"{where}: {exc}") from exc
            prims.append(Box(halves, _pose_from_tokens(rest[3:], where)))
        else:
            raise FormatError(f"{where}: unknown primitive {kind!r}")
    try:
        return Scene(tuple(prims))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -- metrics report -------------------------------------------------------

def _json_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def format_metrics_text(values: dict) -> str:
    """Flat `key value` lines, one metric per line."""
    out = []
    for key, value in values.items():
        if isinstance(value, float) and math.isinf(value):
            out.append(f"{key} inf")
        elif isinstance(value, float):
            out.append(f"{key} {value:.6f}")
        else:
            out.append(f"{key} {value}")
    return "".join(line + "\n" for line in out)


def format_metrics_json(values: dict) -> str:
    """Flat JSON object; infinities are encoded as the string "inf"."""
    return json.dumps({k: _json_safe(v) for k, v in values.items()}, sort_keys=True)
