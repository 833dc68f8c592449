"""Command-line front end.

Exit codes: 0 success, 1 invalid arguments, 2 format error,
3 property violation (verify-lemma found a containment breach).
All randomness enters through explicit --seed flags (default 0), never
the wall clock, so pipelines are reproducible.
"""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import complete as completion
from . import datagen, fileio, metrics, scene as scene_mod
from .core import CameraIntrinsics, Pose
from .warp import WarpConfig, warp_depth

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_VIOLATION = 3


def _parse_intrinsics(text: str) -> CameraIntrinsics:
    parts = text.split()
    if len(parts) != 3:
        raise click.BadParameter('expected "f cx cy"')
    return CameraIntrinsics(*(float(p) for p in parts))


def _parse_pose(text: str) -> Pose:
    parts = text.split()
    if len(parts) != 4:
        raise click.BadParameter('expected "tx ty tz yaw_degrees"')
    tx, ty, tz, yaw = (float(p) for p in parts)
    return Pose.from_yaw(yaw, (tx, ty, tz))


@click.group()
def cli() -> None:
    """Depth-image warping, occlusion synthesis, completion and fusion."""


@cli.command()
@click.option("--strategy", type=click.Choice(["dual", "blocks"]), required=True)
@click.option("--in", "in_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--pairs", default=25, show_default=True, help="Pairs per image (dual only).")
@click.option("--seed", default=0, show_default=True)
@click.option("--trans", default=1.0, show_default=True, help="Translation range (m).")
@click.option("--yaw", default=15.0, show_default=True, help="Yaw range (degrees).")
@click.option("--supersample", default=2, show_default=True)
@click.option("--max-fraction", default=0.20, show_default=True, help="Block budget (blocks only).")
@click.option("--intrinsics", default=None, help='"f cx cy"; defaults to f=500 at the image center.')
@click.option("--jobs", default=1, show_default=True)
def generate(strategy, in_dir, out_dir, pairs, seed, trans, yaw, supersample, max_fraction, intrinsics, jobs):
    """Generate (complete, occluded, mask) triples from .dpm depth images."""
    paths = sorted(Path(in_dir).glob("*.dpm"))
    if not paths:
        raise click.UsageError(f"no .dpm files in {in_dir}")
    images = [fileio.read_depth_raw(p) for p in paths]
    intr = _parse_intrinsics(intrinsics) if intrinsics else None
    if strategy == "dual":
        if intr is None:
            first = images[0]
            intr = CameraIntrinsics(500.0, (first.width - 1) / 2.0, (first.height - 1) / 2.0)
        manifest = datagen.generate_strategy1(
            images,
            intr,
            datagen.PoseSamplerConfig(trans, yaw, seed),
            WarpConfig(supersample=supersample),
            pairs_per_image=pairs,
            out_dir=out_dir,
            jobs=jobs,
        )
    else:
        manifest = datagen.generate_strategy2(
            images,
            datagen.BlockRemovalConfig(max_removed_fraction=max_fraction, seed=seed),
            out_dir=out_dir,
            intrinsics=intr,
            jobs=jobs,
        )
    click.echo(f"entries: {len(manifest)}")


@cli.command()
@click.option("--depth", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--pose", required=True, help='"tx ty tz yaw_degrees"')
@click.option("--intrinsics", required=True, help='"f cx cy"')
@click.option("--supersample", default=2, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def warp(depth, pose, intrinsics, supersample, out):
    """Warp a depth image to a nearby pose."""
    image = fileio.read_depth_raw(depth)
    result = warp_depth(
        image, _parse_intrinsics(intrinsics), _parse_pose(pose), WarpConfig(supersample=supersample)
    )
    fileio.write_depth_raw(out, result)
    click.echo(f"known pixels: {result.known_count()}")


@cli.command("complete")
@click.option("--occluded", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--flow", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--method", type=click.Choice(["nearest", "diffuse"]), default=None)
@click.option("--iterations", default=1000, show_default=True)
@click.option("--tolerance", default=1e-6, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def complete_cmd(occluded, mask_path, flow, method, iterations, tolerance, out):
    """Fill masked pixels from a displacement field or a built-in method."""
    if (flow is None) == (method is None):
        raise click.UsageError("provide exactly one of --flow or --method")
    image = fileio.read_depth_raw(occluded)
    mask = fileio.read_mask(mask_path)
    if flow is not None:
        field = fileio.read_flow(flow)
        filled, unresolved = completion.apply_displacement(image, mask, field)
        if unresolved.count():
            click.echo(f"unresolved pixels: {unresolved.count()}", err=True)
    elif method == "nearest":
        filled = completion.complete_nearest(image, mask)
    else:
        filled = completion.complete_diffuse(image, mask, iterations, tolerance)
    fileio.write_depth_raw(out, filled)


@cli.command()
@click.option("--depth", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--poses", default=8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--method", type=click.Choice(["nearest", "diffuse"]), default="nearest", show_default=True)
@click.option("--intrinsics", required=True, help='"f cx cy"')
@click.option("--supersample", default=2, show_default=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def fuse(depth, poses, seed, method, intrinsics, supersample, jobs, out):
    """Merge several completed nearby views with a per-pixel median."""
    image = fileio.read_depth_raw(depth)
    completer = completion.complete_nearest if method == "nearest" else completion.complete_diffuse
    fused = completion.fuse_views(
        image,
        _parse_intrinsics(intrinsics),
        completion.default_fusion_poses(poses, seed),
        completer,
        WarpConfig(supersample=supersample),
        jobs=jobs,
    )
    fileio.write_depth_raw(out, fused)


@cli.command("eval")
@click.option("--pred", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--truth", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--rgb", is_flag=True, help="Inputs are RGB PNGs; report PSNR.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable report.")
def eval_cmd(pred, truth, mask_path, rgb, as_json):
    """Report masked errors (and losses, or PSNR for RGB inputs)."""
    mask = fileio.read_mask(mask_path)
    if rgb:
        pred_img = np.asarray(Image.open(pred).convert("RGB"))
        truth_img = np.asarray(Image.open(truth).convert("RGB"))
        values = {"psnr_db": metrics.psnr(pred_img, truth_img, mask)}
    else:
        pred_img = fileio.read_depth_raw(pred)
        truth_img = fileio.read_depth_raw(truth)
        errors = metrics.masked_errors(pred_img, truth_img, mask)
        cfg = metrics.LossConfig()
        values = {
            "mean_m": errors.mean,
            "median_m": errors.median,
            "count": errors.count,
            "excluded": errors.excluded,
            "loss_tv": metrics.loss_tv(pred_img, truth_img, mask, cfg),
            "loss_content": metrics.loss_content(pred_img, truth_img, mask, cfg),
        }
        values["loss_total"] = values["loss_tv"] + values["loss_content"]
    click.echo(fileio.format_metrics_json(values) if as_json else fileio.format_metrics_text(values), nl=not as_json)


def _lemma_trial_args(args):
    seed, trial, supersample = args
    report = scene_mod.lemma_trial(seed, trial, WarpConfig(supersample=supersample))
    return trial, report.violations


@cli.command("verify-lemma")
@click.option("--trials", default=100, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--supersample", default=2, show_default=True)
@click.option("--jobs", default=1, show_default=True)
def verify_lemma_cmd(trials, seed, supersample, jobs):
    """Randomized occlusion-containment checks against the scene oracle."""
    tasks = [(seed, t, supersample) for t in range(trials)]
    if jobs <= 1:
        results = [_lemma_trial_args(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = sorted(pool.map(_lemma_trial_args, tasks))
    failing = sum(1 for _, v in results if v > 0)
    click.echo(f"violations: {failing}/{trials}")
    if failing:
        for trial, count in results:
            if count:
                click.echo(f"trial {trial}: {count} violating pixels", err=True)
        raise LemmaViolation(failing)


class LemmaViolation(Exception):
    def __init__(self, count: int) -> None:
        super().__init__(f"{count} trial(s) violated the containment property")


@cli.command()
@click.option("--scene", "scene_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--pose", default="0 0 0 0", show_default=True, help='"tx ty tz yaw_degrees"')
@click.option("--intrinsics", required=True, help='"f cx cy"')
@click.option("--size", required=True, help='"width height"')
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def render(scene_path, pose, intrinsics, size, out):
    """Ray-cast a scene description to a depth image."""
    parts = size.split()
    if len(parts) != 2:
        raise click.BadParameter('expected --size "width height"')
    width, height = int(parts[0]), int(parts[1])
    scn = fileio.read_scene(scene_path)
    image = scene_mod.render_depth(scn, _parse_intrinsics(intrinsics), _parse_pose(pose), width, height)
    fileio.write_depth_raw(out, image)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except LemmaViolation as exc:
        click.echo(str(exc), err=True)
        return EXIT_VIOLATION
    except fileio.FormatError as exc:
        click.echo(f"format error: {exc}", err=True)
        return EXIT_FORMAT
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except ValueError as exc:
        click.echo(f"invalid arguments: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
