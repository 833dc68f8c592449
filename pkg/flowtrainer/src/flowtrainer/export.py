"""Export predicted displacement fields in the toolkit's flow format."""

from __future__ import annotations

from pathlib import Path

from depthwarp.fileio import write_flow

from .data import load_dataset
from .model import FlowModel
from .train import predict_field


def export_fields(model: FlowModel, manifest_path, out_dir) -> list:
    """Predict one displacement field per manifest entry and write it as
    `<occluded stem>.dfl`; the completion pipeline applies and scores
    them."""
    if not isinstance(model, FlowModel):
        raise ValueError("only the flow model exports displacement fields")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, manifest, samples = load_dataset(manifest_path)
    written = []
    for entry, sample in zip(manifest.entries, samples):
        field = predict_field(model, sample.occluded)
        path = out / (Path(entry.occluded).stem + ".dfl")
        write_flow(path, field)
        written.append(path)
    return written
