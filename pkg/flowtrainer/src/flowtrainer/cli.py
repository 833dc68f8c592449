"""Command-line trainer: `flowtrain`."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .export import export_fields
from .model import FlowModel
from .train import TrainConfig, save_checkpoint, train_depthnet, train_flow


@click.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--epochs", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--model", "kind", type=click.Choice(["flow", "depth"]), default="flow", show_default=True)
@click.option("--steps-per-epoch", default=40, show_default=True)
@click.option("--batch", default=10, show_default=True)
@click.option("--export", "do_export", is_flag=True, help="Also write one .dfl per manifest entry (flow only).")
def cli(manifest, out_dir, epochs, seed, kind, steps_per_epoch, batch, do_export):
    """Train a completion model on a dataset manifest."""
    config = TrainConfig(
        epochs=epochs, seed=seed, steps_per_epoch=steps_per_epoch, batch_size=batch
    )
    trainer = train_flow if kind == "flow" else train_depthnet
    result = trainer(manifest, config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result, out / "checkpoint.pt")
    (out / "history.json").write_text(json.dumps(result.history, indent=2) + "\n")
    click.echo(
        f"val masked L1: {result.val_initial:.4f} -> {result.val_final:.4f} "
        f"({result.config.epochs} epochs)"
    )
    if do_export:
        if not isinstance(result.model, FlowModel):
            raise click.UsageError("--export applies to the flow model only")
        written = export_fields(result.model, manifest, out / "fields")
        click.echo(f"exported {len(written)} displacement fields")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except ValueError as exc:
        click.echo(f"invalid arguments: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
