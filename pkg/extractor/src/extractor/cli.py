"""Command line entry point: extract a directory of photographs to a feature store."""

from __future__ import annotations

from pathlib import Path

import click

from .backbone import load_backbone
from .runner import extract_manuscript
from .spec import DEFAULT_BACKBONE, DEFAULT_FIXED_SIDE, ExtractionError, ExtractionSpec


def _parse_scales(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise click.UsageError(f"--scales must be comma-separated integers, got '{text}'")


@click.command()
@click.option("--images", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path), help="Directory of illustration photographs; file stems become illustration ids.")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Directory that receives the grid files and, by default, the manifest.")
@click.option("--manifest", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Manifest path (default: <out>/manifest.json).")
@click.option("--backbone", "backbone_id", default=DEFAULT_BACKBONE, show_default=True, help="Backbone identifier.")
@click.option("--scales", default="18,19,20,21,22", show_default=True, help="Comma-separated scale tags.")
@click.option("--fixed", default=DEFAULT_FIXED_SIDE, show_default=True, help="Square input side for the fixed grid.")
@click.option("--manuscript-id", default=None, help="Manuscript id recorded in the manifest (default: the image directory name).")
def main(images: Path, out: Path, manifest: Path | None, backbone_id: str, scales: str, fixed: int, manuscript_id: str | None) -> None:
    """Extract backbone feature grids for every image in a directory."""
    try:
        spec = ExtractionSpec(backbone=backbone_id, fixed_side=fixed, scale_tags=_parse_scales(scales))
    except ValueError as exc:
        raise click.UsageError(str(exc))
    try:
        backbone = load_backbone(spec.backbone)

        def progress(stem: str, size: tuple[int, int]) -> None:
            click.echo(f"{stem}: {size[0]}x{size[1]} -> fixed {spec.fixed_side}, scales {','.join(map(str, spec.scale_tags))}")

        manifest_path = extract_manuscript(
            spec,
            backbone,
            images,
            out,
            manifest_path=manifest,
            manuscript_id=manuscript_id,
            progress=progress,
        )
    except ExtractionError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {manifest_path}")


if __name__ == "__main__":
    main()
