"""Walk an image directory and emit one feature store: grids plus manifest."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .backbone import Backbone
from .fmap import write_grid
from .resize import scaled_size
from .spec import IMAGENET_MEAN, IMAGENET_STD, ExtractionError, ExtractionSpec, UndecodableImageError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".webp", ".bmp", ".tif", ".tiff")

_MEAN = np.asarray(IMAGENET_MEAN, dtype=np.float32)
_STD = np.asarray(IMAGENET_STD, dtype=np.float32)


def list_images(images_dir: Path | str) -> list[Path]:
    """Image files under images_dir, sorted by name; ids are the file stems.

    Two files that differ only in extension would collide on id, so that is
    an error rather than a silent overwrite.
    """
    images_dir = Path(images_dir)
    if not images_dir.is_dir():
        raise ExtractionError(f"no such image directory: {images_dir}")
    paths = sorted(p for p in images_dir.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not paths:
        raise ExtractionError(f"no image files in {images_dir}")
    seen: dict[str, Path] = {}
    for path in paths:
        if path.stem in seen:
            raise ExtractionError(f"duplicate illustration id '{path.stem}': {seen[path.stem].name} and {path.name}")
        seen[path.stem] = path
    return paths


def load_image(path: Path | str) -> Image.Image:
    path = Path(path)
    try:
        image = Image.open(path)
        image.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise UndecodableImageError(f"cannot decode image {path}: {exc}") from exc
    return image.convert("RGB")


def grid_from_image(backbone: Backbone, image: Image.Image, width_px: int, height_px: int) -> np.ndarray:
    """Resize (bilinear), normalize with the ImageNet statistics, run the trunk.

    Returns the (H, W, C) float32 grid for this single input size.
    """
    resized = image.resize((width_px, height_px), Image.Resampling.BILINEAR)
    arr = np.asarray(resized, dtype=np.float32) / 255.0
    arr = (arr - _MEAN) / _STD
    tensor = torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))[None]
    with torch.no_grad():
        out = backbone.module(tensor)[0]
    return np.ascontiguousarray(out.permute(1, 2, 0).numpy(), dtype=np.float32)


def extract_manuscript(
    spec: ExtractionSpec,
    backbone: Backbone,
    images_dir: Path | str,
    out_dir: Path | str,
    manifest_path: Path | str | None = None,
    manuscript_id: str | None = None,
    progress=None,
) -> Path:
    """Extract every image into out_dir and write the manifest; returns its path.

    Each illustration gets one square fixed grid (fixed_side x fixed_side
    input) and one aspect-preserving grid per scale tag.  File paths in the
    manifest are relative to the manifest's own directory, which must contain
    out_dir for that to hold; by default the manifest sits inside out_dir.
    """
    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    manifest_path = Path(manifest_path) if manifest_path is not None else out_dir / "manifest.json"
    if manuscript_id is None:
        manuscript_id = images_dir.name
    paths = list_images(images_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)

    entries = []
    for path in paths:
        image = load_image(path)
        stem = path.stem
        if progress is not None:
            progress(stem, image.size)
        fixed = grid_from_image(backbone, image, spec.fixed_side, spec.fixed_side)
        fixed_rel = f"{stem}.fixed.fmap"
        write_grid(fixed, out_dir / fixed_rel)
        scales = {}
        for tag in spec.scale_tags:
            width_px, height_px = scaled_size(image.width, image.height, tag, backbone.reduction)
            grid = grid_from_image(backbone, image, width_px, height_px)
            rel = f"{stem}.s{tag}.fmap"
            write_grid(grid, out_dir / rel)
            scales[str(tag)] = rel
        entries.append(
            {
                "id": stem,
                "fixed_map": _relative(out_dir / fixed_rel, manifest_path.parent),
                "scales": {tag: _relative(out_dir / rel, manifest_path.parent) for tag, rel in scales.items()},
            }
        )

    doc = {
        "manuscript_id": manuscript_id,
        "illustrations": entries,
        "channels": backbone.channels,
        "extraction": spec.echo(),
    }
    with open(manifest_path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return manifest_path


def _relative(target: Path, base: Path) -> str:
    try:
        rel = target.resolve().relative_to(base.resolve())
    except ValueError:
        raise ExtractionError(
            f"manifest directory {base} does not contain output {target}; "
            "place the manifest at or above the output directory"
        ) from None
    return rel.as_posix()
