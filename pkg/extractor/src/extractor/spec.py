"""Extraction parameters and the errors the pipeline can raise."""

from __future__ import annotations

from dataclasses import dataclass

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

DEFAULT_BACKBONE = "resnet50-imagenet"
DEFAULT_SCALE_TAGS = (18, 19, 20, 21, 22)
DEFAULT_FIXED_SIDE = 256


class ExtractionError(Exception):
    """Base class for everything this package raises on purpose."""


class BackboneUnavailableError(ExtractionError):
    """The requested backbone cannot be constructed (unknown id, missing weights)."""


class UndecodableImageError(ExtractionError):
    """An input file could not be decoded as a raster image."""


@dataclass(frozen=True)
class ExtractionSpec:
    """What to extract: which backbone, the fixed-grid side, and the scale tags.

    fixed_side is the square input edge for the position-comparable grid.
    Each scale tag t asks for an aspect-preserving input whose largest axis
    is exactly t cells after the backbone's reduction.
    """

    backbone: str = DEFAULT_BACKBONE
    fixed_side: int = DEFAULT_FIXED_SIDE
    scale_tags: tuple[int, ...] = DEFAULT_SCALE_TAGS

    def __post_init__(self) -> None:
        if self.fixed_side < 1:
            raise ValueError(f"fixed_side must be positive, got {self.fixed_side}")
        tags = tuple(int(t) for t in self.scale_tags)
        if not tags:
            raise ValueError("scale_tags must not be empty")
        if any(t < 1 for t in tags):
            raise ValueError(f"scale tags must be positive, got {tags}")
        if any(b <= a for a, b in zip(tags, tags[1:])):
            raise ValueError(f"scale tags must be strictly increasing, got {tags}")
        object.__setattr__(self, "scale_tags", tags)

    def echo(self) -> dict:
        return {
            "backbone": self.backbone,
            "fixed_side": self.fixed_side,
            "scale_tags": list(self.scale_tags),
        }
