"""Feature-grid extraction from manuscript photographs.

Turns a directory of illustration images into the collation engine's feature
store: per-illustration grid pyramids (one square fixed grid plus one
aspect-preserving grid per scale tag) serialized as FMAP files under a JSON
manifest.
"""

from .backbone import Backbone, load_backbone
from .resize import grid_shape, scaled_size
from .runner import extract_manuscript, list_images, load_image
from .spec import (
    BackboneUnavailableError,
    ExtractionError,
    ExtractionSpec,
    UndecodableImageError,
)

__all__ = [
    "Backbone",
    "BackboneUnavailableError",
    "ExtractionError",
    "ExtractionSpec",
    "UndecodableImageError",
    "extract_manuscript",
    "grid_shape",
    "list_images",
    "load_backbone",
    "load_image",
    "scaled_size",
]
