"""Dense feature grids for manuscript illustrations and their on-disk format.

An illustration is represented by a square fixed-resize feature grid plus a
small pyramid of aspect-preserving grids, one per scale tag.  Grids travel
between tools as FMAP files: a 24-byte binary header followed by row-major
float32 values.  A manuscript is a JSON manifest pointing at those files in
folio order; the position of an illustration in the manifest is its canonical
index everywhere else in this package.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

MAGIC = b"FMAP"
FORMAT_VERSION = 1
HEADER_SIZE = 24
DEFAULT_SCALE_TAGS = (18, 19, 20, 21, 22)

_HEADER = struct.Struct("<4sIIIII")  # magic, version, H, W, C, reserved


class FormatError(Exception):
    """A byte stream is not a well-formed feature grid."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class NonFiniteValueError(FormatError):
    pass


class InvalidShapeError(FormatError):
    pass


class ManifestError(Exception):
    """A manuscript manifest or one of its grids is unusable."""


class MissingFileError(ManifestError):
    pass


class ScaleMismatchError(ManifestError):
    pass


class ChannelMismatchError(ManifestError):
    pass


@dataclass(frozen=True)
class FeatureMap:
    """One grid of descriptors, shape (height, width, channels), float32."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise InvalidShapeError(f"expected 3-d data, got shape {self.data.shape}")
        if min(self.data.shape) < 1:
            raise InvalidShapeError(f"dimensions must be positive, got {self.data.shape}")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def n_features(self) -> int:
        return self.height * self.width

    def descriptors(self) -> np.ndarray:
        """Row-major (N, C) float64 view of the grid, N = height * width."""
        return self.data.reshape(self.n_features, self.channels).astype(np.float64)

    def positions(self) -> np.ndarray:
        """Normalized (x, y) cell coordinates, row-major, shape (N, 2)."""
        return grid_positions(self.height, self.width)


def grid_positions(height: int, width: int) -> np.ndarray:
    """Coordinates of grid cells with the largest axis spanning [0, 1].

    Cell (r, c) maps to (c, r) / (max(height, width) - 1); a single-cell axis
    maps to 0.0.  Linear index r * width + c matches descriptor order.
    """
    denom = max(height, width) - 1
    if denom < 1:
        return np.zeros((height * width, 2), dtype=np.float64)
    cols, rows = np.meshgrid(np.arange(width), np.arange(height))
    out = np.empty((height * width, 2), dtype=np.float64)
    out[:, 0] = cols.ravel() / denom
    out[:, 1] = rows.ravel() / denom
    return out


def write_feature_map(fmap: FeatureMap, sink: BinaryIO) -> None:
    """Serialize a grid: 24-byte header then H*W*C little-endian float32."""
    data = np.ascontiguousarray(fmap.data, dtype="<f4")
    sink.write(_HEADER.pack(MAGIC, FORMAT_VERSION, fmap.height, fmap.width, fmap.channels, 0))
    sink.write(data.tobytes())


def read_feature_map(source: BinaryIO) -> FeatureMap:
    """Parse a grid written by :func:`write_feature_map`.

    Raises BadMagicError, VersionMismatchError, TruncatedPayloadError,
    InvalidShapeError or NonFiniteValueError depending on what is wrong.
    """
    header = source.read(HEADER_SIZE)
    if len(header) >= 4 and header[:4] != MAGIC:
        raise BadMagicError(f"bad magic {header[:4]!r}")
    if len(header) < HEADER_SIZE:
        raise TruncatedPayloadError(f"header is {len(header)} bytes, need {HEADER_SIZE}")
    _, version, height, width, channels, _reserved = _HEADER.unpack(header)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"unsupported version {version}")
    if min(height, width, channels) < 1:
        raise InvalidShapeError(f"non-positive dimension in header ({height}, {width}, {channels})")
    count = height * width * channels
    payload = source.read(4 * count)
    if len(payload) < 4 * count:
        raise TruncatedPayloadError(f"payload has {len(payload)} bytes, need {4 * count}")
    values = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(height, width, channels)
    if not np.isfinite(values).all():
        raise NonFiniteValueError("payload contains non-finite values")
    return FeatureMap(values)


def save_feature_map(fmap: FeatureMap, path: Path | str) -> None:
    with open(path, "wb") as fh:
        write_feature_map(fmap, fh)


def load_feature_map(path: Path | str) -> FeatureMap:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such feature file: {path}")
    with open(path, "rb") as fh:
        return read_feature_map(fh)


@dataclass(frozen=True)
class FeaturePyramid:
    """All grids for one illustration: the square fixed grid plus scale grids.

    scale_maps is ordered by strictly increasing tag; each map's largest axis
    must equal its tag, and every grid shares one channel count.
    """

    illustration_id: str
    fixed_map: FeatureMap
    scale_maps: tuple[tuple[int, FeatureMap], ...]

    def validate(self) -> None:
        if self.fixed_map.height != self.fixed_map.width:
            raise ScaleMismatchError(
                f"{self.illustration_id}: fixed grid must be square, "
                f"got {self.fixed_map.height}x{self.fixed_map.width}"
            )
        tags = [tag for tag, _ in self.scale_maps]
        if any(b <= a for a, b in zip(tags, tags[1:])):
            raise ScaleMismatchError(f"{self.illustration_id}: scale tags not strictly increasing: {tags}")
        for tag, fmap in self.scale_maps:
            if max(fmap.height, fmap.width) != tag:
                raise ScaleMismatchError(
                    f"{self.illustration_id}: grid {fmap.height}x{fmap.width} does not match scale tag {tag}"
                )
        channels = {fmap.channels for _, fmap in self.scale_maps}
        channels.add(self.fixed_map.channels)
        if len(channels) > 1:
            raise ChannelMismatchError(f"{self.illustration_id}: mixed channel counts {sorted(channels)}")

    @property
    def channels(self) -> int:
        return self.fixed_map.channels

    @property
    def scale_tags(self) -> tuple[int, ...]:
        return tuple(tag for tag, _ in self.scale_maps)

    def scale_map(self, tag: int) -> FeatureMap:
        for t, fmap in self.scale_maps:
            if t == tag:
                return fmap
        raise KeyError(f"{self.illustration_id}: no grid for scale tag {tag}")


@dataclass(frozen=True)
class ManuscriptFeatures:
    """Pyramids for every illustration of one manuscript, in folio order."""

    manuscript_id: str
    pyramids: tuple[FeaturePyramid, ...]

    def validate(self) -> None:
        ids = [p.illustration_id for p in self.pyramids]
        if len(set(ids)) != len(ids):
            raise ManifestError(f"{self.manuscript_id}: duplicate illustration ids")
        for pyramid in self.pyramids:
            pyramid.validate()
        channels = {p.channels for p in self.pyramids}
        if len(channels) > 1:
            raise ChannelMismatchError(f"{self.manuscript_id}: mixed channel counts {sorted(channels)}")

    def __len__(self) -> int:
        return len(self.pyramids)

    @property
    def illustration_ids(self) -> tuple[str, ...]:
        return tuple(p.illustration_id for p in self.pyramids)

    def index_of(self, illustration_id: str) -> int:
        for i, p in enumerate(self.pyramids):
            if p.illustration_id == illustration_id:
                return i
        raise KeyError(illustration_id)


def load_manuscript(manifest_path: Path | str) -> ManuscriptFeatures:
    """Read a manifest and every grid it references.

    Paths inside the manifest are resolved relative to the manifest file.
    All type invariants are checked here, not at use sites.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFileError(f"no such manifest: {manifest_path}")
    with open(manifest_path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{manifest_path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "manuscript_id" not in doc or "illustrations" not in doc:
        raise ManifestError(f"{manifest_path}: expected manuscript_id and illustrations keys")
    base = manifest_path.parent
    pyramids = []
    for entry in doc["illustrations"]:
        fixed = load_feature_map(base / entry["fixed_map"])
        scales = sorted((int(tag), rel) for tag, rel in entry["scales"].items())
        scale_maps = tuple((tag, load_feature_map(base / rel)) for tag, rel in scales)
        pyramids.append(FeaturePyramid(entry["id"], fixed, scale_maps))
    features = ManuscriptFeatures(doc["manuscript_id"], tuple(pyramids))
    features.validate()
    declared = doc.get("channels")
    if declared is not None and features.pyramids and features.pyramids[0].channels != declared:
        raise ChannelMismatchError(
            f"{manifest_path}: manifest declares {declared} channels, grids have "
            f"{features.pyramids[0].channels}"
        )
    return features


def save_manuscript(features: ManuscriptFeatures, out_dir: Path | str, manifest_name: str = "manifest.json") -> Path:
    """Write every grid as an FMAP file plus the manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for pyramid in features.pyramids:
        stem = pyramid.illustration_id
        fixed_rel = f"{stem}.fixed.fmap"
        save_feature_map(pyramid.fixed_map, out_dir / fixed_rel)
        scales = {}
        for tag, fmap in pyramid.scale_maps:
            rel = f"{stem}.s{tag}.fmap"
            save_feature_map(fmap, out_dir / rel)
            scales[str(tag)] = rel
        entries.append({"id": stem, "fixed_map": fixed_rel, "scales": scales})
    doc = {"manuscript_id": features.manuscript_id, "illustrations": entries}
    if features.pyramids:
        doc["channels"] = features.pyramids[0].channels
    manifest_path = out_dir / manifest_name
    with open(manifest_path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return manifest_path


def local_permutation(seed: int, n: int, max_shift: int = 3) -> tuple[int, ...]:
    """Random permutation of range(n) where no index moves more than max_shift.

    Built by shuffling consecutive blocks of size at most max_shift + 1, so the
    bound holds by construction.
    """
    rng = np.random.default_rng(seed)
    perm: list[int] = []
    start = 0
    while start < n:
        size = int(rng.integers(1, max_shift + 2))
        block = list(range(start, min(start + size, n)))
        rng.shuffle(block)
        perm.extend(block)
        start += size
    return tuple(perm)


_HUB_FRACTION = 0.15
_HUB_LOW = (0.05, 0.25)
_HUB_HIGH = (0.55, 0.8)


def synth_manuscripts(
    seed: int,
    n_illustrations: int,
    channels: int,
    style_noise: float,
    permutation: Sequence[int],
    *,
    scale_tags: Iterable[int] = (4, 5, 6),
    fixed_size: int = 4,
    id_prefixes: tuple[str, str] = ("a", "b"),
) -> tuple[ManuscriptFeatures, ManuscriptFeatures, tuple[tuple[int, int], ...]]:
    """Generate a pair of synthetic manuscripts with known correspondences.

    Manuscript B's pyramid at position j is a copy of A's pyramid at position
    permutation[j] with i.i.d. Gaussian noise of standard deviation
    style_noise added to every descriptor.  The returned ground truth is the
    pair list ((permutation[j], j) for all j), sorted by first index.

    A's features mix a per-illustration unique component with a component
    shared across the whole manuscript; a few illustrations lean heavily on
    the shared part, so they look somewhat similar to everything else.
    Deterministic for a fixed seed.
    """
    if n_illustrations < 1:
        raise ValueError("n_illustrations must be positive")
    if channels < 1:
        raise ValueError("channels must be positive")
    if style_noise < 0:
        raise ValueError("style_noise must be non-negative")
    if sorted(permutation) != list(range(n_illustrations)):
        raise ValueError("permutation must be a bijection of range(n_illustrations)")
    tags = tuple(sorted(int(t) for t in scale_tags))
    shapes = [("fixed", fixed_size, fixed_size)] + [(f"s{t}", t, t) for t in tags]

    rng = np.random.default_rng(seed)
    shared = {name: rng.standard_normal((h, w, channels)) for name, h, w in shapes}
    hub_raw = rng.random(n_illustrations)
    lo, hi = _HUB_LOW
    hub = lo + (hi - lo) * hub_raw
    is_hub = rng.random(n_illustrations) < _HUB_FRACTION
    hub = np.where(is_hub, _HUB_HIGH[0] + (_HUB_HIGH[1] - _HUB_HIGH[0]) * hub_raw, hub)

    grids_a: list[dict[str, np.ndarray]] = []
    for i in range(n_illustrations):
        grids = {}
        for name, h, w in shapes:
            unique = rng.standard_normal((h, w, channels))
            grids[name] = (1.0 - hub[i]) * unique + hub[i] * shared[name]
        grids_a.append(grids)

    def build(prefix: str, index: int, grids: dict[str, np.ndarray]) -> FeaturePyramid:
        fixed = FeatureMap(grids["fixed"].astype(np.float32))
        scale_maps = tuple((t, FeatureMap(grids[f"s{t}"].astype(np.float32))) for t in tags)
        return FeaturePyramid(f"{prefix}{index:04d}", fixed, scale_maps)

    pyramids_a = tuple(build(id_prefixes[0], i, grids_a[i]) for i in range(n_illustrations))
    pyramids_b = []
    for j in range(n_illustrations):
        src = grids_a[permutation[j]]
        noisy = {}
        for name, h, w in shapes:
            noise = rng.standard_normal((h, w, channels)) * style_noise
            noisy[name] = src[name] + noise
        pyramids_b.append(build(id_prefixes[1], j, noisy))

    ms_a = ManuscriptFeatures(f"synth-{id_prefixes[0]}", pyramids_a)
    ms_b = ManuscriptFeatures(f"synth-{id_prefixes[1]}", tuple(pyramids_b))
    ms_a.validate()
    ms_b.validate()
    gt = tuple(sorted((permutation[j], j) for j in range(n_illustrations)))
    return ms_a, ms_b, gt
