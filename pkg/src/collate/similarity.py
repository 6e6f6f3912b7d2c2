"""Pairwise similarity between illustrations from their feature grids.

Three scores of increasing rigidity:

* ``s_features``: mean cosine between descriptors at identical grid cells of
  the two square fixed grids.  Cheap, needs no matching.
* ``s_matching``: reciprocal nearest-neighbour matches across the target's
  scale grids, scored by cosine weighted with a Gaussian on the displacement
  between matched cells.  Symmetric: both directions contribute.
* ``s_trans``: same matches, but each direction's displacements are measured
  after applying an affine transform fitted to that direction's matches with
  a RANSAC loop that maximizes the Gaussian-weighted score itself.

All positions live in normalized grid coordinates (largest axis spanning
[0, 1]); the Gaussian tolerance ``sigma`` is expressed in those units.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

from .features import DEFAULT_SCALE_TAGS, FeatureMap, FeaturePyramid, ManuscriptFeatures
from .matrices import SimilarityMatrix

DEFAULT_SIGMA = 1.0 / math.sqrt(50.0)

Method = Literal["features", "matching", "trans"]
METHODS = ("features", "matching", "trans")


class ShapeMismatchError(Exception):
    """Two grids that must be congruent are not."""


class PairComputationError(Exception):
    """A similarity evaluation failed for one matrix cell."""

    def __init__(self, row: int, col: int, reason: str):
        super().__init__(f"pair ({row}, {col}): {reason}")
        self.row = row
        self.col = col
        self.reason = reason


@dataclass(frozen=True)
class SimilarityConfig:
    """Knobs shared by the matching scores.

    sigma is the spatial tolerance of the Gaussian displacement weight,
    base_scale selects which scale grid acts as the source side of a
    direction, and rng_seed drives RANSAC sampling.
    """

    sigma: float = DEFAULT_SIGMA
    ransac_iterations: int = 100
    scale_tags: tuple[int, ...] = DEFAULT_SCALE_TAGS
    base_scale: int = 20
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.ransac_iterations < 1:
            raise ValueError("ransac_iterations must be at least 1")
        if self.base_scale not in self.scale_tags:
            raise ValueError(f"base_scale {self.base_scale} not among scale_tags {self.scale_tags}")

    def echo(self) -> dict:
        return {
            "sigma": self.sigma,
            "ransac_iterations": self.ransac_iterations,
            "scale_tags": list(self.scale_tags),
            "base_scale": self.base_scale,
            "rng_seed": self.rng_seed,
        }


@dataclass(frozen=True)
class Match:
    """One reciprocal feature correspondence between two illustrations.

    Positions are normalized grid coordinates; tgt_pos is already in the
    target's base frame no matter which scale grid the match came from.
    weight is the cosine, clipped to [-1, 1].
    """

    src_index: int
    src_pos: tuple[float, float]
    tgt_pos: tuple[float, float]
    weight: float
    tgt_scale_tag: int


@dataclass(frozen=True)
class MatchSet:
    direction: tuple[str, str]
    matches: tuple[Match, ...]

    def __len__(self) -> int:
        return len(self.matches)


@dataclass(frozen=True)
class AffineTransform:
    """Planar affine map (x, y) -> (a*x + b*y + e, c*x + d*y + f)."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (n, 2) array of points."""
        x, y = points[:, 0], points[:, 1]
        out = np.empty_like(points, dtype=np.float64)
        out[:, 0] = self.a * x + self.b * y + self.e
        out[:, 1] = self.c * x + self.d * y + self.f
        return out

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.a, self.b, self.c, self.d, self.e, self.f))


def _unit_rows(desc: np.ndarray) -> np.ndarray:
    """Rows scaled to unit norm; all-zero rows stay zero (their cosine is 0)."""
    norms = np.linalg.norm(desc, axis=1, keepdims=True)
    out = np.zeros_like(desc)
    np.divide(desc, norms, out=out, where=norms > 0)
    return out


def cosine(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity of two descriptors, 0.0 if either has zero norm.

    The result is clipped to [-1, 1] so downstream weights stay in range.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ShapeMismatchError(f"descriptor shapes differ: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def s_features(a: FeatureMap, b: FeatureMap) -> float:
    """Mean cosine between descriptors at identical cells of congruent grids."""
    if (a.height, a.width) != (b.height, b.width) or a.channels != b.channels:
        raise ShapeMismatchError(
            f"grids not congruent: {a.height}x{a.width}x{a.channels} vs {b.height}x{b.width}x{b.channels}"
        )
    da = _unit_rows(a.descriptors())
    db = _unit_rows(b.descriptors())
    per_cell = np.clip(np.einsum("ij,ij->i", da, db), -1.0, 1.0)
    return float(np.sum(per_cell) / per_cell.size)


def best_matches(src: FeatureMap, tgt: FeaturePyramid, *, src_id: str = "", tgt_id: str | None = None) -> MatchSet:
    """Reciprocal nearest-neighbour matches from a source grid into a pyramid.

    For each scale grid of the target, every source feature's nearest target
    feature (max cosine, ties to the lowest linear index) is kept only when
    that target feature's nearest source feature points back at it, both
    lookups staying inside the same scale grid.  A source feature then emits
    its highest-cosine surviving candidate across scales (ties: earliest
    scale), or nothing.
    """
    src_desc = _unit_rows(src.descriptors())
    src_pos = src.positions()
    n_src = src_desc.shape[0]
    best_weight = np.full(n_src, -np.inf)
    best_tag = np.full(n_src, -1, dtype=np.int64)
    best_tgt_pos = np.zeros((n_src, 2), dtype=np.float64)

    for tag, fmap in tgt.scale_maps:
        if fmap.channels != src.channels:
            raise ShapeMismatchError(f"channel mismatch: {src.channels} vs {fmap.channels} at scale {tag}")
        tgt_desc = _unit_rows(fmap.descriptors())
        tgt_pos = fmap.positions()
        sim = np.clip(src_desc @ tgt_desc.T, -1.0, 1.0)
        forward = np.argmax(sim, axis=1)
        backward = np.argmax(sim, axis=0)
        reciprocal = backward[forward] == np.arange(n_src)
        weights = sim[np.arange(n_src), forward]
        improves = reciprocal & (weights > best_weight)
        best_weight[improves] = weights[improves]
        best_tag[improves] = tag
        best_tgt_pos[improves] = tgt_pos[forward[improves]]

    matches = tuple(
        Match(
            src_index=i,
            src_pos=(float(src_pos[i, 0]), float(src_pos[i, 1])),
            tgt_pos=(float(best_tgt_pos[i, 0]), float(best_tgt_pos[i, 1])),
            weight=float(best_weight[i]),
            tgt_scale_tag=int(best_tag[i]),
        )
        for i in range(n_src)
        if best_tag[i] >= 0
    )
    return MatchSet(direction=(src_id, tgt.illustration_id if tgt_id is None else tgt_id), matches=matches)


def _match_arrays(mset: MatchSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(mset.matches)
    src = np.empty((n, 2), dtype=np.float64)
    tgt = np.empty((n, 2), dtype=np.float64)
    w = np.empty(n, dtype=np.float64)
    for k, m in enumerate(mset.matches):
        src[k] = m.src_pos
        tgt[k] = m.tgt_pos
        w[k] = m.weight
    return src, tgt, w


def _gaussian_score(src: np.ndarray, tgt: np.ndarray, weights: np.ndarray, sigma: float,
                    transform: AffineTransform | None = None) -> float:
    """Sum of exp(-|x_src - x_tgt|^2 / 2 sigma^2) * weight over matches."""
    if len(weights) == 0:
        return 0.0
    pts = transform.apply(src) if transform is not None else src
    d = pts - tgt
    sq = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
    return float(np.sum(np.exp(-sq / (2.0 * sigma * sigma)) * weights))


def _direction_score(mset: MatchSet, n_src: int, sigma: float,
                     transform: AffineTransform | None = None) -> float:
    """One direction's contribution: Gaussian-weighted sum over 2 * n_src."""
    src, tgt, w = _match_arrays(mset)
    return _gaussian_score(src, tgt, w, sigma, transform) / (2.0 * n_src)


def _base_map(p: FeaturePyramid, cfg: SimilarityConfig) -> FeatureMap:
    try:
        return p.scale_map(cfg.base_scale)
    except KeyError as exc:
        raise ShapeMismatchError(str(exc)) from exc


def s_matching(a: FeaturePyramid, b: FeaturePyramid, cfg: SimilarityConfig | None = None) -> float:
    """Symmetric multi-scale matching score of two pyramids, in [-1, 1]."""
    cfg = cfg or SimilarityConfig()
    fwd = best_matches(_base_map(a, cfg), b, src_id=a.illustration_id)
    bwd = best_matches(_base_map(b, cfg), a, src_id=b.illustration_id)
    term_ab = _direction_score(fwd, _base_map(a, cfg).n_features, cfg.sigma)
    term_ba = _direction_score(bwd, _base_map(b, cfg).n_features, cfg.sigma)
    return term_ab + term_ba


def _solve_affine(src3: np.ndarray, tgt3: np.ndarray) -> AffineTransform | None:
    """Exact affine through 3 matches; None when the triple is collinear."""
    m = np.column_stack([src3, np.ones(3)])
    det = (
        m[0, 0] * (m[1, 1] - m[2, 1])
        - m[0, 1] * (m[1, 0] - m[2, 0])
        + (m[1, 0] * m[2, 1] - m[2, 0] * m[1, 1])
    )
    if abs(det) < 1e-12:
        return None
    coeffs = np.linalg.solve(m, tgt3)
    t = AffineTransform(
        a=float(coeffs[0, 0]), b=float(coeffs[1, 0]), e=float(coeffs[2, 0]),
        c=float(coeffs[0, 1]), d=float(coeffs[1, 1]), f=float(coeffs[2, 1]),
    )
    return t if t.is_finite() else None


def ransac_affine(matches: MatchSet, cfg: SimilarityConfig | None = None) -> AffineTransform:
    """Affine transform maximizing the Gaussian-weighted match score.

    Each iteration fits an exact transform through 3 sampled matches
    (collinear triples are discarded but still consume an iteration) and
    keeps the hypothesis with the best score over all matches.  The identity
    is the starting hypothesis, so the result never scores below it.  Fewer
    than 3 matches: identity.  Deterministic given cfg.rng_seed.
    """
    cfg = cfg or SimilarityConfig()
    identity = AffineTransform.identity()
    src, tgt, w = _match_arrays(matches)
    if len(w) < 3:
        return identity
    best = identity
    best_score = _gaussian_score(src, tgt, w, cfg.sigma, identity)
    rng = np.random.default_rng(cfg.rng_seed)
    n = len(w)
    for _ in range(cfg.ransac_iterations):
        idx = rng.choice(n, size=3, replace=False)
        t = _solve_affine(src[idx], tgt[idx])
        if t is None:
            continue
        score = _gaussian_score(src, tgt, w, cfg.sigma, t)
        if score > best_score:
            best, best_score = t, score
    return best


def ransac_objective(matches: MatchSet, transform: AffineTransform, cfg: SimilarityConfig | None = None) -> float:
    """Score a transform on a match set; what :func:`ransac_affine` maximizes."""
    cfg = cfg or SimilarityConfig()
    src, tgt, w = _match_arrays(matches)
    return _gaussian_score(src, tgt, w, cfg.sigma, transform)


def _pair_seed(rng_seed: int, src_id: str, tgt_id: str) -> int:
    """Sampling seed for one direction of one pair.

    Order-independent over the id pair with a direction bit, so both
    directions of a pair get the same two seeds no matter which illustration
    is named first.
    """
    lo, hi = sorted((src_id, tgt_id))
    bit = 0 if src_id == lo else 1
    digest = hashlib.sha256(f"{rng_seed}|{lo}|{hi}|{bit}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def s_trans(a: FeaturePyramid, b: FeaturePyramid, cfg: SimilarityConfig | None = None) -> float:
    """Matching score with each direction reweighted by its fitted transform."""
    cfg = cfg or SimilarityConfig()
    fwd = best_matches(_base_map(a, cfg), b, src_id=a.illustration_id)
    bwd = best_matches(_base_map(b, cfg), a, src_id=b.illustration_id)
    t_ab = ransac_affine(fwd, replace(cfg, rng_seed=_pair_seed(cfg.rng_seed, a.illustration_id, b.illustration_id)))
    t_ba = ransac_affine(bwd, replace(cfg, rng_seed=_pair_seed(cfg.rng_seed, b.illustration_id, a.illustration_id)))
    term_ab = _direction_score(fwd, _base_map(a, cfg).n_features, cfg.sigma, t_ab)
    term_ba = _direction_score(bwd, _base_map(b, cfg).n_features, cfg.sigma, t_ba)
    return term_ab + term_ba


def _pair_value(method: str, a: FeaturePyramid, b: FeaturePyramid, cfg: SimilarityConfig) -> float:
    if method == "features":
        return s_features(a.fixed_map, b.fixed_map)
    if method == "matching":
        return s_matching(a, b, cfg)
    if method == "trans":
        return s_trans(a, b, cfg)
    raise ValueError(f"unknown method {method!r}")


def _compute_rows(args: tuple) -> tuple[int, np.ndarray]:
    rows_a, all_b, method, cfg, row_offset = args
    block = np.empty((len(rows_a), len(all_b)), dtype=np.float64)
    for bi, a in enumerate(rows_a):
        for j, b in enumerate(all_b):
            try:
                block[bi, j] = _pair_value(method, a, b, cfg)
            except PairComputationError:
                raise
            except Exception as exc:
                raise PairComputationError(row_offset + bi, j, f"{type(exc).__name__}: {exc}") from exc
    return row_offset, block


def similarity_matrix(
    a: ManuscriptFeatures,
    b: ManuscriptFeatures,
    method: Method,
    cfg: SimilarityConfig | None = None,
    parallelism: int = 1,
) -> SimilarityMatrix:
    """Full cross-manuscript score matrix, rows indexing a, columns b.

    Work is split into row blocks across processes; each cell is a pure
    function of its pair and the config, so the result is identical for any
    worker count.  Cell failures surface as PairComputationError with the
    offending indices.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    cfg = cfg or SimilarityConfig()
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    rows = len(a.pyramids)
    cols = len(b.pyramids)
    values = np.empty((rows, cols), dtype=np.float64)
    if parallelism == 1 or rows <= 1:
        offset, block = _compute_rows((list(a.pyramids), list(b.pyramids), method, cfg, 0))
        values[:] = block
    else:
        n_blocks = min(parallelism, rows)
        bounds = [round(i * rows / n_blocks) for i in range(n_blocks + 1)]
        tasks = [
            (list(a.pyramids[lo:hi]), list(b.pyramids), method, cfg, lo)
            for lo, hi in zip(bounds, bounds[1:])
            if hi > lo
        ]
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for offset, block in pool.map(_compute_rows, tasks):
                values[offset:offset + block.shape[0]] = block
    return SimilarityMatrix(
        values=values,
        provenance="raw",
        method_tag=method,
        config_echo={"method": method, "similarity": cfg.echo()},
    )
