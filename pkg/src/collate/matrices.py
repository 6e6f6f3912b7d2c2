"""Score-matrix post-processing: normalization, seeds, and propagation.

A raw score matrix says how alike two illustrations look; it says nothing
about how they rank among their alternatives.  Normalization rescales every
entry by row and column statistics so the rankings become comparable, and
propagation multiplies in a bonus around trusted correspondences, exploiting
the fact that neighbouring illustrations tend to match neighbouring ones.
Provenance moves strictly raw -> normalized -> propagated.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureMap, load_feature_map, save_feature_map

PROVENANCES = ("raw", "normalized", "propagated")
NORMALIZATION_KINDS = ("softmax", "over_avg", "over_max", "softmax_over_avg", "softmax_over_max")
SOFTMAX_KINDS = ("softmax", "softmax_over_avg", "softmax_over_max")
COMBINE_MODES = ("sum", "hadamard")
SEED_ORIGINS = ("two_cycle", "three_cycle", "confirmed", "mixed")
DEFAULT_LAMBDA = 50.0


class ProvenanceError(Exception):
    """An operation was fed a matrix from the wrong pipeline stage."""


class MatrixFormatError(Exception):
    """A serialized matrix file is unusable."""


class DegenerateAxisWarning(UserWarning):
    """A whole row or column normalized against a zero statistic."""


@dataclass
class SimilarityMatrix:
    """Dense float matrix over two manuscripts' canonical indices.

    provenance records the pipeline stage, method_tag which score produced
    the raw values, config_echo the knobs used along the way.
    """

    values: np.ndarray
    provenance: str
    method_tag: str
    config_echo: dict

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise MatrixFormatError(f"expected 2-d values, got shape {self.values.shape}")
        if self.provenance not in PROVENANCES:
            raise MatrixFormatError(f"unknown provenance {self.provenance!r}")
        if not np.isfinite(self.values).all():
            raise MatrixFormatError("matrix contains non-finite values")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormalizationScheme:
    """Which row/column rescaling to apply and how to combine the two.

    softmax kinds sharpen with a temperature (lam); the plain over_avg and
    over_max kinds take no parameter and reject one.
    """

    kind: str = "over_max"
    lam: float | None = None
    combine: str = "sum"

    def __post_init__(self) -> None:
        if self.kind not in NORMALIZATION_KINDS:
            raise ValueError(f"unknown normalization kind {self.kind!r}")
        if self.combine not in COMBINE_MODES:
            raise ValueError(f"unknown combine mode {self.combine!r}")
        if self.kind in SOFTMAX_KINDS:
            if self.lam is None:
                object.__setattr__(self, "lam", DEFAULT_LAMBDA)
            elif not self.lam > 0:
                raise ValueError("lam must be positive")
        elif self.lam is not None:
            raise ValueError(f"{self.kind} takes no lam parameter")

    def echo(self) -> dict:
        out = {"kind": self.kind, "combine": self.combine}
        if self.lam is not None:
            out["lambda"] = self.lam
        return out


@dataclass(frozen=True)
class SeedSet:
    """Trusted correspondences used to anchor propagation."""

    pairs: frozenset[tuple[int, int]]
    origin: str

    def __post_init__(self) -> None:
        if self.origin not in SEED_ORIGINS:
            raise ValueError(f"unknown seed origin {self.origin!r}")
        object.__setattr__(self, "pairs", frozenset((int(i), int(j)) for i, j in self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class PropagationConfig:
    alpha: float = 0.25
    sigma_p: float = 5.0

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not self.sigma_p > 0:
            raise ValueError("sigma_p must be positive")

    def echo(self) -> dict:
        return {"alpha": self.alpha, "sigma_p": self.sigma_p}


def _softmax(values: np.ndarray, lam: float, axis: int) -> np.ndarray:
    scaled = lam * values
    scaled = scaled - scaled.max(axis=axis, keepdims=True)
    e = np.exp(scaled)
    return e / e.sum(axis=axis, keepdims=True)


def _over_stat(values: np.ndarray, axis: int, stat: str) -> np.ndarray:
    """values / (row or column max/avg); zero statistics leave zeros + warning."""
    if stat == "max":
        denom = values.max(axis=axis, keepdims=True)
    else:
        denom = values.mean(axis=axis, keepdims=True)
    zero = denom == 0.0
    if zero.any():
        which = "rows" if axis == 1 else "columns"
        warnings.warn(
            f"{int(zero.sum())} {which} have zero {stat}; their normalized entries are set to 0",
            DegenerateAxisWarning,
            stacklevel=3,
        )
    out = np.zeros_like(values)
    np.divide(values, denom, out=out, where=~zero)
    return out


def normalize(matrix: SimilarityMatrix, scheme: NormalizationScheme | None = None) -> SimilarityMatrix:
    """Rescale a raw matrix by row and column statistics.

    The row map R and column map C follow the scheme's kind; they are summed
    by default or multiplied elementwise with combine="hadamard".
    """
    scheme = scheme or NormalizationScheme()
    if matrix.provenance != "raw":
        raise ProvenanceError(f"normalize expects a raw matrix, got {matrix.provenance!r}")
    v = matrix.values
    kind = scheme.kind
    if kind == "softmax":
        r = _softmax(v, scheme.lam, axis=1)
        c = _softmax(v, scheme.lam, axis=0)
    elif kind == "over_avg":
        r = _over_stat(v, axis=1, stat="avg")
        c = _over_stat(v, axis=0, stat="avg")
    elif kind == "over_max":
        r = _over_stat(v, axis=1, stat="max")
        c = _over_stat(v, axis=0, stat="max")
    elif kind == "softmax_over_avg":
        r = _softmax(_over_stat(v, axis=1, stat="avg"), scheme.lam, axis=1)
        c = _softmax(_over_stat(v, axis=0, stat="avg"), scheme.lam, axis=0)
    else:  # softmax_over_max
        r = _softmax(_over_stat(v, axis=1, stat="max"), scheme.lam, axis=1)
        c = _softmax(_over_stat(v, axis=0, stat="max"), scheme.lam, axis=0)
    combined = r + c if scheme.combine == "sum" else r * c
    echo = dict(matrix.config_echo)
    echo["normalization"] = scheme.echo()
    return SimilarityMatrix(combined, "normalized", matrix.method_tag, echo)


def two_cycle_seeds(matrix: SimilarityMatrix) -> SeedSet:
    """Pairs that are each other's best partner (ties to the lowest index)."""
    v = matrix.values
    if v.size == 0:
        return SeedSet(frozenset(), "two_cycle")
    row_best = np.argmax(v, axis=1)
    col_best = np.argmax(v, axis=0)
    pairs = frozenset(
        (int(i), int(j)) for i, j in enumerate(row_best) if int(col_best[j]) == i
    )
    return SeedSet(pairs, "two_cycle")


def three_cycle_seeds(
    ab: SimilarityMatrix, bc: SimilarityMatrix, ac: SimilarityMatrix
) -> tuple[SeedSet, SeedSet, SeedSet]:
    """Seeds supported by a closed best-match chain over three manuscripts.

    A triple (i, j, k) survives when i's best in ab is j, j's best in bc is
    k, i's best in ac is k, and each leg is reciprocal in its own matrix.
    The three returned sets are the legs of the surviving triples, so each is
    a subset of its matrix's two-cycle seeds.
    """
    if ab.cols != bc.rows or ab.rows != ac.rows or bc.cols != ac.cols:
        raise MatrixFormatError(
            f"incompatible shapes: ab {ab.values.shape}, bc {bc.values.shape}, ac {ac.values.shape}"
        )
    two_ab = two_cycle_seeds(ab).pairs
    two_bc = two_cycle_seeds(bc).pairs
    two_ac = two_cycle_seeds(ac).pairs
    if min(ab.values.size, bc.values.size, ac.values.size) == 0:
        empty = frozenset()
        return (SeedSet(empty, "three_cycle"),) * 3
    row_ab = np.argmax(ab.values, axis=1)
    row_bc = np.argmax(bc.values, axis=1)
    row_ac = np.argmax(ac.values, axis=1)
    seeds_ab, seeds_bc, seeds_ac = set(), set(), set()
    for i in range(ab.rows):
        j = int(row_ab[i])
        k = int(row_bc[j])
        if int(row_ac[i]) != k:
            continue
        if (i, j) in two_ab and (j, k) in two_bc and (i, k) in two_ac:
            seeds_ab.add((i, j))
            seeds_bc.add((j, k))
            seeds_ac.add((i, k))
    return (
        SeedSet(frozenset(seeds_ab), "three_cycle"),
        SeedSet(frozenset(seeds_bc), "three_cycle"),
        SeedSet(frozenset(seeds_ac), "three_cycle"),
    )


def propagate(
    matrix: SimilarityMatrix, seeds: SeedSet, cfg: PropagationConfig | None = None
) -> SimilarityMatrix:
    """Multiply in a Gaussian bonus around every seed correspondence.

    Each cell (i, j) is scaled by the product over seeds (k, l) of
    1 + alpha * exp(-((i-k)^2 + (j-l)^2) / (2 sigma_p^2)), distances taken
    in raw index units.  With alpha = 0 the matrix is unchanged.
    """
    cfg = cfg or PropagationConfig()
    if matrix.provenance != "normalized":
        raise ProvenanceError(f"propagate expects a normalized matrix, got {matrix.provenance!r}")
    rows, cols = matrix.values.shape
    for i, j in seeds.pairs:
        if not (0 <= i < rows and 0 <= j < cols):
            raise ValueError(f"seed ({i}, {j}) outside a {rows}x{cols} matrix")
    out = matrix.values.copy()
    row_idx = np.arange(rows, dtype=np.float64)
    col_idx = np.arange(cols, dtype=np.float64)
    denom = 2.0 * cfg.sigma_p * cfg.sigma_p
    for k, l in sorted(seeds.pairs):
        dr = row_idx - k
        dc = col_idx - l
        bump = np.outer(np.exp(-(dr * dr) / denom), np.exp(-(dc * dc) / denom))
        out *= 1.0 + cfg.alpha * bump
    echo = dict(matrix.config_echo)
    echo["propagation"] = {**cfg.echo(), "seed_origin": seeds.origin, "seed_count": len(seeds)}
    return SimilarityMatrix(out, "propagated", matrix.method_tag, echo)


def save_matrix(matrix: SimilarityMatrix, path: Path | str) -> Path:
    """Write a matrix as a JSON header plus a float payload file beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload_name = path.with_suffix(".fmap").name
    header = {
        "rows": matrix.rows,
        "cols": matrix.cols,
        "method": matrix.method_tag,
        "provenance": matrix.provenance,
        "config": matrix.config_echo,
        "payload": payload_name,
    }
    payload = FeatureMap(matrix.values.astype(np.float32).reshape(matrix.rows, matrix.cols, 1))
    save_feature_map(payload, path.parent / payload_name)
    with open(path, "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_matrix(path: Path | str) -> SimilarityMatrix:
    path = Path(path)
    if not path.is_file():
        raise MatrixFormatError(f"no such matrix header: {path}")
    with open(path) as fh:
        try:
            header = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MatrixFormatError(f"{path}: not valid JSON: {exc}") from exc
    for key in ("rows", "cols", "method", "provenance", "payload"):
        if key not in header:
            raise MatrixFormatError(f"{path}: missing key {key!r}")
    payload = load_feature_map(path.parent / header["payload"])
    if (payload.height, payload.width, payload.channels) != (header["rows"], header["cols"], 1):
        raise MatrixFormatError(
            f"{path}: payload shape {payload.data.shape} does not match header "
            f"({header['rows']}, {header['cols']}, 1)"
        )
    values = payload.data.reshape(header["rows"], header["cols"]).astype(np.float64)
    return SimilarityMatrix(values, header["provenance"], header["method"], header.get("config", {}))
