"""Directory-backed projects: pipeline orchestration, annotations, exports.

A project is a plain directory: ``project.json`` metadata, matrices under
``matrices/``, review annotations under ``annotations/``, match results under
``matches/`` and optional display images under ``images/``.  No database;
everything is inspectable and trivially backed up.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .correspondence import (
    Correspondence,
    CorrespondenceSet,
    greedy_one_to_one,
    argmax_correspondences,
    load_correspondences,
    save_correspondences,
    save_correspondences_csv,
    top_k,
)
from .features import ManuscriptFeatures, load_manuscript
from .matrices import (
    NormalizationScheme,
    PropagationConfig,
    SeedSet,
    SimilarityMatrix,
    load_matrix,
    normalize,
    propagate,
    save_matrix,
    two_cycle_seeds,
)
from .similarity import METHODS, SimilarityConfig, similarity_matrix

STAGES = ("similarity", "normalize", "propagate", "match")
MATCH_ALGOS = ("greedy", "argmax")
_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".webp")


class ProjectError(Exception):
    pass


class UnknownManuscriptError(ProjectError):
    pass


class StageOrderError(ProjectError):
    pass


class NothingToExportError(ProjectError):
    pass


def _config_from_json(doc: dict) -> PipelineConfig:
    sim = doc.get("similarity", {})
    norm = doc.get("normalization", {})
    prop = doc.get("propagation", {})
    return PipelineConfig(
        method=doc.get("method", "matching"),
        match_algo=doc.get("match_algo", "greedy"),
        similarity=SimilarityConfig(
            sigma=sim.get("sigma", SimilarityConfig.sigma),
            ransac_iterations=sim.get("ransac_iterations", 100),
            scale_tags=tuple(sim.get("scale_tags", SimilarityConfig.scale_tags)),
            base_scale=sim.get("base_scale", SimilarityConfig.base_scale),
            rng_seed=sim.get("rng_seed", 0),
        ),
        normalization=NormalizationScheme(
            kind=norm.get("kind", "over_max"),
            lam=norm.get("lambda"),
            combine=norm.get("combine", "sum"),
        ),
        propagation=PropagationConfig(
            alpha=prop.get("alpha", 0.25), sigma_p=prop.get("sigma_p", 5.0)
        ),
    )


@dataclass
class PipelineConfig:
    """Everything the four pipeline stages need, serialized with the project."""

    method: str = "matching"
    match_algo: str = "greedy"
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    normalization: NormalizationScheme = field(default_factory=NormalizationScheme)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.match_algo not in MATCH_ALGOS:
            raise ValueError(f"unknown match algorithm {self.match_algo!r}")

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "match_algo": self.match_algo,
            "similarity": self.similarity.echo(),
            "normalization": self.normalization.echo(),
            "propagation": self.propagation.echo(),
        }

    from_json = staticmethod(_config_from_json)


class ImageStore:
    """Image files for UI display, looked up by illustration id."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)

    def path_for(self, illustration_id: str) -> Path | None:
        if any(sep in illustration_id for sep in ("/", "\\", "..")):
            return None
        for suffix in _IMAGE_SUFFIXES:
            candidate = self.root / f"{illustration_id}{suffix}"
            if candidate.is_file():
                return candidate
        return None


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _digest(*parts: bytes | str) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            part = part.encode()
        h.update(part)
        h.update(b"\x00")
    return h.hexdigest()[:16]


class Project:
    """One collation project; all mutation goes through a single writer lock.

    Reads never wait on pipeline compute: stages snapshot their inputs under
    the lock, compute unlocked, then commit results under the lock again.
    """

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        meta_path = self.root / "project.json"
        if not meta_path.is_file():
            raise ProjectError(f"not a project directory: {self.root}")
        meta = json.loads(meta_path.read_text())
        self.project_id: str = meta["project_id"]
        self.revision: int = int(meta["revision"])
        self.manuscripts: list[dict] = meta["manuscripts"]
        self.config = PipelineConfig.from_json(meta.get("config", {}))
        self._stage_hashes: dict[str, str] = meta.get("stage_hashes", {})
        self._lock = threading.RLock()
        self._features: dict[str, ManuscriptFeatures] = {}
        self.images = ImageStore(self.root / "images")

    @classmethod
    def create(
        cls,
        root: Path | str,
        project_id: str,
        manifests: dict[str, Path | str],
        config: PipelineConfig | None = None,
    ) -> "Project":
        """Lay out a new project directory referencing existing manifests."""
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        for sub in ("matrices", "annotations", "matches", "images"):
            (root / sub).mkdir(exist_ok=True)
        entries = []
        for ms_id, manifest in manifests.items():
            manifest = Path(manifest)
            load_manuscript(manifest)  # validate up front
            entries.append({"id": ms_id, "manifest": os.path.relpath(manifest, root)})
        meta = {
            "project_id": project_id,
            "revision": 0,
            "manuscripts": entries,
            "config": (config or PipelineConfig()).to_json(),
            "stage_hashes": {},
        }
        _atomic_write_text(root / "project.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return cls(root)

    # persistence

    def _save_meta(self) -> None:
        meta = {
            "project_id": self.project_id,
            "revision": self.revision,
            "manuscripts": self.manuscripts,
            "config": self.config.to_json(),
            "stage_hashes": self._stage_hashes,
        }
        _atomic_write_text(self.root / "project.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")

    def manuscript_ids(self) -> list[str]:
        return [m["id"] for m in self.manuscripts]

    def _manifest_path(self, ms_id: str) -> Path:
        for m in self.manuscripts:
            if m["id"] == ms_id:
                return self.root / m["manifest"]
        raise UnknownManuscriptError(f"unknown manuscript {ms_id!r}")

    def manuscript(self, ms_id: str) -> ManuscriptFeatures:
        with self._lock:
            if ms_id not in self._features:
                self._features[ms_id] = load_manuscript(self._manifest_path(ms_id))
            return self._features[ms_id]

    def pair_key(self, a: str, b: str) -> str:
        self._manifest_path(a)
        self._manifest_path(b)
        if a == b:
            raise ProjectError("a pair needs two distinct manuscripts")
        return f"{a}--{b}"

    # matrices and annotations on disk

    def matrix_path(self, key: str, provenance: str) -> Path:
        return self.root / "matrices" / f"{key}.{self.config.method}.{provenance}.json"

    def matrix(self, key: str, provenance: str) -> SimilarityMatrix | None:
        path = self.matrix_path(key, provenance)
        return load_matrix(path) if path.is_file() else None

    def best_matrix(self, key: str) -> tuple[str, SimilarityMatrix] | None:
        for provenance in ("propagated", "normalized", "raw"):
            m = self.matrix(key, provenance)
            if m is not None:
                return provenance, m
        return None

    def _annotation_path(self, key: str) -> Path:
        return self.root / "annotations" / f"{key}.json"

    def annotations(self, key: str) -> CorrespondenceSet:
        path = self._annotation_path(key)
        if path.is_file():
            return load_correspondences(path)
        a, b = key.split("--", 1)
        return CorrespondenceSet((a, b), [])

    def matches_path(self, key: str) -> Path:
        return self.root / "matches" / f"{key}.json"

    def matches(self, key: str) -> CorrespondenceSet | None:
        path = self.matches_path(key)
        return load_correspondences(path) if path.is_file() else None

    # annotation workflow

    def _check_bounds(self, a: str, b: str, i: int, j: int) -> None:
        n_a = len(self.manuscript(a).pyramids)
        n_b = len(self.manuscript(b).pyramids)
        if not (0 <= i < n_a and 0 <= j < n_b):
            raise IndexError(f"pair ({i}, {j}) outside {n_a}x{n_b}")

    def _annotate(self, a: str, b: str, i: int, j: int, status: str) -> int:
        key = self.pair_key(a, b)
        self._check_bounds(a, b, int(i), int(j))
        with self._lock:
            ann = self.annotations(key)
            ann.set_status(int(i), int(j), status, source="manual")
            save_correspondences(ann, self._annotation_path(key))
            self.revision += 1
            self._save_meta()
            return self.revision

    def confirm(self, a: str, b: str, i: int, j: int) -> int:
        """Mark (i, j) as a valid correspondence; returns the new revision."""
        return self._annotate(a, b, i, j, "confirmed")

    def reject(self, a: str, b: str, i: int, j: int) -> int:
        return self._annotate(a, b, i, j, "rejected")

    # pipeline

    def _manuscript_fingerprint(self, ms_id: str) -> str:
        manifest = self._manifest_path(ms_id)
        parts: list[bytes | str] = [manifest.read_bytes()]
        doc = json.loads(manifest.read_text())
        # hash every fmap the manifest references, relative to its directory
        for entry in doc.get("illustrations", []):
            files = [entry["fixed_map"]] + list(entry["scales"].values())
            for name in files:
                parts.append((manifest.parent / name).read_bytes())
        return _digest(*parts)

    def _seed_set(self, key: str, normalized_matrix: SimilarityMatrix) -> SeedSet:
        auto = two_cycle_seeds(normalized_matrix).pairs
        ann = self.annotations(key)
        confirmed = {(e.i, e.j) for e in ann.with_status("confirmed")}
        rejected = {(e.i, e.j) for e in ann.with_status("rejected")}
        return SeedSet(frozenset((auto | confirmed) - rejected), "mixed")

    def run_pipeline(self, a: str, b: str, stages: tuple[str, ...] = STAGES) -> list[str]:
        """Run the requested stages in canonical order; returns those executed.

        A stage whose inputs hash to the value recorded at its last run is
        skipped and does not touch the revision.
        """
        for stage in stages:
            if stage not in STAGES:
                raise ValueError(f"unknown stage {stage!r}")
        key = self.pair_key(a, b)
        cfg = self.config
        executed: list[str] = []

        def commit(stage: str, input_hash: str, write) -> None:
            with self._lock:
                write()
                self._stage_hashes[f"{key}:{stage}"] = input_hash
                self.revision += 1
                self._save_meta()
            executed.append(stage)

        def fresh(stage: str, input_hash: str, *outputs: Path) -> bool:
            return self._stage_hashes.get(f"{key}:{stage}") == input_hash and all(
                p.is_file() for p in outputs
            )

        if "similarity" in stages:
            input_hash = _digest(
                self._manuscript_fingerprint(a),
                self._manuscript_fingerprint(b),
                cfg.method,
                json.dumps(cfg.similarity.echo(), sort_keys=True),
            )
            out = self.matrix_path(key, "raw")
            if not fresh("similarity", input_hash, out):
                matrix = similarity_matrix(
                    self.manuscript(a), self.manuscript(b), cfg.method, cfg.similarity
                )
                commit("similarity", input_hash, lambda: save_matrix(matrix, out))

        if "normalize" in stages:
            raw_path = self.matrix_path(key, "raw")
            if not raw_path.is_file():
                raise StageOrderError("normalize needs a raw similarity matrix; run similarity first")
            input_hash = _digest(
                raw_path.with_suffix(".fmap").read_bytes(),
                json.dumps(cfg.normalization.echo(), sort_keys=True),
            )
            out = self.matrix_path(key, "normalized")
            if not fresh("normalize", input_hash, out):
                result = normalize(load_matrix(raw_path), cfg.normalization)
                commit("normalize", input_hash, lambda: save_matrix(result, out))

        if "propagate" in stages:
            norm_path = self.matrix_path(key, "normalized")
            if not norm_path.is_file():
                raise StageOrderError("propagate needs a normalized matrix; run normalize first")
            norm_matrix = load_matrix(norm_path)
            seeds = self._seed_set(key, norm_matrix)
            input_hash = _digest(
                norm_path.with_suffix(".fmap").read_bytes(),
                json.dumps(sorted(seeds.pairs)),
                json.dumps(cfg.propagation.echo(), sort_keys=True),
            )
            out = self.matrix_path(key, "propagated")
            if not fresh("propagate", input_hash, out):
                result = propagate(norm_matrix, seeds, cfg.propagation)
                commit("propagate", input_hash, lambda: save_matrix(result, out))

        if "match" in stages:
            best = self.best_matrix(key)
            if best is None:
                raise StageOrderError("match needs a similarity matrix; run similarity first")
            provenance, matrix = best
            input_hash = _digest(
                self.matrix_path(key, provenance).with_suffix(".fmap").read_bytes(),
                provenance,
                cfg.match_algo,
            )
            out = self.matches_path(key)
            if not fresh("match", input_hash, out):
                if cfg.match_algo == "greedy":
                    found = greedy_one_to_one(matrix, (a, b))
                else:
                    found = argmax_correspondences(matrix, "rows", (a, b))
                commit("match", input_hash, lambda: save_correspondences(found, out))

        return executed

    # review queries

    def candidates(
        self, a: str, b: str, i: int, k: int = 5, mask_rejected: bool = False
    ) -> dict:
        """Top-k partners of row i from the most processed matrix available."""
        key = self.pair_key(a, b)
        best = self.best_matrix(key)
        if best is None:
            raise StageOrderError("no similarity matrix yet; run the pipeline first")
        provenance, matrix = best
        ann = self.annotations(key)
        status_of = {(e.i, e.j): e.status for e in ann.entries}
        exclude = (
            [j for (qi, j), status in status_of.items() if qi == i and status == "rejected"]
            if mask_rejected
            else []
        )
        ranked = top_k(matrix, int(i), "rows", k=k, exclude=exclude)
        return {
            "query": int(i),
            "provenance": provenance,
            "candidates": [
                {
                    "j": j,
                    "score": score,
                    "status": status_of.get((int(i), j), "none"),
                }
                for j, score in ranked
            ],
        }

    def export(self, a: str, b: str, fmt: str = "json", out_path: Path | str | None = None) -> Path:
        """Write matches merged with annotation statuses; json or csv."""
        if fmt not in ("json", "csv"):
            raise ValueError(f"unknown export format {fmt!r}")
        key = self.pair_key(a, b)
        found = self.matches(key)
        if found is None:
            raise NothingToExportError(f"no matches computed for {key}")
        merged = CorrespondenceSet((a, b), list(found.entries))
        for e in self.annotations(key).entries:
            merged.set_status(e.i, e.j, e.status, source=e.source, score=e.score)
        if out_path is None:
            out_path = self.root / f"{key}.export.{fmt}"
        out_path = Path(out_path)
        if fmt == "json":
            return save_correspondences(merged, out_path)
        return save_correspondences_csv(merged, out_path)
