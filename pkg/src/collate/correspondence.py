"""Illustration-level correspondences: extraction, bookkeeping, evaluation.

Predictions come out of a score matrix either as per-query argmax or as a
greedy one-to-one assignment.  Correspondence sets also carry reviewer
verdicts (confirmed / rejected) and ground truth for evaluation.  Metrics
are computed on annotated pairs only and reported as percentages.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .matrices import SimilarityMatrix

STATUSES = ("predicted", "confirmed", "rejected")
Direction = Literal["rows", "cols"]


class EmptyGroundTruthError(Exception):
    """A metric that divides by the ground-truth count got none."""


@dataclass(frozen=True)
class Correspondence:
    i: int
    j: int
    status: str = "predicted"
    score: float = 0.0
    source: str = "argmax"

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")


@dataclass
class CorrespondenceSet:
    """Entries for one ordered manuscript pair; (i, j) unique within the set."""

    pair_id: tuple[str, str] = ("", "")
    entries: list[Correspondence] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.pair_id = (str(self.pair_id[0]), str(self.pair_id[1]))
        seen = set()
        for e in self.entries:
            if (e.i, e.j) in seen:
                raise ValueError(f"duplicate correspondence ({e.i}, {e.j})")
            seen.add((e.i, e.j))

    def __len__(self) -> int:
        return len(self.entries)

    def pairs(self) -> set[tuple[int, int]]:
        return {(e.i, e.j) for e in self.entries}

    def with_status(self, status: str) -> list[Correspondence]:
        return [e for e in self.entries if e.status == status]

    def set_status(self, i: int, j: int, status: str, source: str = "manual", score: float = 0.0) -> None:
        """Insert or update the entry at (i, j); an existing score is kept."""
        if status not in STATUSES:
            raise ValueError(f"unknown status {status!r}")
        for k, e in enumerate(self.entries):
            if (e.i, e.j) == (i, j):
                self.entries[k] = Correspondence(i, j, status, e.score, source)
                return
        self.entries.append(Correspondence(i, j, status, score, source))


@dataclass
class EvalReport:
    """Metric values in percent; None where the metric was not computed.

    n_annotated is carried so renderings can show "value (count)".
    """

    accuracy_dir1: float | None = None
    accuracy_dir2: float | None = None
    accuracy_avg: float | None = None
    recall_at_n: float | None = None
    map_at_r: float | None = None
    nn_recall: dict[int, float] = field(default_factory=dict)
    n_annotated: int = 0

    def to_json(self) -> dict:
        out = asdict(self)
        out["nn_recall"] = {str(k): v for k, v in self.nn_recall.items()}
        return out

    def render_text(self) -> str:
        """Aligned table, one metric per line, values as "70.5 (295)"."""
        rows = []
        def add(name: str, value: float | None) -> None:
            shown = "undefined" if value is None else f"{value:.1f} ({self.n_annotated})"
            rows.append((name, shown))
        add("accuracy dir1", self.accuracy_dir1)
        add("accuracy dir2", self.accuracy_dir2)
        add("accuracy avg", self.accuracy_avg)
        add("recall@N", self.recall_at_n)
        add("map@R", self.map_at_r)
        for k in sorted(self.nn_recall):
            add(f"nn-recall@{k}", self.nn_recall[k])
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {shown}" for name, shown in rows)


def argmax_correspondences(
    matrix: SimilarityMatrix,
    direction: Direction = "rows",
    pair_id: tuple[str, str] = ("", ""),
) -> CorrespondenceSet:
    """Best partner per query index; ties go to the lowest partner index."""
    v = matrix.values
    entries = []
    if direction == "rows":
        best = np.argmax(v, axis=1)
        for i in range(v.shape[0]):
            j = int(best[i])
            entries.append(Correspondence(i, j, "predicted", float(v[i, j]), "argmax"))
    elif direction == "cols":
        best = np.argmax(v, axis=0)
        for j in range(v.shape[1]):
            i = int(best[j])
            entries.append(Correspondence(i, j, "predicted", float(v[i, j]), "argmax"))
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return CorrespondenceSet(pair_id, entries)


def _descending_cells(v: np.ndarray) -> np.ndarray:
    """Flat indices of all cells, score descending, ties by (lowest i, then j)."""
    flat = v.ravel()
    return np.argsort(-flat, kind="stable")


def greedy_one_to_one(
    matrix: SimilarityMatrix, pair_id: tuple[str, str] = ("", "")
) -> CorrespondenceSet:
    """One-to-one assignment by repeatedly taking the best remaining cell.

    The globally best unconsumed cell (ties: lowest row, then column) is
    accepted when both its row and column are still free, and consumed either
    way; the loop ends after min(rows, cols) acceptances.
    """
    v = matrix.values
    rows, cols = v.shape
    target = min(rows, cols)
    used_rows = np.zeros(rows, dtype=bool)
    used_cols = np.zeros(cols, dtype=bool)
    entries = []
    for flat in _descending_cells(v):
        i, j = divmod(int(flat), cols)
        if used_rows[i] or used_cols[j]:
            continue
        used_rows[i] = True
        used_cols[j] = True
        entries.append(Correspondence(i, j, "predicted", float(v[i, j]), "greedy"))
        if len(entries) == target:
            break
    entries.sort(key=lambda e: (e.i, e.j))
    return CorrespondenceSet(pair_id, entries)


def top_k(
    matrix: SimilarityMatrix,
    index: int,
    direction: Direction = "rows",
    k: int = 5,
    exclude: Iterable[int] = (),
) -> list[tuple[int, float]]:
    """Best k partners of one query, ties to the lowest index.

    exclude drops the given partner indices before truncation; fewer than k
    results come back when the axis is short.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    v = matrix.values
    if direction == "rows":
        if not 0 <= index < v.shape[0]:
            raise IndexError(f"row {index} outside 0..{v.shape[0] - 1}")
        axis = v[index, :]
    elif direction == "cols":
        if not 0 <= index < v.shape[1]:
            raise IndexError(f"column {index} outside 0..{v.shape[1] - 1}")
        axis = v[:, index]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    dropped = set(int(e) for e in exclude)
    order = np.argsort(-axis, kind="stable")
    out = []
    for idx in order:
        if int(idx) in dropped:
            continue
        out.append((int(idx), float(axis[idx])))
        if len(out) == k:
            break
    return out


def _prediction_map(predictions: CorrespondenceSet, key: Direction) -> dict[int, int]:
    """query -> predicted partner; first entry wins if a query repeats."""
    out: dict[int, int] = {}
    for e in predictions.entries:
        q, p = (e.i, e.j) if key == "rows" else (e.j, e.i)
        out.setdefault(q, p)
    return out


def accuracy(
    predictions_dir1: CorrespondenceSet,
    predictions_dir2: CorrespondenceSet,
    gt: CorrespondenceSet,
) -> EvalReport:
    """Fraction of annotated pairs whose query predicts its annotated partner.

    dir1 reads predictions as row -> column, dir2 as column -> row; the
    report carries both and their mean.  Empty ground truth leaves the
    accuracy fields undefined rather than zero.
    """
    n = len(gt.entries)
    if n == 0:
        return EvalReport(n_annotated=0)
    map1 = _prediction_map(predictions_dir1, "rows")
    map2 = _prediction_map(predictions_dir2, "cols")
    hits1 = sum(1 for e in gt.entries if map1.get(e.i) == e.j)
    hits2 = sum(1 for e in gt.entries if map2.get(e.j) == e.i)
    a1 = 100.0 * hits1 / n
    a2 = 100.0 * hits2 / n
    return EvalReport(
        accuracy_dir1=a1, accuracy_dir2=a2, accuracy_avg=(a1 + a2) / 2.0, n_annotated=n
    )


def recall_at_n(matrix: SimilarityMatrix, gt: CorrespondenceSet, one_to_one: bool = False) -> float:
    """Share of the N = |gt| best-scoring cells that are annotated pairs.

    Cells rank globally, score descending, ties by (lowest row, column).
    With one_to_one=True a cell is only retrieved when its row and column are
    both unused so far, mirroring the greedy assignment.
    """
    n = len(gt.entries)
    if n == 0:
        raise EmptyGroundTruthError("recall@N needs at least one annotated pair")
    v = matrix.values
    truth = gt.pairs()
    rows, cols = v.shape
    used_rows = np.zeros(rows, dtype=bool)
    used_cols = np.zeros(cols, dtype=bool)
    taken = 0
    hits = 0
    for flat in _descending_cells(v):
        i, j = divmod(int(flat), cols)
        if one_to_one:
            if used_rows[i] or used_cols[j]:
                continue
            used_rows[i] = True
            used_cols[j] = True
        taken += 1
        if (i, j) in truth:
            hits += 1
        if taken == n:
            break
    return 100.0 * hits / n


def map_at_r(matrix: SimilarityMatrix, gt: CorrespondenceSet) -> float:
    """Mean average precision over annotated query rows.

    Each annotated row ranks all columns (ties: lowest index); the average
    precision sums precision at every relevant hit and divides by that row's
    number of annotated partners.
    """
    if len(gt.entries) == 0:
        raise EmptyGroundTruthError("map@R needs at least one annotated pair")
    relevant: dict[int, set[int]] = {}
    for e in gt.entries:
        relevant.setdefault(e.i, set()).add(e.j)
    v = matrix.values
    scores = []
    for i in sorted(relevant):
        ranking = np.argsort(-v[i, :], kind="stable")
        rel = relevant[i]
        hits = 0
        precision_sum = 0.0
        for rank, j in enumerate(ranking, start=1):
            if int(j) in rel:
                hits += 1
                precision_sum += hits / rank
        scores.append(precision_sum / len(rel))
    return 100.0 * float(np.mean(scores))


def nn_recall(matrix: SimilarityMatrix, gt: CorrespondenceSet, ks: Sequence[int]) -> dict[int, float]:
    """Per k: share of annotated pairs whose partner ranks in the row's top k."""
    if len(gt.entries) == 0:
        raise EmptyGroundTruthError("nn-recall needs at least one annotated pair")
    for k in ks:
        if k < 1:
            raise ValueError("every k must be at least 1")
    out = {}
    for k in ks:
        hits = 0
        for e in gt.entries:
            neighbours = top_k(matrix, e.i, "rows", k)
            if any(j == e.j for j, _ in neighbours):
                hits += 1
        out[int(k)] = 100.0 * hits / len(gt.entries)
    return out


def evaluate(
    matrix: SimilarityMatrix,
    gt: CorrespondenceSet,
    ks: Sequence[int] = (1, 5, 10, 20),
    metrics: Sequence[str] = ("acc", "recall_n", "map_r", "nn"),
) -> EvalReport:
    """Assemble a report with the requested metrics from one matrix."""
    report = EvalReport(n_annotated=len(gt.entries))
    if "acc" in metrics:
        pred1 = argmax_correspondences(matrix, "rows")
        pred2 = argmax_correspondences(matrix, "cols")
        report = accuracy(pred1, pred2, gt)
    if len(gt.entries) > 0:
        if "recall_n" in metrics:
            report.recall_at_n = recall_at_n(matrix, gt)
        if "map_r" in metrics:
            report.map_at_r = map_at_r(matrix, gt)
        if "nn" in metrics and ks:
            report.nn_recall = nn_recall(matrix, gt, ks)
    return report


def save_correspondences(cs: CorrespondenceSet, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "pair": list(cs.pair_id),
        "entries": [
            {"i": e.i, "j": e.j, "status": e.status, "score": e.score, "source": e.source}
            for e in cs.entries
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


def load_correspondences(path: Path | str) -> CorrespondenceSet:
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    entries = [
        Correspondence(
            int(e["i"]), int(e["j"]),
            e.get("status", "predicted"), float(e.get("score", 0.0)), e.get("source", "file"),
        )
        for e in doc["entries"]
    ]
    pair = doc.get("pair", ["", ""])
    return CorrespondenceSet((pair[0], pair[1]), entries)


def save_correspondences_csv(cs: CorrespondenceSet, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "status", "score", "source"])
        for e in cs.entries:
            writer.writerow([e.i, e.j, e.status, repr(e.score), e.source])
    return path


def load_correspondences_csv(path: Path | str, pair_id: tuple[str, str] = ("", "")) -> CorrespondenceSet:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        entries = [
            Correspondence(int(r["i"]), int(r["j"]), r["status"], float(r["score"]), r["source"])
            for r in reader
        ]
    return CorrespondenceSet(pair_id, entries)
