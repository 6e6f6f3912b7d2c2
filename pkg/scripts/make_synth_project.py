#!/usr/bin/env python3
"""Build a ready-to-serve project directory from synthetic manuscripts.

Writes the two feature stores, the project metadata, and the generator's
ground truth, then optionally runs the full pipeline so the review server
has matrices to serve immediately:

    python scripts/make_synth_project.py --out /tmp/demo --run
    collate serve --project /tmp/demo/project
"""

from __future__ import annotations

import argparse
from pathlib import Path

from collate.correspondence import Correspondence, CorrespondenceSet, save_correspondences
from collate.features import local_permutation, save_manuscript, synth_manuscripts
from collate.project import PipelineConfig, Project
from collate.similarity import SimilarityConfig


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, required=True, help="directory to create")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--noise", type=float, default=1.4)
    p.add_argument("--max-shift", type=int, default=3)
    p.add_argument("--method", default="matching", choices=("features", "matching", "trans"))
    p.add_argument("--run", action="store_true", help="run all four stages after creation")
    return p.parse_args()


def main() -> None:
    args = parse_args()
    out: Path = args.out
    perm = local_permutation(args.seed + 1, args.n, max_shift=args.max_shift)
    ms_a, ms_b, gt_pairs = synth_manuscripts(
        args.seed, args.n, args.channels, args.noise, perm, scale_tags=(4, 5, 6), fixed_size=4
    )
    manifest_a = save_manuscript(ms_a, out / "features" / "a")
    manifest_b = save_manuscript(ms_b, out / "features" / "b")
    gt = CorrespondenceSet(
        (ms_a.manuscript_id, ms_b.manuscript_id),
        [Correspondence(i, j, "confirmed") for i, j in gt_pairs],
    )
    save_correspondences(gt, out / "ground_truth.json")

    config = PipelineConfig(
        method=args.method,
        similarity=SimilarityConfig(scale_tags=(4, 5, 6), base_scale=5),
    )
    project = Project.create(
        out / "project",
        f"synth-{args.seed}",
        {ms_a.manuscript_id: manifest_a, ms_b.manuscript_id: manifest_b},
        config,
    )
    print(f"project at {project.root} (manuscripts {project.manuscript_ids()})")
    if args.run:
        executed = project.run_pipeline(ms_a.manuscript_id, ms_b.manuscript_id)
        print(f"executed stages: {executed}; revision {project.revision}")


if __name__ == "__main__":
    main()
