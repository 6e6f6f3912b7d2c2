"""Command line front end: feature checks, pipeline stages, eval, server."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .correspondence import (
    argmax_correspondences,
    evaluate,
    greedy_one_to_one,
    load_correspondences,
    load_correspondences_csv,
    save_correspondences,
    save_correspondences_csv,
    accuracy,
)
from .features import FormatError, ManifestError, load_manuscript
from .matrices import (
    NORMALIZATION_KINDS,
    COMBINE_MODES,
    NormalizationScheme,
    PropagationConfig,
    SeedSet,
    load_matrix,
    normalize,
    propagate,
    save_matrix,
    three_cycle_seeds,
    two_cycle_seeds,
)
from .similarity import METHODS, SimilarityConfig, similarity_matrix


@click.group()
def main() -> None:
    """Find corresponding illustrations across manuscript copies."""


@main.command("features-check")
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
def features_check(manifest: Path) -> None:
    """Validate a feature manifest and print a summary."""
    try:
        ms = load_manuscript(manifest)
    except (FormatError, ManifestError) as exc:
        click.echo(f"INVALID ({type(exc).__name__}): {exc}", err=True)
        sys.exit(1)
    n = len(ms.pyramids)
    tags = sorted({tag for p in ms.pyramids for tag, _ in p.scale_maps})
    channels = ms.pyramids[0].channels if n else 0
    click.echo(f"OK: {ms.manuscript_id}: {n} illustrations, scales {tags}, {channels} channels")


@main.command("sim")
@click.argument("manifest_a", type=click.Path(exists=True, path_type=Path))
@click.argument("manifest_b", type=click.Path(exists=True, path_type=Path))
@click.option("--method", type=click.Choice(METHODS), default="matching", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="RNG seed for the trans method.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--sigma", type=float, default=None, help="Displacement tolerance override.")
@click.option("--scales", default=None, help="Comma separated scale tags, e.g. 18,19,20,21,22.")
@click.option("--base-scale", type=int, default=None)
@click.option("-o", "--out", required=True, type=click.Path(path_type=Path))
def sim(manifest_a, manifest_b, method, seed, workers, sigma, scales, base_scale, out) -> None:
    """Compute the raw similarity matrix between two manuscripts."""
    kwargs: dict = {"rng_seed": seed}
    if sigma is not None:
        kwargs["sigma"] = sigma
    if scales is not None:
        kwargs["scale_tags"] = tuple(int(t) for t in scales.split(","))
    if base_scale is not None:
        kwargs["base_scale"] = base_scale
    cfg = SimilarityConfig(**kwargs)
    a = load_manuscript(manifest_a)
    b = load_manuscript(manifest_b)
    matrix = similarity_matrix(a, b, method, cfg, parallelism=workers)
    path = save_matrix(matrix, out)
    click.echo(f"{matrix.rows}x{matrix.cols} {method} matrix -> {path}")


def _derived_out(matrix_path: Path, provenance: str) -> Path:
    return matrix_path.with_name(f"{matrix_path.stem}.{provenance}.json")


@main.command("normalize")
@click.argument("matrix", type=click.Path(exists=True, path_type=Path))
@click.option("--scheme", type=click.Choice(NORMALIZATION_KINDS), default="over_max", show_default=True)
@click.option("--combine", type=click.Choice(COMBINE_MODES), default="sum", show_default=True)
@click.option("--lam", type=float, default=None, help="Softmax sharpness (softmax schemes only).")
@click.option("-o", "--out", type=click.Path(path_type=Path), default=None)
def normalize_cmd(matrix, scheme, combine, lam, out) -> None:
    """Rescale a raw matrix by row and column statistics."""
    m = load_matrix(matrix)
    result = normalize(m, NormalizationScheme(kind=scheme, lam=lam, combine=combine))
    path = save_matrix(result, out or _derived_out(matrix, "normalized"))
    click.echo(f"normalized ({scheme}, {combine}) -> {path}")


def _load_seed_pairs(path: Path) -> set[tuple[int, int]]:
    cs = load_correspondences_csv(path) if path.suffix == ".csv" else load_correspondences(path)
    return {(e.i, e.j) for e in cs.entries if e.status != "rejected"}


@main.command("propagate")
@click.argument("matrix", type=click.Path(exists=True, path_type=Path))
@click.option("--seeds", "seed_mode", type=click.Choice(["2cycle", "3cycle", "file"]), default="2cycle", show_default=True)
@click.option("--seed-file", type=click.Path(exists=True, path_type=Path), default=None, help="Correspondence file; rejected entries are skipped.")
@click.option("--bc", type=click.Path(exists=True, path_type=Path), default=None, help="b-to-c matrix for 3cycle seeding.")
@click.option("--ac", type=click.Path(exists=True, path_type=Path), default=None, help="a-to-c matrix for 3cycle seeding.")
@click.option("--alpha", type=float, default=0.25, show_default=True)
@click.option("--sigma-p", type=float, default=5.0, show_default=True)
@click.option("-o", "--out", type=click.Path(path_type=Path), default=None)
def propagate_cmd(matrix, seed_mode, seed_file, bc, ac, alpha, sigma_p, out) -> None:
    """Diffuse trusted correspondences into their matrix neighborhoods."""
    m = load_matrix(matrix)
    if seed_mode == "2cycle":
        seeds = two_cycle_seeds(m)
    elif seed_mode == "3cycle":
        if bc is None or ac is None:
            raise click.UsageError("--seeds 3cycle needs --bc and --ac matrices")
        seeds, _, _ = three_cycle_seeds(m, load_matrix(bc), load_matrix(ac))
    else:
        if seed_file is None:
            raise click.UsageError("--seeds file needs --seed-file")
        seeds = SeedSet(frozenset(_load_seed_pairs(seed_file)), "confirmed")
    result = propagate(m, seeds, PropagationConfig(alpha=alpha, sigma_p=sigma_p))
    path = save_matrix(result, out or _derived_out(matrix, "propagated"))
    click.echo(f"propagated {len(seeds.pairs)} seeds ({seed_mode}) -> {path}")


@main.command("match")
@click.argument("matrix", type=click.Path(exists=True, path_type=Path))
@click.option("--algo", type=click.Choice(["argmax", "greedy"]), default="greedy", show_default=True)
@click.option("-o", "--out", type=click.Path(path_type=Path), default=None)
def match(matrix, algo, out) -> None:
    """Extract correspondences from a similarity matrix."""
    m = load_matrix(matrix)
    if algo == "greedy":
        found = greedy_one_to_one(m)
    else:
        found = argmax_correspondences(m, "rows")
    out = Path(out) if out else matrix.with_name(f"{matrix.stem}.matches.json")
    if out.suffix == ".csv":
        path = save_correspondences_csv(found, out)
    else:
        path = save_correspondences(found, out)
    click.echo(f"{len(found)} matches ({algo}) -> {path}")


def _parse_metrics(spec: str) -> tuple[list[str], list[int]]:
    """Parse "acc,recall_n,map_r,nn:1,5,10,20" into metric names and nn ks."""
    names: list[str] = []
    ks: list[int] = []
    take_ks = False
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if token.isdigit() and take_ks:
            ks.append(int(token))
            continue
        take_ks = False
        if token.startswith("nn"):
            names.append("nn")
            take_ks = True
            rest = token[2:]
            if rest.startswith(":") and rest[1:].isdigit():
                ks.append(int(rest[1:]))
        elif token in ("acc", "recall_n", "map_r"):
            names.append(token)
        else:
            raise click.UsageError(f"unknown metric {token!r}")
    return names, ks or [1, 5, 10, 20]


@main.command("eval")
@click.argument("source", type=click.Path(exists=True, path_type=Path))
@click.option("--gt", required=True, type=click.Path(exists=True, path_type=Path), help="Ground-truth correspondence file.")
@click.option("--metrics", default="acc,recall_n,map_r,nn:1,5,10,20", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of the text table.")
def eval_cmd(source, gt, metrics, as_json) -> None:
    """Score a matrix, or a matches file, against annotated ground truth.

    SOURCE may be a similarity matrix header (computes all metrics) or a
    correspondence file (accuracy only, read as predictions for both
    directions).
    """
    gt_set = load_correspondences_csv(gt) if gt.suffix == ".csv" else load_correspondences(gt)
    names, ks = _parse_metrics(metrics)
    if source.suffix == ".csv":
        report = accuracy(load_correspondences_csv(source), load_correspondences_csv(source), gt_set)
    elif "entries" in json.loads(source.read_text()):
        pred = load_correspondences(source)
        report = accuracy(pred, pred, gt_set)
    else:
        report = evaluate(load_matrix(source), gt_set, ks=ks, metrics=names)
    click.echo(json.dumps(report.to_json(), indent=2) if as_json else report.render_text())


@main.command("serve")
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve_cmd(project_dir, host, port) -> None:
    """Serve the review API for one project directory."""
    from .server import serve

    serve(project_dir, host=host, port=port)


if __name__ == "__main__":
    main()
