"""Command line: extract embeddings, transform image sets, run the
robustness benchmark."""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

import click

from . import bench as bench_mod
from .extract import extract_directory
from .models import MissingWeights, load_model
from .transforms import VARIANTS, TransformSpec, transform_directory


@click.group()
def main():
    """Image embedding extraction and transform-robustness benchmark."""


@main.command("extract")
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--model", "model_name", default="dino", show_default=True,
              type=click.Choice(["dino", "stub"]))
@click.option("--batch-size", default=16, show_default=True)
def extract_cmd(images_dir, out_path, model_name, batch_size):
    """Embed every image in a directory into one PHEM file."""
    try:
        model = load_model(model_name)
    except MissingWeights as exc:
        sys.stderr.write(json.dumps({"error": "MissingWeights", "detail": str(exc)}) + "\n")
        sys.exit(1)
    report = extract_directory(images_dir, out_path, model, batch_size=batch_size)
    click.echo(f"embedded {report.count} images -> {out_path}"
               + (f" (skipped {len(report.skipped)})" if report.skipped else ""))


@main.command("transform")
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--variant", default="none", show_default=True,
              type=click.Choice(list(VARIANTS)))
@click.option("--seed", default=0, show_default=True)
def transform_cmd(images_dir, out_dir, variant, seed):
    """Apply the screenshot-simulation pipeline plus one variant."""
    spec = TransformSpec(variant=variant, seed=seed)
    manifest = transform_directory(images_dir, out_dir, spec)
    click.echo(f"transformed {len(manifest['images'])} images -> {out_dir} "
               f"(variant={variant}, seed={seed})")


@main.command("bench")
@click.option("--original", "orig_path", required=True, type=click.Path(exists=True))
@click.option("--transformed", "trans_path", required=True, type=click.Path(exists=True))
@click.option("--model-file", "model_path", required=True, type=click.Path())
@click.option("--variant", default="none", show_default=True)
@click.option("--dim", default=bench_mod.HASH_BITS, show_default=True,
              help="Hash width when fitting a new whitening model.")
@click.option("--fit/--no-fit", default=False,
              help="Fit the whitening model on the original embeddings first.")
@click.option("--roc", "roc_path", type=click.Path(), default=None,
              help="Also write the 97-point ROC CSV here.")
def bench_cmd(orig_path, trans_path, model_path, variant, dim, fit, roc_path):
    """Measure bit accuracy of transformed vs. original embeddings."""
    try:
        if fit or not Path(model_path).exists():
            bench_mod.fit_model(orig_path, model_path, dim=dim)
        with tempfile.TemporaryDirectory() as work:
            orig = bench_mod.hash_embeddings(model_path, orig_path, work)
            trans = bench_mod.hash_embeddings(model_path, trans_path, work)
    except RuntimeError as exc:
        sys.stderr.write(json.dumps({"error": "BenchFailed", "detail": str(exc)}) + "\n")
        sys.exit(1)
    k = len(next(iter(orig.values()))) * 4
    report = bench_mod.run_bench(orig, trans, variant=variant, k=k,
                                 taus=tuple(t for t in (80, 88) if t <= k) or (k,))
    click.echo(report.line())
    if roc_path:
        common = [i for i in orig if i in trans]
        bench_mod.write_roc_csv(roc_path, [(orig[i], trans[i]) for i in common], k=k)
        click.echo(f"wrote ROC to {roc_path}")
