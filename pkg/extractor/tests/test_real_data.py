"""Real-data robustness: DINOv2 embeddings of DiffusionDB images under the
screenshot+blur transform.

Requires the pretrained weights and a local image set; both are supplied
through the environment, so the test skips (rather than silently passes)
when either is missing:

* ``EMBEDBENCH_DIFFUSIONDB`` — directory with >= 1,000 images.
* network or cache access for ``facebook/dinov2-with-registers-base``.
"""

import os
from pathlib import Path

import pytest

from embedbench import bench
from embedbench.extract import extract_directory
from embedbench.transforms import TransformSpec, transform_directory


def _dataset_dir():
    d = os.environ.get("EMBEDBENCH_DIFFUSIONDB")
    return Path(d) if d and Path(d).is_dir() else None


@pytest.mark.slow
def test_blur_bit_accuracy_on_diffusiondb(tmp_path):
    dataset = _dataset_dir()
    if dataset is None:
        pytest.skip("EMBEDBENCH_DIFFUSIONDB not set; real image set unavailable")
    from embedbench.models import Dinov2Embedder, MissingWeights
    try:
        model = Dinov2Embedder()
    except MissingWeights as exc:
        pytest.skip(f"pretrained DINOv2 weights unavailable: {exc}")

    from embedbench.transforms import list_images
    if len(list_images(dataset)) < 1000:
        pytest.skip("need >= 1,000 images in EMBEDBENCH_DIFFUSIONDB")

    orig_phem = tmp_path / "orig.phem"
    extract_directory(dataset, orig_phem, model)
    trans_dir = tmp_path / "blurred"
    transform_directory(dataset, trans_dir, TransformSpec(variant="blur", seed=0))
    trans_phem = tmp_path / "trans.phem"
    extract_directory(trans_dir, trans_phem, model)

    model_path = tmp_path / "model.phwm"
    bench.fit_model(orig_phem, model_path)
    orig = bench.hash_embeddings(model_path, orig_phem, tmp_path)
    trans = {k.rsplit(".", 1)[0]: v
             for k, v in bench.hash_embeddings(model_path, trans_phem, tmp_path).items()}
    orig = {k.rsplit(".", 1)[0]: v for k, v in orig.items()}

    # Untransformed self-pairs must be exact.
    assert bench.run_bench(orig, orig).accuracy == 1.0

    report = bench.run_bench(orig, trans, variant="blur")
    print(f"\n[REAL DATA] {report.line()}")
    assert report.accuracy >= 0.76
