"""Image embedding extraction and transform-robustness benchmark.

Produces 768-dim image embeddings (DINOv2 ViT-B/14 with registers, or a
deterministic stub), applies a screenshot-simulation transform suite,
and measures how many perceptual-hash bits survive each transform by
driving the registry package through its CLI and file formats.
"""

from .bench import BenchReport, bit_accuracy, exact_fpr, match_score, run_bench, write_roc_csv
from .extract import ExtractReport, extract_directory
from .models import Dinov2Embedder, MissingWeights, StubEmbedder, load_model
from .phem import read_phem, write_phem
from .transforms import VARIANTS, TransformSpec, apply_transform, transform_directory

__version__ = "0.1.0"

__all__ = [
    "BenchReport", "bit_accuracy", "exact_fpr", "match_score", "run_bench",
    "write_roc_csv", "ExtractReport", "extract_directory", "Dinov2Embedder",
    "MissingWeights", "StubEmbedder", "load_model", "read_phem", "write_phem",
    "VARIANTS", "TransformSpec", "apply_transform", "transform_directory",
]
