"""Batch extraction: images directory -> PHEM embedding file.

Each embedding's id is the source filename; a sidecar JSON records the
model name, pooling choice, and input-size policy so downstream readers
know exactly how the vectors were produced.  Undecodable files are
skipped with a logged warning rather than aborting the batch.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .models import MODEL_INPUT_SIZE
from .phem import write_phem
from .transforms import list_images

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractReport:
    count: int
    skipped: list[str]
    out_path: str


def extract_directory(images_dir, out_path, model, batch_size: int = 16) -> ExtractReport:
    """Embed every decodable image in a directory into one PHEM file."""
    paths = list_images(images_dir)
    ids: list[str] = []
    skipped: list[str] = []
    rows = []
    batch_imgs: list[Image.Image] = []

    def flush():
        if batch_imgs:
            rows.append(model.embed_batch(batch_imgs))
            for im in batch_imgs:
                im.close()
            batch_imgs.clear()

    for path in paths:
        try:
            im = Image.open(path)
            im.load()
        except (UnidentifiedImageError, OSError) as exc:
            log.warning("skipping undecodable image %s: %s", path.name, exc)
            skipped.append(path.name)
            continue
        ids.append(path.name)
        batch_imgs.append(im)
        if len(batch_imgs) >= batch_size:
            flush()
    flush()

    import numpy as np
    x = np.concatenate(rows, axis=0) if rows else np.zeros((0, model.dim), dtype=np.float32)
    write_phem(out_path, x, ids)
    with open(str(out_path) + ".meta.json", "w") as f:
        json.dump({
            "model": model.name,
            "pooling": model.pooling,
            "input_size": MODEL_INPUT_SIZE,
            "dim": model.dim,
            "count": len(ids),
            "skipped": skipped,
        }, f, indent=2, sort_keys=True)
    return ExtractReport(count=len(ids), skipped=skipped, out_path=str(out_path))
