"""Embedding models behind one interface.

The benchmark only needs "image in, 768-dim vector out, deterministic in
eval mode".  Two implementations:

* :class:`Dinov2Embedder` — the real vision transformer (ViT-B/14 with
  register tokens) through the ``transformers`` library; requires the
  pretrained weights to be downloadable or cached.
* :class:`StubEmbedder` — a deterministic low-frequency projection used
  when no weights are available.  It captures coarse image content (a
  downsampled grayscale grid pushed through a fixed random projection),
  which is enough to exercise every pipeline surface, but its robustness
  numbers say nothing about the real model's.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

EMBEDDING_DIM = 768
MODEL_INPUT_SIZE = 224  # pixels per side after resize; multiple of the 14-px patch

DINO_MODEL_NAME = "facebook/dinov2-with-registers-base"


class MissingWeights(RuntimeError):
    """Pretrained model weights are not available in this environment."""


class StubEmbedder:
    """Deterministic stand-in embedder: 32x32 grayscale thumbnail through a
    fixed random projection to 768 dims.

    The projection matrix is derived from a fixed seed, so the same image
    always embeds identically, and mild photometric transforms move the
    embedding only moderately (the thumbnail keeps low-frequency content).
    """

    name = "stub-lowfreq-768"
    pooling = "grayscale-thumbnail-projection"
    dim = EMBEDDING_DIM

    _GRID = 32

    def __init__(self):
        rng = np.random.default_rng(20240301)
        d_in = self._GRID * self._GRID
        self._projection = rng.standard_normal((d_in, EMBEDDING_DIM)) / np.sqrt(d_in)

    def embed(self, image: Image.Image) -> np.ndarray:
        thumb = image.convert("L").resize((self._GRID, self._GRID), Image.BILINEAR)
        v = np.asarray(thumb, dtype=np.float64).reshape(-1) / 255.0
        v = v - v.mean()
        z = v @ self._projection
        return z.astype(np.float32)

    def embed_batch(self, images: list[Image.Image]) -> np.ndarray:
        if not images:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack([self.embed(im) for im in images])


class Dinov2Embedder:
    """DINOv2 ViT-B/14 with register tokens; class-token pooling.

    Images are resized to 224x224 (the patch size demands multiples of
    14; the exact policy is our choice and is recorded in the output
    metadata) and normalized with the model's preprocessing statistics.
    """

    name = DINO_MODEL_NAME
    pooling = "class-token"
    dim = EMBEDDING_DIM

    def __init__(self):
        try:
            import torch
            from transformers import AutoImageProcessor, AutoModel
        except ImportError as exc:  # pragma: no cover - env without torch
            raise MissingWeights(f"torch/transformers not installed: {exc}")
        try:
            self._processor = AutoImageProcessor.from_pretrained(DINO_MODEL_NAME)
            self._model = AutoModel.from_pretrained(DINO_MODEL_NAME)
        except Exception as exc:
            raise MissingWeights(
                f"cannot load pretrained weights for {DINO_MODEL_NAME}: {exc}"
            )
        self._torch = torch
        self._model.eval()

    def embed_batch(self, images: list[Image.Image]) -> np.ndarray:
        if not images:
            return np.zeros((0, self.dim), dtype=np.float32)
        rgb = [im.convert("RGB").resize((MODEL_INPUT_SIZE, MODEL_INPUT_SIZE),
                                        Image.BICUBIC) for im in images]
        inputs = self._processor(images=rgb, return_tensors="pt", do_resize=False)
        with self._torch.no_grad():
            out = self._model(**inputs)
        # Class token is the first token of the last hidden state.
        cls = out.last_hidden_state[:, 0, :]
        return cls.cpu().numpy().astype(np.float32)

    def embed(self, image: Image.Image) -> np.ndarray:
        return self.embed_batch([image])[0]


def load_model(name: str = "stub"):
    """Resolve a model by short name: "stub" or "dino"."""
    if name == "stub":
        return StubEmbedder()
    if name == "dino":
        return Dinov2Embedder()
    raise ValueError(f"unknown model {name!r}; expected 'stub' or 'dino'")


def dino_weights_available() -> bool:
    """True when the pretrained DINOv2 weights can actually be loaded."""
    try:
        Dinov2Embedder()
    except MissingWeights:
        return False
    return True


def image_digest(image: Image.Image) -> str:
    """Content hash of the decoded pixel data (not the file bytes)."""
    return hashlib.sha256(
        np.asarray(image.convert("RGB"), dtype=np.uint8).tobytes()
    ).hexdigest()
