"""Perceptual hashing: PCA whitening of image embeddings followed by sign
binarization, plus plaintext Hamming operations and file formats.

The hash of an embedding is obtained by projecting it onto the top
principal components of a training corpus, rescaling each component to
unit variance, and keeping only the sign of each component.  Two
perceptually similar images produce embeddings that land on the same side
of most hyperplanes, so their hashes agree on most bits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateCovariance,
    DimensionMismatch,
    LengthMismatch,
    NonFiniteInput,
    TooFewSamples,
)

DEFAULT_EMBEDDING_DIM = 768
DEFAULT_HASH_BITS = 96

# Eigenvalues below this (after regularization) mean the covariance does not
# have full rank in the requested subspace.
_EIGENVALUE_FLOOR = 1e-10

_PHEM_MAGIC = b"PHEM"
_PHWM_MAGIC = b"PHWM"
_FORMAT_VERSION = 1


def _as_embedding_matrix(embeddings) -> np.ndarray:
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D sample matrix, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("embeddings contain NaN or Inf")
    return x


@dataclass(frozen=True)
class WhiteningModel:
    """Mean vector plus orthonormal projection mapping an embedding to a
    decorrelated, variance-equalized vector.

    ``projection`` rows are the unscaled principal directions; the 1/sqrt
    eigenvalue scaling is applied at transform time so the orthonormality
    of the basis stays testable.
    """

    input_dim: int
    output_dim: int
    mean: np.ndarray          # (input_dim,)
    projection: np.ndarray    # (output_dim, input_dim), orthonormal rows
    eigenvalues: np.ndarray   # (output_dim,), descending, > 0
    sample_count: int

    def __post_init__(self):
        object.__setattr__(self, "mean", np.ascontiguousarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "projection", np.ascontiguousarray(self.projection, dtype=np.float64))
        object.__setattr__(self, "eigenvalues", np.ascontiguousarray(self.eigenvalues, dtype=np.float64))
        self.mean.setflags(write=False)
        self.projection.setflags(write=False)
        self.eigenvalues.setflags(write=False)


@dataclass(frozen=True)
class PerceptualHash:
    """A fixed-length binary fingerprint; the unit of matching."""

    bits: np.ndarray  # uint8 array of 0/1, length k

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if b.ndim != 1 or not np.all((b == 0) | (b == 1)):
            raise ValueError("bits must be a flat 0/1 array")
        object.__setattr__(self, "bits", b)
        b.setflags(write=False)

    @property
    def k(self) -> int:
        return len(self.bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, PerceptualHash) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def complement(self) -> "PerceptualHash":
        return PerceptualHash(1 - self.bits)

    def to_bytes(self) -> bytes:
        return serialize_hash(self)

    def hex(self) -> str:
        return serialize_hash(self).hex()

    @classmethod
    def from_hex(cls, s: str, k: int = DEFAULT_HASH_BITS) -> "PerceptualHash":
        return deserialize_hash(bytes.fromhex(s), k)


def fit_whitening(embeddings, output_dim: int = DEFAULT_HASH_BITS) -> WhiteningModel:
    """Fit a whitening model on a training corpus of embeddings.

    The transformed training set has per-component mean ~0 and covariance
    ~identity.  Deterministic for identical input: eigenvectors are sorted
    by (eigenvalue descending, original index ascending) and sign-fixed so
    each row's largest-magnitude entry is positive.
    """
    x = _as_embedding_matrix(embeddings)
    n, d = x.shape
    if output_dim < 1 or output_dim > d:
        raise DimensionMismatch(f"output_dim={output_dim} not in [1, {d}]")
    if n < output_dim:
        raise TooFewSamples(f"need at least {output_dim} samples, got {n}")

    # Extended-precision mean keeps the fit stable and deterministic.
    mean = np.asarray(x.astype(np.longdouble).mean(axis=0), dtype=np.float64)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)

    eps = 1e-6 * np.trace(cov) / d
    cov[np.diag_indices_from(cov)] += eps

    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(-eigvals, kind="stable")[:output_dim]
    eigvals = eigvals[order]
    basis = eigvecs[:, order].T  # rows are components

    if np.any(eigvals < _EIGENVALUE_FLOOR):
        raise DegenerateCovariance(
            f"covariance rank < {output_dim} after regularization"
        )

    # Resolve the PCA sign ambiguity: largest-magnitude entry positive.
    flip = np.sign(basis[np.arange(output_dim), np.argmax(np.abs(basis), axis=1)])
    flip[flip == 0] = 1.0
    basis = basis * flip[:, None]

    return WhiteningModel(
        input_dim=d,
        output_dim=output_dim,
        mean=mean,
        projection=basis,
        eigenvalues=eigvals,
        sample_count=n,
    )


def apply_whitening(model: WhiteningModel, e) -> np.ndarray:
    """Project an embedding (or a batch) into the whitened space."""
    x = np.asarray(e, dtype=np.float64)
    single = x.ndim == 1
    if x.shape[-1] != model.input_dim:
        raise DimensionMismatch(
            f"embedding dim {x.shape[-1]} != model input dim {model.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("embedding contains NaN or Inf")
    z = (x - model.mean) @ model.projection.T / np.sqrt(model.eigenvalues)
    return z if not single else z.reshape(model.output_dim)


def binarize(z) -> PerceptualHash:
    """Keep only the sign of each component: bit = 1 iff z_i >= 0.

    Zero maps to 1 by convention.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("vector contains NaN or Inf")
    return PerceptualHash((z >= 0).astype(np.uint8))


def hash_embedding(model: WhiteningModel, e) -> PerceptualHash:
    """Whiten then binarize; the full embedding-to-hash pipeline."""
    return binarize(apply_whitening(model, e))


def hash_embeddings(model: WhiteningModel, embeddings) -> list[PerceptualHash]:
    z = apply_whitening(model, _as_embedding_matrix(embeddings))
    return [binarize(row) for row in z]


def hamming_distance(a: PerceptualHash, b: PerceptualHash) -> int:
    """Number of differing bits."""
    if a.k != b.k:
        raise LengthMismatch(f"hash lengths differ: {a.k} != {b.k}")
    return int(np.count_nonzero(a.bits != b.bits))


def match_score(a: PerceptualHash, b: PerceptualHash) -> int:
    """Number of matching bits: k minus the Hamming distance."""
    return a.k - hamming_distance(a, b)


def serialize_hash(h: PerceptualHash) -> bytes:
    """Pack bits into bytes: bit i goes to byte i//8, MSB-first."""
    return np.packbits(h.bits).tobytes()


def deserialize_hash(data: bytes, k: int = DEFAULT_HASH_BITS) -> PerceptualHash:
    expected = (k + 7) // 8
    if len(data) != expected:
        raise LengthMismatch(f"expected {expected} bytes for k={k}, got {len(data)}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:k]
    return PerceptualHash(bits)


# -- file formats -----------------------------------------------------------

def write_embeddings(path, embeddings, ids: list[str] | None = None) -> None:
    """Write the binary embedding file format (PHEM)."""
    x = np.ascontiguousarray(np.asarray(embeddings, dtype=np.float32))
    if x.ndim != 2:
        raise DimensionMismatch("expected a 2-D sample matrix")
    count, dim = x.shape
    if ids is not None and len(ids) != count:
        raise LengthMismatch(f"{len(ids)} ids for {count} embeddings")
    with open(path, "wb") as f:
        f.write(_PHEM_MAGIC)
        f.write(struct.pack("<HII", _FORMAT_VERSION, count, dim))
        f.write(x.astype("<f4").tobytes())
        if ids is not None:
            for s in ids:
                f.write(s.encode("utf-8") + b"\x00")


def read_embeddings(path) -> tuple[np.ndarray, list[str] | None]:
    """Read a PHEM embedding file; returns (matrix, ids or None)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _PHEM_MAGIC:
            raise IOError(f"bad magic {magic!r}, expected {_PHEM_MAGIC!r}")
        version, count, dim = struct.unpack("<HII", f.read(10))
        if version != _FORMAT_VERSION:
            raise IOError(f"unsupported embedding file version {version}")
        raw = f.read(4 * count * dim)
        if len(raw) != 4 * count * dim:
            raise IOError("truncated embedding file")
        x = np.frombuffer(raw, dtype="<f4").reshape(count, dim).astype(np.float32)
        trailer = f.read()
    ids = None
    if trailer:
        parts = trailer.split(b"\x00")
        if len(parts) != count + 1 or parts[-1] != b"":
            raise IOError("malformed id trailer")
        ids = [p.decode("utf-8") for p in parts[:-1]]
    return x, ids


def write_whitening_model(path, model: WhiteningModel) -> None:
    with open(path, "wb") as f:
        f.write(_PHWM_MAGIC)
        f.write(struct.pack("<HIIQ", _FORMAT_VERSION, model.input_dim,
                            model.output_dim, model.sample_count))
        f.write(model.mean.astype("<f8").tobytes())
        f.write(np.ascontiguousarray(model.projection).astype("<f8").tobytes())
        f.write(model.eigenvalues.astype("<f8").tobytes())


def read_whitening_model(path) -> WhiteningModel:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _PHWM_MAGIC:
            raise IOError(f"bad magic {magic!r}, expected {_PHWM_MAGIC!r}")
        version, input_dim, output_dim, sample_count = struct.unpack("<HIIQ", f.read(18))
        if version != _FORMAT_VERSION:
            raise IOError(f"unsupported model file version {version}")
        mean = np.frombuffer(f.read(8 * input_dim), dtype="<f8")
        proj = np.frombuffer(f.read(8 * output_dim * input_dim), dtype="<f8")
        eig = np.frombuffer(f.read(8 * output_dim), dtype="<f8")
    return WhiteningModel(
        input_dim=input_dim,
        output_dim=output_dim,
        mean=mean.astype(np.float64),
        projection=proj.reshape(output_dim, input_dim).astype(np.float64),
        eigenvalues=eig.astype(np.float64),
        sample_count=sample_count,
    )
