"""Private content-provenance registry.

Stores multi-party-encrypted perceptual hashes of images and answers
"is a close hash present?" queries with a gate-level homomorphic
Hamming-distance circuit, never revealing registry contents or the query
to any single party.
"""

from .hashing import (
    DEFAULT_EMBEDDING_DIM,
    DEFAULT_HASH_BITS,
    PerceptualHash,
    WhiteningModel,
    apply_whitening,
    binarize,
    deserialize_hash,
    fit_whitening,
    hamming_distance,
    hash_embedding,
    match_score,
    serialize_hash,
)
from .matchstats import ExactProbability, MatchThreshold, fpr, threshold_for_fpr

__all__ = [
    "DEFAULT_EMBEDDING_DIM",
    "DEFAULT_HASH_BITS",
    "PerceptualHash",
    "WhiteningModel",
    "apply_whitening",
    "binarize",
    "deserialize_hash",
    "fit_whitening",
    "hamming_distance",
    "hash_embedding",
    "match_score",
    "serialize_hash",
    "ExactProbability",
    "MatchThreshold",
    "fpr",
    "threshold_for_fpr",
]

__version__ = "0.1.0"
