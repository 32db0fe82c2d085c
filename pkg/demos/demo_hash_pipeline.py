"""Walkthrough: from embeddings to perceptual hashes.

Fits a whitening model on synthetic correlated embeddings, hashes a few
of them, and shows how small perturbations of an embedding move its hash
only a few bits while unrelated embeddings land ~48 bits away.
"""

import numpy as np

from provreg import hashing

rng = np.random.default_rng(0)

# Synthetic stand-in for a corpus of 768-dim image embeddings with
# correlated components.
d, k, n = 768, 96, 5000
mixing = rng.normal(size=(d, d)) / np.sqrt(d)
corpus = rng.normal(size=(n, d)) @ mixing

print(f"fitting whitening model: {d} -> {k} on {n} samples ...")
model = hashing.fit_whitening(corpus, output_dim=k)

e = rng.normal(size=d) @ mixing
h = hashing.hash_embedding(model, e)
print(f"hash of one embedding: {h.hex()}")

# A slightly perturbed embedding (same "image" after mild edits) stays
# close in Hamming distance.
for scale in (0.01, 0.05, 0.2):
    e_noisy = e + scale * rng.normal(size=d) @ mixing
    h_noisy = hashing.hash_embedding(model, e_noisy)
    print(f"  perturbation {scale:>4}: distance = "
          f"{hashing.hamming_distance(h, h_noisy):>2} bits")

# An unrelated embedding disagrees on about half the bits.
other = hashing.hash_embedding(model, rng.normal(size=d) @ mixing)
print(f"  unrelated embedding: distance = {hashing.hamming_distance(h, other)} bits "
      f"(expected ~{k // 2})")
