"""Walkthrough: the full private-match protocol on one machine.

Two parties set up an aggregated 2-of-2 key, a producer registers 200
encrypted hashes, and a client queries an edited copy of one of them.
The evaluator only ever sees ciphertexts; the boolean answer appears only
after both parties contribute decryption shares.
"""

import numpy as np

from provreg import mpenc
from provreg.bench import random_hash
from provreg.circuits import width_for_count
from provreg.hashing import PerceptualHash

import random

rng = random.Random(0)

print("setup phase: 2-of-2 aggregated key")
parties, key = mpenc.setup(n=2, m=2, rng_seed=0)
backend = mpenc.SimulationBackend(key.public)
print(f"  key digest {key.public.key_digest.hex()[:16]}...")

print("encryption phase: producer registers 200 hashes")
hashes = [random_hash(rng) for _ in range(200)]
db = [mpenc.encrypt_hash(backend, h) for h in hashes]

# The "query image" is a stored one with 5 bits flipped (mild edits).
edited = hashes[42].bits.copy()
edited[[3, 17, 40, 66, 90]] ^= 1
query_hash = PerceptualHash(edited)

print("evaluation phase: encrypted query, distance threshold 8")
q = mpenc.encrypt_hash(backend, query_hash)
t_enc = mpenc.encrypt_threshold(backend, 8, width_for_count(96))
result, telemetry = mpenc.evaluate_query_instrumented(db, q, t_enc, mode="or")
print(f"  {telemetry.gates.total} gates in {telemetry.timings.full_ms:.0f} ms "
      f"(XOR {telemetry.timings.xor_ms:.0f} ms, HD {telemetry.timings.hd_ms:.0f} ms)")

print("decryption phase: both parties exchange shares")
s0 = mpenc.partial_decrypt(key.shares[0], result)
try:
    mpenc.combine_shares(key.public, [s0], result)
except Exception as exc:
    print(f"  with 1 share: {type(exc).__name__} (as required)")
s1 = mpenc.partial_decrypt(key.shares[1], result)
answer = mpenc.combine_shares(key.public, [s0, s1], result)
print(f"  with 2 shares: match = {answer}")

count = mpenc.decrypt_with_quorum(
    key, mpenc.evaluate_query(db, q, t_enc, mode="count"))
print(f"  count mode: {count} close entr{'y' if count == 1 else 'ies'}")
