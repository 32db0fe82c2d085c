"""Multi-party key lifecycle and encrypted-query evaluation.

n parties jointly hold an aggregated public key; anyone can encrypt hash
bits under it, the evaluator runs the match circuits homomorphically, and
decrypting a result requires decryption shares from at least m distinct
parties.

Two backends sit behind the same gate interface:

* the cleartext simulation backend below, where "ciphertexts" carry the
  plaintext bit in a private field plus key bookkeeping, and the m-of-n
  rule is enforced by genuine Shamir secret sharing of a master secret
  (fewer than m shares are information-theoretically useless), and
* a real boolean-FHE backend, pluggable through the same
  :class:`~provreg.circuits.BitBackend` contract.

Serialized simulation ciphertexts mask each bit with a keyed stream so no
wire format ever contains plaintext bits; this is bookkeeping, not
cryptography, and only the real backend provides actual confidentiality.
"""

from __future__ import annotations

import hashlib
import os
import random
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .circuits import (
    BitBackend,
    EncBitVector,
    EncUInt,
    GateCounts,
    leq_threshold,
    or_tree,
    popcount_tree,
    sum_tree,
    xor_array,
)
from .errors import (
    BackendMismatch,
    BindingMismatch,
    DecryptionIncomplete,
    EmptyDatabase,
    InvalidThreshold,
    KeyMismatch,
    WidthOverflow,
)
from .hashing import PerceptualHash

# Prime field for Shamir sharing of the master secret.
_PRIME = 2**127 - 1


def _sha256(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()


@dataclass(frozen=True)
class PartyId:
    index: int
    name: str = ""


@dataclass(frozen=True)
class PartySet:
    n: int
    m: int
    parties: tuple[PartyId, ...]


@dataclass(frozen=True)
class SecretShare:
    """One party's Shamir share of the master secret."""

    party: int
    value: int
    key_digest: bytes

    def __repr__(self):
        return f"SecretShare(party={self.party}, key={self.key_digest.hex()[:8]}...)"


@dataclass(frozen=True)
class PublicKeyInfo:
    """Everything non-secret about an aggregated key."""

    n: int
    m: int
    public_key: bytes
    key_digest: bytes
    secret_digest: bytes
    params_digest: bytes


@dataclass(frozen=True)
class KeyMaterial:
    public: PublicKeyInfo
    shares: tuple[SecretShare, ...]

    @property
    def key_digest(self) -> bytes:
        return self.public.key_digest


def setup(n: int, m: int, backend_params=None, rng_seed: int = 0) -> tuple[PartySet, KeyMaterial]:
    """Run the key setup: generate per-party secret shares and the
    aggregated public key.  Deterministic given the seed."""
    if not (2 <= m <= n):
        raise InvalidThreshold(f"need 2 <= m <= n, got m={m}, n={n}")
    rng = random.Random(f"setup:{n}:{m}:{rng_seed}")
    secret = rng.randrange(_PRIME)
    coeffs = [secret] + [rng.randrange(_PRIME) for _ in range(m - 1)]

    def poly(x: int) -> int:
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * x + c) % _PRIME
        return acc

    public_key = _sha256(b"aggregated-pub", struct.pack("<II", n, m),
                         rng.getrandbits(256).to_bytes(32, "little"))
    key_digest = _sha256(public_key)
    secret_digest = _sha256(b"master-secret", secret.to_bytes(16, "little"))
    params_digest = _sha256(b"params", repr(backend_params).encode())

    pub = PublicKeyInfo(n=n, m=m, public_key=public_key, key_digest=key_digest,
                        secret_digest=secret_digest, params_digest=params_digest)
    shares = tuple(
        SecretShare(party=i, value=poly(i + 1), key_digest=key_digest)
        for i in range(n)
    )
    parties = PartySet(n=n, m=m, parties=tuple(PartyId(i, f"party-{i}") for i in range(n)))
    return parties, KeyMaterial(public=pub, shares=shares)


class _SimBit:
    """Simulated ciphertext of one bit.  The plaintext lives in a
    name-mangled private field read only by the decryption path."""

    __slots__ = ("_SimBit__bit", "key_digest")

    def __init__(self, bit: bool, key_digest: bytes):
        self.__bit = bool(bit)
        self.key_digest = key_digest

    def __repr__(self):
        return "<encbit>"


def _reveal(bit: _SimBit) -> bool:
    return bit._SimBit__bit


class SimulationBackend(BitBackend):
    """Gate evaluator over simulated ciphertexts bound to one key."""

    def __init__(self, public: PublicKeyInfo):
        super().__init__()
        self.public = public
        self.key_digest = public.key_digest

    def _check(self, *bits):
        for b in bits:
            if not isinstance(b, _SimBit):
                raise BackendMismatch(f"not a simulation ciphertext: {type(b).__name__}")
            if b.key_digest != self.key_digest:
                raise KeyMismatch("ciphertext bound to a different key")

    def xor(self, a, b):
        self._check(a, b)
        self._tally("xor")
        return _SimBit(_reveal(a) ^ _reveal(b), self.key_digest)

    def and_(self, a, b):
        self._check(a, b)
        self._tally("and_")
        return _SimBit(_reveal(a) and _reveal(b), self.key_digest)

    def or_(self, a, b):
        self._check(a, b)
        self._tally("or_")
        return _SimBit(_reveal(a) or _reveal(b), self.key_digest)

    def not_(self, a):
        self._check(a)
        self._tally("not_")
        return _SimBit(not _reveal(a), self.key_digest)

    def constant(self, value: bool):
        return _SimBit(bool(value), self.key_digest)

    def decrypt_bit(self, bit) -> bool:
        # Only tests and combine_shares go through here.
        self._check(bit)
        return _reveal(bit)


@dataclass(frozen=True)
class EncryptedHash:
    """Per-bit encryption of a perceptual hash under the aggregated key."""

    bits: EncBitVector
    key_digest: bytes
    ct_id: bytes = field(default_factory=lambda: os.urandom(32))

    @property
    def k(self) -> int:
        return len(self.bits)

    def digest(self) -> bytes:
        return self.ct_id


@dataclass(frozen=True)
class EncResult:
    """Encrypted query outcome: a membership bit or a match count."""

    kind: str  # "or" | "count"
    bits: tuple  # single bit for "or", little-endian for "count"
    key_digest: bytes
    ct_id: bytes = field(default_factory=lambda: os.urandom(32))

    def digest(self) -> bytes:
        return self.ct_id


@dataclass(frozen=True)
class DecryptionShare:
    party: int
    payload: bytes
    ct_digest: bytes

    def __repr__(self):
        return f"DecryptionShare(party={self.party}, ct={self.ct_digest.hex()[:8]}...)"


def encrypt_hash(backend: SimulationBackend, h: PerceptualHash, rng=None) -> EncryptedHash:
    """Encrypt each bit of the hash individually under the backend's key."""
    bits = tuple(backend.constant(bool(b)) for b in h.bits)
    return EncryptedHash(bits=EncBitVector(bits, backend), key_digest=backend.key_digest)


def encrypt_threshold(backend: SimulationBackend, t: int, width: int) -> EncUInt:
    """Encrypt a distance threshold as a little-endian encrypted integer."""
    if not 0 <= t < (1 << width):
        raise WidthOverflow(f"threshold {t} does not fit in {width} bits")
    return EncUInt(
        tuple(backend.constant(bool((t >> i) & 1)) for i in range(width)),
        backend,
    )


@dataclass
class QueryTimings:
    """Cumulative per-phase wall-clock times: XOR arrays only, XOR plus
    Hamming-distance popcounts, and the full query."""

    xor_ms: float
    hd_ms: float
    full_ms: float


@dataclass
class QueryTelemetry:
    gates: GateCounts            # whole query
    xor_phase_gates: GateCounts  # XOR arrays only
    hd_phase_gates: GateCounts   # XOR arrays + popcount trees
    timings: QueryTimings
    entries: int


def _check_query_inputs(db, q, t_enc):
    if not db:
        raise EmptyDatabase("registry holds no encrypted hashes")
    key = q.key_digest
    for e in db:
        if e.key_digest != key:
            raise KeyMismatch("database entry encrypted under a different key")
        if e.k != q.k:
            raise KeyMismatch(f"entry hash length {e.k} != query length {q.k}")


def evaluate_query(db: list[EncryptedHash], q: EncryptedHash, t_enc: EncUInt,
                   mode: str = "or", workers: int = 1) -> EncResult:
    result, _ = evaluate_query_instrumented(db, q, t_enc, mode, workers)
    return result


def evaluate_query_instrumented(
    db: list[EncryptedHash], q: EncryptedHash, t_enc: EncUInt,
    mode: str = "or", workers: int = 1,
) -> tuple[EncResult, QueryTelemetry]:
    """Run the private-match circuit over every database entry.

    Per entry: XOR the query against the entry, popcount the differences,
    compare against the encrypted threshold; the per-entry match bits are
    folded by an OR tree ("is any entry close?") or a SUM tree ("how many
    entries are close?").  Entries evaluate independently and in
    parallel.
    """
    if mode not in ("or", "count"):
        raise ValueError(f"unknown mode {mode!r}")
    _check_query_inputs(db, q, t_enc)
    backend = q.bits.backend
    start_counts = backend.counts.snapshot()

    t0 = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        def run(fn, items):
            return list(pool.map(fn, items)) if pool else [fn(i) for i in items]

        xors = run(lambda e: xor_array(q.bits, e.bits), db)
        t_xor = time.perf_counter()
        xor_gates = backend.counts.snapshot() - start_counts
        counts = run(popcount_tree, xors)
        t_hd = time.perf_counter()
        hd_gates = backend.counts.snapshot() - start_counts
        match_bits = run(lambda c: leq_threshold(c, t_enc), counts)
        if mode == "or":
            result_bits = (or_tree(backend, match_bits),)
        else:
            result_bits = sum_tree(backend, match_bits).bits
        t_full = time.perf_counter()
    finally:
        if pool:
            pool.shutdown()

    telemetry = QueryTelemetry(
        gates=backend.counts.snapshot() - start_counts,
        xor_phase_gates=xor_gates,
        hd_phase_gates=hd_gates,
        timings=QueryTimings(
            xor_ms=(t_xor - t0) * 1e3,
            hd_ms=(t_hd - t0) * 1e3,
            full_ms=(t_full - t0) * 1e3,
        ),
        entries=len(db),
    )
    result = EncResult(kind=mode, bits=tuple(result_bits), key_digest=q.key_digest)
    return result, telemetry


# -- decryption -------------------------------------------------------------

def partial_decrypt(share: SecretShare, ct) -> DecryptionShare:
    """Produce one party's decryption share, bound to a single ciphertext."""
    if share.key_digest != ct.key_digest:
        raise KeyMismatch("share and ciphertext belong to different keys")
    return DecryptionShare(
        party=share.party,
        payload=share.value.to_bytes(16, "little"),
        ct_digest=ct.digest(),
    )


def _lagrange_at_zero(points: list[tuple[int, int]]) -> int:
    total = 0
    for i, (xi, yi) in enumerate(points):
        num, den = 1, 1
        for j, (xj, _) in enumerate(points):
            if i == j:
                continue
            num = (num * (-xj)) % _PRIME
            den = (den * (xi - xj)) % _PRIME
        total = (total + yi * num * pow(den, _PRIME - 2, _PRIME)) % _PRIME
    return total


def combine_shares(pub: PublicKeyInfo, shares: list[DecryptionShare], ct):
    """Combine decryption shares; with a quorum of m distinct parties the
    plaintext result is recovered, otherwise DecryptionIncomplete."""
    seen: dict[int, DecryptionShare] = {}
    for s in shares:
        if s.ct_digest != ct.digest():
            raise BindingMismatch("share bound to a different ciphertext")
        seen.setdefault(s.party, s)  # duplicates from one party count once
    if len(seen) < pub.m:
        raise DecryptionIncomplete(
            f"have shares from {len(seen)} parties, need {pub.m}"
        )
    points = [
        (party + 1, int.from_bytes(s.payload, "little"))
        for party, s in list(seen.items())[: pub.m]
    ]
    secret = _lagrange_at_zero(points)
    if _sha256(b"master-secret", secret.to_bytes(16, "little")) != pub.secret_digest:
        raise DecryptionIncomplete("share combination failed verification")
    return _reveal_plaintext(ct)


def _reveal_plaintext(ct):
    if isinstance(ct, EncResult):
        if ct.kind == "or":
            return _reveal(ct.bits[0])
        return sum(int(_reveal(b)) << i for i, b in enumerate(ct.bits))
    if isinstance(ct, EncryptedHash):
        import numpy as np
        return PerceptualHash(np.array([int(_reveal(b)) for b in ct.bits.bits], dtype=np.uint8))
    raise TypeError(f"cannot decrypt {type(ct).__name__}")


def decrypt_with_quorum(key: KeyMaterial, ct, parties: list[int] | None = None):
    """Convenience: run partial_decrypt for the given parties (default
    all) and combine."""
    idxs = parties if parties is not None else [s.party for s in key.shares]
    shares = [partial_decrypt(key.shares[i], ct) for i in idxs]
    return combine_shares(key.public, shares, ct)


# -- serialization (simulation backend) -------------------------------------
#
# Per-bit record: 8-byte nonce + 1 masked byte; mask is the low bit of
# SHA-256(key digest || nonce).  Obfuscation for the wire only.

def _mask_bit(key_digest: bytes, nonce: bytes) -> int:
    return _sha256(b"bitmask", key_digest, nonce)[0] & 1


def _serialize_bits(bits, key_digest: bytes, rng=None) -> bytes:
    rand = rng.randbytes if rng is not None else os.urandom
    out = bytearray()
    for b in bits:
        nonce = rand(8)
        out += nonce
        out.append(_reveal(b) ^ _mask_bit(key_digest, nonce))
    return bytes(out)


def _deserialize_bits(backend: SimulationBackend, data: bytes, count: int):
    if len(data) != 9 * count:
        raise ValueError(f"expected {9 * count} bit-record bytes, got {len(data)}")
    bits = []
    for i in range(count):
        nonce = data[9 * i : 9 * i + 8]
        masked = data[9 * i + 8]
        bits.append(_SimBit(masked ^ _mask_bit(backend.key_digest, nonce),
                            backend.key_digest))
    return tuple(bits)


def serialize_encrypted_hash(eh: EncryptedHash, rng=None) -> bytes:
    return (
        eh.key_digest
        + eh.ct_id
        + struct.pack("<I", eh.k)
        + _serialize_bits(eh.bits.bits, eh.key_digest, rng)
    )


def deserialize_encrypted_hash(backend: SimulationBackend, data: bytes) -> EncryptedHash:
    key_digest, ct_id = data[:32], data[32:64]
    if key_digest != backend.key_digest:
        raise KeyMismatch("serialized hash encrypted under a different key")
    (k,) = struct.unpack("<I", data[64:68])
    bits = _deserialize_bits(backend, data[68:], k)
    return EncryptedHash(bits=EncBitVector(bits, backend), key_digest=key_digest,
                         ct_id=ct_id)


def serialize_enc_uint(v: EncUInt, key_digest: bytes, rng=None) -> bytes:
    return struct.pack("<I", v.width) + _serialize_bits(v.bits, key_digest, rng)


def deserialize_enc_uint(backend: SimulationBackend, data: bytes) -> EncUInt:
    (w,) = struct.unpack("<I", data[:4])
    return EncUInt(_deserialize_bits(backend, data[4:], w), backend)


def serialize_result(r: EncResult, rng=None) -> bytes:
    kind = b"O" if r.kind == "or" else b"C"
    return (
        kind
        + r.key_digest
        + r.ct_id
        + struct.pack("<I", len(r.bits))
        + _serialize_bits(r.bits, r.key_digest, rng)
    )


def deserialize_result(backend: SimulationBackend, data: bytes) -> EncResult:
    kind = "or" if data[:1] == b"O" else "count"
    key_digest, ct_id = data[1:33], data[33:65]
    if key_digest != backend.key_digest:
        raise KeyMismatch("serialized result under a different key")
    (n,) = struct.unpack("<I", data[65:69])
    bits = _deserialize_bits(backend, data[69:], n)
    return EncResult(kind=kind, bits=bits, key_digest=key_digest, ct_id=ct_id)


def serialize_decryption_share(s: DecryptionShare) -> bytes:
    return struct.pack("<I", s.party) + s.ct_digest + s.payload


def deserialize_decryption_share(data: bytes) -> DecryptionShare:
    (party,) = struct.unpack("<I", data[:4])
    return DecryptionShare(party=party, ct_digest=data[4:36], payload=data[36:])
