"""Append-only store of signed, encrypted hash entries with producer
provenance.

Each record is an encrypted perceptual hash plus the producing
organization's Ed25519 signature over its canonical serialization; the
log file is length-prefixed and checksummed so corruption and tampering
are detected at read time.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import struct
import threading
import time
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import (
    BadSignature,
    DuplicateId,
    IntegrityError,
    KeyMismatch,
    NotFound,
    UnknownProducer,
)

_RECORD_CHECKSUM_LEN = 8


def _checksum(payload: bytes) -> bytes:
    return hashlib.sha256(payload).digest()[:_RECORD_CHECKSUM_LEN]


@dataclass(frozen=True)
class ProducerIdentity:
    """A content-producing organization and its signature key."""

    producer_id: str
    verify_key: bytes  # 32-byte Ed25519 public key
    display_name: str = ""

    def __post_init__(self):
        # Fails here if the key bytes are not a valid Ed25519 point.
        Ed25519PublicKey.from_public_bytes(self.verify_key)


def generate_producer(producer_id: str, display_name: str = "") -> tuple[ProducerIdentity, bytes]:
    """Create a fresh producer identity; returns (identity, signing key bytes)."""
    sk = Ed25519PrivateKey.generate()
    vk = sk.public_key().public_bytes_raw()
    return ProducerIdentity(producer_id, vk, display_name), sk.private_bytes_raw()


def signed_message(key_digest: bytes, ciphertext: bytes, producer_id: str,
                   timestamp: int) -> bytes:
    """Canonical byte string covered by an entry's signature."""
    pid = producer_id.encode("utf-8")
    return (
        key_digest
        + struct.pack("<I", len(ciphertext)) + ciphertext
        + struct.pack("<I", len(pid)) + pid
        + struct.pack("<Q", timestamp)
    )


def sign_entry(signing_key: bytes, key_digest: bytes, ciphertext: bytes,
               producer_id: str, timestamp: int) -> bytes:
    sk = Ed25519PrivateKey.from_private_bytes(signing_key)
    return sk.sign(signed_message(key_digest, ciphertext, producer_id, timestamp))


@dataclass(frozen=True)
class RegistryEntry:
    """One persisted unit of provenance: encrypted hash + producer
    signature + metadata."""

    entry_id: bytes  # 16 bytes
    key_digest: bytes  # 32 bytes, the encryption key epoch
    ciphertext: bytes  # serialized EncryptedHash
    producer_id: str
    signature: bytes
    created_at: int  # UTC seconds
    metadata: dict = field(default_factory=dict)

    def to_record(self) -> bytes:
        meta = json.dumps(self.metadata, sort_keys=True).encode()
        pid = self.producer_id.encode("utf-8")
        return (
            self.entry_id
            + self.key_digest
            + struct.pack("<I", len(self.ciphertext)) + self.ciphertext
            + struct.pack("<I", len(pid)) + pid
            + struct.pack("<I", len(self.signature)) + self.signature
            + struct.pack("<Q", self.created_at)
            + struct.pack("<I", len(meta)) + meta
        )

    @classmethod
    def from_record(cls, data: bytes) -> "RegistryEntry":
        off = 0

        def take(n):
            nonlocal off
            chunk = data[off:off + n]
            if len(chunk) != n:
                raise IntegrityError("truncated registry record")
            off += n
            return chunk

        entry_id = take(16)
        key_digest = take(32)
        (ct_len,) = struct.unpack("<I", take(4))
        ciphertext = take(ct_len)
        (pid_len,) = struct.unpack("<I", take(4))
        producer_id = take(pid_len).decode("utf-8")
        (sig_len,) = struct.unpack("<I", take(4))
        signature = take(sig_len)
        (created_at,) = struct.unpack("<Q", take(8))
        (meta_len,) = struct.unpack("<I", take(4))
        metadata = json.loads(take(meta_len).decode())
        if off != len(data):
            raise IntegrityError("trailing bytes in registry record")
        return cls(entry_id, key_digest, ciphertext, producer_id, signature,
                   created_at, metadata)


def make_entry(signing_key: bytes, producer_id: str, key_digest: bytes,
               ciphertext: bytes, created_at: int | None = None,
               metadata: dict | None = None,
               entry_id: bytes | None = None) -> RegistryEntry:
    """Build and sign a registry entry from an encrypted-hash blob."""
    ts = int(time.time()) if created_at is None else created_at
    sig = sign_entry(signing_key, key_digest, ciphertext, producer_id, ts)
    return RegistryEntry(
        entry_id=entry_id if entry_id is not None else os.urandom(16),
        key_digest=key_digest,
        ciphertext=ciphertext,
        producer_id=producer_id,
        signature=sig,
        created_at=ts,
        metadata=metadata or {},
    )


@dataclass
class VerificationReport:
    entry_id: bytes
    ok: bool
    producer_id: str
    created_at: int
    detail: str = ""


class RegistryStore:
    """Single-writer append-only log of registry entries.

    On-disk format per record: u32 LE payload length, payload, 8-byte
    truncated SHA-256 of the payload.  The in-memory index is rebuilt on
    open by replaying the log.
    """

    def __init__(self, path, active_key_digest: bytes):
        self.path = str(path)
        self.active_key_digest = active_key_digest
        self._entries: list[RegistryEntry] = []
        self._by_id: dict[bytes, int] = {}
        self._by_producer: dict[str, list[int]] = {}
        self._producers: dict[str, ProducerIdentity] = {}
        self._write_lock = threading.Lock()
        if os.path.exists(self.path):
            self._replay()

    # -- producers ----------------------------------------------------------

    def register_producer(self, identity: ProducerIdentity) -> None:
        self._producers[identity.producer_id] = identity

    def producer(self, producer_id: str) -> ProducerIdentity:
        try:
            return self._producers[producer_id]
        except KeyError:
            raise UnknownProducer(f"no verification key for {producer_id!r}") from None

    # -- log replay ---------------------------------------------------------

    def _replay(self):
        with open(self.path, "rb") as f:
            while True:
                header = f.read(4)
                if not header:
                    break
                if len(header) != 4:
                    raise IntegrityError("truncated record header")
                (length,) = struct.unpack("<I", header)
                payload = f.read(length)
                check = f.read(_RECORD_CHECKSUM_LEN)
                if len(payload) != length or len(check) != _RECORD_CHECKSUM_LEN:
                    raise IntegrityError("truncated record")
                if _checksum(payload) != check:
                    raise IntegrityError("record checksum mismatch")
                self._index(RegistryEntry.from_record(payload))

    def _index(self, entry: RegistryEntry):
        idx = len(self._entries)
        self._entries.append(entry)
        self._by_id[entry.entry_id] = idx
        self._by_producer.setdefault(entry.producer_id, []).append(idx)

    # -- operations ---------------------------------------------------------

    def _verify_signature(self, entry: RegistryEntry):
        identity = self.producer(entry.producer_id)
        vk = Ed25519PublicKey.from_public_bytes(identity.verify_key)
        msg = signed_message(entry.key_digest, entry.ciphertext,
                             entry.producer_id, entry.created_at)
        try:
            vk.verify(entry.signature, msg)
        except InvalidSignature:
            raise BadSignature(
                f"signature of entry {entry.entry_id.hex()} does not verify"
            ) from None

    def insert_entry(self, entry: RegistryEntry) -> bytes:
        """Validate, append, and fsync an entry; returns its id."""
        if entry.key_digest != self.active_key_digest:
            raise KeyMismatch("entry encrypted under a stale or foreign key")
        self._verify_signature(entry)
        with self._write_lock:
            if entry.entry_id in self._by_id:
                raise DuplicateId(f"entry id {entry.entry_id.hex()} already present")
            payload = entry.to_record()
            with open(self.path, "ab") as f:
                f.write(struct.pack("<I", len(payload)) + payload + _checksum(payload))
                f.flush()
                os.fsync(f.fileno())
            self._index(entry)
        return entry.entry_id

    def scan_for_query(self, producer_filter: str | None = None) -> list[bytes]:
        """Encrypted-hash blobs in insertion order, optionally restricted
        to one producer."""
        if producer_filter is None:
            return [e.ciphertext for e in self._entries]
        idxs = self._by_producer.get(producer_filter, [])
        return [self._entries[i].ciphertext for i in idxs]

    def entries(self) -> list[RegistryEntry]:
        return list(self._entries)

    def get(self, entry_id: bytes) -> RegistryEntry:
        try:
            return self._entries[self._by_id[entry_id]]
        except KeyError:
            raise NotFound(f"no entry {entry_id.hex()}") from None

    def __len__(self) -> int:
        return len(self._entries)

    def verify_entry(self, entry_id: bytes) -> VerificationReport:
        """Re-check an entry's signature and key binding."""
        entry = self.get(entry_id)
        try:
            if entry.key_digest != self.active_key_digest:
                raise KeyMismatch("stale key digest")
            self._verify_signature(entry)
        except (BadSignature, KeyMismatch, UnknownProducer) as exc:
            return VerificationReport(entry_id, False, entry.producer_id,
                                      entry.created_at, detail=str(exc))
        return VerificationReport(entry_id, True, entry.producer_id, entry.created_at)

    def export_jsonl(self, path) -> None:
        """Dump entries as line-delimited JSON (binary fields base64)."""
        with open(path, "w") as f:
            for e in self._entries:
                f.write(json.dumps({
                    "entry_id": e.entry_id.hex(),
                    "key_digest": e.key_digest.hex(),
                    "ciphertext": base64.b64encode(e.ciphertext).decode(),
                    "producer_id": e.producer_id,
                    "signature": base64.b64encode(e.signature).decode(),
                    "created_at": e.created_at,
                    "metadata": e.metadata,
                }, sort_keys=True) + "\n")
