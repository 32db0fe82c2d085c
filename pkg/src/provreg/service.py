"""HTTP API for the provenance registry: producers insert signed
encrypted hashes, the public submits encrypted queries, and parties push
decryption shares until the quorum releases the plaintext answer.

No response ever contains a plaintext hash bit or query outcome; results
travel encrypted and open only through the share-exchange endpoint.
"""

from __future__ import annotations

import base64
import os
import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import mpenc
from .errors import (
    BadSignature,
    BindingMismatch,
    DecryptionIncomplete,
    DuplicateId,
    EmptyDatabase,
    KeyMismatch,
    NotFound,
    ProvRegError,
    UnknownProducer,
    UnknownRequest,
)
from .mpenc import PublicKeyInfo, SimulationBackend
from .registry import RegistryEntry, RegistryStore

DEFAULT_RESULT_TTL_S = 600.0


@dataclass
class ServiceConfig:
    listen_addr: str = "127.0.0.1:8700"
    store_path: str = "registry.log"
    quorum_m: int = 2
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    result_ttl_s: float = DEFAULT_RESULT_TTL_S


_ENV_PREFIX = "PROV_"


def load_config(path=None, env=None) -> ServiceConfig:
    """Read service configuration from a TOML file with PROV_ environment
    overrides (PROV_QUORUM_M, PROV_WORKERS, ...)."""
    cfg = ServiceConfig()
    if path is not None:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as f:
            data = tomllib.load(f)
        for key, value in data.items():
            if hasattr(cfg, key):
                setattr(cfg, key, value)
    env = os.environ if env is None else env
    for key in ("listen_addr", "store_path", "quorum_m", "workers", "result_ttl_s"):
        raw = env.get(_ENV_PREFIX + key.upper())
        if raw is not None:
            kind = type(getattr(cfg, key))
            setattr(cfg, key, kind(raw) if kind is not str else raw)
    return cfg


class EntryBody(BaseModel):
    entry_id: str  # hex, 16 bytes
    ciphertext: str  # base64 serialized EncryptedHash
    producer_id: str
    signature: str  # base64
    created_at: int
    metadata: dict[str, str] = {}


class QueryBody(BaseModel):
    request_id: str  # hex, 16 bytes
    query: str  # base64 serialized EncryptedHash
    threshold: str  # base64 serialized EncUInt
    mode: str = "or"
    producer_filter: str | None = None


class ShareBody(BaseModel):
    request_id: str
    party: int
    payload: str  # base64
    ct_digest: str  # base64


@dataclass
class _PendingRequest:
    result: mpenc.EncResult
    shares: dict[int, mpenc.DecryptionShare]
    created: float


_ERROR_STATUS = {
    BadSignature: 403,
    UnknownProducer: 403,
    KeyMismatch: 409,
    DuplicateId: 409,
    EmptyDatabase: 404,
    NotFound: 404,
    UnknownRequest: 404,
    BindingMismatch: 400,
}


def create_app(store: RegistryStore, public_key: PublicKeyInfo,
               config: ServiceConfig | None = None) -> FastAPI:
    cfg = config or ServiceConfig()
    app = FastAPI(title="private provenance registry")
    backend = SimulationBackend(public_key)
    pending: dict[str, _PendingRequest] = {}
    pending_lock = threading.Lock()
    stats = {"queries": 0, "inserts": 0}

    app.state.store = store
    app.state.backend = backend
    app.state.config = cfg

    @app.exception_handler(ProvRegError)
    async def _provreg_error(request: Request, exc: ProvRegError):
        status = _ERROR_STATUS.get(type(exc), 400)
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "MalformedRequest", "detail": str(exc)})

    def _purge_expired():
        cutoff = time.monotonic() - cfg.result_ttl_s
        with pending_lock:
            for rid in [r for r, p in pending.items() if p.created < cutoff]:
                del pending[rid]

    @app.post("/entries")
    def insert_entry(body: EntryBody):
        entry = RegistryEntry(
            entry_id=bytes.fromhex(body.entry_id),
            key_digest=public_key.key_digest,
            ciphertext=base64.b64decode(body.ciphertext),
            producer_id=body.producer_id,
            signature=base64.b64decode(body.signature),
            created_at=body.created_at,
            metadata=dict(body.metadata),
        )
        # Reject entries whose ciphertext is bound to another key epoch.
        ct_key = entry.ciphertext[:32]
        if ct_key != public_key.key_digest:
            raise KeyMismatch("ciphertext encrypted under a different key epoch")
        entry_id = store.insert_entry(entry)
        stats["inserts"] += 1
        return {"entry_id": entry_id.hex()}

    @app.post("/query")
    def run_query(body: QueryBody):
        if body.mode not in ("or", "count"):
            raise RequestValidationError([{"loc": ("mode",), "msg": "invalid mode"}])
        blobs = store.scan_for_query(body.producer_filter)
        if not blobs:
            raise EmptyDatabase("registry holds no entries")
        q = mpenc.deserialize_encrypted_hash(backend, base64.b64decode(body.query))
        t_enc = mpenc.deserialize_enc_uint(backend, base64.b64decode(body.threshold))
        db = [mpenc.deserialize_encrypted_hash(backend, b) for b in blobs]
        result, telemetry = mpenc.evaluate_query_instrumented(
            db, q, t_enc, mode=body.mode, workers=cfg.workers)
        _purge_expired()
        with pending_lock:
            pending[body.request_id] = _PendingRequest(
                result=result, shares={}, created=time.monotonic())
        stats["queries"] += 1
        return {
            "request_id": body.request_id,
            "result": base64.b64encode(mpenc.serialize_result(result)).decode(),
            "ct_digest": base64.b64encode(result.digest()).decode(),
            "gates": telemetry.gates.as_dict(),
            "timing": {
                "xor_ms": telemetry.timings.xor_ms,
                "hd_ms": telemetry.timings.hd_ms,
                "full_ms": telemetry.timings.full_ms,
            },
        }

    @app.post("/decrypt/{request_id}/shares")
    def submit_share(request_id: str, body: ShareBody):
        _purge_expired()
        with pending_lock:
            req = pending.get(request_id)
        if req is None:
            raise UnknownRequest(f"no pending request {request_id}")
        share = mpenc.DecryptionShare(
            party=body.party,
            payload=base64.b64decode(body.payload),
            ct_digest=base64.b64decode(body.ct_digest),
        )
        if share.ct_digest != req.result.digest():
            raise BindingMismatch("share bound to a different ciphertext")
        with pending_lock:
            req.shares.setdefault(share.party, share)  # idempotent per party
            have = len(req.shares)
            shares = list(req.shares.values())
        if have < cfg.quorum_m:
            return {"status": "pending", "have": have, "need": cfg.quorum_m}
        try:
            plaintext = mpenc.combine_shares(public_key, shares, req.result)
        except DecryptionIncomplete as exc:
            return {"status": "pending", "have": have, "need": cfg.quorum_m,
                    "detail": str(exc)}
        with pending_lock:
            pending.pop(request_id, None)
        if req.result.kind == "or":
            return {"status": "complete", "plaintext": bool(plaintext)}
        return {"status": "complete", "plaintext": int(plaintext)}

    @app.get("/health")
    def health():
        return {"status": "ok", "entries": len(store)}

    @app.get("/stats")
    def get_stats():
        return {
            "entries": len(store),
            "key_digest": public_key.key_digest.hex(),
            "queries": stats["queries"],
            "inserts": stats["inserts"],
            "gates_total": backend.counts.as_dict(),
        }

    return app
