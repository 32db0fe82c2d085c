import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from provreg import mpenc, registry
from provreg.circuits import width_for_count
from provreg.hashing import PerceptualHash, hamming_distance
from provreg.service import ServiceConfig, create_app, load_config

from conftest import random_hashes


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode()


@pytest.fixture
def world(tmp_path):
    """A service with its key, store, and one registered producer."""
    _, key = mpenc.setup(2, 2, rng_seed=3)
    backend = mpenc.SimulationBackend(key.public)
    store = registry.RegistryStore(tmp_path / "registry.log", key.public.key_digest)
    identity, sk = registry.generate_producer("acme")
    store.register_producer(identity)
    cfg = ServiceConfig(quorum_m=2, workers=1, result_ttl_s=600)
    app = create_app(store, key.public, cfg)
    client = TestClient(app, raise_server_exceptions=False)
    return {
        "key": key, "backend": backend, "store": store,
        "identity": identity, "sk": sk, "client": client,
    }


def entry_body(world, h: PerceptualHash, key_digest=None):
    backend = world["backend"]
    ct = mpenc.serialize_encrypted_hash(mpenc.encrypt_hash(backend, h))
    kd = key_digest or world["key"].public.key_digest
    entry = registry.make_entry(world["sk"], "acme", kd, ct, created_at=1700000000)
    return {
        "entry_id": entry.entry_id.hex(),
        "ciphertext": b64(entry.ciphertext),
        "producer_id": entry.producer_id,
        "signature": b64(entry.signature),
        "created_at": entry.created_at,
        "metadata": {},
    }


def insert_hashes(world, hashes):
    for h in hashes:
        r = world["client"].post("/entries", json=entry_body(world, h))
        assert r.status_code == 200, r.text


def query_body(world, h: PerceptualHash, t=8, mode="or", request_id="ab" * 16):
    backend = world["backend"]
    q = mpenc.serialize_encrypted_hash(mpenc.encrypt_hash(backend, h))
    t_enc = mpenc.serialize_enc_uint(
        mpenc.encrypt_threshold(backend, t, width_for_count(96)),
        backend.key_digest)
    return {"request_id": request_id, "query": b64(q), "threshold": b64(t_enc),
            "mode": mode}


def push_shares(world, request_id, result_b64, parties):
    key = world["key"]
    backend = world["backend"]
    result = mpenc.deserialize_result(backend, base64.b64decode(result_b64))
    responses = []
    for p in parties:
        share = mpenc.partial_decrypt(key.shares[p], result)
        responses.append(world["client"].post(
            f"/decrypt/{request_id}/shares",
            json={"request_id": request_id, "party": share.party,
                  "payload": b64(share.payload), "ct_digest": b64(share.ct_digest)}))
    return responses


class TestEntries:
    def test_valid_insert(self, world, rng):
        r = world["client"].post("/entries",
                                 json=entry_body(world, random_hashes(rng, 1)[0]))
        assert r.status_code == 200
        assert len(bytes.fromhex(r.json()["entry_id"])) == 16

    def test_bad_signature_403(self, world, rng):
        body = entry_body(world, random_hashes(rng, 1)[0])
        sig = bytearray(base64.b64decode(body["signature"]))
        sig[0] ^= 1
        body["signature"] = b64(bytes(sig))
        assert world["client"].post("/entries", json=body).status_code == 403

    def test_wrong_key_epoch_409(self, world, rng):
        stale_key = mpenc.setup(2, 2, rng_seed=44)[1]
        stale_backend = mpenc.SimulationBackend(stale_key.public)
        h = random_hashes(rng, 1)[0]
        ct = mpenc.serialize_encrypted_hash(mpenc.encrypt_hash(stale_backend, h))
        entry = registry.make_entry(world["sk"], "acme",
                                    stale_key.public.key_digest, ct)
        body = {
            "entry_id": entry.entry_id.hex(),
            "ciphertext": b64(entry.ciphertext),
            "producer_id": "acme",
            "signature": b64(entry.signature),
            "created_at": entry.created_at,
            "metadata": {},
        }
        assert world["client"].post("/entries", json=body).status_code == 409

    def test_malformed_400(self, world):
        assert world["client"].post("/entries", json={"nope": 1}).status_code == 400


class TestQuery:
    def test_stored_hash_matches(self, world, rng):
        hs = random_hashes(rng, 10)
        insert_hashes(world, hs)
        r = world["client"].post("/query", json=query_body(world, hs[4]))
        assert r.status_code == 200
        body = r.json()
        assert body["timing"]["full_ms"] >= body["timing"]["hd_ms"] >= body["timing"]["xor_ms"]
        # Quorum decryption of the returned ciphertext says "present".
        result = mpenc.deserialize_result(world["backend"],
                                          base64.b64decode(body["result"]))
        assert mpenc.decrypt_with_quorum(world["key"], result) is True

    def test_empty_registry_404(self, world, rng):
        r = world["client"].post("/query",
                                 json=query_body(world, random_hashes(rng, 1)[0]))
        assert r.status_code == 404

    def test_count_mode(self, world):
        rng = np.random.default_rng(8)
        hs = random_hashes(rng, 30)
        qh = hs[0]
        for i in (1, 2, 3, 4):
            bits = qh.bits.copy()
            flip = rng.choice(96, size=i, replace=False)
            bits[flip] = 1 - bits[flip]
            hs[i] = PerceptualHash(bits)
        insert_hashes(world, hs)
        expected = sum(1 for h in hs if hamming_distance(qh, h) <= 8)
        assert expected == 5
        r = world["client"].post("/query", json=query_body(world, qh, mode="count"))
        result = mpenc.deserialize_result(world["backend"],
                                          base64.b64decode(r.json()["result"]))
        assert mpenc.decrypt_with_quorum(world["key"], result) == expected

    def test_no_plaintext_in_responses(self, world, rng):
        # The serialized result of an all-match query and an all-miss query
        # must not be distinguishable by scanning the response for
        # plaintext bits; both are masked ciphertext blobs.
        hs = random_hashes(rng, 4)
        insert_hashes(world, hs)
        r = world["client"].post("/query", json=query_body(world, hs[0]))
        body = r.json()
        assert "plaintext" not in body
        blob = base64.b64decode(body["result"])
        # Masked payload, not a bare 0x00/0x01 answer byte.
        assert len(blob) > 64

    def test_query_determinism(self, world, rng):
        hs = random_hashes(rng, 6)
        insert_hashes(world, hs)
        outcomes = []
        for rid in ("11" * 16, "22" * 16):
            r = world["client"].post("/query",
                                     json=query_body(world, hs[2], request_id=rid))
            result = mpenc.deserialize_result(world["backend"],
                                              base64.b64decode(r.json()["result"]))
            outcomes.append(mpenc.decrypt_with_quorum(world["key"], result))
        assert outcomes[0] == outcomes[1]


class TestShareExchange:
    def _query(self, world, h, **kw):
        r = world["client"].post("/query", json=query_body(world, h, **kw))
        assert r.status_code == 200
        return r.json()

    def test_quorum_releases_plaintext(self, world, rng):
        hs = random_hashes(rng, 5)
        insert_hashes(world, hs)
        body = self._query(world, hs[1])
        r1, r2 = push_shares(world, body["request_id"], body["result"], [0, 1])
        assert r1.json()["status"] == "pending"
        assert r2.json() == {"status": "complete", "plaintext": True}

    def test_partial_quorum_pending(self, world, rng):
        hs = random_hashes(rng, 5)
        insert_hashes(world, hs)
        body = self._query(world, hs[1])
        (r1,) = push_shares(world, body["request_id"], body["result"], [0])
        assert r1.json() == {"status": "pending", "have": 1, "need": 2}

    def test_duplicate_share_idempotent(self, world, rng):
        hs = random_hashes(rng, 5)
        insert_hashes(world, hs)
        body = self._query(world, hs[1])
        r1, r2 = push_shares(world, body["request_id"], body["result"], [0, 0])
        assert r1.json()["status"] == "pending"
        assert r2.json() == {"status": "pending", "have": 1, "need": 2}

    def test_unknown_request_404(self, world):
        r = world["client"].post(
            "/decrypt/deadbeef/shares",
            json={"request_id": "deadbeef", "party": 0,
                  "payload": b64(b"x" * 16), "ct_digest": b64(b"y" * 32)})
        assert r.status_code == 404

    def test_wrong_binding_400(self, world, rng):
        hs = random_hashes(rng, 5)
        insert_hashes(world, hs)
        body = self._query(world, hs[1])
        r = world["client"].post(
            f"/decrypt/{body['request_id']}/shares",
            json={"request_id": body["request_id"], "party": 0,
                  "payload": b64(b"x" * 16), "ct_digest": b64(b"z" * 32)})
        assert r.status_code == 400


class TestHealthStats:
    def test_fresh_service(self, world):
        assert world["client"].get("/health").json() == {"status": "ok", "entries": 0}
        stats = world["client"].get("/stats").json()
        assert stats["entries"] == 0
        assert stats["queries"] == 0

    def test_counters_accumulate(self, world, rng):
        hs = random_hashes(rng, 3)
        insert_hashes(world, hs)
        stats1 = world["client"].get("/stats").json()
        assert stats1["entries"] == 3
        world["client"].post("/query", json=query_body(world, hs[0]))
        stats2 = world["client"].get("/stats").json()
        assert stats2["queries"] == stats1["queries"] + 1
        assert stats2["gates_total"]["xor"] > stats1["gates_total"]["xor"]


class TestConfig:
    def test_toml_and_env(self, tmp_path, monkeypatch):
        p = tmp_path / "svc.toml"
        p.write_text('store_path = "/data/reg.log"\nquorum_m = 3\nworkers = 2\n')
        cfg = load_config(p, env={"PROV_QUORUM_M": "4", "PROV_LISTEN_ADDR": "0.0.0.0:9000"})
        assert cfg.store_path == "/data/reg.log"
        assert cfg.quorum_m == 4  # env wins
        assert cfg.workers == 2
        assert cfg.listen_addr == "0.0.0.0:9000"
