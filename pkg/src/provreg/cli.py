"""Operator command line: fit the whitening model, hash embeddings,
calibrate thresholds, and drive the full encrypted-match protocol on one
machine (keygen / insert / query / decrypt / bench)."""

from __future__ import annotations

import csv
import json
import os
import sys

import click

from . import bench as bench_mod
from . import hashing, matchstats, mpenc, registry
from .circuits import width_for_count
from .errors import ProvRegError


def _fail(exc: Exception):
    sys.stderr.write(json.dumps({
        "error": type(exc).__name__,
        "detail": str(exc),
    }) + "\n")
    sys.exit(1)


@click.group()
def main():
    """Private content-provenance registry tools."""


@main.command("fit-pca")
@click.option("--embeddings", "emb_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dim", default=hashing.DEFAULT_HASH_BITS, show_default=True)
def fit_pca(emb_path, out_path, dim):
    """Fit the whitening model on an embedding file."""
    try:
        x, _ = hashing.read_embeddings(emb_path)
        model = hashing.fit_whitening(x, output_dim=dim)
        hashing.write_whitening_model(out_path, model)
    except (ProvRegError, OSError) as exc:
        _fail(exc)
    ev = model.eigenvalues
    click.echo(f"fitted {model.input_dim} -> {model.output_dim} on {model.sample_count} samples")
    click.echo(f"component variance: max={ev[0]:.6g} min={ev[-1]:.6g} "
               f"explained={ev.sum():.6g}")


@main.command("hash")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "emb_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def hash_cmd(model_path, emb_path, out_path):
    """Hash every embedding in a file; writes CSV rows "id,hex"."""
    try:
        model = hashing.read_whitening_model(model_path)
        x, ids = hashing.read_embeddings(emb_path)
        hashes = hashing.hash_embeddings(model, x)
    except (ProvRegError, OSError) as exc:
        _fail(exc)
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "hash"])
        for i, h in enumerate(hashes):
            w.writerow([ids[i] if ids else str(i), h.hex()])
    click.echo(f"wrote {len(hashes)} hashes to {out_path}")


@main.command("threshold")
@click.option("--k", default=hashing.DEFAULT_HASH_BITS, show_default=True)
@click.option("--target-fpr", "target", required=True, type=float)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def threshold_cmd(k, target, fmt):
    """Smallest match threshold whose exact false-positive rate meets the
    target."""
    try:
        th = matchstats.threshold_for_fpr(target, k)
    except ProvRegError as exc:
        _fail(exc)
    p = matchstats.fpr(th.tau, k)
    if fmt == "json":
        click.echo(json.dumps({
            "tau": th.tau, "k": k, "distance_form": th.distance_form,
            "fpr_exact": str(p), "fpr": p.as_float(),
        }))
    else:
        click.echo(f"tau = {th.tau}  (max Hamming distance t = {th.distance_form})")
        click.echo(f"exact FPR = {p} = {p.as_float():.6g}")


def _write_keys(path, key: mpenc.KeyMaterial, n, m, seed):
    with open(path, "w") as f:
        json.dump({
            "n": n, "m": m, "seed": seed,
            "public_key": key.public.public_key.hex(),
            "key_digest": key.public.key_digest.hex(),
            "secret_digest": key.public.secret_digest.hex(),
            "params_digest": key.public.params_digest.hex(),
            "shares": [{"party": s.party, "value": str(s.value)} for s in key.shares],
        }, f, indent=2)


def _read_keys(path) -> mpenc.KeyMaterial:
    with open(path) as f:
        d = json.load(f)
    pub = mpenc.PublicKeyInfo(
        n=d["n"], m=d["m"],
        public_key=bytes.fromhex(d["public_key"]),
        key_digest=bytes.fromhex(d["key_digest"]),
        secret_digest=bytes.fromhex(d["secret_digest"]),
        params_digest=bytes.fromhex(d["params_digest"]),
    )
    shares = tuple(
        mpenc.SecretShare(party=s["party"], value=int(s["value"]),
                          key_digest=pub.key_digest)
        for s in d["shares"]
    )
    return mpenc.KeyMaterial(public=pub, shares=shares)


@main.command("keygen")
@click.option("--n", default=2, show_default=True)
@click.option("--m", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default="keys.json", show_default=True)
def keygen(n, m, seed, out_path):
    """Run the multi-party key setup; writes all shares to one file.

    Holding every share in one file is for single-machine demos only."""
    try:
        _, key = mpenc.setup(n=n, m=m, rng_seed=seed)
    except ProvRegError as exc:
        _fail(exc)
    _write_keys(out_path, key, n, m, seed)
    click.echo(f"aggregated key {key.public.key_digest.hex()[:16]}... "
               f"({m}-of-{n}) written to {out_path}")


def _load_producer(path, producer_id):
    if os.path.exists(path):
        with open(path) as f:
            d = json.load(f)
        identity = registry.ProducerIdentity(d["producer_id"],
                                             bytes.fromhex(d["verify_key"]))
        return identity, bytes.fromhex(d["signing_key"])
    identity, sk = registry.generate_producer(producer_id)
    with open(path, "w") as f:
        json.dump({"producer_id": producer_id,
                   "signing_key": sk.hex(),
                   "verify_key": identity.verify_key.hex()}, f, indent=2)
    return identity, sk


def _open_store(store_path, key: mpenc.KeyMaterial) -> registry.RegistryStore:
    return registry.RegistryStore(store_path, key.public.key_digest)


@main.command("insert")
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--hashes", "hashes_path", required=True, type=click.Path(exists=True))
@click.option("--producer", default="default-producer", show_default=True)
@click.option("--producer-key", "pk_path", default="producer-key.json", show_default=True)
def insert(keys_path, store_path, hashes_path, producer, pk_path):
    """Encrypt, sign, and append each hash from a hash CSV."""
    try:
        key = _read_keys(keys_path)
        backend = mpenc.SimulationBackend(key.public)
        identity, sk = _load_producer(pk_path, producer)
        store = _open_store(store_path, key)
        store.register_producer(identity)
        count = 0
        with open(hashes_path, newline="") as f:
            reader = csv.DictReader(f)
            for row in reader:
                h = hashing.PerceptualHash.from_hex(row["hash"])
                eh = mpenc.encrypt_hash(backend, h)
                blob = mpenc.serialize_encrypted_hash(eh)
                entry = registry.make_entry(sk, identity.producer_id,
                                            key.public.key_digest, blob,
                                            metadata={"id": row.get("id", "")})
                store.insert_entry(entry)
                count += 1
    except (ProvRegError, OSError) as exc:
        _fail(exc)
    click.echo(f"inserted {count} entries; store now holds {len(store)}")


@main.command("query")
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--hash", "hash_hex", required=True)
@click.option("--t", "t_dist", default=8, show_default=True,
              help="maximum Hamming distance counted as a match")
@click.option("--mode", type=click.Choice(["or", "count"]), default="or")
@click.option("--threads", default=1, show_default=True)
@click.option("--out", "out_path", default="result.json", show_default=True)
def query(keys_path, store_path, hash_hex, t_dist, mode, threads, out_path):
    """Run an encrypted query against the store; writes the encrypted
    result for later quorum decryption."""
    try:
        key = _read_keys(keys_path)
        backend = mpenc.SimulationBackend(key.public)
        store = _open_store(store_path, key)
        blobs = store.scan_for_query()
        db = [mpenc.deserialize_encrypted_hash(backend, b) for b in blobs]
        h = hashing.PerceptualHash.from_hex(hash_hex)
        q = mpenc.encrypt_hash(backend, h)
        t_enc = mpenc.encrypt_threshold(backend, t_dist, width_for_count(h.k))
        result, telemetry = mpenc.evaluate_query_instrumented(
            db, q, t_enc, mode=mode, workers=threads)
    except (ProvRegError, OSError) as exc:
        _fail(exc)
    import base64
    with open(out_path, "w") as f:
        json.dump({
            "mode": mode,
            "result": base64.b64encode(mpenc.serialize_result(result)).decode(),
            "gates": telemetry.gates.as_dict(),
            "timing": {"xor_ms": telemetry.timings.xor_ms,
                       "hd_ms": telemetry.timings.hd_ms,
                       "full_ms": telemetry.timings.full_ms},
        }, f, indent=2)
    click.echo(f"queried {len(db)} entries; encrypted result written to {out_path}")


@main.command("decrypt")
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--result", "result_path", required=True, type=click.Path(exists=True))
@click.option("--parties", default=None,
              help="comma-separated party indices contributing shares (default: all)")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def decrypt(keys_path, result_path, parties, fmt):
    """Combine decryption shares from a quorum of parties and print the
    query outcome."""
    import base64
    try:
        key = _read_keys(keys_path)
        backend = mpenc.SimulationBackend(key.public)
        with open(result_path) as f:
            d = json.load(f)
        result = mpenc.deserialize_result(backend, base64.b64decode(d["result"]))
        idxs = ([int(p) for p in parties.split(",")] if parties
                else [s.party for s in key.shares])
        plaintext = mpenc.decrypt_with_quorum(key, result, idxs)
    except (ProvRegError, OSError) as exc:
        _fail(exc)
    if result.kind == "or":
        out = {"match": bool(plaintext)}
    else:
        out = {"close_entries": int(plaintext)}
    if fmt == "json":
        click.echo(json.dumps(out))
    else:
        ((k, v),) = out.items()
        click.echo(f"{k}: {str(v).lower() if isinstance(v, bool) else v}")


@main.command("export")
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def export(keys_path, store_path, out_path):
    """Export registry entries as line-delimited JSON."""
    try:
        key = _read_keys(keys_path)
        store = _open_store(store_path, key)
        store.export_jsonl(out_path)
    except (ProvRegError, OSError) as exc:
        _fail(exc)
    click.echo(f"exported {len(store)} entries to {out_path}")


@main.command("bench")
@click.option("--entries", default=1000, show_default=True)
@click.option("--trials", default=3, show_default=True)
@click.option("--threads", default=1, show_default=True)
@click.option("--t", "t_dist", default=8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "json", "csv"]), default="text")
def bench(entries, trials, threads, t_dist, seed, fmt):
    """Benchmark one encrypted query on the simulation backend."""
    try:
        report = bench_mod.run_bench(entries=entries, trials=trials,
                                     threads=threads, threshold=t_dist, seed=seed)
    except ProvRegError as exc:
        _fail(exc)
    if fmt == "json":
        click.echo(json.dumps(report.as_dict()))
    elif fmt == "csv":
        click.echo("system,xor_ms,hd_ms,full_ms")
        click.echo(f"simulation,{report.xor_ms:.3f},{report.hd_ms:.3f},{report.full_ms:.3f}")
        for row in bench_mod.REFERENCE_ROWS:
            click.echo(f"\"{row['system']} [reported]\",{row['xor_ms']},{row['hd_ms']},{row['full_ms']}")
    else:
        click.echo(bench_mod.format_report(report))


if __name__ == "__main__":
    main()
