import csv
import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from provreg import hashing
from provreg.cli import main

from conftest import random_hashes


@pytest.fixture
def runner():
    return CliRunner()


def make_embeddings_file(path, n=200, d=16, seed=0):
    rng = np.random.default_rng(seed)
    x = (rng.normal(size=(n, d)) @ rng.normal(size=(d, d))).astype(np.float32)
    hashing.write_embeddings(path, x, [f"img-{i}" for i in range(n)])
    return x


class TestFitAndHash:
    def test_fit_hash_pipeline(self, runner, tmp_path):
        emb = tmp_path / "e.phem"
        model_path = tmp_path / "m.phwm"
        hashes_path = tmp_path / "hashes.csv"
        make_embeddings_file(emb, d=16)

        r = runner.invoke(main, ["fit-pca", "--embeddings", str(emb),
                                 "--out", str(model_path), "--dim", "8"])
        assert r.exit_code == 0, r.output
        assert "component variance" in r.output

        r = runner.invoke(main, ["hash", "--model", str(model_path),
                                 "--embeddings", str(emb), "--out", str(hashes_path)])
        assert r.exit_code == 0, r.output
        with open(hashes_path, newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 200
        assert rows[0]["id"] == "img-0"

        # Batch hashing equals per-item hashing.
        model = hashing.read_whitening_model(model_path)
        x, _ = hashing.read_embeddings(emb)
        for row, e in zip(rows[:20], x[:20]):
            assert row["hash"] == hashing.hash_embedding(model, e).hex()

    def test_mean_embedding_hashes_to_all_ones(self, tmp_path):
        # At k=96 the model mean whitens to the zero vector, which the
        # zero-maps-to-one convention turns into the all-ones hash.  The
        # check runs at model precision (float64); the float32 embedding
        # file format cannot represent the mean exactly.
        rng = np.random.default_rng(1)
        x = rng.normal(size=(400, 128)) @ rng.normal(size=(128, 128))
        model = hashing.fit_whitening(x, output_dim=96)
        assert hashing.hash_embedding(model, model.mean).hex() == "ff" * 12

    def test_hash_hex_round_trip(self, runner, tmp_path):
        emb = tmp_path / "e.phem"
        model_path = tmp_path / "m.phwm"
        out = tmp_path / "h.csv"
        make_embeddings_file(emb, n=20, d=16)
        runner.invoke(main, ["fit-pca", "--embeddings", str(emb),
                             "--out", str(model_path), "--dim", "8"])
        runner.invoke(main, ["hash", "--model", str(model_path),
                             "--embeddings", str(emb), "--out", str(out)])
        with open(out, newline="") as f:
            rows = list(csv.DictReader(f))
        for row in rows:
            h = hashing.PerceptualHash.from_hex(row["hash"], k=8)
            assert h.hex() == row["hash"]

    def test_too_few_samples_error(self, runner, tmp_path):
        emb = tmp_path / "e.phem"
        make_embeddings_file(emb, n=5, d=16)
        r = runner.invoke(main, ["fit-pca", "--embeddings", str(emb),
                                 "--out", str(tmp_path / "m"), "--dim", "8"])
        assert r.exit_code == 1
        assert "TooFewSamples" in r.output or "TooFewSamples" in (r.stderr or "")


class TestThreshold:
    def test_trivial(self, runner):
        r = runner.invoke(main, ["threshold", "--k", "96", "--target-fpr", "1.0",
                                 "--format", "json"])
        assert json.loads(r.output)["tau"] == 0

    def test_boundary(self, runner):
        r = runner.invoke(main, ["threshold", "--k", "96",
                                 "--target-fpr", str(2.0**-96), "--format", "json"])
        assert json.loads(r.output)["tau"] == 96

    def test_scan_verified(self, runner):
        from provreg.matchstats import fpr
        from fractions import Fraction
        r = runner.invoke(main, ["threshold", "--k", "96", "--target-fpr", "1e-6",
                                 "--format", "json"])
        out = json.loads(r.output)
        expected = min(t for t in range(97)
                       if fpr(t, 96).as_fraction() <= Fraction(1e-6))
        assert out["tau"] == expected
        assert out["distance_form"] == 96 - expected


class TestProtocolCommands:
    def _seed_hashes_csv(self, path, hashes):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["id", "hash"])
            for i, h in enumerate(hashes):
                w.writerow([str(i), h.hex()])

    def test_end_to_end_demo(self, runner, tmp_path, rng):
        os.chdir(tmp_path)
        hs = random_hashes(rng, 100)
        self._seed_hashes_csv("hashes.csv", hs)

        r = runner.invoke(main, ["keygen", "--n", "2", "--m", "2", "--seed", "7"])
        assert r.exit_code == 0, r.output
        r = runner.invoke(main, ["insert", "--keys", "keys.json",
                                 "--store", "reg.log", "--hashes", "hashes.csv"])
        assert r.exit_code == 0, r.output
        assert "inserted 100" in r.output

        # Query a stored hash: must match.
        r = runner.invoke(main, ["query", "--keys", "keys.json", "--store", "reg.log",
                                 "--hash", hs[17].hex(), "--t", "8"])
        assert r.exit_code == 0, r.output
        r = runner.invoke(main, ["decrypt", "--keys", "keys.json",
                                 "--result", "result.json"])
        assert r.exit_code == 0, r.output
        assert "match: true" in r.output

        # A fresh random hash: no match (overwhelming probability at t=8).
        fresh = random_hashes(rng, 1)[0]
        r = runner.invoke(main, ["query", "--keys", "keys.json", "--store", "reg.log",
                                 "--hash", fresh.hex(), "--t", "8"])
        assert r.exit_code == 0
        r = runner.invoke(main, ["decrypt", "--keys", "keys.json",
                                 "--result", "result.json", "--format", "json"])
        assert json.loads(r.output) == {"match": False}

        # Quorum short by one: machine-readable error, nonzero exit.
        r = runner.invoke(main, ["decrypt", "--keys", "keys.json",
                                 "--result", "result.json", "--parties", "0"])
        assert r.exit_code == 1
        err = json.loads(r.output.strip().splitlines()[-1])
        assert err["error"] == "DecryptionIncomplete"

    def test_count_mode_and_export(self, runner, tmp_path, rng):
        os.chdir(tmp_path)
        hs = random_hashes(rng, 10)
        self._seed_hashes_csv("hashes.csv", hs)
        runner.invoke(main, ["keygen"])
        runner.invoke(main, ["insert", "--keys", "keys.json", "--store", "reg.log",
                             "--hashes", "hashes.csv"])
        r = runner.invoke(main, ["query", "--keys", "keys.json", "--store", "reg.log",
                                 "--hash", hs[0].hex(), "--mode", "count"])
        assert r.exit_code == 0, r.output
        r = runner.invoke(main, ["decrypt", "--keys", "keys.json",
                                 "--result", "result.json", "--format", "json"])
        assert json.loads(r.output) == {"close_entries": 1}

        r = runner.invoke(main, ["export", "--keys", "keys.json",
                                 "--store", "reg.log", "--out", "dump.jsonl"])
        assert r.exit_code == 0
        assert len(open("dump.jsonl").read().strip().split("\n")) == 10

    def test_invalid_keygen(self, runner, tmp_path):
        os.chdir(tmp_path)
        r = runner.invoke(main, ["keygen", "--n", "2", "--m", "3"])
        assert r.exit_code == 1


class TestBenchCommand:
    def test_small_bench_json(self, runner):
        r = runner.invoke(main, ["bench", "--entries", "20", "--trials", "2",
                                 "--format", "json"])
        assert r.exit_code == 0, r.output
        rep = json.loads(r.output)
        assert rep["xor_phase_gates"]["xor"] == 20 * 96
        assert rep["full_ms"] >= rep["hd_ms"] >= rep["xor_ms"]

    def test_text_has_reference_rows(self, runner):
        r = runner.invoke(main, ["bench", "--entries", "5", "--trials", "1"])
        assert "reported, real FHE" in r.output
        assert "Full Query" in r.output
