"""Cross-component format contract: embedding files written here must
parse bit-identically in the registry package and hash to the same
values through its CLI."""

import csv
import subprocess

import numpy as np

from embedbench.extract import extract_directory
from embedbench.models import StubEmbedder
from embedbench.phem import read_phem

from conftest import synthetic_image


def provreg(*args):
    proc = subprocess.run(["provreg", *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


class TestFormatContract:
    def test_100_images_parse_and_hash_identically(self, tmp_path, rng):
        images = tmp_path / "images"
        images.mkdir()
        for i in range(100):
            synthetic_image(rng, (64, 64)).save(images / f"s{i:03d}.png")

        phem = tmp_path / "sample.phem"
        extract_directory(images, phem, StubEmbedder())

        # The registry package's reader sees bit-identical floats and ids.
        from provreg.hashing import read_embeddings
        ours, our_ids = read_phem(phem)
        theirs, their_ids = read_embeddings(phem)
        assert np.array_equal(
            ours.view(np.uint32), np.asarray(theirs).view(np.uint32))
        assert our_ids == their_ids

        # Fit + hash through the registry CLI, then recompute the hashes
        # from our own parse through the registry library: identical.
        model_path = tmp_path / "model.phwm"
        hashes_path = tmp_path / "hashes.csv"
        provreg("fit-pca", "--embeddings", str(phem), "--out", str(model_path))
        provreg("hash", "--model", str(model_path),
                "--embeddings", str(phem), "--out", str(hashes_path))
        with open(hashes_path, newline="") as f:
            cli_hashes = {row["id"]: row["hash"] for row in csv.DictReader(f)}

        from provreg.hashing import hash_embeddings, read_whitening_model
        model = read_whitening_model(model_path)
        expected = {
            i: h.hex() for i, h in zip(our_ids, hash_embeddings(model, ours))
        }
        assert len(cli_hashes) == 100
        assert cli_hashes == expected

    def test_empty_phem_parses_in_registry_reader(self, tmp_path):
        (tmp_path / "none").mkdir()
        phem = tmp_path / "empty.phem"
        extract_directory(tmp_path / "none", phem, StubEmbedder())
        from provreg.hashing import read_embeddings
        x, ids = read_embeddings(phem)
        assert x.shape == (0, 768)
        assert ids is None
