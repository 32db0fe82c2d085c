import json

import numpy as np

from embedbench.extract import extract_directory
from embedbench.models import StubEmbedder, image_digest
from embedbench.phem import read_phem, write_phem

from conftest import synthetic_image


class TestStubEmbedder:
    def test_same_image_identical_embeddings(self, rng):
        img = synthetic_image(rng)
        model = StubEmbedder()
        a, b = model.embed(img), model.embed(img)
        assert np.array_equal(a, b)
        assert a.shape == (768,)
        assert a.dtype == np.float32

    def test_different_images_differ(self, rng):
        model = StubEmbedder()
        a = model.embed(synthetic_image(rng))
        b = model.embed(synthetic_image(rng))
        assert not np.array_equal(a, b)

    def test_batch_matches_single(self, rng):
        model = StubEmbedder()
        imgs = [synthetic_image(rng) for _ in range(3)]
        batch = model.embed_batch(imgs)
        for i, im in enumerate(imgs):
            assert np.array_equal(batch[i], model.embed(im))

    def test_image_digest_content_based(self, rng):
        img = synthetic_image(rng)
        assert image_digest(img) == image_digest(img.copy())


class TestExtractDirectory:
    def test_counts_ids_and_metadata(self, images_dir, tmp_path):
        out = tmp_path / "emb.phem"
        report = extract_directory(images_dir, out, StubEmbedder())
        assert report.count == 12
        assert report.skipped == []
        x, ids = read_phem(out)
        assert x.shape == (12, 768)
        assert ids == sorted(p.name for p in images_dir.iterdir())
        meta = json.loads((tmp_path / "emb.phem.meta.json").read_text())
        assert meta["pooling"] == "grayscale-thumbnail-projection"
        assert meta["count"] == 12

    def test_empty_directory(self, tmp_path):
        (tmp_path / "none").mkdir()
        out = tmp_path / "empty.phem"
        report = extract_directory(tmp_path / "none", out, StubEmbedder())
        assert report.count == 0
        x, ids = read_phem(out)
        assert x.shape == (0, 768)
        assert ids is None

    def test_undecodable_skipped_with_warning(self, images_dir, tmp_path, caplog):
        (images_dir / "broken.jpg").write_bytes(b"not an image at all")
        out = tmp_path / "emb.phem"
        with caplog.at_level("WARNING"):
            report = extract_directory(images_dir, out, StubEmbedder())
        assert report.count == 12
        assert report.skipped == ["broken.jpg"]
        assert any("broken.jpg" in r.message for r in caplog.records)

    def test_batching_boundary(self, images_dir, tmp_path):
        a = extract_directory(images_dir, tmp_path / "a.phem", StubEmbedder(), batch_size=5)
        b = extract_directory(images_dir, tmp_path / "b.phem", StubEmbedder(), batch_size=100)
        xa, _ = read_phem(a.out_path)
        xb, _ = read_phem(b.out_path)
        assert np.array_equal(xa, xb)


class TestPhemRoundTrip:
    def test_round_trip_with_ids(self, tmp_path, rng):
        x = rng.standard_normal((5, 768)).astype(np.float32)
        path = tmp_path / "r.phem"
        write_phem(path, x, [f"id-{i}" for i in range(5)])
        y, ids = read_phem(path)
        assert np.array_equal(x, y)
        assert ids == [f"id-{i}" for i in range(5)]
