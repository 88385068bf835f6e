"""Annotation HTTP service: blind protocol, idempotency, stats, export."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sizeseg.fields import TagSet
from sizeseg.service import create_app
from sizeseg.simplex import CategoricalDist
from sizeseg.synthdata import (
    SampleRecord,
    load_sizes,
    save_dataset,
    sizes_from_mask,
)

NUM_CLASSES = 3


def _record(image_id: str, fractions: dict[int, float]) -> SampleRecord:
    """10x10 image whose class-k block covers an exact pixel fraction."""
    mask = np.zeros((10, 10), dtype=np.int64)
    flat = mask.reshape(-1)
    cursor = 0
    for k, fraction in sorted(fractions.items()):
        count = round(fraction * 100)
        flat[cursor:cursor + count] = k
        cursor += count
    levels = np.linspace(0.1, 0.9, NUM_CLASSES)
    image = np.repeat(levels[mask][:, :, None], 3, axis=2)
    return SampleRecord(
        image_id=image_id,
        image=image,
        mask=mask,
        tags=TagSet(np.unique(mask)),
        exact_sizes=sizes_from_mask(mask, NUM_CLASSES),
    )


@pytest.fixture()
def dataset_dir(tmp_path):
    root = tmp_path / "data"
    records = [
        _record("img-a", {1: 0.20}),          # class 1 only, exactly 20%
        _record("img-b", {1: 0.20, 2: 0.10}),  # both object classes
    ]
    save_dataset(root, records, NUM_CLASSES)
    return root


@pytest.fixture()
def client(dataset_dir, tmp_path):
    app = create_app(dataset_dir=dataset_dir,
                     store_path=tmp_path / "log.ndjson")
    return TestClient(app)


def post_estimate(client, image_id, class_id, fraction, request_id,
                  annotator="anon", elapsed_ms=1500.0):
    return client.post("/api/annotation", json={
        "request_id": request_id,
        "image_id": image_id,
        "class_id": class_id,
        "fraction": fraction,
        "elapsed_ms": elapsed_ms,
        "grid_mode": "5x4",
        "annotator": annotator,
    })


class TestBlindProtocol:
    def test_no_dataset_means_503(self, tmp_path):
        app = create_app(store_path=tmp_path / "log.ndjson")
        blind = TestClient(app)
        assert blind.get("/api/manifest").status_code == 503
        assert blind.get("/api/image/img-a").status_code == 503

    def test_manifest_exposes_geometry_and_tags_only(self, client):
        body = client.get("/api/manifest").json()
        assert body["num_classes"] == NUM_CLASSES
        assert [e["id"] for e in body["images"]] == ["img-a", "img-b"]
        for entry in body["images"]:
            assert set(entry) == {"id", "tags", "height", "width"}
        text = json.dumps(body)
        assert "size" not in text and "mask" not in text

    def test_image_bytes_are_png(self, client):
        resp = client.get("/api/image/img-a")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown_image_is_404(self, client):
        assert client.get("/api/image/nope").status_code == 404


class TestAnnotationValidation:
    def test_fraction_above_one_rejected(self, client):
        assert post_estimate(client, "img-a", 1, 1.2, "q1").status_code == 422

    def test_unknown_image_rejected(self, client):
        assert post_estimate(client, "ghost", 1, 0.2, "q2").status_code == 422

    def test_background_class_rejected(self, client):
        assert post_estimate(client, "img-a", 0, 0.8, "q3").status_code == 422

    def test_untagged_class_rejected(self, client):
        resp = post_estimate(client, "img-a", 2, 0.2, "q4")
        assert resp.status_code == 422
        assert "not tagged" in resp.json()["detail"]

    def test_response_contains_only_the_record_id(self, client):
        resp = post_estimate(client, "img-a", 1, 0.25, "q5")
        assert resp.status_code == 201
        assert set(resp.json()) == {"record_id"}


class TestIdempotency:
    def test_replayed_request_returns_same_record(self, client):
        first = post_estimate(client, "img-a", 1, 0.25, "dup-1")
        again = post_estimate(client, "img-a", 1, 0.25, "dup-1")
        assert first.status_code == 201
        assert again.status_code == 200
        assert first.json()["record_id"] == again.json()["record_id"]
        assert client.get("/api/stats").json()["records"] == 1

    def test_distinct_requests_create_distinct_records(self, client):
        a = post_estimate(client, "img-a", 1, 0.25, "u1")
        b = post_estimate(client, "img-b", 1, 0.25, "u2")
        assert a.json()["record_id"] != b.json()["record_id"]


class TestStats:
    def test_quarter_over_fifth_gives_mean_re_025(self, client):
        post_estimate(client, "img-a", 1, 0.25, "s1")
        stats = client.get("/api/stats").json()
        assert abs(stats["per_class"]["1"]["mean_re"] - 0.25) < 1e-12
        assert stats["per_class"]["1"]["count"] == 1

    def test_mean_re_averages_within_class(self, client):
        post_estimate(client, "img-a", 1, 0.22, "s2")   # RE 0.10
        post_estimate(client, "img-b", 1, 0.26, "s3")   # RE 0.30
        stats = client.get("/api/stats").json()
        assert abs(stats["per_class"]["1"]["mean_re"] - 0.20) < 1e-12

    def test_latest_write_wins_per_image_class(self, client):
        post_estimate(client, "img-a", 1, 0.60, "s4")
        post_estimate(client, "img-a", 1, 0.25, "s5")
        stats = client.get("/api/stats").json()
        assert abs(stats["per_class"]["1"]["mean_re"] - 0.25) < 1e-12
        assert stats["records"] == 2

    def test_completion_requires_every_tagged_class(self, client):
        post_estimate(client, "img-b", 1, 0.2, "s6")
        partial = client.get("/api/stats").json()
        assert partial["annotated_images"] == 1
        assert partial["complete_images"] == 0
        post_estimate(client, "img-b", 2, 0.1, "s7")
        assert client.get("/api/stats").json()["complete_images"] == 1

    def test_histogram_counts_follow_entries(self, client):
        post_estimate(client, "img-a", 1, 0.252, "s8")  # RE 0.26 -> bin 10
        hist = client.get("/api/stats").json()["histogram"]
        assert hist["counts"][1][10] == 1
        assert hist["bin_width"] == 0.025

    def test_mean_elapsed_time_reported(self, client):
        post_estimate(client, "img-a", 1, 0.25, "s9", elapsed_ms=1000.0)
        post_estimate(client, "img-b", 1, 0.20, "s10", elapsed_ms=3000.0)
        stats = client.get("/api/stats").json()
        assert stats["per_class"]["1"]["mean_elapsed_ms"] == 2000.0


class TestExport:
    def test_background_is_the_complement(self, client, dataset_dir):
        post_estimate(client, "img-b", 1, 0.2, "e1")
        post_estimate(client, "img-b", 2, 0.1, "e2")
        resp = client.post("/api/export", json={"filename": "out.json"}).json()
        assert resp["exported"] == 1
        assert resp["skipped"] == ["img-a"]
        sizes = load_sizes(dataset_dir / "sizes" / "out.json", NUM_CLASSES)
        np.testing.assert_allclose(sizes["img-b"].probs, [0.7, 0.2, 0.1],
                                   atol=1e-12)

    def test_oversized_estimates_are_rescaled_and_flagged(self, client,
                                                          dataset_dir):
        post_estimate(client, "img-b", 1, 0.8, "e3")
        post_estimate(client, "img-b", 2, 0.6, "e4")
        resp = client.post("/api/export", json={"filename": "big.json"}).json()
        assert resp["rescaled"] == ["img-b"]
        sizes = load_sizes(dataset_dir / "sizes" / "big.json", NUM_CLASSES)
        np.testing.assert_allclose(sizes["img-b"].probs,
                                   [0.0, 0.8 / 1.4, 0.6 / 1.4], atol=1e-12)

    def test_incomplete_images_are_skipped(self, client):
        post_estimate(client, "img-b", 1, 0.2, "e5")
        resp = client.post("/api/export", json={}).json()
        assert resp["exported"] == 0
        assert set(resp["skipped"]) == {"img-a", "img-b"}
        assert resp["path"] is None

    def test_annotator_filter(self, client, dataset_dir):
        post_estimate(client, "img-a", 1, 0.25, "e6", annotator="alice")
        post_estimate(client, "img-a", 1, 0.60, "e7", annotator="bob")
        resp = client.post("/api/export", json={
            "filename": "alice.json", "annotator": "alice"}).json()
        assert resp["exported"] == 1
        sizes = load_sizes(dataset_dir / "sizes" / "alice.json", NUM_CLASSES)
        assert abs(sizes["img-a"].probs[1] - 0.25) < 1e-12

    def test_exported_file_feeds_the_trainer(self, client, dataset_dir):
        post_estimate(client, "img-a", 1, 0.25, "e8")
        post_estimate(client, "img-b", 1, 0.2, "e9")
        post_estimate(client, "img-b", 2, 0.1, "e10")
        client.post("/api/export", json={"filename": "train.json"})

        from sizeseg.net import ModelConfig
        from sizeseg.synthdata import load_dataset
        from sizeseg.trainer import SupervisionMode, TrainConfig, train
        records = load_dataset(dataset_dir,
                               sizes_path=dataset_dir / "sizes" / "train.json")
        assert all(r.sizes is not None for r in records)
        report = train(records,
                       ModelConfig(architecture="pixel-linear",
                                   num_classes=NUM_CLASSES),
                       TrainConfig(mode=SupervisionMode.SIZE, epochs=2,
                                   batch_size=2, rng_seed=0))
        assert np.isfinite(report.final_loss)


class TestPersistence:
    def test_log_replays_across_restarts(self, dataset_dir, tmp_path):
        store = tmp_path / "log.ndjson"
        first = TestClient(create_app(dataset_dir=dataset_dir,
                                      store_path=store))
        post_estimate(first, "img-a", 1, 0.25, "p1")
        post_estimate(first, "img-b", 1, 0.20, "p2")

        reborn = TestClient(create_app(dataset_dir=dataset_dir,
                                       store_path=store))
        stats = reborn.get("/api/stats").json()
        assert stats["records"] == 2
        replay = post_estimate(reborn, "img-a", 1, 0.25, "p1")
        assert replay.status_code == 200

    def test_log_lines_are_one_json_record_each(self, dataset_dir, tmp_path):
        store = tmp_path / "log.ndjson"
        client = TestClient(create_app(dataset_dir=dataset_dir,
                                       store_path=store))
        post_estimate(client, "img-a", 1, 0.25, "p3")
        lines = store.read_text().splitlines()
        assert len(lines) == 1
        rec = json.loads(lines[0])
        assert rec["image_id"] == "img-a"
        assert rec["fraction"] == 0.25
