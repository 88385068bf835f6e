"""Affinity graph construction, the Gaussian kernel, and the binary cache."""

import math

import numpy as np
import pytest

from sizeseg.affinity import AffinityConfig, AffinityGraph, build_affinity
from tests.conftest import random_graph


def brute_force_weights(img: np.ndarray, sigma: float) -> dict:
    """All 4-neighborhood edge weights computed with plain loops."""
    h, w = img.shape[:2]
    chans = img if img.ndim == 3 else img[:, :, None]
    out = {}
    for r in range(h):
        for c in range(w):
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if rr >= h or cc >= w:
                    continue
                d2 = float(np.sum((chans[r, c] - chans[rr, cc]) ** 2))
                out[(r * w + c, rr * w + cc)] = math.exp(-d2 / (2 * sigma ** 2))
    return out


class TestBuildAffinity:
    def test_constant_image_all_weights_one(self):
        graph = build_affinity(np.full((4, 5), 0.37))
        assert graph.num_edges > 0
        np.testing.assert_array_equal(graph.weights, 1.0)

    def test_distance_equal_to_sigma(self):
        img = np.array([[0.0, 0.3]])
        graph = build_affinity(img, AffinityConfig(sigma_i=0.3))
        assert graph.num_edges == 1
        assert abs(graph.weights[0] - 0.6065306597126334) < 1e-12

    def test_2x2_four_connected_has_four_edges(self):
        graph = build_affinity(np.zeros((2, 2)))
        assert graph.num_edges == 4
        pairs = set(zip(graph.p.tolist(), graph.q.tolist()))
        assert pairs == {(0, 1), (2, 3), (0, 2), (1, 3)}

    def test_2x2_eight_connected_adds_diagonals(self):
        graph = build_affinity(np.zeros((2, 2)),
                               AffinityConfig(connectivity="8"))
        pairs = set(zip(graph.p.tolist(), graph.q.tolist()))
        assert pairs == {(0, 1), (2, 3), (0, 2), (1, 3), (0, 3), (1, 2)}

    def test_disc_radius_one_equals_four_connected(self):
        img = np.arange(12, dtype=np.float64).reshape(3, 4) / 12.0
        four = build_affinity(img, AffinityConfig(sigma_i=0.5))
        disc = build_affinity(img, AffinityConfig(sigma_i=0.5,
                                                  connectivity="disc", radius=1))
        np.testing.assert_array_equal(four.p, disc.p)
        np.testing.assert_array_equal(four.q, disc.q)
        np.testing.assert_array_equal(four.weights, disc.weights)

    def test_weights_match_brute_force(self):
        rng = np.random.default_rng(30)
        img = rng.random((5, 6, 3))
        sigma = 0.4
        graph = build_affinity(img, AffinityConfig(sigma_i=sigma))
        expected = brute_force_weights(img, sigma)
        assert graph.num_edges == len(expected)
        for p, q, w in zip(graph.p, graph.q, graph.weights):
            assert abs(w - expected[(int(p), int(q))]) < 1e-12

    def test_default_bandwidth_is_mean_neighbor_distance(self):
        rng = np.random.default_rng(31)
        img = rng.random((4, 4))
        graph = build_affinity(img)
        expected = brute_force_weights(img, 1.0)  # sigma irrelevant for keys
        dists = []
        for (p, q) in expected:
            rp, cp = divmod(p, 4)
            rq, cq = divmod(q, 4)
            dists.append(abs(img[rp, cp] - img[rq, cq]))
        assert abs(graph.sigma_i - float(np.mean(dists))) < 1e-12

    def test_uint8_matches_rescaled_float(self):
        rng = np.random.default_rng(32)
        raw = rng.integers(0, 256, size=(4, 5, 3), dtype=np.uint8)
        a = build_affinity(raw, AffinityConfig(sigma_i=0.25))
        b = build_affinity(raw.astype(np.float64) / 255.0,
                           AffinityConfig(sigma_i=0.25))
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_rejects_bad_channel_count(self):
        with pytest.raises(ValueError):
            build_affinity(np.zeros((3, 3, 2)))

    def test_rejects_nonpositive_fixed_sigma(self):
        with pytest.raises(ValueError):
            AffinityConfig(sigma_i=-1.0)


class TestAffinityGraph:
    def test_rejects_unordered_edges(self):
        with pytest.raises(ValueError):
            AffinityGraph(height=1, width=3, p=np.array([2]), q=np.array([1]),
                          weights=np.array([1.0]))

    def test_rejects_out_of_range_edges(self):
        with pytest.raises(ValueError):
            AffinityGraph(height=1, width=2, p=np.array([0]), q=np.array([5]),
                          weights=np.array([1.0]))

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            AffinityGraph(height=1, width=2, p=np.array([0]), q=np.array([1]),
                          weights=np.array([-0.5]))

    def test_dense_is_symmetric_nonnegative_zero_diagonal(self):
        rng = np.random.default_rng(33)
        graph = random_graph(rng, 3, 4)
        dense = graph.dense()
        np.testing.assert_array_equal(dense, dense.T)
        assert np.all(dense >= 0)
        np.testing.assert_array_equal(np.diag(dense), 0.0)

    def test_apply_matches_dense_oracle(self):
        rng = np.random.default_rng(34)
        for _ in range(10):
            h, w = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            graph = random_graph(rng, h, w)
            dense = graph.dense()
            vec = rng.normal(size=graph.num_pixels)
            np.testing.assert_allclose(graph.apply(vec), dense @ vec,
                                       atol=1e-12)
            mat = rng.normal(size=(graph.num_pixels, 3))
            np.testing.assert_allclose(graph.apply(mat), dense @ mat,
                                       atol=1e-12)

    def test_degrees_match_dense_row_sums(self):
        rng = np.random.default_rng(35)
        graph = random_graph(rng, 4, 4)
        np.testing.assert_allclose(graph.degrees, graph.dense().sum(axis=1),
                                   atol=1e-12)

    def test_apply_rejects_wrong_length(self):
        rng = np.random.default_rng(36)
        graph = random_graph(rng, 3, 3)
        with pytest.raises(ValueError):
            graph.apply(np.zeros(5))


class TestAffinityCache:
    def test_round_trip_is_bitwise(self, tmp_path):
        rng = np.random.default_rng(37)
        img = rng.random((6, 7, 3))
        graph = build_affinity(img, AffinityConfig(connectivity="8"))
        path = tmp_path / "graph.bin"
        graph.save(path)
        loaded = AffinityGraph.load(path)
        assert (loaded.height, loaded.width) == (6, 7)
        np.testing.assert_array_equal(loaded.p, graph.p)
        np.testing.assert_array_equal(loaded.q, graph.q)
        np.testing.assert_array_equal(loaded.weights, graph.weights)

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(ValueError):
            AffinityGraph.load(path)

    def test_truncated_file_rejected(self, tmp_path):
        rng = np.random.default_rng(38)
        graph = build_affinity(rng.random((4, 4)))
        path = tmp_path / "graph.bin"
        graph.save(path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-7])
        with pytest.raises(ValueError):
            AffinityGraph.load(path)
