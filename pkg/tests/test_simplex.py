"""Categorical distributions, KL primitives, averaging, and size corruption."""

import math

import numpy as np
import pytest

from sizeseg.fields import PredictionField
from sizeseg.simplex import (
    MRE_PER_SIGMA,
    UNDEFINED,
    CategoricalDist,
    CorruptionConfig,
    average_prediction,
    _corrupt_with_noise,
    corrupt_sizes,
    kl_forward,
    kl_reverse,
    minimize_over_simplex,
    mre_for_sigma,
    sigma_for_mre,
    uniform_over,
)
from tests.conftest import field_from_probs, one_hot_field


LN2 = 0.6931471805599453


def random_dist(rng: np.random.Generator, k: int) -> CategoricalDist:
    x = rng.random(k) + 1e-3
    return CategoricalDist(x / x.sum())


class TestCategoricalDist:
    def test_valid_construction(self):
        d = CategoricalDist([0.25, 0.75])
        assert d.k == 2
        assert d[1] == 0.75

    def test_rejects_negative_entries(self):
        with pytest.raises(ValueError):
            CategoricalDist([1.2, -0.2])

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            CategoricalDist([0.5, 0.6])

    def test_support(self):
        assert CategoricalDist([0.5, 0.0, 0.5]).support() == {0, 2}

    def test_immutable(self):
        d = CategoricalDist([0.5, 0.5])
        with pytest.raises(ValueError):
            d.probs[0] = 0.9


class TestAveragePrediction:
    def test_two_opposite_pixels(self):
        field = one_hot_field([[0, 1]], k=2)
        avg = average_prediction(field)
        np.testing.assert_allclose(avg.probs, [0.5, 0.5], atol=1e-15)

    def test_constant_field_is_identity(self):
        field = field_from_probs(np.full((3, 4, 2), (0.3, 0.7)))
        avg = average_prediction(field)
        np.testing.assert_allclose(avg.probs, [0.3, 0.7], atol=1e-12)

    def test_two_thirds_one_third(self):
        field = one_hot_field([[0, 0, 1]], k=2)
        avg = average_prediction(field)
        np.testing.assert_allclose(avg.probs, [2 / 3, 1 / 3], atol=1e-15)

    def test_empty_domain_rejected(self):
        with pytest.raises(ValueError):
            PredictionField.from_logits(np.zeros((0, 4, 2)))


class TestKLForward:
    def test_self_divergence_is_zero(self):
        d = CategoricalDist([0.3, 0.7])
        assert kl_forward(d, d) == 0.0

    def test_one_hot_against_uniform(self):
        v = CategoricalDist([1.0, 0.0])
        q = CategoricalDist([0.5, 0.5])
        assert abs(kl_forward(v, q) - LN2) < 1e-9

    def test_skewed_against_uniform(self):
        v = CategoricalDist([0.7, 0.3])
        q = CategoricalDist([0.5, 0.5])
        assert abs(kl_forward(v, q) - 0.08228287850505178) < 1e-9

    def test_infinite_on_zero_prediction_with_target_mass(self):
        v = CategoricalDist([0.5, 0.5])
        q = CategoricalDist([1.0, 0.0])
        assert math.isinf(kl_forward(v, q))
        assert kl_forward(v, q) > 0

    def test_gibbs_inequality_random_pairs(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            v, q = random_dist(rng, k), random_dist(rng, k)
            assert kl_forward(v, q) >= -1e-12
            assert kl_forward(v, v) == pytest.approx(0.0, abs=1e-12)

    def test_zero_target_entries_contribute_nothing(self):
        v = CategoricalDist([0.0, 1.0])
        q = CategoricalDist([0.4, 0.6])
        assert abs(kl_forward(v, q) - math.log(1 / 0.6)) < 1e-12


class TestKLReverse:
    def test_self_divergence_is_zero(self):
        d = CategoricalDist([0.4, 0.6])
        assert kl_reverse(d, d) == 0.0

    def test_undefined_on_zero_support_target(self):
        q = CategoricalDist([0.5, 0.5])
        v = CategoricalDist([1.0, 0.0])
        assert kl_reverse(q, v) is UNDEFINED

    def test_uniform_against_skewed(self):
        q = CategoricalDist([0.5, 0.5])
        v = CategoricalDist([0.9, 0.1])
        assert abs(kl_reverse(q, v) - 0.5108256237659906) < 1e-9

    def test_undefined_exactly_on_support_violation(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            q = CategoricalDist([0.5, 0.25, 0.25])
            mask = rng.random(3) < 0.4
            raw = rng.random(3) * ~mask
            if raw.sum() == 0:
                continue
            v = CategoricalDist(raw / raw.sum())
            violated = any(q[i] > 0 and v[i] == 0 for i in range(3))
            result = kl_reverse(q, v)
            assert (result is UNDEFINED) == violated


class TestUniformOver:
    def test_two_of_three(self):
        np.testing.assert_array_equal(uniform_over({0, 1}, 3).probs,
                                      [0.5, 0.5, 0.0])

    def test_singleton(self):
        np.testing.assert_array_equal(uniform_over({2}, 3).probs,
                                      [0.0, 0.0, 1.0])

    def test_all_classes(self):
        np.testing.assert_allclose(uniform_over({0, 1, 2}, 3).probs,
                                   [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_empty_tags_rejected(self):
        with pytest.raises(ValueError):
            uniform_over(set(), 3)

    def test_out_of_range_tag_rejected(self):
        with pytest.raises(ValueError):
            uniform_over({3}, 3)


class TestCorruptSizes:
    def test_zero_sigma_is_identity(self):
        exact = CategoricalDist([0.2, 0.8])
        out = corrupt_sizes(exact, CorruptionConfig(sigma=0.0, rng_seed=5))
        np.testing.assert_array_equal(out.probs, exact.probs)

    def test_single_class_unchanged(self):
        exact = CategoricalDist([1.0])
        out = corrupt_sizes(exact, CorruptionConfig(sigma=0.5, rng_seed=5))
        np.testing.assert_array_equal(out.probs, [1.0])

    def test_hand_traced_noise_injection(self):
        exact = CategoricalDist([0.5, 0.5])
        out = _corrupt_with_noise(exact, np.array([0.2, -0.2]))
        np.testing.assert_allclose(out.probs, [0.6, 0.4], atol=1e-15)

    def test_negative_factors_clamp_to_zero(self):
        exact = CategoricalDist([0.5, 0.5])
        out = _corrupt_with_noise(exact, np.array([-1.5, 0.0]))
        np.testing.assert_allclose(out.probs, [0.0, 1.0], atol=1e-15)

    def test_zero_entries_stay_zero(self):
        exact = CategoricalDist([0.6, 0.0, 0.4])
        for seed in range(50):
            out = corrupt_sizes(exact, CorruptionConfig(sigma=0.4, rng_seed=seed))
            assert out[1] == 0.0
            assert abs(out.probs.sum() - 1.0) < 1e-12

    def test_deterministic_given_seed(self):
        exact = CategoricalDist([0.3, 0.7])
        cfg = CorruptionConfig(sigma=0.2, rng_seed=9)
        a = corrupt_sizes(exact, cfg, image_index=3)
        b = corrupt_sizes(exact, cfg, image_index=3)
        np.testing.assert_array_equal(a.probs, b.probs)

    def test_image_index_splits_the_stream(self):
        exact = CategoricalDist([0.3, 0.7])
        cfg = CorruptionConfig(sigma=0.2, rng_seed=9)
        a = corrupt_sizes(exact, cfg, image_index=0)
        b = corrupt_sizes(exact, cfg, image_index=1)
        assert not np.array_equal(a.probs, b.probs)


class TestMreLaw:
    def test_zero_sigma_zero_mre(self):
        assert mre_for_sigma(0.0) == 0.0
        assert sigma_for_mre(0.0) == 0.0

    def test_sigma_for_eight_percent(self):
        assert abs(sigma_for_mre(0.08) - 0.10026513098524002) < 1e-12

    def test_mre_for_sigma_0195(self):
        assert abs(mre_for_sigma(0.195) - 0.1556) < 1e-4

    def test_round_trip(self):
        for x in (0.01, 0.08, 0.16, 0.32, 0.64):
            assert abs(mre_for_sigma(sigma_for_mre(x)) - x) < 1e-12

    def test_monte_carlo_mean_abs_noise(self):
        rng = np.random.default_rng(0)
        sigma = 0.13
        eps = rng.normal(0.0, sigma, size=1_200_000)
        observed = float(np.abs(eps).mean())
        expected = MRE_PER_SIGMA * sigma
        assert abs(observed - expected) / expected < 0.01


class TestUniformMinimizesForwardKL:
    def test_projected_gradient_recovers_uniform_target(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            k = int(rng.integers(2, 6))
            n_tags = int(rng.integers(1, k + 1))
            tags = set(rng.choice(k, size=n_tags, replace=False).tolist())
            u = uniform_over(tags, k)

            def grad(s, u=u):
                return -u.probs / np.maximum(s, 1e-12)

            s_star = minimize_over_simplex(grad, k)
            assert np.max(np.abs(s_star - u.probs)) < 1e-3
