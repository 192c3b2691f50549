import math

import numpy as np
import pytest

from checkout_track.distill import kl_gradient, kl_similarity_loss, weighted_similarity_loss
from oracles import random_simplex


def _kl_direct(p, q):
    return sum(a * math.log(a / b) for a, b in zip(p, q) if a > 0)


class TestLoss:
    def test_identical_is_zero(self, rng):
        for _ in range(100):
            p = random_simplex(rng, int(rng.integers(2, 20)))
            assert abs(kl_similarity_loss(p, p)) <= 1e-12

    def test_one_hot_against_uniform(self):
        assert kl_similarity_loss([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)

    def test_hand_example(self):
        expected = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
        assert kl_similarity_loss([0.5, 0.5], [0.9, 0.1]) == pytest.approx(expected, abs=1e-12)

    def test_matches_direct_sum_and_nonnegative(self, rng):
        for _ in range(1000):
            k = int(rng.integers(2, 12))
            p, q = random_simplex(rng, k), random_simplex(rng, k)
            v = kl_similarity_loss(p, q)
            assert v >= -1e-15
            assert v == pytest.approx(_kl_direct(p, q), rel=1e-9, abs=1e-12)

    def test_zero_teacher_entry_is_finite(self):
        assert math.isfinite(kl_similarity_loss([0.5, 0.5], [1.0, 0.0]))

    @pytest.mark.parametrize("a, b", [([0.5, 0.5], [1.0]), ([0.2, 0.9], [0.5, 0.5]), ([[0.5, 0.5]], [[0.5, 0.5]])])
    def test_bad_input(self, a, b):
        with pytest.raises(ValueError):
            kl_similarity_loss(a, b)


class TestGradient:
    def test_identical_gives_ones(self, rng):
        p = random_simplex(rng, 7)
        np.testing.assert_allclose(kl_gradient(p, p), np.ones(7), atol=1e-12)

    def test_hand_example(self):
        g = kl_gradient([0.5, 0.5], [0.25, 0.75])
        np.testing.assert_allclose(g, [math.log(2) + 1, math.log(2 / 3) + 1], atol=1e-12)

    def test_central_differences(self, rng):
        h = 1e-6
        for _ in range(100):
            k = int(rng.integers(2, 10))
            # keep coordinates away from 0 so the step stays inside the domain
            p = 0.5 * random_simplex(rng, k) + 0.5 / k
            q = random_simplex(rng, k)
            g = kl_gradient(p, q)
            for i in range(k):
                e = np.zeros(k)
                e[i] = h
                fd = (kl_similarity_loss(p + e, q, check=False) - kl_similarity_loss(p - e, q, check=False)) / (2 * h)
                assert abs(fd - g[i]) <= 1e-5 * max(1.0, abs(g[i]))


class TestWeighted:
    def test_identical_is_zero(self):
        assert weighted_similarity_loss([0.3, 0.7], [0.3, 0.7], 2.0) == 0.0

    def test_weight_two_doubles_exactly(self, rng):
        for _ in range(100):
            p, q = random_simplex(rng, 5), random_simplex(rng, 5)
            assert weighted_similarity_loss(p, q) == 2.0 * kl_similarity_loss(p, q)
            assert weighted_similarity_loss(p, q, 1.0) == kl_similarity_loss(p, q)

    @pytest.mark.parametrize("w", [0.0, -1.0, float("nan")])
    def test_non_positive_weight(self, w):
        with pytest.raises(ValueError):
            weighted_similarity_loss([0.5, 0.5], [0.5, 0.5], w)
