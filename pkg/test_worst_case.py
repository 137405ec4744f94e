import unittest
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from errors import ModelError
from models import AffinePolicy, BoxSet, SampleSet, sample_mean
from worst_case import (DualCertificate, c3_vector, dual_value, samplewise_worst_case, worst_case_greedy,
                        worst_case_lp)


def random_tuple(rng):
    m = int(rng.integers(1, 6))
    n2 = int(rng.integers(1, 4))
    N = int(rng.integers(1, 51))
    lower = rng.uniform(-2.0, 0.0, m)
    upper = lower + rng.uniform(0.0, 3.0, m)
    box = BoxSet(lower, upper)
    samples = SampleSet(rng.uniform(lower, upper, (N, m)), box)
    policy = AffinePolicy(rng.uniform(-2.0, 2.0, (n2, m)), rng.uniform(-1.0, 1.0, n2))
    c2 = rng.uniform(-1.0, 1.0, n2)
    eps = float(rng.choice([0.0, rng.uniform(0.0, 0.5), rng.uniform(0.5, 5.0)]))
    return policy, c2, box, samples, eps


class TestWorstCase(unittest.TestCase):

    def test_mean_form_equals_samplewise_form(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            policy, c2, box, samples, eps = random_tuple(rng)
            mean = sample_mean(samples)
            compact = worst_case_lp(policy, c2, box, mean, eps).value
            full = samplewise_worst_case(policy, c2, box, samples, eps)
            self.assertAlmostEqual(compact, full, delta=1e-6 * (1.0 + abs(compact)))

    def test_strong_duality_and_certificate(self):
        rng = np.random.default_rng(99)
        for _ in range(200):
            policy, c2, box, samples, eps = random_tuple(rng)
            mean = sample_mean(samples)
            primal = worst_case_lp(policy, c2, box, mean, eps).value
            dual, certificate = dual_value(policy, c2, box, mean, eps)
            self.assertAlmostEqual(primal, dual, delta=1e-6 * (1.0 + abs(primal)))
            self.assertTrue(certificate.in_dual_set(policy.direction(c2)))
            value = c3_vector(eps, box, mean) @ certificate.vector + c2 @ policy.evaluate(mean)
            self.assertAlmostEqual(value, dual, delta=1e-6 * (1.0 + abs(dual)))

    def test_greedy_matches_lp(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            policy, c2, box, samples, eps = random_tuple(rng)
            mean = sample_mean(samples)
            solution = worst_case_lp(policy, c2, box, mean, eps)
            greedy = worst_case_greedy(policy.direction(c2), box.upper - mean, mean - box.lower, eps)
            self.assertAlmostEqual(solution.increment, greedy, delta=1e-7 * (1.0 + abs(greedy)))

    def test_matches_linprog(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            policy, c2, box, samples, eps = random_tuple(rng)
            mean = sample_mean(samples)
            g = policy.direction(c2)
            m = g.size
            res = linprog(-np.concatenate([g, -g]), A_ub=np.ones((1, 2 * m)), b_ub=[eps],
                          bounds=list(zip(np.zeros(2 * m), np.concatenate([box.upper - mean, mean - box.lower]))),
                          method="highs")
            expected = c2 @ policy.evaluate(mean) - res.fun
            self.assertAlmostEqual(worst_case_lp(policy, c2, box, mean, eps).value, expected, places=7)

    def test_zero_radius_is_the_sample_average(self):
        box = BoxSet([0.0, 0.0], [1.0, 1.0])
        samples = SampleSet([[0.2, 0.4], [0.6, 0.0]], box)
        policy = AffinePolicy([[1.0, -1.0]], [0.5])
        value = worst_case_lp(policy, [2.0], box, sample_mean(samples), 0.0).value
        self.assertAlmostEqual(value, 2.0 * (0.4 - 0.2 + 0.5))

    def test_static_policy_ignores_the_radius(self):
        box = BoxSet([0.0], [1.0])
        policy = AffinePolicy([[0.0]], [3.0])
        self.assertAlmostEqual(worst_case_lp(policy, [2.0], box, [0.5], 10.0).value, 6.0)

    def test_radius_saturates_at_the_box(self):
        box = BoxSet([0.0], [1.0])
        policy = AffinePolicy([[1.0]], [0.0])
        # mean 0.25 can only move up by 0.75
        self.assertAlmostEqual(worst_case_lp(policy, [1.0], box, [0.25], 5.0).value, 1.0)
        self.assertAlmostEqual(worst_case_lp(policy, [1.0], box, [0.25], 0.5).value, 0.75)

    def test_value_is_nondecreasing_and_concave_in_radius(self):
        rng = np.random.default_rng(314)
        grid = [0.0, 0.05, 0.1, 0.5, 1.0, 5.0]
        for _ in range(100):
            policy, c2, box, samples, _ = random_tuple(rng)
            mean = sample_mean(samples)
            values = [worst_case_lp(policy, c2, box, mean, eps).value for eps in grid]
            for low, high in zip(values, values[1:]):
                self.assertGreaterEqual(high, low - 1e-8)
            for i, k in combinations(range(len(grid)), 2):
                mid = worst_case_lp(policy, c2, box, mean, 0.5 * (grid[i] + grid[k])).value
                self.assertGreaterEqual(mid, 0.5 * (values[i] + values[k]) - 1e-8)

    def test_center_outside_box(self):
        with self.assertRaises(ModelError):
            worst_case_lp(AffinePolicy([[1.0]], [0.0]), [1.0], BoxSet([0.0], [1.0]), [2.0], 0.1)

    def test_negative_radius(self):
        with self.assertRaises(ModelError):
            c3_vector(-0.1, BoxSet([0.0], [1.0]), [0.5])

    def test_certificate_membership(self):
        certificate = DualCertificate.from_vector([1.0, 0.5, 0.0, 0.0, 2.0])
        self.assertTrue(certificate.in_dual_set([1.5, -1.0]))
        self.assertFalse(certificate.in_dual_set([2.0, 0.0]))


if __name__ == "__main__":
    unittest.main()
