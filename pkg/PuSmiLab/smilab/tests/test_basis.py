import math

import numpy as np
from django.test import SimpleTestCase

from smilab.basis import GaussianBasis, bandwidth_grid, eval_basis, median_bandwidth, select_centers
from smilab.exceptions import DegenerateDataError, PreconditionError, ShapeError


class SelectCentersTests(SimpleTestCase):
    def test_small_sample_uses_every_row(self):
        unlabeled = np.random.default_rng(0).normal(size=(50, 3))
        centers = select_centers(unlabeled, 200, seed=1)
        self.assertEqual(centers.shape, (50, 3))
        self.assertEqual({r.tobytes() for r in centers}, {r.tobytes() for r in unlabeled})

    def test_large_sample_draws_distinct_rows(self):
        unlabeled = np.random.default_rng(0).normal(size=(400, 2))
        centers = select_centers(unlabeled, 200, seed=1)
        self.assertEqual(len({r.tobytes() for r in centers}), 200)

    def test_same_seed_same_centers(self):
        unlabeled = np.random.default_rng(0).normal(size=(400, 2))
        np.testing.assert_array_equal(select_centers(unlabeled, 20, 7), select_centers(unlabeled, 20, 7))

    def test_zero_budget_is_rejected(self):
        with self.assertRaises(PreconditionError):
            select_centers(np.zeros((3, 1)), 0)


class EvalBasisTests(SimpleTestCase):
    def test_point_on_center_is_one(self):
        basis = GaussianBasis([[1.0, 2.0], [0.0, 0.0]], 0.7)
        self.assertEqual(eval_basis(basis, [[1.0, 2.0]])[0, 0], 1.0)

    def test_distance_two_sigma_squared_gives_e_inverse(self):
        sigma = 1.5
        basis = GaussianBasis([[0.0]], sigma)
        value = eval_basis(basis, [[math.sqrt(2.0) * sigma]])[0, 0]
        self.assertAlmostEqual(value, math.exp(-1.0), places=14)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(4)
        points = rng.normal(size=(5, 3))
        centers = rng.normal(size=(4, 3))
        basis = GaussianBasis(centers, 0.9)
        expected = np.empty((5, 4))
        for i in range(5):
            for j in range(4):
                sq = sum((points[i, k] - centers[j, k]) ** 2 for k in range(3))
                expected[i, j] = math.exp(-sq / (2 * 0.9 ** 2))
        np.testing.assert_allclose(basis(points), expected, rtol=0, atol=1e-12)

    def test_entries_lie_in_unit_interval(self):
        rng = np.random.default_rng(5)
        for trial in range(20):
            dim = int(rng.integers(1, 6))
            basis = GaussianBasis(rng.normal(size=(7, dim)), float(rng.uniform(0.05, 3.0)))
            phi = basis(rng.normal(scale=5.0, size=(30, dim)))
            self.assertTrue(np.all(phi > 0.0), f"trial {trial}")
            self.assertTrue(np.all(phi <= 1.0), f"trial {trial}")

    def test_far_points_stay_positive(self):
        phi = eval_basis(GaussianBasis([[0.0]], 1.0), [[1e3], [-1e6]])
        np.testing.assert_array_equal(phi, np.finfo(float).tiny)

    def test_permuting_rows_permutes_output(self):
        rng = np.random.default_rng(6)
        basis = GaussianBasis(rng.normal(size=(6, 3)), 1.1)
        points = rng.normal(size=(25, 3))
        order = rng.permutation(25)
        np.testing.assert_array_equal(basis(points[order]), basis(points)[order])

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeError):
            eval_basis(GaussianBasis([[0.0, 0.0]], 1.0), np.zeros((2, 3)))

    def test_bandwidth_must_be_positive(self):
        with self.assertRaises(PreconditionError):
            GaussianBasis([[0.0]], 0.0)


class MedianBandwidthTests(SimpleTestCase):
    def test_single_pair(self):
        self.assertEqual(median_bandwidth(np.array([[0.0, 0.0], [2.0, 0.0]])), 2.0)

    def test_duplicated_rows_do_not_move_median(self):
        points = np.random.default_rng(1).normal(size=(30, 2))
        doubled = np.vstack([points, points])
        self.assertAlmostEqual(median_bandwidth(points), median_bandwidth(doubled), places=12)

    def test_close_to_exact_median(self):
        points = np.random.default_rng(2).normal(size=(100, 5))
        distances = [
            np.linalg.norm(points[i] - points[j])
            for i in range(100) for j in range(i + 1, 100)
        ]
        exact = float(np.median(distances))
        self.assertLessEqual(abs(median_bandwidth(points, seed=0) - exact), 0.1 * exact)

    def test_coincident_points_are_degenerate(self):
        with self.assertRaises(DegenerateDataError):
            median_bandwidth(np.ones((5, 2)))

    def test_grid_brackets_sigma(self):
        self.assertEqual(bandwidth_grid(2.0), [1.0, 2.0, 4.0])


class SerializationTests(SimpleTestCase):
    def test_basis_dict(self):
        basis = GaussianBasis([[0.0, 1.0]], 0.5)
        again = GaussianBasis.from_dict(basis.to_dict())
        self.assertEqual(again.bandwidth, 0.5)
        np.testing.assert_array_equal(again.centers, basis.centers)
