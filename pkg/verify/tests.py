import math

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from absorbing.services import mas_for_contraction
from affine.maps import AffineMap, similarity
from difs.chain import sierpinski_maps
from grid.lattice import EUCLIDEAN, MANHATTAN, MAXIMUM, GridSpace, vector_norm
from PyDIFS.exceptions import BudgetExceededError, InvalidInputError, NotAContractionError
from verify.attractor import ReferenceAttractor, hausdorff, reference_attractor
from verify.convergence import (
    HausdorffReport,
    HausdorffRow,
    TestFunction,
    check_hausdorff_bound,
    check_hausdorff_convergence,
    check_weak_convergence,
    elton_average,
    named_function,
)

THIRDS = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]


def naive_hausdorff(a, b, norm):
    forward = max(float(np.min(vector_norm(p - b, norm))) for p in a)
    backward = max(float(np.min(vector_norm(q - a, norm))) for q in b)
    return max(forward, backward)


class ReferenceAttractorTestCase(SimpleTestCase):
    """Test cases for the Hutchinson reference attractor."""

    def test_single_map_is_its_fixed_point(self):
        w = similarity(0.7, 20.0, fixed_point=(1.5, -2.0))
        for depth in (0, 3, 9):
            reference = reference_attractor([w], depth)
            np.testing.assert_allclose(reference.points, [[1.5, -2.0]], atol=1e-12)
            self.assertGreater(reference.resolution, 0.0)

    def test_depth_zero_gives_fixed_points(self):
        reference = reference_attractor(sierpinski_maps(), 0)
        self.assertEqual(len(reference), 3)
        expected = np.array([[0.0, 0.0], [0.5, math.sqrt(3.0) / 2.0], [1.0, 0.0]])
        np.testing.assert_allclose(reference.points, expected, atol=1e-12)

    def test_sierpinski_self_similarity(self):
        maps = sierpinski_maps()
        reference = reference_attractor(maps, 8)
        self.assertGreater(len(reference), 3 ** 7)
        self.assertLessEqual(len(reference), 3 ** 9)
        images = np.concatenate([w(reference.points) for w in maps])
        self.assertLessEqual(hausdorff(reference.points, images), reference.resolution)

    def test_resolution_shrinks_geometrically(self):
        coarse = reference_attractor(sierpinski_maps(), 4)
        fine = reference_attractor(sierpinski_maps(), 10)
        self.assertLess(fine.resolution, coarse.resolution / 32.0)
        self.assertLess(fine.resolution, 0.01)

    def test_rejects_expanding_map(self):
        with self.assertRaises(NotAContractionError):
            reference_attractor([similarity(1.1, 0.0)], 2)

    @override_settings(DIFS_SETTINGS={'REFERENCE_MAX_DEPTH': 3})
    def test_depth_budget(self):
        with self.assertRaises(BudgetExceededError):
            reference_attractor(sierpinski_maps(), 4)

    @override_settings(DIFS_SETTINGS={'REFERENCE_POINT_BUDGET': 100})
    def test_point_budget(self):
        with self.assertRaises(BudgetExceededError):
            reference_attractor(sierpinski_maps(), 6)


class HausdorffTestCase(SimpleTestCase):
    """Test cases for Hausdorff distances between finite sets."""

    def test_identical_sets(self):
        points = np.random.default_rng(1).normal(size=(50, 2))
        self.assertEqual(hausdorff(points, points), 0.0)

    def test_point_pair(self):
        for norm, expected in ((EUCLIDEAN, 5.0), (MAXIMUM, 4.0), (MANHATTAN, 7.0)):
            with self.subTest(norm=norm):
                self.assertEqual(hausdorff([[0.0, 0.0]], [[3.0, -4.0]], norm), expected)

    def test_subset_is_asymmetric(self):
        small = [[0.0, 0.0]]
        large = [[0.0, 0.0], [2.0, 0.0]]
        self.assertEqual(hausdorff(small, large), 2.0)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(2)
        for norm in (EUCLIDEAN, MAXIMUM, MANHATTAN):
            for _ in range(20):
                a = rng.uniform(-1.0, 1.0, size=(100, 2))
                b = rng.uniform(-1.0, 1.0, size=(100, 2))
                with self.subTest(norm=norm):
                    self.assertEqual(hausdorff(a, b, norm), naive_hausdorff(a, b, norm))

    def test_rejects_empty_sets(self):
        with self.assertRaises(InvalidInputError):
            hausdorff(np.zeros((0, 2)), [[1.0, 1.0]])


class TestFunctionTestCase(SimpleTestCase):
    def test_polynomial_values(self):
        f = named_function('r2')
        np.testing.assert_allclose(f(np.array([[3.0, 4.0], [0.0, 0.0]])), [25.0, 0.0])
        self.assertEqual(named_function('one')(np.array([[7.0, -2.0]]))[0], 1.0)

    def test_gaussian_and_clipped(self):
        bump = TestFunction.gaussian((1.0, 1.0), 0.5)
        self.assertEqual(bump(np.array([[1.0, 1.0]]))[0], 1.0)
        ramp = TestFunction.clipped_linear((1.0, 0.0), low=-0.5, high=0.5)
        np.testing.assert_allclose(ramp(np.array([[2.0, 0.0], [0.25, 9.0]])), [0.5, 0.25])

    def test_lipschitz_bounds(self):
        self.assertEqual(named_function('x').lipschitz(10.0), 1.0)
        self.assertAlmostEqual(named_function('r2').lipschitz(2.0), 8.0)
        self.assertAlmostEqual(TestFunction.gaussian((0.0, 0.0), 1.0).lipschitz(5.0), math.exp(-0.5))

    def test_rejects_cubic_terms_and_unknown_names(self):
        with self.assertRaises(InvalidInputError):
            TestFunction.polynomial('cubic', {(2, 1): 1.0})
        with self.assertRaises(InvalidInputError):
            named_function('sin')


class HausdorffBoundTestCase(SimpleTestCase):
    """Test cases for the recurrent-class distance bound."""

    def test_sierpinski_coarse_grid(self):
        report = check_hausdorff_bound(sierpinski_maps(), THIRDS, GridSpace(2, 1.0 / 32.0))
        self.assertGreaterEqual(len(report.rows), 1)
        self.assertTrue(report.holds)
        for row in report.rows:
            self.assertLessEqual(row.containment, row.bound + row.resolution)
            self.assertLessEqual(row.containment, row.distance)

    def test_single_map_classes_are_periodic_orbits(self):
        w = similarity(0.8, 40.0, fixed_point=(0.3, 0.2))
        g = GridSpace(2, 0.1)
        report = check_hausdorff_bound([w], None, g)
        self.assertEqual(len(report.rows), mas_for_contraction(w, g).component_count)
        self.assertTrue(report.holds)

    @tag('slow')
    def test_sierpinski_delta_sweep(self):
        deltas = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]
        report = check_hausdorff_convergence(sierpinski_maps(), THIRDS, deltas, n_jobs=1)
        self.assertEqual([delta for delta, _ in report.worst_by_delta()], deltas)
        self.assertTrue(report.holds)
        self.assertTrue(report.monotone)


class HausdorffSeriesTestCase(SimpleTestCase):
    """Test cases for the shrinking-distance criterion of a delta sweep."""

    def report_for(self, distances, resolution=1e-3):
        deltas = [2.0 ** -k for k in range(3, 3 + len(distances))]
        rows = [
            HausdorffRow(delta, 0, 1, distance, distance, 1.0, resolution)
            for delta, distance in zip(deltas, distances)
        ]
        reference = ReferenceAttractor(np.zeros((1, 2)), resolution, 0)
        return HausdorffReport(rows=rows, reference=reference)

    def test_shrinking_series(self):
        self.assertTrue(self.report_for([0.2, 0.1, 0.05]).monotone)

    def test_flat_series_is_rejected(self):
        self.assertFalse(self.report_for([0.2, 0.2, 0.2]).monotone)

    def test_small_increase_within_slack(self):
        self.assertTrue(self.report_for([0.2, 0.2015, 0.05]).monotone)

    def test_growing_step_is_rejected(self):
        self.assertFalse(self.report_for([0.2, 0.3, 0.05]).monotone)

    def test_series_at_resolution_passes(self):
        self.assertTrue(self.report_for([0.001, 0.001, 0.001]).monotone)


class EltonAverageTestCase(SimpleTestCase):
    """Test cases for exact-chain time averages."""

    def test_constant_function_is_exact(self):
        estimate = elton_average(sierpinski_maps(), THIRDS, named_function('one'), steps=20_000, batches=20)
        self.assertEqual(estimate.mean, 1.0)
        self.assertEqual(estimate.stderr, 0.0)

    def test_symmetric_first_moment(self):
        estimate = elton_average(
            sierpinski_maps(centered=True), THIRDS, named_function('x'), steps=200_000, seed=3, batches=50
        )
        self.assertGreater(estimate.stderr, 0.0)
        self.assertLess(abs(estimate.mean), 5.0 * estimate.stderr)

    def test_seeded_runs_repeat(self):
        first = elton_average(sierpinski_maps(), THIRDS, named_function('r2'), steps=5_000, seed=9, batches=10)
        second = elton_average(sierpinski_maps(), THIRDS, named_function('r2'), steps=5_000, seed=9, batches=10)
        self.assertEqual(first, second)

    def test_rejects_bad_probabilities(self):
        with self.assertRaises(InvalidInputError):
            elton_average(sierpinski_maps(), [0.5, 0.5, 0.1], named_function('x'), steps=100, batches=10)


class WeakConvergenceTestCase(SimpleTestCase):
    """Test cases for stationary measures against the invariant measure."""

    def test_normalization(self):
        report = check_weak_convergence(
            sierpinski_maps(), THIRDS, named_function('one'), [1.0 / 8.0, 1.0 / 16.0], steps=10_000, n_jobs=1
        )
        for row in report.rows:
            self.assertAlmostEqual(row.value, 1.0, places=12)
        self.assertTrue(report.holds)

    def test_symmetric_first_moment(self):
        report = check_weak_convergence(
            sierpinski_maps(centered=True), THIRDS, named_function('x'),
            [1.0 / 16.0, 1.0 / 32.0], steps=50_000, n_jobs=1,
        )
        for row in report.rows:
            self.assertLessEqual(abs(row.value), row.tolerance)
        self.assertTrue(report.final_within_tolerance)

    @override_settings(DIFS_SETTINGS={'STATIONARY_DIRECT_LIMIT': 0, 'STATIONARY_MAX_ITERATIONS': 1})
    def test_unsolvable_classes_are_reported(self):
        report = check_weak_convergence(
            sierpinski_maps(), THIRDS, named_function('x'), [1.0 / 8.0], steps=1_000, n_jobs=1
        )
        self.assertEqual(report.achievable, [])
        self.assertFalse(report.holds)

    @tag('slow')
    def test_sierpinski_second_moment(self):
        deltas = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
        for name in ('one', 'x', 'y', 'r2'):
            with self.subTest(function=name):
                report = check_weak_convergence(
                    sierpinski_maps(centered=True), THIRDS, named_function(name), deltas, steps=2_000_000, n_jobs=1
                )
                self.assertEqual(report.achievable, deltas)
                self.assertTrue(report.holds)
