import math

import numpy as np
from django.test import SimpleTestCase, override_settings

from affine.maps import AffineMap, similarity
from grid.lattice import (
    EUCLIDEAN,
    MANHATTAN,
    MAXIMUM,
    GridSpace,
    LatticeRegion,
    TableMap,
    embed,
    lattice_ball,
    roundoff_map,
    roundoff_point,
    tabulate,
    theta,
    vector_norm,
)
from PyDIFS.exceptions import (
    BudgetExceededError,
    DimensionMismatchError,
    InvalidInputError,
    OrbitEscapeError,
    RegionNotClosedError,
)


class GridSpaceTestCase(SimpleTestCase):
    """Test cases for the grid context and its metric quantities."""

    def test_theta_per_norm(self):
        """Test half cube diameters for the three norms."""
        self.assertAlmostEqual(theta(GridSpace(2, 1.0, EUCLIDEAN)), math.sqrt(2) / 2, places=15)
        self.assertEqual(theta(GridSpace(3, 2.0, MAXIMUM)), 1.0)
        self.assertEqual(theta(GridSpace(2, 1.0, MANHATTAN)), 1.0)

    def test_invalid_grid_parameters(self):
        """Test that bad dimension, spacing and norm are rejected."""
        with self.assertRaises(InvalidInputError):
            GridSpace(0, 1.0)
        with self.assertRaises(InvalidInputError):
            GridSpace(2, -0.5)
        with self.assertRaises(InvalidInputError):
            GridSpace(2, float('nan'))
        with self.assertRaises(InvalidInputError):
            GridSpace(2, 1.0, 'chebyshev')

    def test_distance_matches_vector_norm(self):
        g = GridSpace(2, 1.0, MANHATTAN)
        self.assertEqual(g.distance((1.0, 2.0), (0.0, 0.0)), 3.0)
        self.assertEqual(vector_norm(np.array([3.0, -4.0])), 5.0)
        self.assertEqual(vector_norm(np.array([3.0, -4.0]), MAXIMUM), 4.0)


class RoundoffTestCase(SimpleTestCase):
    """Test cases for point roundoff and embedding."""

    def test_interior_point(self):
        self.assertEqual(roundoff_point([0.49], GridSpace(1, 1.0)), (0,))

    def test_boundary_resolves_upward(self):
        """Test that a point on a cube face belongs to the higher cube."""
        self.assertEqual(roundoff_point([0.5], GridSpace(1, 1.0)), (1,))
        self.assertEqual(roundoff_point([-0.5], GridSpace(1, 1.0)), (0,))

    def test_fractional_delta(self):
        self.assertEqual(roundoff_point([-0.25, 0.74], GridSpace(2, 0.5)), (0, 1))

    def test_non_finite_point_rejected(self):
        with self.assertRaises(InvalidInputError):
            roundoff_point([float('inf'), 0.0], GridSpace(2, 1.0))

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            GridSpace(2, 1.0).roundoff_points(np.zeros((4, 3)))

    def test_embed_examples(self):
        np.testing.assert_array_equal(embed((0, 0), GridSpace(2, 1.0)), [0.0, 0.0])
        np.testing.assert_array_equal(embed((4, -2), GridSpace(2, 0.25)), [1.0, -0.5])
        np.testing.assert_allclose(embed((1000,), GridSpace(1, 0.001)), [1.0])

    def test_roundtrip_and_error_bound(self):
        """Test roundoff(embed(p)) = p and the half cube error bound on random points."""
        rng = np.random.default_rng(7)
        for norm in (EUCLIDEAN, MAXIMUM, MANHATTAN):
            g = GridSpace(3, 0.125, norm)
            m = rng.integers(-10_000, 10_000, size=(500, 3))
            np.testing.assert_array_equal(g.roundoff_points(g.embed_points(m)), m)

            x = rng.uniform(-50.0, 50.0, size=(2000, 3))
            rounded = g.embed_points(g.roundoff_points(x))
            self.assertTrue(np.all(g.distance(x, rounded) <= g.theta() * (1 + 1e-12)))

    def test_interval_membership(self):
        """Test that the returned cube contains the point (half-open on the right)."""
        rng = np.random.default_rng(11)
        g = GridSpace(2, 0.37)
        x = rng.uniform(-5.0, 5.0, size=(1000, 2))
        m = g.roundoff_points(x)
        self.assertTrue(np.all((m - 0.5) * g.delta <= x + 1e-12))
        self.assertTrue(np.all(x < (m + 0.5) * g.delta + 1e-12))


class LatticeRegionTestCase(SimpleTestCase):
    """Test cases for finite lattice regions and balls."""

    def test_box_points_are_lexicographic(self):
        region = LatticeRegion.box((0, 0), (1, 2))
        self.assertEqual(len(region), 6)
        self.assertEqual(region.point(0), (0, 0))
        self.assertEqual(region.point(1), (0, 1))
        self.assertEqual(region.point(5), (1, 2))
        self.assertTrue(region.is_box)

    def test_index_of_marks_outsiders(self):
        region = LatticeRegion.box((-1, -1), (1, 1))
        idx = region.index_of(np.array([[0, 0], [5, 0], [-1, 1]]))
        self.assertEqual(idx.tolist(), [4, -1, 2])
        self.assertIn((1, 1), region)
        self.assertNotIn((2, 1), region)

    def test_from_points_and_shift(self):
        region = LatticeRegion.from_points([(3, 1), (0, 0), (2, 2)])
        self.assertEqual(len(region), 3)
        self.assertFalse(region.is_box)
        shifted = region.shifted((1, -1))
        self.assertEqual(shifted.point(0), (1, -1))

    def test_ball_nine_points(self):
        """Test the lambda=0.6 trap ball at the origin holds the 3x3 block."""
        g = GridSpace(2, 1.0)
        ball = lattice_ball((0.0, 0.0), (math.sqrt(2) / 2) / 0.4, g)
        self.assertEqual(len(ball), 9)
        self.assertEqual(ball, LatticeRegion.box((-1, -1), (1, 1)))

    def test_ball_matches_direct_distance_check(self):
        g = GridSpace(2, 0.5, MANHATTAN)
        center = np.array([0.3, -0.2])
        ball = lattice_ball(center, 1.7, g)
        grid = np.array([(i, j) for i in range(-10, 11) for j in range(-10, 11)])
        expected = grid[g.distance(g.embed_points(grid), center) <= 1.7]
        self.assertEqual(len(ball), len(expected))
        self.assertTrue(np.all(ball.index_of(expected) >= 0))

    @override_settings(DIFS_SETTINGS={'MAX_REGION_POINTS': 100})
    def test_region_budget(self):
        with self.assertRaises(BudgetExceededError):
            LatticeRegion.box((0, 0), (20, 20))
        with self.assertRaises(BudgetExceededError):
            lattice_ball((0.0, 0.0), 50.0, GridSpace(2, 1.0))


class DiscreteMapTestCase(SimpleTestCase):
    """Test cases for closure-form and table-form discrete maps."""

    def test_lattice_shift(self):
        g = GridSpace(2, 0.5)
        w = AffineMap(np.eye(2), [1.5, -0.5])
        self.assertEqual(roundoff_map(w, g)((4, 7)), (7, 6))

    def test_rotation_similarity_single_point(self):
        g = GridSpace(2, 1.0)
        w = similarity(0.6, 150.0)
        expected = roundoff_point(w(np.array([3.0, 0.0])), g)
        self.assertEqual(roundoff_map(w, g)((3, 0)), expected)
        self.assertEqual(expected, (-2, 1))

    def test_contraction_keeps_origin(self):
        w = AffineMap(0.3 * np.eye(3), np.zeros(3))
        self.assertEqual(roundoff_map(w, GridSpace(3, 1.0))((0, 0, 0)), (0, 0, 0))

    def test_half_cube_bound(self):
        rng = np.random.default_rng(3)
        g = GridSpace(2, 0.25)
        w = AffineMap([[0.5, 0.3], [-0.1, 0.4]], [0.13, -0.71])
        p = rng.integers(-200, 200, size=(1000, 2))
        images = g.embed_points(roundoff_map(w, g).apply(p))
        self.assertTrue(np.all(g.distance(images, w(g.embed_points(p))) <= g.theta() * (1 + 1e-12)))

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            roundoff_map(AffineMap(np.eye(3), np.zeros(3)), GridSpace(2, 1.0))

    def test_tabulate_identity(self):
        region = LatticeRegion.box((0, 0), (2, 2))
        table = tabulate(roundoff_map(AffineMap(np.eye(2), [0, 0]), GridSpace(2, 1.0)), region)
        np.testing.assert_array_equal(table.targets, region.points)
        np.testing.assert_array_equal(table.successors, np.arange(9))

    def test_tabulate_half_scale(self):
        g = GridSpace(2, 1.0)
        dm = roundoff_map(AffineMap(0.5 * np.eye(2), [0, 0]), g)
        region = LatticeRegion.box((-2, -2), (2, 2))
        table = tabulate(dm, region)
        np.testing.assert_array_equal(table.apply(region.points), dm.apply(region.points))
        self.assertTrue(np.all(region.index_of(table.targets) >= 0))

    def test_tabulate_not_closed(self):
        """Test that a translation leaving the box is named at its first offending point."""
        dm = roundoff_map(AffineMap(np.eye(2), [1, 0]), GridSpace(2, 1.0))
        with self.assertRaises(RegionNotClosedError) as ctx:
            tabulate(dm, LatticeRegion.box((0, 0), (2, 2)))
        self.assertEqual(ctx.exception.point[0], 2)
        self.assertEqual(ctx.exception.image[0], 3)

    def test_table_escape(self):
        region = LatticeRegion.box((0, 0), (1, 1))
        table = TableMap(region, region.points)
        with self.assertRaises(OrbitEscapeError):
            table((5, 5))
