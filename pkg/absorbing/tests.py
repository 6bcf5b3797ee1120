import math

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from absorbing.services import (
    basin_image,
    fixed_point_scan,
    gallery_maps,
    mas_for_contraction,
    minimal_absorbing_set,
    trap_radius,
    trap_region,
)
from affine.maps import AffineMap, contractivity, from_fixed_point, scale_map, similarity, translate_map
from affine.sampling import RandomContractionSpec, generator_for, sample_contraction
from grid.lattice import GridSpace, LatticeRegion, TableMap, lattice_ball, roundoff_map, roundoff_point
from PyDIFS.exceptions import BudgetExceededError, NotAContractionError, RegionNotClosedError

UNIT_GRID = GridSpace(2, 1.0)


def periodic_points_oracle(successors):
    """Periodic points as the image of successors iterated len(successors) times."""
    image = np.arange(len(successors))
    for _ in range(len(successors)):
        image = successors[image]
    return set(image.tolist())


def random_contraction(rng, n, lambda_max):
    L = rng.normal(size=(n, n))
    L *= rng.uniform(0.0, lambda_max) / np.linalg.svd(L, compute_uv=False)[0]
    return L


class TrapRegionTestCase(SimpleTestCase):
    """Test cases for the absorbing ball around a fixed point."""

    def test_lambda_zero_at_grid_point(self):
        w = AffineMap(np.zeros((2, 2)), [3.0, -2.0])
        region = trap_region(w, UNIT_GRID)
        self.assertEqual(len(region), 1)
        self.assertIn((3, -2), region)

    def test_nine_point_ball(self):
        region = trap_region(similarity(0.6, 0.0), UNIT_GRID)
        self.assertEqual(region, LatticeRegion.box((-1, -1), (1, 1)))

    def test_closure_under_roundoff(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            w = from_fixed_point(random_contraction(rng, 2, 0.95), rng.uniform(-3, 3, size=2))
            region = trap_region(w, GridSpace(2, 0.5), verify=False)
            successors = roundoff_map(w, GridSpace(2, 0.5)).successor_indices(region)
            self.assertTrue(np.all(successors >= 0))

    def test_not_a_contraction(self):
        with self.assertRaises(NotAContractionError):
            trap_region(similarity(1.2, 10.0), UNIT_GRID)

    @override_settings(DIFS_SETTINGS={'MAX_TRAP_RADIUS_CELLS': 10.0})
    def test_trap_radius_budget(self):
        with self.assertRaises(BudgetExceededError):
            trap_radius(similarity(0.99, 10.0), UNIT_GRID)


class MinimalAbsorbingSetTestCase(SimpleTestCase):
    """Test cases for periodic orbit extraction."""

    def test_single_self_loop(self):
        region = LatticeRegion.box((4,), (4,))
        mas = minimal_absorbing_set(TableMap(region, region.points), region)
        self.assertEqual(mas.components, [[(4,)]])
        self.assertEqual(mas.cardinality, 1)
        self.assertEqual(mas.basin_labels, {(4,): 0})

    def test_two_cycle_with_tail(self):
        """Test a -> b -> a with c -> a."""
        region = LatticeRegion.box((0,), (2,))
        mas = minimal_absorbing_set(TableMap(region, [[1], [0], [0]]), region)
        self.assertEqual(mas.components, [[(0,), (1,)]])
        self.assertEqual(mas.basin_labels, {(0,): 0, (1,): 0, (2,): 0})

    def test_components_sorted_and_rotated(self):
        region = LatticeRegion.box((0,), (5,))
        # cycles (5 3) and (4 2 1), tail 0 -> 4
        mas = minimal_absorbing_set(TableMap(region, [[4], [4], [1], [5], [2], [3]]), region)
        self.assertEqual(mas.components, [[(1,), (4,), (2,)], [(3,), (5,)]])
        self.assertEqual(mas.labels.tolist(), [0, 0, 0, 1, 0, 1])
        self.assertEqual(mas.component_count, 2)

    def test_region_not_closed(self):
        region = LatticeRegion.box((0, 0), (2, 2))
        dm = roundoff_map(AffineMap(np.eye(2), [1.0, 0.0]), UNIT_GRID)
        with self.assertRaises(RegionNotClosedError):
            minimal_absorbing_set(dm, region)

    def test_rotation_similarity_invariants(self):
        """Test periodicity and the brute-force periodic point oracle for 0.6 R(150)."""
        w = similarity(0.6, 150.0)
        mas = mas_for_contraction(w, UNIT_GRID)
        dm = roundoff_map(w, UNIT_GRID)
        for component in mas.components:
            k = len(component)
            self.assertEqual(dm(component[-1]), component[0])
            p = component[0]
            for _ in range(k):
                p = dm(p)
            self.assertEqual(p, component[0])
        successors = dm.successor_indices(mas.region)
        expected = periodic_points_oracle(successors)
        self.assertEqual({mas.region.point(i) for i in expected}, set(mas.points))
        self.assertLessEqual(mas.cardinality, len(mas.region))

    def test_labels_follow_orbits(self):
        w = similarity(0.9, 30.0)
        mas = mas_for_contraction(w, UNIT_GRID)
        dm = roundoff_map(w, UNIT_GRID)
        component_of = {p: k for k, component in enumerate(mas.components) for p in component}
        for i in range(0, len(mas.region), 7):
            p = mas.region.point(i)
            for _ in range(len(mas.region)):
                if p in component_of:
                    break
                p = dm(p)
            self.assertEqual(mas.labels[i], component_of[p])

    def test_minimality_on_small_instance(self):
        """Test that dropping any periodic point breaks closure or absorption."""
        w = AffineMap([[0.0, -0.85], [0.85, 0.0]], [0.2, 0.1])
        mas = mas_for_contraction(w, UNIT_GRID)
        dm = roundoff_map(w, UNIT_GRID)
        points = set(mas.points)
        for component in mas.components:
            for j, removed in enumerate(component):
                remaining = points - {removed}
                if len(component) > 1:
                    predecessor = component[j - 1]
                    self.assertIn(predecessor, remaining)
                    self.assertEqual(dm(predecessor), removed)
                else:
                    # a fixed point's orbit never reaches the rest of the set
                    self.assertEqual(dm(removed), removed)
                    self.assertNotIn(removed, remaining)


class ContractionMasTestCase(SimpleTestCase):
    """Test cases for minimal absorbing sets of discretized contractions."""

    def test_constant_map(self):
        mas = mas_for_contraction(AffineMap(np.zeros((2, 2)), [2.3, -0.6]), UNIT_GRID)
        self.assertEqual(mas.components, [[roundoff_point((2.3, -0.6), UNIT_GRID)]])

    def test_fifth_gallery_map_is_not_singleton(self):
        mas = mas_for_contraction(similarity(0.9, 30.0), UNIT_GRID)
        self.assertGreater(mas.cardinality, 1)

    def test_gallery_maps_are_contractions(self):
        gallery = gallery_maps()
        self.assertEqual(len(gallery), 6)
        for label, w in gallery:
            with self.subTest(map=label):
                self.assertLess(contractivity(w), 1.0)
                self.assertGreaterEqual(mas_for_contraction(w, UNIT_GRID).cardinality, 1)

    def test_singleton_below_half_small(self):
        rng = np.random.default_rng(41)
        g = GridSpace(2, 0.5)
        for _ in range(50):
            m = rng.integers(-20, 20, size=2)
            w = from_fixed_point(random_contraction(rng, 2, 0.4999), g.delta * m)
            self.assertEqual(mas_for_contraction(w, g).components, [[tuple(int(v) for v in m)]])

    @tag('slow')
    def test_singleton_theorem(self):
        """Test lambda < 1/2 with a grid fixed point gives the singleton {x_f / delta}."""
        rng = np.random.default_rng(1000)
        for n in (2, 3, 4):
            g = GridSpace(n, 0.25)
            for _ in range(1000):
                m = rng.integers(-100, 100, size=n)
                w = from_fixed_point(random_contraction(rng, n, 0.4999), g.delta * m)
                mas = mas_for_contraction(w, g)
                self.assertEqual(mas.components, [[tuple(int(v) for v in m)]])

    def test_fixed_point_scan(self):
        L = 0.45 * np.array([[math.cos(math.radians(15)), -math.sin(math.radians(15))],
                             [math.sin(math.radians(15)), math.cos(math.radians(15))]])
        cardinalities, counts = fixed_point_scan(L, UNIT_GRID, samples_per_axis=5)
        self.assertEqual(cardinalities.shape, (5, 5))
        self.assertEqual(cardinalities[2, 2], 1)
        self.assertTrue(np.all(counts >= 1))
        self.assertTrue(np.all(counts <= cardinalities))


class EquivarianceTestCase(SimpleTestCase):
    """Test cases for exact translation and scaling correspondences."""

    def test_translation_equivariance(self):
        spec = RandomContractionSpec(lambda_cap=0.9, seed=77)
        rng = generator_for(77, 1)
        g = GridSpace(2, 0.1)
        for index in range(500):
            w = sample_contraction(spec, index)
            m = rng.integers(-1000, 1000, size=2)
            shifted = mas_for_contraction(translate_map(w, g.delta * m), g)
            self.assertEqual(shifted.structure(), mas_for_contraction(w, g).shifted_structure(m))

    def test_scaling_correspondence(self):
        """Test MAS of alpha*w on the delta_2 grid against w on the delta_1 grid."""
        spec = RandomContractionSpec(lambda_cap=0.9, seed=78)
        rng = generator_for(78, 1)
        for index in range(500):
            delta_1, delta_2 = 2.0 ** rng.integers(-6, 3, size=2)
            w = sample_contraction(spec, index)
            original = mas_for_contraction(w, GridSpace(2, float(delta_1)))
            scaled = mas_for_contraction(scale_map(w, float(delta_2 / delta_1)), GridSpace(2, float(delta_2)))
            self.assertEqual(scaled.structure(), original.structure())
            self.assertEqual(scaled.cardinality, original.cardinality)

    def test_rational_scaling_correspondence(self):
        spec = RandomContractionSpec(lambda_cap=0.9, seed=79)
        rng = generator_for(79, 1)
        for index in range(300):
            numerator, denominator = (int(v) for v in rng.integers(1, 16, size=2))
            delta_1 = float(rng.choice([1.0, 0.1, 0.03]))
            delta_2 = delta_1 * numerator / denominator
            w = sample_contraction(spec, index)
            with self.subTest(index=index, ratio=f"{numerator}/{denominator}"):
                original = mas_for_contraction(w, GridSpace(2, delta_1))
                scaled = mas_for_contraction(scale_map(w, delta_2 / delta_1), GridSpace(2, delta_2))
                self.assertEqual(scaled.structure(), original.structure())


class BasinImageTestCase(SimpleTestCase):
    """Test cases for basin label rasters."""

    def setUp(self):
        self.reflection = AffineMap(np.diag([0.9, -0.9]), [0.0, 0.0])

    def test_singleton_gives_constant_raster(self):
        mas = mas_for_contraction(similarity(0.3, 45.0), UNIT_GRID)
        raster = basin_image(mas, LatticeRegion.box((-20, -20), (20, 20)))
        self.assertEqual(raster.shape, (41, 41))
        self.assertTrue(np.all(raster == 0))

    def test_window_equal_to_region(self):
        mas = mas_for_contraction(self.reflection, UNIT_GRID)
        raster = basin_image(mas, mas.region)
        np.testing.assert_array_equal(raster[mas.region.mask], mas.labels)

    def test_multi_component_partition(self):
        """Test a scaled reflection against pointwise orbit following."""
        mas = mas_for_contraction(self.reflection, UNIT_GRID)
        self.assertGreaterEqual(mas.component_count, 2)
        window = LatticeRegion.box((-15, -15), (15, 15))
        raster = basin_image(mas, window)
        self.assertGreaterEqual(len(np.unique(raster)), 2)
        dm = roundoff_map(self.reflection, UNIT_GRID)
        for i in range(0, len(window), 13):
            p = window.point(i)
            while p not in mas.region:
                p = dm(p)
            self.assertEqual(raster[tuple(window.point(i)[k] - int(window.lo[k]) for k in range(2))],
                             mas.basin_label(p))

    def test_ball_window_outside_cells(self):
        mas = mas_for_contraction(similarity(0.3, 45.0), UNIT_GRID)
        window = lattice_ball((0.0, 0.0), 3.0, UNIT_GRID)
        raster = basin_image(mas, window)
        self.assertEqual(raster[0, 0], -1)
        self.assertTrue(np.all(raster[window.mask] == 0))
