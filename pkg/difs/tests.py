import math

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from affine.maps import AffineMap, from_fixed_point, similarity
from difs.chain import (
    Difs,
    ProbabilityTable,
    attractor_count_bound,
    classify,
    hyperbolic_difs,
    sierpinski_maps,
    stationary,
    strongly_connected_components,
    transition_graph,
    trap_region_difs,
)
from difs.orbits import (
    absorption_time,
    coupled_shadowing,
    empirical_measure,
    ria_orbit,
    total_variation,
    visit_frequencies,
)
from grid.lattice import GridSpace, LatticeRegion, TableMap, embed, roundoff_map, roundoff_point
from PyDIFS.exceptions import (
    ConvergenceFailureError,
    InvalidInputError,
    NotAContractionError,
    OrbitEscapeError,
    RegionNotClosedError,
)

LINE = GridSpace(1, 1.0)


def table_difs(targets_per_map, probabilities=None):
    """DIFS on the states 0..k-1 of a line from integer target lists."""
    size = len(targets_per_map[0])
    region = LatticeRegion.box((0,), (size - 1,))
    maps = [TableMap(region, np.asarray(targets).reshape(-1, 1)) for targets in targets_per_map]
    if probabilities is None:
        table = ProbabilityTable.uniform(len(maps))
    else:
        table = ProbabilityTable(probabilities, region if np.ndim(probabilities) == 2 else None)
    return Difs(LINE, maps, table, region=region), region


def reachability_oracle(successors):
    """Boolean reachability (reflexive) by repeated squaring."""
    size = successors.shape[0]
    reach = np.eye(size, dtype=bool)
    reach[np.repeat(np.arange(size), successors.shape[1]), successors.ravel()] = True
    for _ in range(int(math.ceil(math.log2(max(size, 2)))) + 1):
        reach = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
    return reach


def random_ifs(rng, n_maps, lambda_cap, spread):
    maps = []
    for _ in range(n_maps):
        L = rng.normal(size=(2, 2))
        L *= rng.uniform(0.05, lambda_cap) / np.linalg.svd(L, compute_uv=False)[0]
        maps.append(from_fixed_point(L, rng.uniform(-spread, spread, size=2)))
    return maps


class ProbabilityTableTestCase(SimpleTestCase):
    """Test cases for DIFS probability validation."""

    def test_constant_row(self):
        table = ProbabilityTable([0.2, 0.3, 0.5])
        self.assertTrue(table.is_constant)
        self.assertEqual(table.cumulative[-1], 1.0)

    def test_rejects_zero_and_bad_sum(self):
        with self.assertRaises(InvalidInputError):
            ProbabilityTable([0.0, 1.0])
        with self.assertRaises(InvalidInputError):
            ProbabilityTable([0.5, 0.6])

    def test_place_dependent_rows(self):
        region = LatticeRegion.box((0,), (1,))
        table = ProbabilityTable([[0.25, 0.75], [0.5, 0.5]], region)
        np.testing.assert_array_equal(table.rows_for(region), [[0.25, 0.75], [0.5, 0.5]])
        with self.assertRaises(InvalidInputError):
            ProbabilityTable([[0.25, 0.75], [0.5, 0.5]])

    def test_map_count_mismatch(self):
        region = LatticeRegion.box((0,), (1,))
        with self.assertRaises(InvalidInputError):
            Difs(LINE, [TableMap(region, [[0], [1]])], ProbabilityTable([0.5, 0.5]))


class TransitionGraphTestCase(SimpleTestCase):
    """Test cases for merged transition matrices."""

    def test_single_self_loop(self):
        d, region = table_difs([[0]])
        graph = transition_graph(d, region)
        self.assertEqual(graph.matrix.nnz, 1)
        self.assertEqual(graph.matrix[0, 0], 1.0)

    def test_parallel_edges_merge(self):
        d, region = table_difs([[1, 1], [1, 1]], [0.5, 0.5])
        graph = transition_graph(d, region)
        self.assertEqual(graph.matrix[0, 1], 1.0)
        self.assertEqual(graph.matrix.nnz, 2)

    def test_row_sums(self):
        d, states = hyperbolic_difs(sierpinski_maps(), GridSpace(2, 1 / 16), [0.2, 0.3, 0.5])
        sums = np.asarray(transition_graph(d, states).matrix.sum(axis=1)).ravel()
        np.testing.assert_allclose(sums, 1.0, atol=1e-14)

    def test_not_closed(self):
        g = GridSpace(2, 1.0)
        d = Difs.from_affine([AffineMap(np.eye(2), [1.0, 0.0])], g)
        with self.assertRaises(RegionNotClosedError):
            transition_graph(d, LatticeRegion.box((0, 0), (2, 2)))


class ClassifyTestCase(SimpleTestCase):
    """Test cases for transient/recurrent decomposition."""

    def test_pure_cycle(self):
        d, region = table_difs([[1, 2, 0]])
        ms = classify(d, region)
        self.assertEqual(ms.class_count, 1)
        self.assertEqual(ms.classes[0].tolist(), [0, 1, 2])
        self.assertEqual(ms.transient.size, 0)

    def test_tail_and_two_classes(self):
        d, region = table_difs([[0, 0, 3, 3, 1], [0, 2, 3, 3, 4]])
        ms = classify(d, region)
        self.assertEqual([c.tolist() for c in ms.classes], [[0], [3]])
        self.assertEqual(ms.transient.tolist(), [1, 2, 4])
        self.assertEqual(ms.class_of.tolist(), [0, -1, -1, 1, -1])

    def test_scc_on_long_chain_needs_no_recursion(self):
        size = 200_000
        indptr = np.arange(size + 1)
        indices = (np.arange(size) + 1) % size
        labels = strongly_connected_components(indptr, indices)
        self.assertTrue(np.all(labels == 0))

    def test_random_graphs_against_oracle(self):
        """Test classify against brute-force reachability on random multigraphs."""
        rng = np.random.default_rng(6)
        for trial in range(1000):
            size = int(rng.integers(1, 201))
            n_maps = int(rng.integers(1, 4))
            targets = [rng.integers(0, size, size=size).tolist() for _ in range(n_maps)]
            d, region = table_difs(targets)
            ms = classify(d, region)

            reach = reachability_oracle(np.column_stack(targets))
            communicate = reach & reach.T
            recurrent = np.all(~reach | reach.T, axis=1)
            with self.subTest(trial=trial):
                np.testing.assert_array_equal(ms.class_of >= 0, recurrent)
                rec = np.flatnonzero(recurrent)
                same_class = ms.class_of[rec][:, None] == ms.class_of[rec][None, :]
                np.testing.assert_array_equal(same_class, communicate[np.ix_(rec, rec)])
                self.assertGreaterEqual(ms.class_count, 1)

    def test_classes_closed_and_covered(self):
        d, states = hyperbolic_difs(sierpinski_maps(), GridSpace(2, 1 / 32))
        ms = classify(d, states)
        self.assertGreaterEqual(ms.class_count, 1)
        successors = d.successor_matrix(states)
        for k, members in enumerate(ms.classes):
            images = set(successors[members].ravel().tolist())
            self.assertTrue(images <= set(members.tolist()))
            self.assertEqual(images, set(members.tolist()))
        self.assertEqual(ms.transient.size + sum(c.size for c in ms.classes), len(states))


class StationaryTestCase(SimpleTestCase):
    """Test cases for stationary distributions."""

    def test_swap_chain(self):
        d, region = table_difs([[1, 0]])
        pi = stationary(classify(d, region), 0)
        np.testing.assert_allclose(pi.weights, [0.5, 0.5], atol=1e-12)
        self.assertLessEqual(pi.residual, 1e-10)

    def test_single_absorbing_state(self):
        d, region = table_difs([[0, 0]])
        ms = classify(d, region)
        np.testing.assert_array_equal(stationary(ms, 0).weights, [1.0])
        self.assertEqual(ms.transient.tolist(), [1])

    def test_three_state_periodic_class(self):
        d, region = table_difs([[1, 0, 0], [2, 0, 0]], [0.5, 0.5])
        pi = stationary(classify(d, region), 0)
        np.testing.assert_allclose(pi.weights, [0.5, 0.25, 0.25], atol=1e-12)

    @override_settings(DIFS_SETTINGS={'STATIONARY_DIRECT_LIMIT': 0})
    def test_averaged_iteration_on_periodic_class(self):
        d, region = table_difs([[1, 0, 0], [2, 0, 0]], [0.5, 0.5])
        pi = stationary(classify(d, region), 0)
        self.assertEqual(pi.method, 'averaged_iteration')
        np.testing.assert_allclose(pi.weights, [0.5, 0.25, 0.25], atol=1e-9)

    @override_settings(DIFS_SETTINGS={'STATIONARY_DIRECT_LIMIT': 0, 'STATIONARY_MAX_ITERATIONS': 2})
    def test_iteration_cap(self):
        d, region = table_difs([[1, 0, 0], [2, 0, 0]], [0.5, 0.5])
        with self.assertRaises(ConvergenceFailureError):
            stationary(classify(d, region), 0)

    def test_sierpinski_classes_residual(self):
        d, states = hyperbolic_difs(sierpinski_maps(), GridSpace(2, 1 / 64), [0.2, 0.3, 0.5])
        ms = classify(d, states)
        for k in range(ms.class_count):
            pi = stationary(ms, k)
            self.assertLessEqual(pi.residual, 1e-10)
            self.assertTrue(np.all(pi.weights > 0))
            self.assertAlmostEqual(float(pi.weights.sum()), 1.0, places=12)


class TrapRegionDifsTestCase(SimpleTestCase):
    """Test cases for the closed state set of a discretized hyperbolic IFS."""

    def test_constant_map(self):
        g = GridSpace(2, 0.5)
        w = AffineMap(np.zeros((2, 2)), [1.1, -0.3])
        states = trap_region_difs([w], g)
        self.assertIn(roundoff_point((1.1, -0.3), g), states)
        roundoff_map(w, g).successor_indices(states)

    def test_sierpinski_contains_fixed_points(self):
        g = GridSpace(2, 1 / 64)
        states = trap_region_difs(sierpinski_maps(), g)
        for vertex in [(0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2)]:
            self.assertIn(roundoff_point(vertex, g), states)

    def test_not_a_contraction(self):
        with self.assertRaises(NotAContractionError):
            trap_region_difs([similarity(0.5, 0.0), similarity(1.0, 10.0)], GridSpace(2, 1.0))


class AttractorBoundTestCase(SimpleTestCase):
    """Test cases for attractor count bounds from single-map MAS."""

    def test_singleton_gives_unique(self):
        d, region = table_difs([[0, 0, 1], [1, 2, 2]])
        bound = attractor_count_bound(d, region)
        self.assertEqual(bound.bound, 1)
        self.assertTrue(bound.unique)

    def test_min_component_count(self):
        d, region = table_difs([[0, 1, 2, 0, 1, 2], [0, 1, 2, 3, 4, 5]])
        bound = attractor_count_bound(d, region)
        self.assertEqual(bound.component_counts, (3, 6))
        self.assertEqual(bound.bound, 3)
        self.assertFalse(bound.unique)

    def _check_random_systems(self, count, seed):
        rng = np.random.default_rng(seed)
        g = GridSpace(2, 1.0)
        for trial in range(count):
            maps = random_ifs(rng, int(rng.integers(1, 4)), 0.7, 2.0)
            d, states = hyperbolic_difs(maps, g)
            ms = classify(d, states)
            bound = attractor_count_bound(d, states)
            with self.subTest(trial=trial):
                self.assertLessEqual(ms.class_count, bound.bound)
                if bound.unique:
                    self.assertEqual(ms.class_count, 1)

    def test_random_systems(self):
        self._check_random_systems(50, 12)

    @tag('slow')
    def test_random_systems_full(self):
        self._check_random_systems(500, 13)


class OrbitTestCase(SimpleTestCase):
    """Test cases for random iteration orbits."""

    def test_single_map_is_deterministic_iteration(self):
        g = GridSpace(2, 1.0)
        w = similarity(0.9, 30.0, (0.3, 0.2))
        d = Difs.from_affine([w], g)
        orbit = ria_orbit(d, (5, -3), 50, seed=1)
        dm = roundoff_map(w, g)
        p = (5, -3)
        for k in range(1, 51):
            p = dm(p)
            self.assertEqual(orbit.point(k), p)

    def test_same_seed_same_indices(self):
        d, states = hyperbolic_difs(sierpinski_maps(), GridSpace(2, 1 / 32))
        start = roundoff_point((0.0, 0.0), d.grid)
        first = ria_orbit(d, start, 1000, seed=5, states=states)
        second = ria_orbit(d, start, 1000, seed=5, states=states)
        np.testing.assert_array_equal(first.indices, second.indices)
        np.testing.assert_array_equal(first.points, second.points)

    def test_orbit_consistency(self):
        d, region = table_difs([[1, 2, 0, 0], [0, 0, 1, 2]], [0.3, 0.7])
        orbit = ria_orbit(d, (3,), 500, seed=2)
        for k in range(1, orbit.steps + 1):
            image = d.maps[orbit.indices[k - 1]](orbit.point(k - 1))
            self.assertEqual(orbit.point(k), image)

    def test_start_outside_table(self):
        d, _ = table_difs([[0, 0]])
        with self.assertRaises(OrbitEscapeError):
            ria_orbit(d, (7,), 10, seed=0)

    def test_suffix_stays_in_class_and_visits_it(self):
        d, region = table_difs([[1, 2, 3, 1, 3], [2, 3, 1, 2, 0]])
        ms = classify(d, region)
        orbit = ria_orbit(d, (4,), 100_000, seed=3)
        entered = next(k for k in range(orbit.steps + 1) if ms.class_of[ms.state_index(orbit.point(k))] >= 0)
        suffix = region.index_of(orbit.points[entered:])
        label = ms.class_of[suffix[0]]
        self.assertTrue(np.all(ms.class_of[suffix] == label))
        self.assertEqual(set(suffix.tolist()), set(ms.classes[label].tolist()))

    def test_place_dependent_orbit(self):
        d, region = table_difs([[1, 0], [0, 1]], [[0.9, 0.1], [0.2, 0.8]])
        orbit = ria_orbit(d, (0,), 200_000, seed=4)
        pi = stationary(classify(d, region), 0)
        self.assertLess(total_variation(visit_frequencies(orbit, region), pi.weights), 0.01)


class EmpiricalMeasureTestCase(SimpleTestCase):
    """Test cases for ergodic averages of orbits."""

    def test_constant_orbit(self):
        d, _ = table_difs([[0]])
        orbit = ria_orbit(d, (0,), 20, seed=0)
        self.assertEqual(empirical_measure(orbit, 5), {(0,): 1.0})

    def test_swap_chain_frequencies(self):
        d, _ = table_difs([[1, 0]])
        measure = empirical_measure(ria_orbit(d, (0,), 100_000, seed=9), 0)
        self.assertAlmostEqual(measure[(0,)], 0.5, delta=0.01)
        self.assertAlmostEqual(measure[(1,)], 0.5, delta=0.01)

    def test_burn_in_out_of_range(self):
        d, _ = table_difs([[0]])
        with self.assertRaises(InvalidInputError):
            empirical_measure(ria_orbit(d, (0,), 5, seed=0), 5)

    def test_matches_stationary(self):
        """Test a one-million-step orbit against the exact stationary distribution."""
        d, states = hyperbolic_difs(sierpinski_maps(centered=True), GridSpace(2, 1 / 8), [0.25, 0.25, 0.5])
        ms = classify(d, states)
        pi = stationary(ms, 0)
        start = ms.states.point(int(ms.classes[0][0]))
        orbit = ria_orbit(d, start, 1_000_000, seed=10, states=states)
        frequencies = visit_frequencies(orbit, states)[pi.states]
        self.assertLess(total_variation(frequencies, pi.weights), 0.01)

    def test_absorption_from_every_start(self):
        d, states = hyperbolic_difs(sierpinski_maps(), GridSpace(2, 1 / 16))
        ms = classify(d, states)
        for trial in range(1000):
            start = states.point(trial % len(states))
            steps = absorption_time(d, ms, start, seed=trial, max_steps=10_000)
            self.assertGreaterEqual(steps, 0)


class ShadowingTestCase(SimpleTestCase):
    """Test cases for coupled exact and grid orbits."""

    def test_constant_map(self):
        g = GridSpace(2, 1.0)
        report = coupled_shadowing([AffineMap(np.zeros((2, 2)), [0.37, 2.9])], [1.0], (4, 4), 10, 0, g)
        self.assertLessEqual(report.max_distance, g.theta() + 1e-12)
        self.assertTrue(report.holds)

    def test_sierpinski(self):
        g = GridSpace(2, 1 / 64)
        report = coupled_shadowing(sierpinski_maps(), [1 / 3, 1 / 3, 1 / 3], (0, 0), 100_000, 21, g)
        self.assertLessEqual(report.max_distance, report.bound + 1e-9)
        self.assertAlmostEqual(report.bound, g.theta() / 0.5)

    def test_grid_chain_follows_roundoff_map(self):
        g = GridSpace(2, 0.1)
        w = similarity(0.8, 50.0, fixed_point=(0.33, -0.12))
        report = coupled_shadowing([w], [1.0], (7, -3), 50, 0, g)
        grid_map = roundoff_map(w, g)
        p, x, worst = (7, -3), embed((7, -3), g), 0.0
        for _ in range(50):
            x, p = w(x), grid_map(p)
            worst = max(worst, float(g.distance(x, embed(p, g))))
        self.assertAlmostEqual(report.max_distance, worst, places=12)
        self.assertTrue(report.holds)

    @tag('slow')
    def test_random_hyperbolic_systems(self):
        rng = np.random.default_rng(55)
        for trial in range(100):
            g = GridSpace(2, float(2.0 ** -rng.integers(0, 8)))
            maps = random_ifs(rng, int(rng.integers(1, 5)), 0.95, 3.0)
            weights = rng.uniform(0.1, 1.0, size=len(maps))
            report = coupled_shadowing(maps, weights / weights.sum(), (0, 0), 100_000, trial, g)
            with self.subTest(trial=trial):
                self.assertTrue(report.holds)
