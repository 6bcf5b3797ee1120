import math

import numpy as np
from django.test import SimpleTestCase, tag
from scipy import stats

from affine.maps import (
    AffineMap,
    contractivity,
    fixed_point,
    from_fixed_point,
    rotation,
    scale_map,
    similarity,
    singular_values_2x2,
    translate_map,
)
from affine.sampling import (
    AFFINE,
    SIMILARITY,
    RandomContractionSpec,
    draw_parameters,
    generator_for,
    sample_contraction,
)
from grid.lattice import MANHATTAN, MAXIMUM
from PyDIFS.exceptions import (
    DimensionMismatchError,
    InvalidInputError,
    NoUniqueFixedPointError,
    UnsupportedDimensionError,
)

SKEW = [[0.5, 0.3], [-0.1, 0.4]]


def power_iteration_sigma_max(L, iterations=500):
    """Largest singular value from power iteration on L^T L."""
    gram = L.T @ L
    v = np.ones(L.shape[1]) / math.sqrt(L.shape[1])
    for _ in range(iterations):
        v = gram @ v
        v = v / np.linalg.norm(v)
    return math.sqrt(float(v @ gram @ v))


class FixedPointTestCase(SimpleTestCase):
    """Test cases for fixed point solves."""

    def test_constant_map(self):
        np.testing.assert_allclose(fixed_point(AffineMap(np.zeros((2, 2)), [3, 4])), [3.0, 4.0])

    def test_half_scale(self):
        np.testing.assert_allclose(fixed_point(AffineMap(0.5 * np.eye(2), [1, 0])), [2.0, 0.0])

    def test_skew_residual(self):
        w = AffineMap(SKEW, [0.7, -1.3])
        x_f = fixed_point(w)
        self.assertLess(np.linalg.norm(w(x_f) - x_f), 1e-12)

    def test_singular_system(self):
        """Test that an eigenvalue 1 is reported rather than solved."""
        with self.assertRaises(NoUniqueFixedPointError):
            fixed_point(AffineMap(np.eye(2), [1, 0]))
        with self.assertRaises(NoUniqueFixedPointError):
            fixed_point(AffineMap([[1.0, 0.0], [0.0, 0.5]], [0, 1]))

    def test_shape_validation(self):
        with self.assertRaises(DimensionMismatchError):
            AffineMap(np.eye(2), [1, 2, 3])
        with self.assertRaises(InvalidInputError):
            AffineMap(np.eye(2), [float('nan'), 0])

    def test_from_fixed_point_roundtrip(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            L = rng.uniform(-1, 1, size=(3, 3))
            L *= 0.9 / np.linalg.svd(L, compute_uv=False)[0]
            v = rng.uniform(-10, 10, size=3)
            np.testing.assert_allclose(fixed_point(from_fixed_point(L, v)), v, rtol=1e-10, atol=1e-10)

    def test_from_fixed_point_examples(self):
        w = from_fixed_point(np.zeros((2, 2)), (1, 2))
        np.testing.assert_array_equal(w(np.array([5.0, -7.0])), [1.0, 2.0])
        np.testing.assert_array_equal(from_fixed_point(0.6 * rotation(math.radians(150)), (0, 0)).translation, [0, 0])


class ContractivityTestCase(SimpleTestCase):
    """Test cases for contractivity factors."""

    def test_similarity_scale(self):
        self.assertAlmostEqual(contractivity(similarity(0.6, 30.0)), 0.6, places=14)

    def test_diagonal(self):
        self.assertAlmostEqual(contractivity(AffineMap(np.diag([0.3, 0.8]), [0, 0])), 0.8, places=15)

    def test_closed_form_against_power_iteration(self):
        L = np.array(SKEW)
        self.assertAlmostEqual(singular_values_2x2(L)[0], power_iteration_sigma_max(L), places=12)
        rng = np.random.default_rng(17)
        for _ in range(200):
            L = rng.uniform(-2, 2, size=(2, 2))
            expected = np.linalg.svd(L, compute_uv=False)
            s_max, s_min = singular_values_2x2(L)
            self.assertAlmostEqual(s_max, expected[0], places=12)
            self.assertAlmostEqual(s_min, expected[1], places=12)

    def test_operator_norms(self):
        w = AffineMap(SKEW, [0, 0])
        self.assertAlmostEqual(contractivity(w, MAXIMUM), 0.8)
        self.assertAlmostEqual(contractivity(w, MANHATTAN), 0.7)

    def test_higher_dimension_uses_svd(self):
        L = np.diag([0.2, 0.7, 0.4])
        self.assertAlmostEqual(contractivity(AffineMap(L, np.zeros(3))), 0.7, places=15)


class ConjugationTestCase(SimpleTestCase):
    """Test cases for translation and scaling of maps."""

    def setUp(self):
        self.w = AffineMap(SKEW, [0.25, -0.4])
        self.rng = np.random.default_rng(23)

    def test_translate_identity(self):
        self.assertEqual(translate_map(self.w, [0.0, 0.0]), self.w)

    def test_translate_shifts_fixed_point(self):
        w = from_fixed_point(0.5 * np.eye(2), (2, 0))
        moved = translate_map(w, (-2, 0))
        np.testing.assert_allclose(fixed_point(moved), [0.0, 0.0], atol=1e-15)
        np.testing.assert_array_equal(moved.matrix, 0.5 * np.eye(2))

    def test_translate_conjugation_identity(self):
        t = np.array([1.7, -0.3])
        moved = translate_map(self.w, t)
        x = self.rng.uniform(-5, 5, size=(100, 2))
        np.testing.assert_allclose(moved(x + t), self.w(x) + t, rtol=1e-12, atol=1e-12)
        self.assertEqual(contractivity(moved), contractivity(self.w))

    def test_scale_examples(self):
        self.assertEqual(scale_map(self.w, 1.0), self.w)
        linear = similarity(0.7, 40.0)
        self.assertEqual(scale_map(linear, 3.5), linear)
        w = from_fixed_point(0.5 * np.eye(2), (2, 0))
        np.testing.assert_allclose(fixed_point(scale_map(w, 3.0)), [6.0, 0.0])

    def test_scale_conjugation_identity(self):
        alpha = 0.125
        scaled = scale_map(self.w, alpha)
        x = self.rng.uniform(-5, 5, size=(100, 2))
        np.testing.assert_allclose(scaled(alpha * x), alpha * self.w(x), rtol=1e-12, atol=1e-15)
        self.assertEqual(contractivity(scaled), contractivity(self.w))

    def test_scale_zero_rejected(self):
        with self.assertRaises(InvalidInputError):
            scale_map(self.w, 0.0)

    def test_compose(self):
        a = similarity(0.5, 90.0, (1.0, 0.0))
        b = AffineMap(SKEW, [0.1, 0.2])
        x = self.rng.uniform(-1, 1, size=(10, 2))
        np.testing.assert_allclose(a.compose(b)(x), a(b(x)), rtol=1e-13, atol=1e-13)


class SamplingTestCase(SimpleTestCase):
    """Test cases for the random contraction sampler."""

    def test_determinism(self):
        spec = RandomContractionSpec(seed=99)
        self.assertEqual(sample_contraction(spec, 12), sample_contraction(spec, 12))
        self.assertNotEqual(sample_contraction(spec, 12), sample_contraction(spec, 13))

    def test_similarity_contractivity(self):
        spec = RandomContractionSpec(kind=SIMILARITY, seed=4)
        for index in range(200):
            draw = draw_parameters(spec, generator_for(spec.seed, index))
            self.assertAlmostEqual(contractivity(draw.to_map()), abs(draw.lambdas[0]), places=12)

    def test_similarity_orientation_is_random(self):
        spec = RandomContractionSpec(kind=SIMILARITY, seed=6)
        determinants = [
            np.linalg.det(draw_parameters(spec, generator_for(spec.seed, index)).linear_part)
            for index in range(400)
        ]
        reversing = sum(d < 0 for d in determinants)
        self.assertTrue(150 < reversing < 250)

    def test_contractivity_below_cap(self):
        spec = RandomContractionSpec(kind=AFFINE, lambda_cap=0.8, seed=8)
        for index in range(500):
            self.assertLess(contractivity(sample_contraction(spec, index)), 0.8 + 1e-12)

    def test_fixed_point_in_box(self):
        spec = RandomContractionSpec(fixed_point_box=((0.0, 0.25), (-2.0, -1.0)), seed=2)
        for index in range(100):
            x_f = fixed_point(sample_contraction(spec, index))
            self.assertTrue(-1e-9 <= x_f[0] <= 0.25 + 1e-9)
            self.assertTrue(-2.0 - 1e-9 <= x_f[1] <= -1.0 + 1e-9)

    def test_invalid_specs(self):
        with self.assertRaises(UnsupportedDimensionError):
            RandomContractionSpec(n=3)
        with self.assertRaises(InvalidInputError):
            RandomContractionSpec(lambda_cap=1.5)
        with self.assertRaises(InvalidInputError):
            RandomContractionSpec(kind='projective')

    @tag('slow')
    def test_marginals_pass_ks(self):
        """Test every sampled parameter against its uniform law at level 0.01."""
        spec = RandomContractionSpec(seed=2024)
        draws = [draw_parameters(spec, generator_for(spec.seed, index)) for index in range(100_000)]
        two_pi = 2.0 * math.pi
        samples = {
            'alpha': (np.array([d.alpha for d in draws]), (0.0, two_pi)),
            'beta': (np.array([d.beta for d in draws]), (0.0, two_pi)),
            'lambda_1': (np.array([d.lambdas[0] for d in draws]), (-1.0, 2.0)),
            'lambda_2': (np.array([d.lambdas[1] for d in draws]), (-1.0, 2.0)),
            'x_f_1': (np.array([d.fixed_point[0] for d in draws]), (-0.5, 1.0)),
            'x_f_2': (np.array([d.fixed_point[1] for d in draws]), (-0.5, 1.0)),
        }
        for name, (values, (loc, scale)) in samples.items():
            with self.subTest(parameter=name):
                result = stats.kstest(values, 'uniform', args=(loc, scale))
                self.assertGreater(result.pvalue, 0.01)
