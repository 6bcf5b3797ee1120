import io
import math
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from affine.maps import from_fixed_point, similarity
from affine.sampling import AFFINE, SIMILARITY
from PyDIFS.exceptions import InvalidInputError, RejectionStallError
from stats.sweeps import (
    CSV_HEADER,
    DEFAULT_DISTANCE_GRID,
    DISTANCE_SWEEP,
    LAMBDA_CAP_SWEEP,
    SweepConfig,
    SweepPoint,
    SweepResult,
    conditioned_draw,
    delta_invariance_check,
    expected_components_summary,
    perimeter_point,
    run_sweep,
    sweep_rows,
    write_sweep_csv,
)


class PerimeterPointTestCase(SimpleTestCase):
    def test_corners_and_sides(self):
        np.testing.assert_allclose(perimeter_point(0.0, 0.125), (-0.125, -0.125))
        np.testing.assert_allclose(perimeter_point(0.25, 0.125), (0.125, -0.125))
        np.testing.assert_allclose(perimeter_point(0.625, 0.125), (0.0, 0.125), atol=1e-15)
        np.testing.assert_allclose(perimeter_point(0.75, 0.125), (-0.125, 0.125))
        self.assertEqual(perimeter_point(0.0, 0.0), (0.0, 0.0))

    def test_points_lie_on_the_square(self):
        rng = np.random.default_rng(4)
        for d in (0.025, 0.3, 0.5):
            for u in rng.uniform(0.0, 8.0 * d, size=200):
                x, y = perimeter_point(float(u), d)
                self.assertAlmostEqual(max(abs(x), abs(y)), d, places=12)


class ConditionedDrawTestCase(SimpleTestCase):
    """Test cases for the conditioned parameter draws."""

    def test_lambda_cap_is_respected(self):
        cfg = SweepConfig(kind=AFFINE, conditioning=LAMBDA_CAP_SWEEP, parameter_grid=(0.3,), samples_per_point=50)
        for sample in range(50):
            draw = conditioned_draw(cfg, 0, sample)
            self.assertLessEqual(max(draw.lambdas), 0.3)
            self.assertLessEqual(draw.max_abs_lambda, 0.95)
            self.assertTrue(all(abs(v) <= 0.5 for v in draw.fixed_point))

    def test_cap_is_signed(self):
        cfg = SweepConfig(kind=AFFINE, parameter_grid=(0.3,), samples_per_point=200)
        draws = [conditioned_draw(cfg, 0, sample) for sample in range(200)]
        self.assertTrue(any(draw.max_abs_lambda > 0.6 for draw in draws))

    def test_zero_cap_keeps_negative_scales(self):
        cfg = SweepConfig(kind=AFFINE, parameter_grid=(0.0,), samples_per_point=100)
        for sample in range(100):
            draw = conditioned_draw(cfg, 0, sample)
            self.assertTrue(all(-0.95 <= v <= 0.0 for v in draw.lambdas))

    def test_similarity_draws_include_reflections(self):
        cfg = SweepConfig(kind=SIMILARITY, parameter_grid=(0.95,), samples_per_point=200)
        draws = [conditioned_draw(cfg, 0, sample) for sample in range(200)]
        for draw in draws:
            self.assertEqual(abs(draw.lambdas[0]), abs(draw.lambdas[1]))
        reflections = sum(draw.lambdas[0] * draw.lambdas[1] < 0 for draw in draws)
        self.assertTrue(50 < reflections < 150)

    def test_distance_sweep_places_fixed_point(self):
        cfg = SweepConfig(kind=SIMILARITY, conditioning=DISTANCE_SWEEP, parameter_grid=(0.0, 0.25), samples_per_point=30)
        for sample in range(30):
            draw = conditioned_draw(cfg, 1, sample)
            self.assertAlmostEqual(max(abs(v) for v in draw.fixed_point), 0.25, places=12)
            self.assertLessEqual(draw.max_abs_lambda, 0.95)
            self.assertEqual(abs(draw.lambdas[0]), abs(draw.lambdas[1]))
            self.assertEqual(conditioned_draw(cfg, 0, sample).fixed_point, (0.0, 0.0))

    def test_draws_are_keyed_by_sample(self):
        cfg = SweepConfig(parameter_grid=(0.5, 0.9), samples_per_point=10, seed=11)
        self.assertEqual(conditioned_draw(cfg, 1, 7), conditioned_draw(cfg, 1, 7))
        self.assertNotEqual(conditioned_draw(cfg, 1, 7), conditioned_draw(cfg, 1, 8))

    @override_settings(DIFS_SETTINGS={'MAX_REJECTION_ATTEMPTS': 3})
    def test_rejection_budget(self):
        cfg = SweepConfig(parameter_grid=(0.5,), samples_per_point=1)
        with patch('stats.sweeps.draw_lambdas', return_value=(0.9, 0.2)) as draw_lambdas:
            with self.assertRaises(RejectionStallError):
                conditioned_draw(cfg, 0, 0)
        self.assertEqual(draw_lambdas.call_count, 3)

    def test_rejects_unknown_kind(self):
        with self.assertRaises(InvalidInputError):
            SweepConfig(kind='projective')


class RunSweepTestCase(SimpleTestCase):
    """Test cases for sweep aggregation."""

    def small_config(self, **kwargs):
        values = dict(parameter_grid=(0.5, 0.95), samples_per_point=60, seed=5)
        values.update(kwargs)
        return SweepConfig(**values)

    def test_chunking_does_not_change_result(self):
        cfg = self.small_config()
        coarse = run_sweep(cfg, n_jobs=1, chunk_size=60)
        fine = run_sweep(cfg, n_jobs=1, chunk_size=7)
        self.assertEqual(sweep_rows(coarse), sweep_rows(fine))

    def test_probabilities_are_ordered(self):
        result = run_sweep(self.small_config(kind=SIMILARITY), n_jobs=1)
        self.assertEqual([p.param for p in result.points], [0.5, 0.95])
        for point in result.points:
            self.assertEqual(point.n, 60)
            self.assertLessEqual(point.p_multicomponent, point.p_nonsingleton)
            self.assertLessEqual(point.p_nonsingleton, 1.0)
            self.assertGreaterEqual(point.expected_components, 1.0)

    def test_csv_layout(self):
        result = run_sweep(self.small_config(), n_jobs=1)
        stream = io.StringIO()
        write_sweep_csv([result], stream)
        lines = stream.getvalue().splitlines()
        self.assertEqual(lines[0], ','.join(CSV_HEADER))
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[1].startswith('affine,lambda_cap_sweep,0.5,'))
        self.assertTrue(lines[2].endswith(',60'))

    @tag('slow')
    def test_nonsingleton_probability_at_high_cap(self):
        for kind in (AFFINE, SIMILARITY):
            with self.subTest(kind=kind):
                cfg = SweepConfig(kind=kind, parameter_grid=(0.95,), samples_per_point=20000)
                point = run_sweep(cfg).point_for(0.95)
                self.assertAlmostEqual(point.p_nonsingleton, 0.6, delta=0.05)

    @tag('slow')
    def test_affine_majority_nonsingleton_over_middle_caps(self):
        cfg = SweepConfig(kind=AFFINE, parameter_grid=(0.5, 0.6, 0.7, 0.75), samples_per_point=20000)
        for point in run_sweep(cfg).points:
            with self.subTest(cap=point.param):
                self.assertGreater(point.p_nonsingleton, 0.5)

    @tag('slow')
    def test_distance_sweep_trend_levels(self):
        for kind, level in ((SIMILARITY, 3.5), (AFFINE, 2.4)):
            with self.subTest(kind=kind):
                cfg = SweepConfig(
                    kind=kind,
                    conditioning=DISTANCE_SWEEP,
                    parameter_grid=DEFAULT_DISTANCE_GRID,
                    samples_per_point=20000,
                )
                report = expected_components_summary(run_sweep(cfg))
                self.assertAlmostEqual(report.level, level, delta=0.5)


class TrendReportTestCase(SimpleTestCase):
    def result_for(self, levels):
        result = SweepResult(config=SweepConfig(conditioning=DISTANCE_SWEEP, parameter_grid=(0.0, 0.25, 0.5)))
        for param, components in zip((0.0, 0.25, 0.5), levels):
            outcomes = np.array([[components, components]] * 4, dtype=np.int64)
            result.points.append(SweepPoint.from_outcomes(param, outcomes))
        return result

    def test_constant_series(self):
        report = expected_components_summary(self.result_for((2, 2, 2)))
        self.assertAlmostEqual(report.slope, 0.0, places=12)
        self.assertAlmostEqual(report.level, 2.0, places=12)
        self.assertIn('trend level 2.000000', report.as_text('similarity'))

    def test_linear_series(self):
        report = expected_components_summary(self.result_for((1, 2, 3)))
        self.assertAlmostEqual(report.slope, 4.0, places=9)
        self.assertAlmostEqual(report.intercept, 1.0, places=9)
        self.assertAlmostEqual(report.level, 2.0, places=9)

    def test_standard_error_of_constant_outcomes(self):
        point = self.result_for((3, 3, 3)).points[0]
        self.assertEqual(point.se_components, 0.0)
        self.assertEqual(point.se_nonsingleton, 0.0)
        self.assertTrue(math.isclose(point.expected_components, 3.0))


class DeltaInvarianceTestCase(SimpleTestCase):
    def test_power_of_two_spacings(self):
        for degrees in (0.0, 30.0, 150.0):
            w = similarity(0.9, degrees, fixed_point=(0.013, -0.021))
            with self.subTest(degrees=degrees):
                self.assertTrue(delta_invariance_check(w, 0.5, 0.125))

    def test_rational_spacings(self):
        rng = np.random.default_rng(31)
        for _ in range(40):
            numerator, denominator = (int(v) for v in rng.integers(1, 12, size=2))
            w = similarity(
                float(rng.uniform(0.3, 0.9)),
                float(rng.uniform(0.0, 360.0)),
                fixed_point=tuple(float(v) for v in rng.uniform(-1.0, 1.0, size=2)),
            )
            with self.subTest(ratio=f"{numerator}/{denominator}"):
                self.assertTrue(delta_invariance_check(w, 0.2, 0.2 * numerator / denominator))

    def test_unscaled_pair_is_reported(self):
        w = from_fixed_point(0.1 * np.eye(2), (0.3, 0.3))
        self.assertTrue(delta_invariance_check(w, 1.0, 0.5))
        self.assertFalse(delta_invariance_check(w, 1.0, 0.5, rescale=False))
