import io
import os
import tempfile

import numpy as np
from django.test import SimpleTestCase

from absorbing.services import basin_image, mas_for_contraction
from affine.maps import AffineMap, similarity
from difs.chain import classify, hyperbolic_difs, sierpinski_maps, stationary
from difs.orbits import OrbitRecord, ria_orbit, total_variation
from grid.lattice import GridSpace, LatticeRegion, roundoff_map, tabulate
from PyDIFS.exceptions import ArtifactWriteError, InvalidInputError, RegionNotClosedError
from render.rasters import (
    HIGHLIGHT,
    MeasureField,
    accumulate,
    render_basins,
    scan_raster,
    to_image_order,
    tone_map,
    write_raster,
)
from render.scenes import (
    SMOOTHING_KERNEL,
    Perturbation,
    SceneSpec,
    dump_table_difs,
    generate_scene,
    load_table_difs,
)

UNIT_GRID = GridSpace(2, 1.0)
RED = (200.0, 0.0, 0.0)
BLUE = (0.0, 0.0, 100.0)


def synthetic_orbit(points, indices):
    return OrbitRecord(
        points=np.asarray(points, dtype=np.int64),
        indices=np.asarray(indices, dtype=np.int64),
        seed=0,
    )


def convolve_oracle(values):
    """Direct 3x3 convolution with edge replication, rounded half away from zero."""
    padded = np.pad(values.astype(np.float64), 1, mode='edge')
    out = np.zeros(values.shape)
    for i in range(values.shape[0]):
        for j in range(values.shape[1]):
            out[i, j] = float(np.sum(padded[i:i + 3, j:j + 3] * SMOOTHING_KERNEL))
    return (np.sign(out) * np.floor(np.abs(out) + 0.5)).astype(np.int64)


class WriteRasterTestCase(SimpleTestCase):
    """Test cases for binary PGM/PPM output."""

    def test_white_ppm_pixel(self):
        stream = io.BytesIO()
        write_raster(np.full((1, 1, 3), 255, dtype=np.uint8), stream)
        self.assertEqual(stream.getvalue(), b"P6\n1 1\n255\n\xff\xff\xff")

    def test_black_white_pgm(self):
        stream = io.BytesIO()
        write_raster(np.array([[0, 255]], dtype=np.uint8), stream, 'PGM')
        self.assertEqual(stream.getvalue(), b"P5\n2 1\n255\n\x00\xff")

    def test_rows_written_top_first(self):
        stream = io.BytesIO()
        write_raster(np.array([[1, 2], [3, 4], [5, 6]], dtype=np.uint8), stream)
        self.assertEqual(stream.getvalue(), b"P5\n2 3\n255\n\x01\x02\x03\x04\x05\x06")

    def test_writes_to_path(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'pixel.ppm')
            write_raster(np.zeros((1, 1, 3), dtype=np.uint8), path, 'PPM')
            with open(path, 'rb') as stream:
                self.assertEqual(stream.read(), b"P6\n1 1\n255\n\x00\x00\x00")

    def test_rejects_empty_and_mismatched_format(self):
        with self.assertRaises(InvalidInputError):
            write_raster(np.zeros((0, 3), dtype=np.uint8), io.BytesIO())
        with self.assertRaises(InvalidInputError):
            write_raster(np.zeros((2, 2), dtype=np.uint8), io.BytesIO(), 'PPM')
        with self.assertRaises(InvalidInputError):
            write_raster(np.zeros((2, 2), dtype=np.uint8), io.BytesIO(), 'PNG')

    def test_unwritable_target(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'missing', 'out.pgm')
            with self.assertRaises(ArtifactWriteError):
                write_raster(np.zeros((1, 1), dtype=np.uint8), path)


class ImageOrderTestCase(SimpleTestCase):
    def test_top_row_is_largest_second_coordinate(self):
        # field[m1, m2] for m1 in 0..1, m2 in 0..2
        field = np.array([[1, 2, 3], [4, 5, 6]])
        np.testing.assert_array_equal(to_image_order(field), [[3, 6], [2, 5], [1, 4]])


class AccumulateTestCase(SimpleTestCase):
    """Test cases for orbit accumulation into a measure field."""

    def setUp(self):
        self.window = LatticeRegion.box((0, 0), (3, 2))
        self.palette = [RED, BLUE]

    def test_single_visit_halves_color(self):
        orbit = synthetic_orbit([[9, 9], [1, 1]], [0])
        field = accumulate(MeasureField.empty(self.window), orbit, self.palette)
        np.testing.assert_allclose(field.colors[1, 1], [100.0, 0.0, 0.0])
        self.assertEqual(field.counts[1, 1], 1)
        self.assertEqual(field.total, 1)

    def test_two_visits_unrolled(self):
        orbit = synthetic_orbit([[0, 0], [2, 1], [2, 1]], [0, 1])
        field = accumulate(MeasureField.empty(self.window), orbit, self.palette)
        expected = ((np.zeros(3) + np.array(RED)) / 2.0 + np.array(BLUE)) / 2.0
        np.testing.assert_allclose(field.colors[2, 1], expected)
        self.assertEqual(field.counts[2, 1], 2)

    def test_color_recurrence_closed_form(self):
        rng = np.random.default_rng(5)
        palette = rng.uniform(0.0, 255.0, size=(4, 3))
        indices = rng.integers(0, 4, size=40)
        points = [[0, 0]] + [[3, 2]] * 40
        field = accumulate(MeasureField.empty(self.window), synthetic_orbit(points, indices), palette)
        k = len(indices)
        expected = sum(palette[i] / 2.0 ** (k - j) for j, i in enumerate(indices))
        np.testing.assert_allclose(field.colors[3, 2], expected)

    def test_matches_sequential_update(self):
        rng = np.random.default_rng(6)
        points = rng.integers(0, 3, size=(301, 2))
        indices = rng.integers(0, 2, size=300)
        field = accumulate(MeasureField.empty(self.window), synthetic_orbit(points, indices), self.palette)
        colors = np.zeros(self.window.shape + (3,))
        for p, i in zip(points[1:], indices):
            colors[p[0], p[1]] = (colors[p[0], p[1]] + np.array(self.palette[i])) / 2.0
        np.testing.assert_allclose(field.colors, colors)

    def test_count_conservation_with_drops(self):
        points = [[0, 0], [1, 1], [7, 0], [1, 1], [-1, 2], [3, 2], [0, 0]]
        orbit = synthetic_orbit(points, [0, 1, 0, 1, 0, 1])
        field = accumulate(MeasureField.empty(self.window), orbit, self.palette, burn_in=1)
        self.assertEqual(field.dropped, 2)
        self.assertEqual(int(field.counts.sum()) + field.dropped, orbit.steps - 1)
        self.assertEqual(field.total, int(field.counts.sum()))

    def test_accumulation_leaves_input_field(self):
        empty = MeasureField.empty(self.window)
        accumulate(empty, synthetic_orbit([[0, 0], [1, 1]], [0]), self.palette)
        self.assertEqual(empty.total, 0)
        self.assertFalse(np.any(empty.counts))

    def test_long_orbit_matches_stationary_weights(self):
        g = GridSpace(2, 0.125)
        d, states = hyperbolic_difs(sierpinski_maps(centered=True), g)
        ms = classify(d, states)
        pi = stationary(ms, 0)
        start = ms.class_points(0)[0]
        orbit = ria_orbit(d, start, 1_000_000, seed=11, states=states)
        window = LatticeRegion.box(states.lo, states.hi)
        field = accumulate(MeasureField.empty(window), orbit)
        freq = field.frequencies()
        offsets = ms.class_points(0) - window.lo
        on_class = freq[tuple(offsets.T)]
        self.assertAlmostEqual(float(on_class.sum()), 1.0, places=12)
        self.assertLess(total_variation(on_class, pi.weights), 0.01)


class ToneMapTestCase(SimpleTestCase):
    """Test cases for count-to-brightness mapping."""

    def setUp(self):
        window = LatticeRegion.box((0, 0), (1, 0))
        points = [[0, 0]] + [[0, 0]] * 4 + [[1, 0]]
        self.field = accumulate(
            MeasureField.empty(window), synthetic_orbit(points, [0, 0, 0, 0, 0]), [(255.0, 255.0, 255.0)]
        )

    def test_max_count_pixel_keeps_color(self):
        raster = tone_map(self.field, gamma=0.45)
        self.assertEqual(raster.shape, (1, 2, 3))
        np.testing.assert_array_equal(raster[0, 0], np.rint(self.field.colors[0, 0]).astype(np.uint8))

    def test_linear_gamma(self):
        raster = tone_map(self.field, gamma=1.0)
        expected = np.rint(self.field.colors[1, 0] * 0.25).astype(np.uint8)
        np.testing.assert_array_equal(raster[0, 1], expected)

    def test_power_curve(self):
        raster = tone_map(self.field, gamma=0.5)
        expected = np.rint(self.field.colors[1, 0] * 0.5).astype(np.uint8)
        np.testing.assert_array_equal(raster[0, 1], expected)

    def test_zero_count_is_black(self):
        window = LatticeRegion.box((0, 0), (2, 0))
        field = accumulate(MeasureField.empty(window), synthetic_orbit([[0, 0], [0, 0]], [0]), [RED])
        self.assertFalse(np.any(tone_map(field)[0, 2]))

    def test_empty_field_is_black(self):
        raster = tone_map(MeasureField.empty(LatticeRegion.box((0, 0), (4, 2))))
        self.assertEqual(raster.shape, (3, 5, 3))
        self.assertFalse(np.any(raster))

    def test_rejects_non_positive_gamma(self):
        with self.assertRaises(InvalidInputError):
            tone_map(self.field, gamma=0.0)


class RenderBasinsTestCase(SimpleTestCase):
    """Test cases for basin rasters."""

    palette = [(10, 20, 30), (40, 50, 60), (70, 80, 90)]

    def test_singleton_basin_and_highlight(self):
        mas = mas_for_contraction(similarity(0.3, 45.0), UNIT_GRID)
        raster = render_basins(mas, LatticeRegion.box((-3, -3), (3, 3)), self.palette)
        self.assertEqual(raster.shape, (7, 7, 3))
        highlighted = np.all(raster == np.array(HIGHLIGHT, dtype=np.uint8), axis=-1)
        self.assertEqual(int(highlighted.sum()), 1)
        self.assertTrue(highlighted[3, 3])
        self.assertTrue(np.all(raster[~highlighted] == np.array(self.palette[0], dtype=np.uint8)))

    def test_single_pixel_window(self):
        mas = mas_for_contraction(similarity(0.3, 45.0), UNIT_GRID)
        raster = render_basins(mas, LatticeRegion.box((5, 5), (5, 5)), self.palette)
        self.assertEqual(raster.shape, (1, 1, 3))
        np.testing.assert_array_equal(raster[0, 0], self.palette[0])

    def test_pixels_follow_basin_labels(self):
        mas = mas_for_contraction(similarity(0.6, 0.0), UNIT_GRID)
        window = LatticeRegion.box((-12, -8), (12, 8))
        raster = render_basins(mas, window, self.palette)
        labels = to_image_order(basin_image(mas, window))
        members = {tuple(p) for p in mas.points}
        for row in range(raster.shape[0]):
            for col in range(raster.shape[1]):
                point = (int(window.lo[0]) + col, int(window.hi[1]) - row)
                expected = HIGHLIGHT if point in members else self.palette[labels[row, col] % 3]
                self.assertEqual(tuple(int(v) for v in raster[row, col]), tuple(expected))

    def test_palette_cycling_warns(self):
        mas = mas_for_contraction(AffineMap(np.diag([0.9, -0.9]), [0.0, 0.0]), UNIT_GRID)
        self.assertGreater(mas.component_count, 1)
        with self.assertLogs('render.rasters', level='WARNING'):
            raster = render_basins(mas, mas.region, [(1, 2, 3)])
        self.assertEqual(raster.shape[:2], (mas.region.shape[1], mas.region.shape[0]))

    def test_scan_raster_scales_to_full_range(self):
        raster = scan_raster(np.array([[1, 2], [3, 5]]))
        np.testing.assert_array_equal(raster, [[64, 255], [0, 128]])


class SceneTestCase(SimpleTestCase):
    """Test cases for tabulated scene generation."""

    def test_plain_scene_equals_tabulated_similarities(self):
        spec = SceneSpec(width=16, height=16, smoothing=False)
        d = generate_scene(spec)
        g = GridSpace(2, spec.delta)
        self.assertEqual(d.n_maps, 3)
        for dm, w in zip(d.maps, sierpinski_maps()):
            expected = tabulate(roundoff_map(w, g), spec.region).targets
            np.testing.assert_array_equal(dm.targets, expected)

    def test_smoothing_matches_direct_convolution(self):
        plain = generate_scene(SceneSpec(width=16, height=16, smoothing=False))
        smoothed = generate_scene(SceneSpec(width=16, height=16, smoothing=True))
        for before, after in zip(plain.maps, smoothed.maps):
            fields = before.targets.reshape(16, 16, 2)
            result = after.targets.reshape(16, 16, 2)
            for axis in range(2):
                expected = np.clip(convolve_oracle(fields[..., axis]), 0, 15)
                np.testing.assert_array_equal(result[..., axis], expected)
            interior = np.abs(result[1:-1, 1:-1] - fields[1:-1, 1:-1])
            self.assertLessEqual(int(interior.max()), 1)

    def test_perturbed_scene_is_closed_and_reproducible(self):
        spec = SceneSpec(
            width=32,
            height=32,
            perturbations=(Perturbation(amplitude=(2.5, 1.5), frequency=(3.0, 2.0)),),
            probability_amplitude=0.4,
            seed=21,
        )
        first, second = generate_scene(spec), generate_scene(spec)
        for a, b in zip(first.maps, second.maps):
            np.testing.assert_array_equal(a.targets, b.targets)
            self.assertTrue(np.all((a.targets >= 0) & (a.targets <= 31)))
        self.assertEqual(first.probabilities.values.tobytes(), second.probabilities.values.tobytes())
        self.assertTrue(np.all(first.probabilities.values >= 1e-6 / 2.0))
        np.testing.assert_allclose(first.probabilities.values.sum(axis=1), 1.0, atol=1e-12)
        self.assertGreaterEqual(classify(first, first.region).class_count, 1)

    def test_perturbation_moves_targets(self):
        plain = generate_scene(SceneSpec(width=32, height=32, smoothing=False))
        moved = generate_scene(SceneSpec(
            width=32, height=32, smoothing=False, perturbations=(Perturbation(amplitude=(3.0, 3.0)),)
        ))
        self.assertTrue(any(
            not np.array_equal(a.targets, b.targets) for a, b in zip(plain.maps, moved.maps)
        ))

    def test_rejects_tiny_resolution(self):
        with self.assertRaises(InvalidInputError):
            SceneSpec(width=1, height=10)


class TableFileTestCase(SimpleTestCase):
    """Test cases for the plain text table format."""

    def test_dump_and_load(self):
        spec = SceneSpec(width=9, height=7, probability_amplitude=0.3, seed=4)
        d = generate_scene(spec)
        stream = io.StringIO()
        dump_table_difs(d, stream)
        self.assertTrue(stream.getvalue().startswith(f"DIFS n=2 9 7 3 {spec.delta!r}\n"))
        loaded = load_table_difs(io.StringIO(stream.getvalue()))
        self.assertEqual(loaded.grid.delta, d.grid.delta)
        self.assertEqual(loaded.region, d.region)
        for a, b in zip(d.maps, loaded.maps):
            np.testing.assert_array_equal(a.targets, b.targets)
        np.testing.assert_allclose(loaded.probabilities.values, d.probabilities.values, rtol=0, atol=1e-15)

    def test_row_major_order(self):
        text = "DIFS n=2 2 1 1 0.5\n1 0\n0 0\n1\n1\n"
        d = load_table_difs(io.StringIO(text))
        self.assertEqual(d.maps[0]((0, 0)), (1, 0))
        self.assertEqual(d.maps[0]((1, 0)), (0, 0))

    def test_rejects_malformed_files(self):
        for text in (
            "DIFZ n=2 2 1 1 0.5\n1 0\n0 0\n1\n1\n",
            "DIFS n=2 2 1 1 0.5\n1 0\n0 0\n1\n",
            "DIFS n=2 2 1 1 -0.5\n1 0\n0 0\n1\n1\n",
            "DIFS n=2 2 1 2 0.5\n1 0\n0 0\n0 0\n0 0\n0.5 0.4\n0.5 0.5\n",
        ):
            with self.subTest(text=text), self.assertRaises(InvalidInputError):
                load_table_difs(io.StringIO(text))

    def test_target_outside_region(self):
        with self.assertRaises(RegionNotClosedError):
            load_table_difs(io.StringIO("DIFS n=2 2 1 1 0.5\n2 0\n0 0\n1\n1\n"))
