import io
import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from PyDIFS.exceptions import ArtifactReadError, ConfigValidationError
from runs.services import execute, parse_config

SQRT3_2 = math.sqrt(3.0) / 2.0
HALF = [[0.5, 0.0], [0.0, 0.5]]
SWAP_TABLE = "DIFS n=2 2 1 1 0.5\n1 0\n0 0\n1\n1\n"


def sierpinski_config(command='verify', delta=1.0 / 128.0, **blocks):
    config = {
        'command': command,
        'grid': {'n': 2, 'delta': delta},
        'maps': [
            {'matrix': HALF, 'fixed_point': [0.0, 0.0]},
            {'matrix': HALF, 'fixed_point': [1.0, 0.0]},
            {'matrix': HALF, 'fixed_point': [0.5, SQRT3_2]},
        ],
        'probabilities': {'type': 'constant', 'values': [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]},
    }
    config.update(blocks)
    return config


class TempDirMixin:
    def setUp(self):
        super().setUp()
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def write_config(self, config, name='config.json'):
        path = self.tmp / name
        path.write_text(json.dumps(config), encoding='utf-8')
        return str(path)

    def write_swap_table(self):
        path = self.tmp / 'swap.difs'
        path.write_text(SWAP_TABLE, encoding='utf-8')
        return str(path)


class ParseConfigTestCase(TempDirMixin, SimpleTestCase):
    """Test cases for loading and validating run configurations."""

    def test_minimal_sierpinski_config(self):
        cfg = parse_config(self.write_config(sierpinski_config()))
        self.assertEqual(cfg.command, 'verify')
        self.assertEqual(cfg.seed, 0)
        self.assertEqual(cfg.grid.delta, 1.0 / 128.0)
        self.assertEqual(cfg.grid.norm, 'euclidean')
        self.assertEqual(len(cfg.maps), 3)
        np.testing.assert_allclose(cfg.maps[1].translation, [0.5, 0.0])
        self.assertEqual(cfg.probabilities, [1.0 / 3.0] * 3)
        self.assertEqual(cfg.options['deltas'], [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0])
        self.assertEqual(cfg.echo['verify']['checks'], ['hausdorff', 'weak'])
        self.assertEqual(cfg.echo['render']['steps'], 1000000)

    def test_translation_form(self):
        config = sierpinski_config()
        config['maps'][0] = {'matrix': HALF, 'translation': [0.25, 0.0]}
        cfg = parse_config(self.write_config(config))
        np.testing.assert_allclose(cfg.maps[0].translation, [0.25, 0.0])

    def test_negative_delta(self):
        config = sierpinski_config()
        config['grid']['delta'] = -0.01
        with self.assertRaises(ConfigValidationError) as raised:
            parse_config(self.write_config(config))
        self.assertIn('grid.delta', raised.exception.field_errors)

    def test_probabilities_not_normalized(self):
        config = sierpinski_config()
        config['probabilities']['values'] = [0.5, 0.5, 0.1]
        with self.assertRaises(ConfigValidationError) as raised:
            parse_config(self.write_config(config))
        self.assertIn('probabilities.values', raised.exception.field_errors)

    def test_probability_count(self):
        config = sierpinski_config()
        config['probabilities']['values'] = [0.5, 0.5]
        with self.assertRaises(ConfigValidationError) as raised:
            parse_config(self.write_config(config))
        self.assertIn('probabilities.values', raised.exception.field_errors)

    def test_unknown_keys_rejected(self):
        config = sierpinski_config()
        config['colour'] = 'red'
        config['grid']['size'] = 3
        with self.assertRaises(ConfigValidationError) as raised:
            parse_config(self.write_config(config))
        self.assertIn('colour', raised.exception.field_errors)
        self.assertIn('grid.size', raised.exception.field_errors)

    def test_both_offsets_rejected(self):
        config = sierpinski_config()
        config['maps'][2]['translation'] = [0.0, 0.0]
        with self.assertRaises(ConfigValidationError) as raised:
            parse_config(self.write_config(config))
        self.assertIn('maps.2.translation', raised.exception.field_errors)

    def test_expanding_map_rejected(self):
        config = sierpinski_config()
        config['maps'][0]['matrix'] = [[1.2, 0.0], [0.0, 0.5]]
        with self.assertRaises(ConfigValidationError) as raised:
            parse_config(self.write_config(config))
        self.assertIn('maps.0.matrix', raised.exception.field_errors)

    def test_dimension_mismatch(self):
        config = sierpinski_config()
        config['grid']['n'] = 3
        with self.assertRaises(ConfigValidationError) as raised:
            parse_config(self.write_config(config))
        self.assertIn('maps.0.matrix', raised.exception.field_errors)

    def test_overrides(self):
        path = self.write_config(sierpinski_config())
        cfg = parse_config(path, {'grid.delta': 0.25, 'seed': 42, 'verify.elton_steps': None})
        self.assertEqual(cfg.grid.delta, 0.25)
        self.assertEqual(cfg.seed, 42)
        self.assertIsNone(cfg.options['elton_steps'])

    def test_command_mismatch(self):
        with self.assertRaises(ConfigValidationError) as raised:
            parse_config(self.write_config(sierpinski_config()), command='mas')
        self.assertIn('command', raised.exception.field_errors)

    def test_flags_without_file(self):
        cfg = parse_config(None, {'stats.samples_per_point': 10}, command='stats')
        self.assertEqual(cfg.options['samples_per_point'], 10)
        self.assertEqual(cfg.options['kinds'], ['affine', 'similarity'])
        self.assertTrue(str(cfg.out).endswith('stats'))

    def test_missing_file(self):
        with self.assertRaises(ArtifactReadError):
            parse_config(str(self.tmp / 'absent.json'))

    def test_malformed_json(self):
        path = self.tmp / 'broken.json'
        path.write_text('{"command": ', encoding='utf-8')
        with self.assertRaises(ConfigValidationError):
            parse_config(str(path))

    def test_verify_needs_constant_probabilities(self):
        config = sierpinski_config(probabilities={'type': 'table', 'file': 'scene.difs'})
        with self.assertRaises(ConfigValidationError) as raised:
            parse_config(self.write_config(config))
        self.assertIn('probabilities.type', raised.exception.field_errors)


class ExecuteTestCase(TempDirMixin, SimpleTestCase):
    """Test cases for run dispatch and artifacts."""

    def run_config(self, config, out):
        config = dict(config, out=str(self.tmp / out))
        return execute(parse_config(self.write_config(config, f"{out}.json")))

    def test_swap_table_analysis(self):
        config = {'command': 'difs-analyze', 'difs': {'scene': self.write_swap_table()}}
        ctx = self.run_config(config, 'swap')
        self.assertEqual(
            (ctx.out / 'stationary.csv').read_text(encoding='utf-8'),
            "class,point,probability\n0,0 0,0.5\n0,1 0,0.5\n",
        )
        self.assertEqual((ctx.out / 'classes.csv').read_text(encoding='utf-8'), "class,size,first_point\n0,2,0 0\n")
        analysis = (ctx.out / 'analysis.txt').read_text(encoding='utf-8')
        self.assertIn('recurrent classes: 1', analysis)
        self.assertIn('bound respected: yes', analysis)
        self.assertEqual(ctx.artifacts, ['classes.csv', 'stationary.csv', 'analysis.txt', 'manifest.txt'])

    def test_manifest(self):
        ctx = self.run_config(sierpinski_config('difs-run', 1.0 / 16.0, difs={'steps': 2000}), 'manifest')
        manifest = (ctx.out / 'manifest.txt').read_text(encoding='utf-8')
        self.assertIn('command: difs-run', manifest)
        self.assertIn('seed: 0', manifest)
        self.assertIn('version numpy:', manifest)
        self.assertIn('  measure.csv', manifest)
        self.assertIn('"burn_in": 0', manifest)

    def test_orbit_run_report(self):
        ctx = self.run_config(sierpinski_config('difs-run', 1.0 / 16.0, difs={'steps': 20000, 'burn_in': 100}), 'orbit')
        orbit = (ctx.out / 'orbit.txt').read_text(encoding='utf-8')
        self.assertIn('total variation to its stationary distribution', orbit)
        self.assertIn('(holds)', orbit)
        lines = (ctx.out / 'measure.csv').read_text(encoding='utf-8').splitlines()
        self.assertEqual(lines[0], 'point,frequency')
        self.assertAlmostEqual(sum(float(line.split(',')[1]) for line in lines[1:]), 1.0, places=9)

    def test_identical_configs_give_identical_artifacts(self):
        configs = {
            'difs-run': sierpinski_config('difs-run', 1.0 / 16.0, difs={'steps': 5000}),
            'mas': {
                'command': 'mas',
                'grid': {'delta': 0.1},
                'maps': [{'matrix': [[0.54, -0.3], [0.3, 0.54]], 'fixed_point': [0.013, -0.021]}],
                'mas': {'scan': {'samples': 5}},
            },
            'render': sierpinski_config('render', 1.0 / 32.0, render={'steps': 5000, 'burn_in': 10}),
        }
        for command, config in configs.items():
            with self.subTest(command=command):
                first = self.run_config(config, f"{command}-a")
                second = self.run_config(config, f"{command}-b")
                self.assertEqual(first.artifacts, second.artifacts)
                for name in first.artifacts:
                    if name == 'manifest.txt':
                        continue
                    self.assertEqual((first.out / name).read_bytes(), (second.out / name).read_bytes(), name)

    def test_sweep_bytes_do_not_depend_on_threads(self):
        config = {
            'command': 'stats',
            'stats': {'kinds': ['affine'], 'parameters': [0.5, 0.9], 'samples_per_point': 40, 'chunk_size': 10},
        }
        serial = self.run_config(dict(config, threads=1), 'serial')
        pooled = self.run_config(dict(config, threads=2), 'pooled')
        self.assertEqual((serial.out / 'sweep.csv').read_bytes(), (pooled.out / 'sweep.csv').read_bytes())

    def test_generated_scene_render(self):
        config = {
            'command': 'render',
            'render': {
                'scene_spec': {'width': 33, 'height': 33, 'perturbations': [{'amplitude': [1.5, 1.5]}]},
                'steps': 4000,
                'burn_in': 100,
            },
        }
        ctx = self.run_config(config, 'scene')
        self.assertEqual(ctx.artifacts, ['scene.difs', 'render.ppm', 'manifest.txt'])
        self.assertTrue((ctx.out / 'render.ppm').read_bytes().startswith(b'P6\n33 33\n255\n'))
        self.assertTrue((ctx.out / 'scene.difs').read_text(encoding='utf-8').startswith('DIFS n=2 33 33 3 '))


class CommandExitCodeTestCase(TempDirMixin, SimpleTestCase):
    """Test cases for the exit status contract of the management commands."""

    def call(self, name, *args):
        stdout = io.StringIO()
        call_command(name, *args, stdout=stdout)
        return stdout.getvalue()

    def mas_config(self, scale=0.6):
        return {
            'command': 'mas',
            'grid': {'delta': 0.1},
            'maps': [{'matrix': [[scale, 0.0], [0.0, scale]], 'fixed_point': [0.0, 0.0]}],
        }

    def test_success(self):
        output = self.call('mas', '--config', self.write_config(self.mas_config()), '--out', str(self.tmp / 'ok'))
        self.assertIn('mas finished', output)
        self.assertTrue((self.tmp / 'ok' / 'basins_0.ppm').exists())

    def test_input_error(self):
        config = self.mas_config()
        config['grid']['delta'] = -1.0
        with self.assertRaises(CommandError) as raised:
            self.call('mas', '--config', self.write_config(config), '--out', str(self.tmp / 'bad'))
        self.assertEqual(raised.exception.returncode, 1)
        self.assertIn('grid.delta', str(raised.exception))

    @override_settings(DIFS_SETTINGS={'MAX_TRAP_RADIUS_CELLS': 1})
    def test_budget_error(self):
        with self.assertRaises(CommandError) as raised:
            self.call('mas', '--config', self.write_config(self.mas_config(0.9)), '--out', str(self.tmp / 'budget'))
        self.assertEqual(raised.exception.returncode, 2)

    @override_settings(DIFS_SETTINGS={'STATIONARY_DIRECT_LIMIT': 0, 'STATIONARY_MAX_ITERATIONS': 1})
    def test_convergence_error(self):
        path = self.write_config(sierpinski_config('difs-analyze', 1.0 / 16.0))
        with self.assertRaises(CommandError) as raised:
            self.call('difs', 'analyze', '--config', path, '--out', str(self.tmp / 'stuck'))
        self.assertEqual(raised.exception.returncode, 3)

    def test_io_error(self):
        blocker = self.tmp / 'blocker'
        blocker.write_text('not a directory', encoding='utf-8')
        with self.assertRaises(CommandError) as raised:
            self.call('mas', '--config', self.write_config(self.mas_config()), '--out', str(blocker / 'run'))
        self.assertEqual(raised.exception.returncode, 4)

    def test_difs_subcommand_flags(self):
        out = self.tmp / 'swap'
        self.call('difs', 'run', '--scene', self.write_swap_table(), '--steps', '10', '--out', str(out))
        self.assertEqual(
            (out / 'measure.csv').read_text(encoding='utf-8'),
            "point,frequency\n0 0,0.5\n1 0,0.5\n",
        )

    def test_verify_flags(self):
        path = self.write_config(sierpinski_config())
        out = self.tmp / 'verify'
        self.call(
            'verify', '--config', path, '--deltas', '1/8,1/16', '--functions', 'one',
            '--elton-steps', '2000', '--threads', '1', '--out', str(out),
        )
        rows = (out / 'verify.csv').read_text(encoding='utf-8').splitlines()
        self.assertEqual(rows[0], 'delta,function,hausdorff,bound,resolution,value,reference,stderr,gap,tolerance')
        self.assertEqual([row.split(',')[:2] for row in rows[1:]], [['0.125', 'one'], ['0.0625', 'one']])
        summary = (out / 'verify.txt').read_text(encoding='utf-8')
        self.assertIn('PASS hausdorff bound', summary)
        self.assertIn('PASS weak convergence of one', summary)
