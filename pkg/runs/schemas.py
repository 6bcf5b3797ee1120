"""
Run configuration schemas.

A run configuration is a JSON object with the keys

    command, seed, threads, out, grid{n, delta, norm},
    maps[{matrix, translation | fixed_point}],
    probabilities{type: uniform | constant | table, values | file},
    and one block per command (mas, stats, difs, render, verify).

Unknown keys are rejected; missing optional keys take the defaults below,
and the fully populated configuration is echoed in the run manifest.
"""

import logging
import math

import numpy as np
from marshmallow import (
    RAISE,
    Schema,
    ValidationError,
    fields,
    pre_load,
    validate,
    validates,
    validates_schema,
)

from affine.maps import AffineMap, contractivity
from affine.sampling import KINDS
from grid.lattice import NORMS
from stats.sweeps import CONDITIONINGS, LAMBDA_CAP_SWEEP
from verify.convergence import NAMED_FUNCTIONS

logger = logging.getLogger(__name__)

COMMANDS = ('mas', 'stats', 'difs-analyze', 'difs-run', 'render', 'verify')
PROBABILITY_TYPES = ('uniform', 'constant', 'table')
CHECKS = ('hausdorff', 'weak')

# Commands whose maps must be contractions
CONTRACTION_COMMANDS = ('mas', 'difs-analyze', 'difs-run', 'render', 'verify')

PROBABILITY_SUM_TOLERANCE = 1e-9

POSITIVE = validate.Range(min=0.0, min_inclusive=False)
NON_NEGATIVE_INT = validate.Range(min=0)
POSITIVE_INT = validate.Range(min=1)


class StrictSchema(Schema):
    class Meta:
        unknown = RAISE


class GridSchema(StrictSchema):
    n = fields.Integer(strict=True, load_default=2, validate=POSITIVE_INT)
    delta = fields.Float(required=True, allow_nan=False, validate=POSITIVE)
    norm = fields.String(load_default='euclidean', validate=validate.OneOf(NORMS))


class MapSchema(StrictSchema):
    matrix = fields.List(fields.List(fields.Float(allow_nan=False)), required=True)
    translation = fields.List(fields.Float(allow_nan=False), load_default=None)
    fixed_point = fields.List(fields.Float(allow_nan=False), load_default=None)

    @validates('matrix')
    def validate_matrix(self, value, **kwargs):
        size = len(value)
        if size == 0 or any(len(row) != size for row in value):
            raise ValidationError("matrix must be square and non-empty")

    @validates_schema
    def validate_offset(self, data, **kwargs):
        """
        Exactly one of translation and fixed_point, sized like the matrix.
        """
        translation, fixed = data.get('translation'), data.get('fixed_point')
        if (translation is None) == (fixed is None):
            raise ValidationError("give exactly one of translation or fixed_point", 'translation')
        given = translation if translation is not None else fixed
        name = 'translation' if translation is not None else 'fixed_point'
        if len(given) != len(data['matrix']):
            raise ValidationError(f"{name} must have {len(data['matrix'])} entries", name)


class ProbabilitySchema(StrictSchema):
    type = fields.String(load_default='uniform', validate=validate.OneOf(PROBABILITY_TYPES))
    values = fields.List(fields.Float(allow_nan=False), load_default=None)
    file = fields.String(load_default=None)

    @validates_schema
    def validate_values(self, data, **kwargs):
        kind = data['type']
        if kind == 'constant':
            values = data.get('values')
            if not values:
                raise ValidationError("constant probabilities need values", 'values')
            if any(not math.isfinite(v) or v <= 0.0 for v in values):
                raise ValidationError("probabilities must be strictly positive", 'values')
            total = math.fsum(values)
            if abs(total - 1.0) > PROBABILITY_SUM_TOLERANCE:
                raise ValidationError(f"probabilities must sum to 1 within 1e-9, got {total!r}", 'values')
        if kind == 'table' and not data.get('file'):
            raise ValidationError("table probabilities come from a scene file", 'file')


class WindowSchema(StrictSchema):
    lo = fields.List(fields.Integer(strict=True), required=True)
    hi = fields.List(fields.Integer(strict=True), required=True)

    @validates_schema
    def validate_corners(self, data, **kwargs):
        if len(data['lo']) != len(data['hi']):
            raise ValidationError("window corners must have the same dimension", 'hi')
        if any(h < l for l, h in zip(data['lo'], data['hi'])):
            raise ValidationError("window is empty", 'hi')


class ScanSchema(StrictSchema):
    map = fields.Integer(strict=True, load_default=0, validate=NON_NEGATIVE_INT)
    samples = fields.Integer(strict=True, load_default=41, validate=POSITIVE_INT)
    extent = fields.Float(load_default=0.4, validate=validate.Range(min=0.0, max=0.5))


class MasOptionsSchema(StrictSchema):
    gallery = fields.Boolean(load_default=False)
    window = fields.Nested(WindowSchema, load_default=None)
    margin = fields.Integer(strict=True, load_default=10, validate=NON_NEGATIVE_INT)
    basins = fields.Boolean(load_default=True)
    scan = fields.Nested(ScanSchema, load_default=None)


class StatsOptionsSchema(StrictSchema):
    kinds = fields.List(fields.String(validate=validate.OneOf(KINDS)), load_default=lambda: list(KINDS))
    conditioning = fields.String(load_default=LAMBDA_CAP_SWEEP, validate=validate.OneOf(CONDITIONINGS))
    parameters = fields.List(fields.Float(allow_nan=False), load_default=None)
    samples_per_point = fields.Integer(strict=True, load_default=20000, validate=POSITIVE_INT)
    lambda_cap = fields.Float(load_default=0.95, validate=validate.Range(min=0.0, max=1.0, min_inclusive=False))
    chunk_size = fields.Integer(strict=True, load_default=500, validate=POSITIVE_INT)


class PerturbationSchema(StrictSchema):
    amplitude = fields.List(fields.Float(allow_nan=False), load_default=lambda: [0.0, 0.0],
                            validate=validate.Length(equal=2))
    frequency = fields.List(fields.Float(allow_nan=False), load_default=lambda: [1.0, 1.0],
                            validate=validate.Length(equal=2))
    phase = fields.List(fields.Float(allow_nan=False), load_default=lambda: [0.0, 0.0],
                        validate=validate.Length(equal=2))


class SceneSchema(StrictSchema):
    width = fields.Integer(strict=True, load_default=1000, validate=validate.Range(min=2))
    height = fields.Integer(strict=True, load_default=1000, validate=validate.Range(min=2))
    perturbations = fields.List(fields.Nested(PerturbationSchema), load_default=list)
    smoothing = fields.Boolean(load_default=True)
    probability_amplitude = fields.Float(load_default=0.3, validate=validate.Range(min=0.0, max=1.0, max_inclusive=False))
    probability_frequency = fields.Float(load_default=2.0, allow_nan=False)


class DifsOptionsSchema(StrictSchema):
    scene = fields.String(load_default=None)
    start = fields.List(fields.Integer(strict=True), load_default=None)
    steps = fields.Integer(strict=True, load_default=100000, validate=NON_NEGATIVE_INT)
    burn_in = fields.Integer(strict=True, load_default=0, validate=NON_NEGATIVE_INT)
    origin = fields.List(fields.Float(allow_nan=False), load_default=None)

    @validates_schema
    def validate_burn_in(self, data, **kwargs):
        if data['steps'] and data['burn_in'] >= data['steps']:
            raise ValidationError("burn_in must be smaller than steps", 'burn_in')


class RenderOptionsSchema(StrictSchema):
    scene = fields.String(load_default=None)
    scene_spec = fields.Nested(SceneSchema, load_default=None)
    start = fields.List(fields.Integer(strict=True), load_default=None)
    steps = fields.Integer(strict=True, load_default=1000000, validate=POSITIVE_INT)
    burn_in = fields.Integer(strict=True, load_default=1000, validate=NON_NEGATIVE_INT)
    gamma = fields.Float(load_default=None, allow_nan=False, validate=POSITIVE)
    palette = fields.List(
        fields.List(fields.Float(validate=validate.Range(min=0.0, max=255.0)), validate=validate.Length(equal=3)),
        load_default=None,
        validate=validate.Length(min=1),
    )
    window = fields.Nested(WindowSchema, load_default=None)

    @validates_schema
    def validate_burn_in(self, data, **kwargs):
        if data['burn_in'] >= data['steps']:
            raise ValidationError("burn_in must be smaller than steps", 'burn_in')
        if data.get('scene') and data.get('scene_spec'):
            raise ValidationError("give either scene or scene_spec", 'scene_spec')


class VerifyOptionsSchema(StrictSchema):
    checks = fields.List(fields.String(validate=validate.OneOf(CHECKS)), load_default=lambda: list(CHECKS))
    deltas = fields.List(
        fields.Float(allow_nan=False, validate=POSITIVE),
        load_default=lambda: [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0],
        validate=validate.Length(min=1),
    )
    functions = fields.List(fields.String(), load_default=lambda: ['one', 'x', 'y', 'r2'])
    elton_steps = fields.Integer(strict=True, load_default=None, validate=POSITIVE_INT)
    depth = fields.Integer(strict=True, load_default=None, validate=NON_NEGATIVE_INT)

    @validates('functions')
    def validate_functions(self, value, **kwargs):
        unknown = [name for name in value if name not in NAMED_FUNCTIONS]
        if unknown:
            raise ValidationError(f"unknown test functions {unknown}; expected {sorted(NAMED_FUNCTIONS)}")


class RunConfigSchema(StrictSchema):
    command = fields.String(required=True, validate=validate.OneOf(COMMANDS))
    seed = fields.Integer(strict=True, load_default=0, validate=validate.Range(min=0, max=2 ** 64 - 1))
    threads = fields.Integer(strict=True, load_default=None, allow_none=True, validate=validate.Range(min=-1))
    out = fields.String(load_default=None, allow_none=True)
    grid = fields.Nested(GridSchema, load_default=None)
    maps = fields.List(fields.Nested(MapSchema), load_default=list)
    probabilities = fields.Nested(ProbabilitySchema)
    mas = fields.Nested(MasOptionsSchema)
    stats = fields.Nested(StatsOptionsSchema)
    difs = fields.Nested(DifsOptionsSchema)
    render = fields.Nested(RenderOptionsSchema)
    verify = fields.Nested(VerifyOptionsSchema)

    @pre_load
    def fill_blocks(self, data, **kwargs):
        """Missing option blocks load as empty objects so their defaults apply."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        for block in ('probabilities', 'mas', 'stats', 'difs', 'render', 'verify'):
            if data.get(block) is None:
                data[block] = {}
        return data

    @validates('threads')
    def validate_threads(self, value, **kwargs):
        if value == 0:
            raise ValidationError("threads must be positive or -1 for all cores")

    @validates_schema
    def validate_system(self, data, **kwargs):
        """
        Cross-field checks: map dimensions against the grid, probability
        counts against the map count, contraction factors where required.
        """
        command = data['command']
        grid, maps = data.get('grid'), data.get('maps') or []
        scene = (data.get('difs') or {}).get('scene') or (data.get('render') or {}).get('scene')
        table = data['probabilities']['type'] == 'table' or scene is not None
        scene_spec = command == 'render' and (data.get('render') or {}).get('scene_spec') is not None
        errors = {}

        needs_maps = command in ('difs-analyze', 'difs-run', 'verify') or (command == 'render' and not scene_spec)
        if needs_maps and not table and not maps:
            errors['maps'] = ["this command needs at least one map"]
        if command == 'mas' and not maps and not data['mas']['gallery']:
            errors['maps'] = ["give maps or enable mas.gallery"]
        if grid is None and (command == 'mas' or (maps and command != 'stats')):
            errors['grid'] = ["a grid is required for this command"]
        for k, entry in enumerate(maps):
            size = len(entry['matrix'])
            if grid is not None and size != grid['n']:
                errors.setdefault('maps', {}).setdefault(k, {})['matrix'] = [
                    f"map has dimension {size} but grid.n is {grid['n']}"
                ]
            elif command in CONTRACTION_COMMANDS:
                lam = contractivity(AffineMap(entry['matrix'], np.zeros(size)), grid['norm'] if grid else 'euclidean')
                if lam >= 1.0:
                    errors.setdefault('maps', {}).setdefault(k, {})['matrix'] = [
                        f"map is not a contraction (contractivity {lam:.6g})"
                    ]

        values = data['probabilities'].get('values')
        if data['probabilities']['type'] == 'constant' and values and maps and len(values) != len(maps):
            errors.setdefault('probabilities', {})['values'] = [
                f"{len(values)} probabilities for {len(maps)} maps"
            ]
        if command == 'verify' and table:
            errors.setdefault('probabilities', {})['type'] = ["verification needs constant probabilities"]
        if errors:
            raise ValidationError(errors)


def flatten_errors(messages, prefix: str = '') -> dict:
    """Flatten marshmallow's nested error dict into {'grid.delta': [...]}."""
    flat = {}
    if isinstance(messages, dict):
        for key, value in messages.items():
            path = f"{prefix}.{key}" if prefix else str(key)
            if key == '_schema':
                path = prefix or '<root>'
            flat.update(flatten_errors(value, path))
    elif isinstance(messages, list) and messages and all(isinstance(m, str) for m in messages):
        flat.setdefault(prefix or '<root>', []).extend(messages)
    elif isinstance(messages, list):
        for item in messages:
            flat.update(flatten_errors(item, prefix))
    else:
        flat.setdefault(prefix or '<root>', []).append(str(messages))
    return flat
