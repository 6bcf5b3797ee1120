"""
Artifacts of the `difs analyze` and `difs run` commands.
"""

import logging

import numpy as np

from affine.maps import fixed_point
from difs.chain import attractor_count_bound, classify, hyperbolic_difs, stationary
from difs.orbits import absorption_time, coupled_shadowing, ria_orbit, total_variation, visit_frequencies
from grid.lattice import roundoff_point
from PyDIFS.exceptions import BoundUnavailableError, BudgetExceededError, DimensionMismatchError, InvalidInputError
from render.scenes import load_table_difs, scene_start

logger = logging.getLogger(__name__)

CLASSES_HEADER = ['class', 'size', 'first_point']
STATIONARY_HEADER = ['class', 'point', 'probability']
MEASURE_HEADER = ['point', 'frequency']

ABSORPTION_STREAM = 1


def format_point(p) -> str:
    return ' '.join(str(int(v)) for v in p)


def scene_path(cfg):
    scene = cfg.options.get('scene')
    if scene:
        return scene
    if cfg.probability_type == 'table':
        return cfg.table_file
    return None


def load_system(cfg):
    """The DIFS of a run and its closed state set."""
    path = scene_path(cfg)
    if path:
        d = load_table_difs(path)
        return d, d.region
    origin = cfg.options.get('origin')
    if origin is not None and len(origin) != cfg.grid.n:
        raise DimensionMismatchError(f"difs.origin has {len(origin)} coordinates but grid.n is {cfg.grid.n}")
    return hyperbolic_difs(cfg.maps, cfg.grid, cfg.probabilities, origin)


def default_start(cfg, d, states):
    start = cfg.options.get('start')
    if d.affine_maps is None:
        return scene_start(d, start)
    if start is not None:
        return tuple(int(v) for v in start)
    centroid = np.mean([fixed_point(w) for w in d.affine_maps], axis=0)
    return roundoff_point(centroid, d.grid)


def run_analyze(cfg, ctx):
    d, states = load_system(cfg)
    ms = classify(d, states)

    class_rows, stationary_rows = [], []
    text = [
        f"states: {len(states)}",
        f"transient states: {int(ms.transient.size)}",
        f"recurrent classes: {ms.class_count}",
    ]
    for k in range(ms.class_count):
        pi = stationary(ms, k)
        points = ms.class_points(k)
        class_rows.append([k, len(pi.states), format_point(points[0])])
        stationary_rows.extend(
            [k, format_point(states.point(int(i))), repr(float(w))] for i, w in zip(pi.states, pi.weights)
        )
        text.append(f"class {k}: {len(pi.states)} states, {pi.method} solve, residual {pi.residual:.3e}")

    try:
        bound = attractor_count_bound(d, states)
        counts = ', '.join('-' if c is None else str(c) for c in bound.component_counts)
        text.append(f"attractor count bound: {bound.bound} (per map: {counts})")
        text.append(f"uniqueness criterion: {'met' if bound.unique else 'not met'}")
        text.append(f"bound respected: {'yes' if ms.class_count <= bound.bound else 'NO'}")
    except BoundUnavailableError as exc:
        text.append(f"attractor count bound: unavailable ({exc.message})")
    if ms.class_count > 1:
        text.append("stationary measures: any convex combination of the per-class measures is stationary")

    ctx.write_csv('classes.csv', CLASSES_HEADER, class_rows)
    ctx.write_csv('stationary.csv', STATIONARY_HEADER, stationary_rows)
    ctx.write_text('analysis.txt', '\n'.join(text) + '\n')
    ctx.note(f"{ms.class_count} recurrent classes over {len(states)} states")
    logger.info(f"Analyzed DIFS with {d.n_maps} maps: {ms.class_count} recurrent classes")


def run_orbit(cfg, ctx):
    options = cfg.options
    steps, burn_in = options['steps'], options['burn_in']
    if steps < 1:
        raise InvalidInputError("difs.steps must be positive for an orbit run")
    d, states = load_system(cfg)
    x0 = default_start(cfg, d, states)
    orbit = ria_orbit(d, x0, steps, cfg.seed, states)
    frequencies = visit_frequencies(orbit, states, burn_in)

    visited = np.flatnonzero(frequencies)
    ctx.write_csv(
        'measure.csv', MEASURE_HEADER,
        [[format_point(states.point(int(i))), repr(float(frequencies[i]))] for i in visited],
    )

    ms = classify(d, states)
    text = [
        f"start: {format_point(x0)}",
        f"steps: {steps}",
        f"burn-in: {burn_in}",
        f"distinct points visited: {visited.size}",
    ]
    try:
        entered = absorption_time(d, ms, x0, cfg.seed, max_steps=steps, stream=ABSORPTION_STREAM)
        text.append(f"absorption time: {entered}")
    except BudgetExceededError:
        text.append(f"absorption time: not reached within {steps} steps")

    final = ms.class_of[ms.state_index(orbit.point(orbit.steps))]
    if final >= 0:
        pi = stationary(ms, int(final))
        expected = np.zeros(len(states))
        expected[pi.states] = pi.weights
        distance = total_variation(frequencies, expected)
        text.append(f"final class: {int(final)} ({len(pi.states)} states)")
        text.append(f"total variation to its stationary distribution: {distance:.6g}")
        ctx.note(f"total variation {distance:.6g} against class {int(final)}")

    if d.affine_maps is not None:
        probabilities = d.probabilities.values.tolist()
        shadow = coupled_shadowing(d.affine_maps, probabilities, x0, steps, cfg.seed, d.grid)
        text.append(
            f"coupled exact orbit: max distance {shadow.max_distance:.6g}, bound {shadow.bound:.6g} "
            f"({'holds' if shadow.holds else 'VIOLATED'})"
        )

    ctx.write_text('orbit.txt', '\n'.join(text) + '\n')
    logger.info(f"Orbit of {steps} steps visited {visited.size} points")
