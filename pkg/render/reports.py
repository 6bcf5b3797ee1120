"""
Artifacts of the `render` command: render.ppm and, for generated
scenes, the scene table scene.difs.
"""

import io
import logging

from difs.orbits import ria_orbit
from difs.reports import default_start, load_system
from grid.lattice import LatticeRegion
from render.rasters import MeasureField, accumulate, tone_map
from render.scenes import Perturbation, SceneSpec, dump_table_difs, generate_scene

logger = logging.getLogger(__name__)


def scene_spec_from(options: dict, seed: int) -> SceneSpec:
    return SceneSpec(
        width=options['width'],
        height=options['height'],
        perturbations=tuple(
            Perturbation(tuple(p['amplitude']), tuple(p['frequency']), tuple(p['phase']))
            for p in options['perturbations']
        ),
        smoothing=options['smoothing'],
        probability_amplitude=options['probability_amplitude'],
        probability_frequency=options['probability_frequency'],
        seed=seed,
    )


def run_render(cfg, ctx):
    options = cfg.options
    if options.get('scene_spec') is not None:
        d = generate_scene(scene_spec_from(options['scene_spec'], cfg.seed))
        states = d.region
        buffer = io.StringIO()
        dump_table_difs(d, buffer)
        ctx.write_text('scene.difs', buffer.getvalue())
    else:
        d, states = load_system(cfg)

    window = options.get('window')
    if window is not None:
        window = LatticeRegion.box(window['lo'], window['hi'])
    else:
        window = LatticeRegion.box(states.lo, states.hi)

    x0 = default_start(cfg, d, states)
    orbit = ria_orbit(d, x0, options['steps'], cfg.seed, states)
    field = accumulate(MeasureField.empty(window), orbit, options.get('palette'), options['burn_in'])
    ctx.write_raster('render.ppm', tone_map(field, options.get('gamma')))

    ctx.note(
        f"rendered {field.total} visits into a {window.shape[0]}x{window.shape[1]} window "
        f"({field.dropped} outside)"
    )
    logger.info(f"Rendered {options['steps']} steps, peak count {field.max_count}")
