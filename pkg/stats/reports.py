"""
Artifacts of the `stats` command: sweep.csv and trend.txt.
"""

import logging

from stats.sweeps import (
    CSV_HEADER,
    DEFAULT_DISTANCE_GRID,
    DEFAULT_LAMBDA_GRID,
    DISTANCE_SWEEP,
    SweepConfig,
    expected_components_summary,
    run_sweep,
    sweep_rows,
)

logger = logging.getLogger(__name__)


def sweep_configs(cfg):
    options = cfg.options
    conditioning = options['conditioning']
    if options.get('parameters'):
        grid = tuple(options['parameters'])
    else:
        grid = DEFAULT_DISTANCE_GRID if conditioning == DISTANCE_SWEEP else DEFAULT_LAMBDA_GRID
    return [
        SweepConfig(
            kind=kind,
            conditioning=conditioning,
            parameter_grid=grid,
            samples_per_point=options['samples_per_point'],
            lambda_cap_for_distance_sweep=options['lambda_cap'],
            contractivity_cap=options['lambda_cap'],
            seed=cfg.seed,
        )
        for kind in options['kinds']
    ]


def trend_lines(result):
    sweep = result.config
    if sweep.conditioning == DISTANCE_SWEEP:
        return [expected_components_summary(result).as_text(sweep.kind)]
    last = result.points[-1]
    return [
        f"{sweep.kind}: P(cardinality > 1 | max(lambda_1, lambda_2) <= {last.param:g}) = "
        f"{last.p_nonsingleton:.6f} +- {last.se_nonsingleton:.6f}",
        f"{sweep.kind}: E(components | max(lambda_1, lambda_2) <= {last.param:g}) = "
        f"{last.expected_components:.6f} +- {last.se_components:.6f}",
    ]


def run_stats(cfg, ctx):
    rows, text = [], []
    for sweep in sweep_configs(cfg):
        result = run_sweep(sweep, n_jobs=cfg.n_jobs, chunk_size=cfg.options['chunk_size'])
        rows.extend(sweep_rows(result))
        lines = trend_lines(result)
        text.extend(lines)
        for line in lines:
            ctx.note(line)
    ctx.write_csv('sweep.csv', CSV_HEADER, rows)
    ctx.write_text('trend.txt', '\n'.join(text) + '\n')
    logger.info(f"Wrote {len(rows)} sweep rows")
