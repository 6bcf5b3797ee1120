"""
Artifacts of the `mas` command: minimal absorbing sets of single
contractions, their basin rasters and fixed point scans.
"""

import logging
from typing import List, Tuple

import numpy as np

from absorbing.services import fixed_point_scan, gallery_maps, mas_for_contraction
from affine.maps import AffineMap, contractivity, fixed_point
from grid.lattice import LatticeRegion
from PyDIFS.exceptions import InvalidInputError
from render.rasters import render_basins, scan_raster

logger = logging.getLogger(__name__)

MAS_HEADER = ['map', 'label', 'lambda', 'cardinality', 'components', 'singleton', 'region_points']
POINTS_HEADER = ['map', 'component', 'position', 'point']
SCAN_HEADER = ['i_x', 'i_y', 'offset_x', 'offset_y', 'cardinality', 'components']


def labelled_maps(cfg) -> List[Tuple[str, AffineMap]]:
    entries = [(f"map {k}", w) for k, w in enumerate(cfg.maps)]
    if cfg.options['gallery']:
        entries.extend(gallery_maps())
    return entries


def basin_window(mas, options) -> LatticeRegion:
    window = options.get('window')
    if window is not None:
        return LatticeRegion.box(window['lo'], window['hi'])
    margin = options['margin']
    return LatticeRegion.box(mas.region.lo - margin, mas.region.hi + margin)


def run_mas(cfg, ctx):
    g = cfg.grid
    options = cfg.options
    entries = labelled_maps(cfg)

    rows, point_rows, text = [], [], []
    for k, (label, w) in enumerate(entries):
        mas = mas_for_contraction(w, g)
        lam = contractivity(w, g.norm)
        rows.append([k, label, repr(lam), mas.cardinality, mas.component_count, int(mas.is_singleton), len(mas.region)])
        for c, component in enumerate(mas.components):
            for position, p in enumerate(component):
                point_rows.append([k, c, position, ' '.join(str(v) for v in p)])
        text.append(f"[{k}] {label}")
        text.append(f"fixed point: {fixed_point(w).tolist()}")
        text.append(mas.summary())
        text.append('')
        ctx.note(f"{label}: cardinality {mas.cardinality}, {mas.component_count} components")

        if options['basins'] and g.n == 2:
            ctx.write_raster(f"basins_{k}.ppm", render_basins(mas, basin_window(mas, options)))

    ctx.write_csv('mas.csv', MAS_HEADER, rows)
    ctx.write_csv('mas_points.csv', POINTS_HEADER, point_rows)
    ctx.write_text('mas.txt', '\n'.join(text))

    scan = options.get('scan')
    if scan is not None:
        if scan['map'] >= len(entries):
            raise InvalidInputError(f"mas.scan.map {scan['map']} out of range (0..{len(entries) - 1})")
        run_scan(entries[scan['map']][1], g, scan, ctx)
    logger.info(f"Analyzed {len(entries)} maps on the delta={g.delta} grid")


def run_scan(w: AffineMap, g, scan, ctx):
    cardinalities, counts = fixed_point_scan(w.matrix, g, scan['samples'], scan['extent'])
    offsets = np.linspace(-scan['extent'], scan['extent'], scan['samples'])
    rows = [
        [i, j, repr(float(offsets[i])), repr(float(offsets[j])), int(cardinalities[i, j]), int(counts[i, j])]
        for i in range(scan['samples'])
        for j in range(scan['samples'])
    ]
    ctx.write_csv('scan.csv', SCAN_HEADER, rows)
    ctx.write_raster('scan.pgm', scan_raster(cardinalities))
    ctx.note(f"fixed point scan: {int(np.sum(cardinalities > 1))} of {cardinalities.size} positions non-singleton")
