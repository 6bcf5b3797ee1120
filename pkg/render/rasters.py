"""
Raster output for basins and stationary measures.

Fields are indexed by grid offset (axis 0 = m1, axis 1 = m2) while they
are accumulated; conversion to image order puts m1 along the columns and
the largest m2 in the top row.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from absorbing.services import MinimalAbsorbingSet, basin_image
from difs.orbits import OrbitRecord
from grid.lattice import LatticeRegion
from PyDIFS.conf import difs_setting
from PyDIFS.exceptions import ArtifactWriteError, InvalidInputError, UnsupportedDimensionError

logger = logging.getLogger(__name__)

PGM = 'PGM'
PPM = 'PPM'
FORMATS = (PGM, PPM)

BLACK = (0, 0, 0)
HIGHLIGHT = (255, 255, 255)

# Distinct hues for map indices and basin labels; reused cyclically
DEFAULT_PALETTE = (
    (230, 57, 70),
    (69, 123, 157),
    (244, 162, 97),
    (42, 157, 143),
    (168, 218, 220),
    (233, 196, 106),
    (131, 56, 236),
    (255, 0, 110),
)


def palette_array(palette: Optional[Sequence[Sequence[float]]]) -> np.ndarray:
    colors = np.asarray(palette if palette is not None else DEFAULT_PALETTE, dtype=np.float64)
    if colors.ndim != 2 or colors.shape[1] != 3 or colors.shape[0] == 0:
        raise InvalidInputError(f"palette must be a non-empty list of RGB triples, got shape {colors.shape}")
    if np.any(colors < 0.0) or np.any(colors > 255.0):
        raise InvalidInputError("palette channels must lie in [0, 255]")
    return colors


def to_image_order(field: np.ndarray) -> np.ndarray:
    """Reorder an [m1, m2, ...] array into image rows (top row = largest m2)."""
    return np.ascontiguousarray(np.flip(np.swapaxes(field, 0, 1), axis=0))


def check_planar(window: LatticeRegion):
    if window.n != 2:
        raise UnsupportedDimensionError(f"rasters need a planar window, got n={window.n}")


@dataclass
class MeasureField:
    """
    Per-pixel visit counts and colors over a rectangular window.

    colors start black and move halfway towards the color of the map that
    produced each visit.
    """
    window: LatticeRegion
    counts: np.ndarray
    colors: np.ndarray
    total: int = 0
    dropped: int = 0

    @classmethod
    def empty(cls, window: LatticeRegion) -> 'MeasureField':
        check_planar(window)
        if not window.is_box:
            raise InvalidInputError("a measure field needs a rectangular window")
        return cls(
            window=window,
            counts=np.zeros(window.shape, dtype=np.int64),
            colors=np.zeros(window.shape + (3,), dtype=np.float64),
        )

    @property
    def max_count(self) -> int:
        return int(self.counts.max()) if self.counts.size else 0

    def copy(self) -> 'MeasureField':
        return MeasureField(
            window=self.window,
            counts=self.counts.copy(),
            colors=self.colors.copy(),
            total=self.total,
            dropped=self.dropped,
        )

    def frequencies(self) -> np.ndarray:
        """Counts normalized to a probability over the window (zeros when empty)."""
        if self.total == 0:
            return np.zeros(self.counts.shape, dtype=np.float64)
        return self.counts / float(self.total)


def accumulate(
    field: MeasureField,
    orbit: OrbitRecord,
    palette: Optional[Sequence[Sequence[float]]] = None,
    burn_in: int = 0,
) -> MeasureField:
    """
    Add the visits x~_{burn_in+1}..x~_M of an orbit to a copy of field.

    A pixel visited k times with map colors c_1..c_k ends at
    old / 2^k + sum_j c_j / 2^(k-j+1); visits outside the window are
    counted as dropped.
    """
    if not 0 <= burn_in <= orbit.steps:
        raise InvalidInputError(f"burn_in must lie in [0, {orbit.steps}], got {burn_in}")
    colors = palette_array(palette)
    result = field.copy()
    points = orbit.points[burn_in + 1:]
    maps = orbit.indices[burn_in:]
    if points.shape[0] == 0:
        return result

    offsets = points - result.window.lo
    inside = np.all((offsets >= 0) & (offsets < np.asarray(result.window.shape)), axis=1)
    dropped = int(points.shape[0] - np.count_nonzero(inside))
    offsets = offsets[inside]
    visit_colors = colors[maps[inside] % colors.shape[0]]

    if offsets.shape[0]:
        flat = np.ravel_multi_index(tuple(offsets.T), result.window.shape)
        order = np.argsort(flat, kind='stable')
        flat = flat[order]
        visit_colors = visit_colors[order]
        starts = np.concatenate(([0], np.flatnonzero(np.diff(flat)) + 1))
        sizes = np.diff(np.concatenate((starts, [flat.size])))
        group = np.repeat(np.arange(starts.size), sizes)
        later = sizes[group] - 1 - (np.arange(flat.size) - starts[group])
        weights = np.ldexp(1.0, -(later + 1).astype(np.int32))
        blended = np.add.reduceat(visit_colors * weights[:, None], starts, axis=0)

        pixels = flat[starts]
        counts = result.counts.reshape(-1)
        pixel_colors = result.colors.reshape(-1, 3)
        counts[pixels] += sizes
        pixel_colors[pixels] = pixel_colors[pixels] * np.ldexp(1.0, -sizes.astype(np.int32))[:, None] + blended

    result.total += int(offsets.shape[0])
    result.dropped += dropped
    if dropped:
        logger.debug(f"{dropped} orbit points fell outside the render window")
    return result


def tone_map(field: MeasureField, gamma: Optional[float] = None) -> np.ndarray:
    """
    RGB raster with brightness (count / max_count)^gamma applied to each
    pixel's accumulated color. An empty field gives a black raster.
    """
    gamma = difs_setting('DEFAULT_GAMMA') if gamma is None else float(gamma)
    if not gamma > 0.0:
        raise InvalidInputError(f"gamma must be positive, got {gamma}")
    peak = field.max_count
    if field.total == 0 or peak == 0:
        return to_image_order(np.zeros(field.colors.shape, dtype=np.uint8))
    brightness = np.power(field.counts / float(peak), gamma)
    pixels = np.clip(np.rint(field.colors * brightness[..., None]), 0.0, 255.0).astype(np.uint8)
    return to_image_order(pixels)


def render_basins(
    mas: MinimalAbsorbingSet,
    window: LatticeRegion,
    palette: Optional[Sequence[Sequence[float]]] = None,
    highlight: Sequence[int] = HIGHLIGHT,
) -> np.ndarray:
    """
    RGB raster coloring every window point by the basin it drains into.

    Colors repeat when there are more components than palette entries.
    Points of the minimal absorbing set are drawn in the highlight color;
    cells of a non-box window that are not members stay black.
    """
    check_planar(window)
    colors = palette_array(palette)
    if mas.component_count > colors.shape[0]:
        logger.warning(
            f"{mas.component_count} basins share a palette of {colors.shape[0]} colors; colors repeat"
        )
    labels = basin_image(mas, window)
    pixels = np.zeros(labels.shape + (3,), dtype=np.uint8)
    labeled = labels >= 0
    pixels[labeled] = colors[labels[labeled] % colors.shape[0]].astype(np.uint8)

    members = np.asarray(mas.points, dtype=np.int64)
    offsets = members - window.lo
    visible = np.all((offsets >= 0) & (offsets < np.asarray(window.shape)), axis=1)
    if np.any(visible):
        pixels[tuple(offsets[visible].T)] = np.asarray(highlight, dtype=np.uint8)
    logger.debug(f"Basin raster {window.shape[0]}x{window.shape[1]} with {mas.component_count} basins")
    return to_image_order(pixels)


def scan_raster(values: np.ndarray) -> np.ndarray:
    """
    Grayscale raster of a fixed point scan: the smallest value is black,
    the largest white. Input is indexed [i_x, i_y].
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.size == 0:
        raise InvalidInputError("scan raster needs a non-empty two dimensional array")
    low, high = float(values.min()), float(values.max())
    if high == low:
        scaled = np.zeros(values.shape)
    else:
        scaled = (values - low) * (255.0 / (high - low))
    return to_image_order(np.rint(scaled).astype(np.uint8))


def write_raster(raster: np.ndarray, target, fmt: Optional[str] = None):
    """
    Write a raster as binary PGM (2-D array) or PPM (rows x columns x 3).

    target is a path or a binary stream. The header is the magic line,
    width, height and maxval 255, followed by raw rows top to bottom.

    Raises:
        InvalidInputError: empty raster, bad shape or a format that does not fit it
        ArtifactWriteError: the target cannot be written
    """
    pixels = np.asarray(raster)
    if pixels.size == 0:
        raise InvalidInputError("cannot write an empty raster")
    if pixels.ndim == 2:
        expected = PGM
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        expected = PPM
    else:
        raise InvalidInputError(f"raster of shape {pixels.shape} is neither grayscale nor RGB")
    fmt = expected if fmt is None else fmt.upper()
    if fmt not in FORMATS:
        raise InvalidInputError(f"unknown raster format {fmt!r}; expected one of {FORMATS}")
    if fmt != expected:
        raise InvalidInputError(f"a raster of shape {pixels.shape} cannot be written as {fmt}")
    if pixels.dtype != np.uint8:
        if np.any(pixels < 0) or np.any(pixels > 255):
            raise InvalidInputError("raster values must lie in [0, 255]")
        pixels = pixels.astype(np.uint8)

    try:
        Image.fromarray(np.ascontiguousarray(pixels)).save(target, format='PPM')
    except OSError as exc:
        raise ArtifactWriteError(f"cannot write {fmt} raster to {target}: {exc}") from exc
    logger.debug(f"Wrote {pixels.shape[1]}x{pixels.shape[0]} {fmt} raster to {target}")
