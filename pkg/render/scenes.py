"""
Tabulated DIFS scenes: perturbed, smoothed Sierpinski tables with
place-dependent probabilities, and their plain text file format.

File layout (whitespace separated decimal text):

    DIFS n=2 width height N delta
    N blocks of width*height target pairs "t1 t2", rows of constant m2
        from m2 = 0 upwards, m1 increasing within a row
    width*height rows of N probabilities in the same order
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from affine.sampling import generator_for
from difs.chain import Difs, ProbabilityTable, sierpinski_maps
from grid.lattice import GridSpace, LatticeRegion, TableMap
from PyDIFS.exceptions import ArtifactReadError, ArtifactWriteError, InvalidInputError

logger = logging.getLogger(__name__)

SMOOTHING_KERNEL = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 16.0
PROBABILITY_FLOOR = 1e-6
FILE_PROBABILITY_TOLERANCE = 1e-9

DISPLACEMENT_STREAM = 1
PROBABILITY_STREAM = 2


@dataclass(frozen=True)
class Perturbation:
    """
    One sinusoidal displacement pass, in cells.

    t1 += a1 * sin(2 pi f1 t2 / height + phi1), t2 += a2 * sin(2 pi f2 t1 / width + phi2),
    with a per-map phase offset drawn from the scene seed.
    """
    amplitude: Tuple[float, float] = (0.0, 0.0)
    frequency: Tuple[float, float] = (1.0, 1.0)
    phase: Tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 1000
    height: int = 1000
    perturbations: Tuple[Perturbation, ...] = field(default_factory=tuple)
    smoothing: bool = True
    probability_amplitude: float = 0.0
    probability_frequency: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise InvalidInputError(f"scene resolution must be at least 2x2, got {self.width}x{self.height}")
        if not 0.0 <= self.probability_amplitude < 1.0:
            raise InvalidInputError(
                f"probability_amplitude must lie in [0, 1), got {self.probability_amplitude}"
            )

    @property
    def delta(self) -> float:
        return 1.0 / (self.width - 1)

    @property
    def region(self) -> LatticeRegion:
        return LatticeRegion.box((0, 0), (self.width - 1, self.height - 1))


def round_half_away(values: np.ndarray) -> np.ndarray:
    return (np.sign(values) * np.floor(np.abs(values) + 0.5)).astype(np.int64)


def clamp_targets(t1: np.ndarray, t2: np.ndarray, width: int, height: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.clip(t1, 0, width - 1), np.clip(t2, 0, height - 1)


def base_targets(spec: SceneSpec) -> np.ndarray:
    """(3, width, height, 2) roundoff targets of the Sierpinski similarities, clamped to the region."""
    g = GridSpace(2, spec.delta)
    points = spec.region.points
    tables = []
    for w in sierpinski_maps():
        image = g.roundoff_points(w(g.embed_points(points)))
        t1, t2 = clamp_targets(image[:, 0], image[:, 1], spec.width, spec.height)
        tables.append(np.stack([t1, t2], axis=-1).reshape(spec.width, spec.height, 2))
    return np.stack(tables)


def displace(targets: np.ndarray, spec: SceneSpec, pass_index: int, p: Perturbation) -> np.ndarray:
    """Apply one displacement pass to every map's target fields."""
    offsets = generator_for(spec.seed, DISPLACEMENT_STREAM, pass_index).uniform(
        0.0, 2.0 * math.pi, size=(targets.shape[0], 2)
    )
    moved = np.empty_like(targets)
    for i in range(targets.shape[0]):
        t1 = targets[i, ..., 0].astype(np.float64)
        t2 = targets[i, ..., 1].astype(np.float64)
        d1 = p.amplitude[0] * np.sin(2.0 * math.pi * p.frequency[0] * t2 / spec.height + p.phase[0] + offsets[i, 0])
        d2 = p.amplitude[1] * np.sin(2.0 * math.pi * p.frequency[1] * t1 / spec.width + p.phase[1] + offsets[i, 1])
        n1, n2 = clamp_targets(round_half_away(t1 + d1), round_half_away(t2 + d2), spec.width, spec.height)
        moved[i, ..., 0] = n1
        moved[i, ..., 1] = n2
    return moved


def smooth(targets: np.ndarray, width: int, height: int) -> np.ndarray:
    """3x3 binomial smoothing of each coordinate field with edge replication."""
    smoothed = np.empty_like(targets)
    for i in range(targets.shape[0]):
        for axis in range(2):
            blurred = ndimage.convolve(targets[i, ..., axis].astype(np.float64), SMOOTHING_KERNEL, mode='nearest')
            smoothed[i, ..., axis] = round_half_away(blurred)
        smoothed[i, ..., 0], smoothed[i, ..., 1] = clamp_targets(
            smoothed[i, ..., 0], smoothed[i, ..., 1], width, height
        )
    return smoothed


def probability_rows(spec: SceneSpec, n_maps: int) -> np.ndarray:
    """(width*height, N) rows: uniform weights modulated by a product of sines, floored and renormalized."""
    phases = generator_for(spec.seed, PROBABILITY_STREAM).uniform(0.0, 2.0 * math.pi, size=(n_maps, 2))
    m1, m2 = np.meshgrid(np.arange(spec.width), np.arange(spec.height), indexing='ij')
    k = 2.0 * math.pi * spec.probability_frequency
    rows = np.empty((spec.width, spec.height, n_maps))
    for i in range(n_maps):
        wave = np.sin(k * m1 / spec.width + phases[i, 0]) * np.sin(k * m2 / spec.height + phases[i, 1])
        rows[..., i] = (1.0 + spec.probability_amplitude * wave) / n_maps
    rows = np.maximum(rows.reshape(-1, n_maps), PROBABILITY_FLOOR)
    return rows / rows.sum(axis=1, keepdims=True)


def generate_scene(spec: SceneSpec) -> Difs:
    """
    Build a tabulated DIFS on the width x height region.

    Targets start as the roundoffs of the three Sierpinski similarities,
    go through every perturbation pass (clamped to the region after each),
    and are optionally smoothed per coordinate.
    """
    targets = base_targets(spec)
    for pass_index, p in enumerate(spec.perturbations):
        targets = displace(targets, spec, pass_index, p)
    if spec.smoothing:
        targets = smooth(targets, spec.width, spec.height)

    region = spec.region
    n_maps = targets.shape[0]
    maps = [TableMap(region, targets[i].reshape(-1, 2)) for i in range(n_maps)]
    if spec.probability_amplitude > 0.0:
        probabilities = ProbabilityTable(probability_rows(spec, n_maps), region)
    else:
        probabilities = ProbabilityTable.uniform(n_maps)
    logger.info(
        f"Generated {spec.width}x{spec.height} scene with {len(spec.perturbations)} perturbation passes "
        f"(smoothing {'on' if spec.smoothing else 'off'}, seed {spec.seed})"
    )
    return Difs(GridSpace(2, spec.delta), maps, probabilities, region=region)


def table_dimensions(d: Difs) -> Tuple[int, int]:
    region = d.region
    if region is None or region.n != 2 or not region.is_box or np.any(region.lo != 0):
        raise InvalidInputError("only tables over a planar box anchored at the origin can be written")
    return int(region.shape[0]), int(region.shape[1])


def dump_table_difs(d: Difs, target):
    """Write a tabulated DIFS to a path or text stream."""
    width, height = table_dimensions(d)
    rows = d.probability_rows(d.region)

    def write(stream):
        stream.write(f"DIFS n=2 {width} {height} {d.n_maps} {d.grid.delta!r}\n")
        for dm in d.maps:
            block = dm.apply(d.region.points).reshape(width, height, 2).transpose(1, 0, 2).reshape(-1, 2)
            np.savetxt(stream, block, fmt='%d')
        ordered = np.asarray(rows).reshape(width, height, d.n_maps).transpose(1, 0, 2).reshape(-1, d.n_maps)
        np.savetxt(stream, ordered, fmt='%.17g')

    try:
        if hasattr(target, 'write'):
            write(target)
        else:
            with open(target, 'w', encoding='utf-8') as stream:
                write(stream)
    except OSError as exc:
        raise ArtifactWriteError(f"cannot write scene table to {target}: {exc}") from exc
    logger.debug(f"Wrote {width}x{height} table with {d.n_maps} maps")


def load_table_difs(source) -> Difs:
    """
    Read a tabulated DIFS from a path or text stream.

    Probability rows within 1e-9 of summing to one are renormalized.

    Raises:
        InvalidInputError: malformed header, token count or values
        RegionNotClosedError: a target outside the region
        ArtifactReadError: the file cannot be read
    """
    try:
        if hasattr(source, 'read'):
            text = source.read()
        else:
            with open(source, 'r', encoding='utf-8') as stream:
                text = stream.read()
    except OSError as exc:
        raise ArtifactReadError(f"cannot read scene table {source}: {exc}") from exc

    tokens = text.split()
    if len(tokens) < 6 or tokens[0] != 'DIFS' or tokens[1] != 'n=2':
        raise InvalidInputError("scene table must start with 'DIFS n=2 width height N delta'")
    try:
        width, height, n_maps = int(tokens[2]), int(tokens[3]), int(tokens[4])
        delta = float(tokens[5])
    except ValueError as exc:
        raise InvalidInputError(f"malformed scene table header: {exc}") from exc
    if width < 1 or height < 1 or n_maps < 1 or not math.isfinite(delta) or delta <= 0.0:
        raise InvalidInputError(f"invalid scene table header values {tokens[2:6]}")

    cells = width * height
    n_targets = n_maps * cells * 2
    expected = 6 + n_targets + cells * n_maps
    if len(tokens) != expected:
        raise InvalidInputError(f"scene table holds {len(tokens) - 6} values, expected {expected - 6}")
    try:
        targets = np.array(tokens[6:6 + n_targets]).astype(np.int64)
        rows = np.array(tokens[6 + n_targets:]).astype(np.float64)
    except ValueError as exc:
        raise InvalidInputError(f"malformed scene table values: {exc}") from exc

    region = LatticeRegion.box((0, 0), (width - 1, height - 1))
    targets = targets.reshape(n_maps, height, width, 2).transpose(0, 2, 1, 3).reshape(n_maps, cells, 2)
    rows = rows.reshape(height, width, n_maps).transpose(1, 0, 2).reshape(cells, n_maps)
    if not np.all(np.isfinite(rows)) or np.any(rows <= 0.0):
        raise InvalidInputError("scene table probabilities must be strictly positive")
    worst = float(np.max(np.abs(rows.sum(axis=1) - 1.0)))
    if worst > FILE_PROBABILITY_TOLERANCE:
        raise InvalidInputError(f"scene table probability rows must sum to 1 (worst deviation {worst:.3e})")
    rows = rows / rows.sum(axis=1, keepdims=True)

    maps = [TableMap(region, targets[i]) for i in range(n_maps)]
    logger.debug(f"Loaded {width}x{height} scene table with {n_maps} maps")
    return Difs(GridSpace(2, delta), maps, ProbabilityTable(rows, region), region=region)


def scene_start(d: Difs, spec_point: Optional[Sequence[int]] = None) -> Tuple[int, int]:
    """Start point for a scene orbit: the given point or the region center."""
    if spec_point is not None:
        return int(spec_point[0]), int(spec_point[1])
    center = (d.region.lo + d.region.hi) // 2
    return int(center[0]), int(center[1])
