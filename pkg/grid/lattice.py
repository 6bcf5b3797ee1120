"""
Delta-grid model of R^n.

R^n is tiled by half-open cubes [(m_i - 1/2)delta, (m_i + 1/2)delta) and
every cube is represented by the integer multi-index m of its center.
This module provides the grid context, point and map roundoff, finite
lattice regions and the two discrete map representations (closure form
evaluated on demand, table form stored as flat target arrays).
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence, Tuple, Union

import numpy as np

from PyDIFS.conf import difs_setting
from PyDIFS.exceptions import (
    BudgetExceededError,
    DimensionMismatchError,
    InvalidInputError,
    OrbitEscapeError,
    RegionNotClosedError,
)

if TYPE_CHECKING:
    from affine.maps import AffineMap

logger = logging.getLogger(__name__)

EUCLIDEAN = 'euclidean'
MAXIMUM = 'maximum'
MANHATTAN = 'manhattan'
NORMS = (EUCLIDEAN, MAXIMUM, MANHATTAN)

# Relative padding of ball radii; closure of a trap ball holds for every radius >= r0
BALL_RADIUS_PADDING = 1e-9

GridPoint = Tuple[int, ...]


def vector_norm(v: np.ndarray, norm: str = EUCLIDEAN) -> Union[float, np.ndarray]:
    """
    Norm of vectors stored along the last axis.

    Args:
        v: array of shape (..., n)
        norm: one of NORMS

    Returns:
        float for a single vector, array of shape (...) otherwise
    """
    v = np.asarray(v, dtype=np.float64)
    if norm == EUCLIDEAN:
        result = np.sqrt(np.sum(v * v, axis=-1))
    elif norm == MAXIMUM:
        result = np.max(np.abs(v), axis=-1)
    elif norm == MANHATTAN:
        result = np.sum(np.abs(v), axis=-1)
    else:
        raise InvalidInputError(f"Unknown norm '{norm}'; expected one of {', '.join(NORMS)}")
    if np.ndim(result) == 0:
        return float(result)
    return result


def euclidean_factor(norm: str, n: int) -> float:
    """Smallest c with d_E(x, y) <= c * d(x, y) for the given norm on R^n."""
    if norm == MAXIMUM:
        return math.sqrt(n)
    return 1.0


@dataclass(frozen=True)
class GridSpace:
    """
    The delta-grid context: dimension, cube side and metric.

    Instances are immutable and safe to share between workers.
    """
    n: int
    delta: float
    norm: str = EUCLIDEAN

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidInputError(f"Grid dimension must be a positive integer, got {self.n!r}")
        if not (isinstance(self.delta, (int, float, np.floating)) and math.isfinite(self.delta) and self.delta > 0):
            raise InvalidInputError(f"Grid spacing delta must be a positive finite number, got {self.delta!r}")
        if self.norm not in NORMS:
            raise InvalidInputError(f"Unknown norm '{self.norm}'; expected one of {', '.join(NORMS)}")
        object.__setattr__(self, 'n', int(self.n))
        object.__setattr__(self, 'delta', float(self.delta))

    def theta(self) -> float:
        """Half the diameter of a delta-cube in this grid's metric."""
        if self.norm == EUCLIDEAN:
            return self.delta * math.sqrt(self.n) / 2.0
        if self.norm == MAXIMUM:
            return self.delta / 2.0
        return self.delta * self.n / 2.0

    def distance(self, a, b) -> Union[float, np.ndarray]:
        """Distance between points (or batches of points) of R^n."""
        return vector_norm(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64), self.norm)

    def with_delta(self, delta: float) -> 'GridSpace':
        return GridSpace(self.n, delta, self.norm)

    def check_dimension(self, dimension: int, what: str = 'map'):
        if dimension != self.n:
            raise DimensionMismatchError(f"{what} has dimension {dimension} but the grid has n={self.n}")

    def roundoff_points(self, x: np.ndarray) -> np.ndarray:
        """Vectorized roundoff: array (..., n) of reals to int64 multi-indices."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n:
            raise DimensionMismatchError(f"points have dimension {x.shape[-1]} but the grid has n={self.n}")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("Cannot round off a point with non-finite coordinates")
        return np.floor(x / self.delta + 0.5).astype(np.int64)

    def embed_points(self, m: np.ndarray) -> np.ndarray:
        """Vectorized embedding of multi-indices as cube centers delta*m."""
        return self.delta * np.asarray(m, dtype=np.float64)


def roundoff_point(x: Sequence[float], g: GridSpace) -> GridPoint:
    """
    Find the delta-cube containing x.

    m_i = floor(x_i / delta + 1/2); a point on a cube boundary belongs to
    the cube with the higher index.
    """
    return tuple(int(v) for v in g.roundoff_points(np.asarray(x, dtype=np.float64).reshape(g.n)))


def embed(p: Sequence[int], g: GridSpace) -> np.ndarray:
    """Cube center delta*m of a grid point."""
    return g.embed_points(np.asarray(p, dtype=np.int64).reshape(g.n))


def theta(g: GridSpace) -> float:
    return g.theta()


class LatticeRegion:
    """
    A finite set of grid points.

    Members are stored lexicographically sorted (first coordinate slowest)
    together with a dense lookup table over their bounding box, so
    membership and index queries are O(1) per point.
    """

    def __init__(self, lo: Sequence[int], mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        lo = np.asarray(lo, dtype=np.int64).reshape(-1)
        if mask.ndim != lo.size:
            raise DimensionMismatchError(f"region mask has {mask.ndim} axes but origin has {lo.size} coordinates")
        if mask.size > difs_setting('MAX_REGION_POINTS'):
            raise BudgetExceededError(
                f"Region bounding box holds {mask.size} cells, over the budget of "
                f"{difs_setting('MAX_REGION_POINTS')}"
            )
        self.lo = lo
        self.mask = mask
        self.points = np.argwhere(mask).astype(np.int64) + lo
        self._lookup = np.full(mask.shape, -1, dtype=np.int64)
        self._lookup[mask] = np.arange(self.points.shape[0], dtype=np.int64)
        self.lo.setflags(write=False)
        self.mask.setflags(write=False)
        self.points.setflags(write=False)

    @classmethod
    def box(cls, lo: Sequence[int], hi: Sequence[int]) -> 'LatticeRegion':
        """Rectangular box of grid points with inclusive corners lo and hi."""
        lo = np.asarray(lo, dtype=np.int64).reshape(-1)
        hi = np.asarray(hi, dtype=np.int64).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatchError("box corners have different dimensions")
        if np.any(hi < lo):
            raise InvalidInputError(f"empty box: lo={lo.tolist()} hi={hi.tolist()}")
        shape = tuple(int(v) for v in hi - lo + 1)
        total = int(np.prod(shape, dtype=np.float64))
        if total > difs_setting('MAX_REGION_POINTS'):
            raise BudgetExceededError(f"Box of {total} points exceeds the region budget")
        return cls(lo, np.ones(shape, dtype=bool))

    @classmethod
    def from_points(cls, points: Iterable[Sequence[int]]) -> 'LatticeRegion':
        pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.int64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidInputError("a region needs at least one point")
        lo = pts.min(axis=0)
        shape = tuple(int(v) for v in pts.max(axis=0) - lo + 1)
        total = int(np.prod(shape, dtype=np.float64))
        if total > difs_setting('MAX_REGION_POINTS'):
            raise BudgetExceededError(f"Bounding box of {total} cells exceeds the region budget")
        mask = np.zeros(shape, dtype=bool)
        mask[tuple((pts - lo).T)] = True
        return cls(lo, mask)

    @property
    def n(self) -> int:
        return int(self.lo.size)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.mask.shape

    @property
    def hi(self) -> np.ndarray:
        return self.lo + np.asarray(self.mask.shape, dtype=np.int64) - 1

    @property
    def is_box(self) -> bool:
        return self.points.shape[0] == self.mask.size

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __contains__(self, p) -> bool:
        return bool(self.index_of(np.asarray(p, dtype=np.int64).reshape(1, -1))[0] >= 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatticeRegion):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.array_equal(self.points, other.points))

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        return f"LatticeRegion(n={self.n}, points={len(self)}, lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    def point(self, index: int) -> GridPoint:
        return tuple(int(v) for v in self.points[index])

    def index_of(self, points: np.ndarray) -> np.ndarray:
        """Region index of every point in an (k, n) batch, -1 for non-members."""
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.shape[1] != self.n:
            raise DimensionMismatchError(f"points have dimension {pts.shape[1]} but the region has n={self.n}")
        offsets = pts - self.lo
        inside = np.all((offsets >= 0) & (offsets < np.asarray(self.mask.shape)), axis=1)
        result = np.full(pts.shape[0], -1, dtype=np.int64)
        if np.any(inside):
            result[inside] = self._lookup[tuple(offsets[inside].T)]
        return result

    def shifted(self, m: Sequence[int]) -> 'LatticeRegion':
        return LatticeRegion(self.lo + np.asarray(m, dtype=np.int64), self.mask)


def lattice_ball(center: Sequence[float], radius: float, g: GridSpace) -> LatticeRegion:
    """
    Grid points inside the closed ball B(center, radius) of the grid metric.

    The bounding box of the ball is enumerated axis by axis and filtered by
    direct distance comparison against the padded radius.
    """
    c = np.asarray(center, dtype=np.float64).reshape(-1)
    g.check_dimension(c.size, 'ball center')
    if not (math.isfinite(radius) and radius >= 0):
        raise InvalidInputError(f"ball radius must be finite and non-negative, got {radius}")
    r = radius * (1.0 + BALL_RADIUS_PADDING)
    lo = np.ceil((c - r) / g.delta).astype(np.int64)
    hi = np.floor((c + r) / g.delta).astype(np.int64)
    hi = np.maximum(hi, lo)
    shape = tuple(int(v) for v in hi - lo + 1)
    total = float(np.prod(shape, dtype=np.float64))
    if total > difs_setting('MAX_REGION_POINTS'):
        raise BudgetExceededError(
            f"Ball of radius {radius:.6g} at delta={g.delta:.6g} spans {total:.3g} cells, "
            f"over the region budget of {difs_setting('MAX_REGION_POINTS')}"
        )

    accumulated = np.zeros(shape, dtype=np.float64)
    for axis in range(g.n):
        coords = g.delta * np.arange(lo[axis], hi[axis] + 1, dtype=np.float64) - c[axis]
        view = [1] * g.n
        view[axis] = shape[axis]
        coords = coords.reshape(view)
        if g.norm == EUCLIDEAN:
            accumulated = accumulated + coords * coords
        elif g.norm == MAXIMUM:
            accumulated = np.maximum(accumulated, np.abs(coords))
        else:
            accumulated = accumulated + np.abs(coords)
    if g.norm == EUCLIDEAN:
        accumulated = np.sqrt(accumulated)
    mask = accumulated <= r
    if not mask.any():
        # the ball always holds the cube center nearest to its center when r >= theta
        raise InvalidInputError(f"ball of radius {radius:.6g} around {c.tolist()} contains no grid point")
    return LatticeRegion(lo, mask)


class DiscreteMap(ABC):
    """A self-map of the delta-grid, applied to batches of multi-indices."""

    n: int
    is_table: bool = False

    @abstractmethod
    def apply(self, points: np.ndarray) -> np.ndarray:
        """Images of an (k, n) int64 batch of grid points."""

    def __call__(self, p: Sequence[int]) -> GridPoint:
        image = self.apply(np.asarray(p, dtype=np.int64).reshape(1, self.n))[0]
        return tuple(int(v) for v in image)

    def successor_indices(self, region: LatticeRegion) -> np.ndarray:
        """
        Region index of the image of every region point.

        Raises:
            RegionNotClosedError: naming the first point whose image leaves the region
        """
        images = self.apply(region.points)
        successors = region.index_of(images)
        outside = np.flatnonzero(successors < 0)
        if outside.size:
            i = int(outside[0])
            point = region.point(i)
            image = tuple(int(v) for v in images[i])
            raise RegionNotClosedError(
                f"Map sends region point {point} to {image}, outside the region "
                f"({outside.size} offending points)",
                point=point,
                image=image,
            )
        return successors


class ClosureMap(DiscreteMap):
    """delta-roundoff of an affine map, evaluated as roundoff(w(delta*m))."""

    def __init__(self, w: 'AffineMap', grid: GridSpace):
        self.w = w
        self.grid = grid
        self.n = grid.n

    def apply(self, points: np.ndarray) -> np.ndarray:
        x = self.grid.embed_points(points)
        y = x @ self.w.matrix.T + self.w.translation
        return self.grid.roundoff_points(y)

    def __repr__(self) -> str:
        return f"ClosureMap(w={self.w!r}, delta={self.grid.delta})"


class TableMap(DiscreteMap):
    """
    Tabulated discrete map: region point i goes to targets[i].

    The table must map its region into itself; successor indices are
    precomputed so orbit steps are array fetches.
    """
    is_table = True

    def __init__(self, region: LatticeRegion, targets: np.ndarray):
        targets = np.asarray(targets, dtype=np.int64)
        if targets.shape != region.points.shape:
            raise DimensionMismatchError(
                f"table holds {targets.shape} targets for a region of shape {region.points.shape}"
            )
        self.region = region
        self.n = region.n
        self.targets = targets
        self.targets.setflags(write=False)
        successors = region.index_of(targets)
        outside = np.flatnonzero(successors < 0)
        if outside.size:
            i = int(outside[0])
            point = region.point(i)
            image = tuple(int(v) for v in targets[i])
            raise RegionNotClosedError(
                f"Table sends {point} to {image}, outside its region", point=point, image=image
            )
        self.successors = successors
        self.successors.setflags(write=False)

    def apply(self, points: np.ndarray) -> np.ndarray:
        idx = self.region.index_of(points)
        if np.any(idx < 0):
            bad = np.asarray(points, dtype=np.int64).reshape(-1, self.n)[int(np.flatnonzero(idx < 0)[0])]
            raise OrbitEscapeError(f"Point {tuple(int(v) for v in bad)} lies outside the tabulated region")
        return self.targets[idx]

    def successor_indices(self, region: LatticeRegion) -> np.ndarray:
        if region is self.region or region == self.region:
            return self.successors
        return super().successor_indices(region)

    def __repr__(self) -> str:
        return f"TableMap(region={self.region!r})"


def roundoff_map(w: 'AffineMap', g: GridSpace) -> ClosureMap:
    """delta-roundoff of a map: w~(m) = roundoff(w(delta*m))."""
    g.check_dimension(w.dimension)
    return ClosureMap(w, g)


def tabulate(dm: DiscreteMap, region: LatticeRegion) -> TableMap:
    """
    Table form of a discrete map over a region it maps into itself.

    Raises:
        RegionNotClosedError: naming the first point whose image leaves the region
    """
    if dm.n != region.n:
        raise DimensionMismatchError(f"map has dimension {dm.n} but the region has n={region.n}")
    table = TableMap(region, dm.apply(region.points))
    logger.debug(f"Tabulated {dm!r} over {len(region)} points")
    return table
