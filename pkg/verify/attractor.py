"""
Reference attractors of hyperbolic IFSs and Hausdorff distances between
finite point sets.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from affine.maps import AffineMap, contractivity, fixed_point
from grid.lattice import EUCLIDEAN, MANHATTAN, MAXIMUM, NORMS, vector_norm
from PyDIFS.conf import difs_setting
from PyDIFS.exceptions import BudgetExceededError, InvalidInputError, NotAContractionError

logger = logging.getLogger(__name__)

# Absolute allowance for floating error in the map images
FLOAT_SLACK = 1e-9

MINKOWSKI_P = {EUCLIDEAN: 2.0, MAXIMUM: np.inf, MANHATTAN: 1.0}


@dataclass
class ReferenceAttractor:
    """
    Finite approximation of A_inf: every point lies within resolution of the
    attractor and the attractor lies within resolution of the points.
    """
    points: np.ndarray
    resolution: float
    depth: int
    norm: str = EUCLIDEAN

    def __len__(self) -> int:
        return int(self.points.shape[0])


def cube_diameter(side: float, n: int, norm: str) -> float:
    if norm == EUCLIDEAN:
        return side * math.sqrt(n)
    if norm == MAXIMUM:
        return side
    return side * n


def deduplicate(points: np.ndarray, side: float) -> np.ndarray:
    """Keep the first point of every cell of a side x side hash grid, in input order."""
    if side <= 0.0 or points.shape[0] < 2:
        return points
    keys = np.floor(points / side).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]


def reference_attractor(maps: Sequence[AffineMap], depth: int, norm: str = EUCLIDEAN) -> ReferenceAttractor:
    """
    Hutchinson iteration E -> union of w_i(E) started from the fixed points.

    The fixed points lie in A_inf, so every iterate does too. The starting
    set is within R0 = (alpha + 1) * r_max of A_inf, where r_max is the
    largest distance from a fixed point to their centroid and
    alpha = (1 + lambda) / (1 - lambda); after depth steps the gap is
    lambda^depth * R0. Points sharing a hash cell are merged at every level;
    the merge error summed over levels stays below a quarter of that gap.

    Raises:
        NotAContractionError: some map has contractivity >= 1
        BudgetExceededError: depth above REFERENCE_MAX_DEPTH or too many points
    """
    if not maps:
        raise InvalidInputError("a reference attractor needs at least one map")
    if norm not in NORMS:
        raise InvalidInputError(f"Unknown norm '{norm}'")
    if depth < 0:
        raise InvalidInputError(f"depth must be >= 0, got {depth}")
    max_depth = difs_setting('REFERENCE_MAX_DEPTH')
    if depth > max_depth:
        raise BudgetExceededError(f"reference depth {depth} exceeds REFERENCE_MAX_DEPTH={max_depth}")
    dimension = maps[0].dimension
    if any(w.dimension != dimension for w in maps):
        raise InvalidInputError("all maps of an IFS must share one dimension")
    lam = max(contractivity(w, norm) for w in maps)
    if lam >= 1.0:
        raise NotAContractionError(f"IFS has contractivity {lam:.6g} >= 1")

    points = np.unique(np.array([fixed_point(w) for w in maps]), axis=0)
    r_max = float(np.max(vector_norm(points - points.mean(axis=0), norm)))
    alpha = (1.0 + lam) / (1.0 - lam)
    gap = lam ** depth * (alpha + 1.0) * r_max
    merge_error = (1.0 - lam) * gap / 4.0
    side = merge_error / cube_diameter(1.0, dimension, norm)

    budget = difs_setting('REFERENCE_POINT_BUDGET')
    for level in range(depth):
        if points.shape[0] * len(maps) > budget:
            raise BudgetExceededError(
                f"reference attractor level {level + 1} would hold {points.shape[0] * len(maps)} points "
                f"(budget {budget})"
            )
        points = deduplicate(np.concatenate([w(points) for w in maps]), side)

    resolution = gap + merge_error / (1.0 - lam) + FLOAT_SLACK
    logger.debug(
        f"Reference attractor at depth {depth}: {points.shape[0]} points, resolution {resolution:.3e}"
    )
    return ReferenceAttractor(points=points, resolution=resolution, depth=depth, norm=norm)


def directed_distance(a: np.ndarray, b: np.ndarray, norm: str = EUCLIDEAN) -> float:
    """max over a of the distance to the nearest point of b."""
    _, nearest = cKDTree(b).query(a, k=1, p=MINKOWSKI_P[norm])
    return float(np.max(vector_norm(a - b[nearest], norm)))


def hausdorff(set_a, set_b, norm: str = EUCLIDEAN) -> float:
    """
    Hausdorff distance between two finite point sets.

    Nearest neighbours come from a k-d tree; distances are then evaluated
    with the grid norm, so the result equals the all-pairs computation.

    Raises:
        InvalidInputError: an empty set or mismatched dimensions
    """
    if norm not in NORMS:
        raise InvalidInputError(f"Unknown norm '{norm}'")
    a = np.atleast_2d(np.asarray(set_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(set_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise InvalidInputError("Hausdorff distance needs two non-empty sets")
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError(f"point sets have dimensions {a.shape[1]} and {b.shape[1]}")
    return max(directed_distance(a, b, norm), directed_distance(b, a, norm))
