"""
Minimal absorbing sets of a single discretized map.

For a contraction w with fixed point x_f and factor lambda, the lattice
ball Lambda(x_f, r0), r0 = theta / (1 - lambda), is absorbing and mapped
into itself by the roundoff w~. The minimal absorbing set is the set of
periodic points of w~ in that ball; its components are the periodic
orbits, each with its basin of attraction.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from affine.maps import AffineMap, contractivity, fixed_point, from_fixed_point, similarity
from grid.lattice import DiscreteMap, GridPoint, GridSpace, LatticeRegion, lattice_ball, roundoff_map
from PyDIFS.conf import difs_setting
from PyDIFS.exceptions import (
    BudgetExceededError,
    DimensionMismatchError,
    DivergenceError,
    NotAContractionError,
)

logger = logging.getLogger(__name__)

UNVISITED, ON_PATH, RESOLVED = 0, 1, 2


@dataclass
class MinimalAbsorbingSet:
    """
    Periodic orbits of a discrete map over a closed finite region.

    components[k] lists the k-th periodic orbit starting at its
    lexicographically smallest point, in the order the map visits it.
    labels[i] is the component reached by the orbit of region point i.
    """
    components: List[List[GridPoint]]
    region: LatticeRegion
    labels: np.ndarray
    dmap: Optional[DiscreteMap] = field(default=None, repr=False)

    @property
    def cardinality(self) -> int:
        return sum(len(c) for c in self.components)

    @property
    def component_count(self) -> int:
        return len(self.components)

    @property
    def is_singleton(self) -> bool:
        return self.cardinality == 1

    @property
    def points(self) -> List[GridPoint]:
        return sorted(p for component in self.components for p in component)

    @property
    def basin_labels(self) -> Dict[GridPoint, int]:
        return {self.region.point(i): int(label) for i, label in enumerate(self.labels)}

    def basin_label(self, p: Sequence[int]) -> int:
        idx = int(self.region.index_of(np.asarray(p, dtype=np.int64))[0])
        if idx < 0:
            raise KeyError(f"{tuple(p)} is outside the analyzed region")
        return int(self.labels[idx])

    def structure(self) -> Tuple[Tuple[GridPoint, ...], ...]:
        """Hashable component structure for exact comparisons."""
        return tuple(tuple(component) for component in self.components)

    def shifted_structure(self, m: Sequence[int]) -> Tuple[Tuple[GridPoint, ...], ...]:
        shift = tuple(int(v) for v in m)
        return tuple(
            tuple(tuple(a + b for a, b in zip(p, shift)) for p in component)
            for component in self.components
        )

    def summary(self) -> str:
        lines = [
            f"cardinality: {self.cardinality}",
            f"components: {self.component_count}",
            f"region points: {len(self.region)}",
        ]
        for k, component in enumerate(self.components):
            cycle = ' -> '.join(str(p) for p in component)
            lines.append(f"component {k} (period {len(component)}): {cycle}")
        return '\n'.join(lines)


def trap_radius(w: AffineMap, g: GridSpace) -> float:
    """
    r0 = theta / (1 - lambda) for a contraction w on the grid g.

    Raises:
        NotAContractionError: lambda >= 1
        BudgetExceededError: r0 wider than MAX_TRAP_RADIUS_CELLS lattice units
    """
    g.check_dimension(w.dimension)
    lam = contractivity(w, g.norm)
    if lam >= 1.0:
        raise NotAContractionError(f"contractivity factor {lam:.6g} >= 1 under the {g.norm} norm")
    r0 = g.theta() / (1.0 - lam)
    if r0 / g.delta > difs_setting('MAX_TRAP_RADIUS_CELLS'):
        raise BudgetExceededError(
            f"trap radius {r0 / g.delta:.3g} lattice units exceeds the budget of "
            f"{difs_setting('MAX_TRAP_RADIUS_CELLS'):.3g} (lambda={lam:.12g})"
        )
    return r0


def trap_region(w: AffineMap, g: GridSpace, verify: bool = True) -> LatticeRegion:
    """
    Lambda(x_f, r0): grid points within theta / (1 - lambda) of the fixed point.

    With verify set, closure under the roundoff of w is asserted point by
    point (RegionNotClosedError otherwise).
    """
    r0 = trap_radius(w, g)
    region = lattice_ball(fixed_point(w), r0, g)
    if verify:
        roundoff_map(w, g).successor_indices(region)
    logger.debug(f"Trap region of radius {r0:.6g} holds {len(region)} points")
    return region


def minimal_absorbing_set(dm: DiscreteMap, region: LatticeRegion) -> MinimalAbsorbingSet:
    """
    All periodic orbits of dm in region, with basin labels.

    Orbits are followed iteratively with three-color marking: a walk that
    runs into a point on its own path closes a new cycle; a walk that runs
    into a resolved point inherits that point's label.

    Raises:
        RegionNotClosedError: dm maps some region point outside region
    """
    if dm.n != region.n:
        raise DimensionMismatchError(f"map has dimension {dm.n} but the region has n={region.n}")
    successors = dm.successor_indices(region).tolist()
    size = len(successors)
    color = [UNVISITED] * size
    labels = [-1] * size
    cycles: List[List[int]] = []

    for start in range(size):
        if color[start] != UNVISITED:
            continue
        path = []
        position = {}
        v = start
        while color[v] == UNVISITED:
            color[v] = ON_PATH
            position[v] = len(path)
            path.append(v)
            v = successors[v]
        if color[v] == ON_PATH:
            label = len(cycles)
            cycles.append(path[position[v]:])
        else:
            label = labels[v]
        for u in path:
            labels[u] = label
            color[u] = RESOLVED

    # order components by their smallest member; region indices follow lexicographic order
    order = sorted(range(len(cycles)), key=lambda k: min(cycles[k]))
    relabel = np.empty(len(cycles), dtype=np.int64)
    components = []
    for new, old in enumerate(order):
        relabel[old] = new
        cycle = cycles[old]
        first = cycle.index(min(cycle))
        rotated = cycle[first:] + cycle[:first]
        components.append([region.point(i) for i in rotated])
    label_array = relabel[np.asarray(labels, dtype=np.int64)]

    mas = MinimalAbsorbingSet(components=components, region=region, labels=label_array, dmap=dm)
    logger.debug(
        f"Minimal absorbing set over {size} points: cardinality {mas.cardinality}, "
        f"{mas.component_count} components"
    )
    return mas


def mas_for_contraction(w: AffineMap, g: GridSpace) -> MinimalAbsorbingSet:
    """Minimal absorbing set of the roundoff of a contraction over all of the grid."""
    region = trap_region(w, g, verify=False)
    return minimal_absorbing_set(roundoff_map(w, g), region)


def basin_image(
    mas: MinimalAbsorbingSet,
    window: LatticeRegion,
    iteration_cap: Optional[int] = None,
) -> np.ndarray:
    """
    Component label of every grid point of a window.

    Points outside the analyzed region are iterated in bulk until they
    enter it or reach an already labeled window point.

    Returns:
        int64 array shaped like window's bounding box (axis k = coordinate k);
        cells outside a non-box window hold -1

    Raises:
        DivergenceError: some orbit needs more than iteration_cap steps
    """
    if mas.dmap is None:
        raise DivergenceError("minimal absorbing set carries no map to follow orbits with")
    cap = iteration_cap if iteration_cap is not None else difs_setting('BASIN_ITERATION_CAP')
    pts = window.points
    labels = np.full(len(window), -1, dtype=np.int64)
    in_region = mas.region.index_of(pts)
    known = in_region >= 0
    labels[known] = mas.labels[in_region[known]]

    active = np.flatnonzero(~known)
    current = pts[active]
    steps = 0
    while active.size:
        if steps >= cap:
            raise DivergenceError(f"{active.size} window points did not reach the analyzed region in {cap} steps")
        current = mas.dmap.apply(current)
        steps += 1
        r = mas.region.index_of(current)
        hit = r >= 0
        labels[active[hit]] = mas.labels[r[hit]]

        w_idx = window.index_of(current)
        memo = ~hit & (w_idx >= 0)
        memo[memo] = labels[w_idx[memo]] >= 0
        labels[active[memo]] = labels[w_idx[memo]]

        keep = ~(hit | memo)
        active = active[keep]
        current = current[keep]

    raster = np.full(window.shape, -1, dtype=np.int64)
    raster[window.mask] = labels
    return raster


def gallery_maps() -> List[Tuple[str, AffineMap]]:
    """Planar linear contractions whose basins make a representative gallery."""
    gallery = [
        (f"similarity {scale} rotation {degrees}", similarity(scale, degrees))
        for scale, degrees in ((0.6, 0.0), (0.6, 5.0), (0.6, 150.0), (0.6, 30.0), (0.9, 30.0))
    ]
    gallery.append(("linear [[0.5, 0.3], [-0.1, 0.4]]", AffineMap([[0.5, 0.3], [-0.1, 0.4]], [0.0, 0.0])))
    return gallery


def fixed_point_scan(
    linear_part,
    g: GridSpace,
    samples_per_axis: int = 41,
    extent: float = 0.4,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cardinality and component count of the minimal absorbing set as the
    fixed point sweeps [-extent, extent]^2 (in units of delta) of one cube.

    Returns:
        (cardinalities, component_counts), each of shape
        (samples_per_axis, samples_per_axis) indexed [i_x, i_y]
    """
    g.check_dimension(2, 'fixed point scan')
    offsets = np.linspace(-extent, extent, samples_per_axis) * g.delta
    cardinalities = np.zeros((samples_per_axis, samples_per_axis), dtype=np.int64)
    counts = np.zeros_like(cardinalities)
    for i, x in enumerate(offsets):
        for j, y in enumerate(offsets):
            mas = mas_for_contraction(from_fixed_point(linear_part, (x, y)), g)
            cardinalities[i, j] = mas.cardinality
            counts[i, j] = mas.component_count
    logger.info(
        f"Fixed point scan over {samples_per_axis}x{samples_per_axis} positions: "
        f"{int(np.sum(cardinalities > 1))} non-singleton sets"
    )
    return cardinalities, counts
