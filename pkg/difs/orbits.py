"""
Random iteration (chaos game) orbits of a DIFS.

At each step a map index I_k is drawn from the probability row of the
current state and x~_k = w~_{I_k}(x~_{k-1}). Orbits over a closed state
set walk precomputed successor indices; each orbit owns a generator
keyed by its seed.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from affine.maps import AffineMap, contractivity
from affine.sampling import generator_for
from difs.chain import Difs, MarkovStructure, trap_region_difs
from grid.lattice import GridPoint, GridSpace, LatticeRegion, roundoff_map
from PyDIFS.exceptions import BudgetExceededError, InvalidInputError, NotAContractionError, OrbitEscapeError

logger = logging.getLogger(__name__)


@dataclass
class OrbitRecord:
    """x~_0..x~_M as an (M+1, n) array and the chosen map indices I_1..I_M."""
    points: np.ndarray
    indices: np.ndarray
    seed: int

    @property
    def steps(self) -> int:
        return int(self.indices.size)

    def point(self, k: int) -> GridPoint:
        return tuple(int(v) for v in self.points[k])


@dataclass(frozen=True)
class ShadowingReport:
    max_distance: float
    bound: float
    steps: int

    @property
    def holds(self) -> bool:
        return self.max_distance <= self.bound + 1e-9


def draw_indices(cumulative_rows: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Map indices for uniforms in [0, 1) against cumulative probability rows."""
    return np.minimum(
        np.searchsorted(cumulative_rows, uniforms, side='right'), cumulative_rows.shape[-1] - 1
    )


def orbit_states(d: Difs, states: Optional[LatticeRegion]) -> LatticeRegion:
    if states is not None:
        return states
    if d.region is not None:
        return d.region
    if d.affine_maps is not None:
        return trap_region_difs(d.affine_maps, d.grid)
    raise InvalidInputError("an orbit needs a closed state set for a DIFS without table region or affine maps")


def ria_orbit(
    d: Difs,
    x0: Sequence[int],
    steps: int,
    seed: int,
    states: Optional[LatticeRegion] = None,
    stream: int = 0,
) -> OrbitRecord:
    """
    Random iteration orbit of length steps from x0.

    The generator is keyed by (seed, stream). For constant probabilities
    the index sequence depends only on the generator; coupled runs that
    share (seed, stream) share their indices.

    Raises:
        OrbitEscapeError: x0 lies outside the closed state set
    """
    if steps < 0:
        raise InvalidInputError(f"steps must be >= 0, got {steps}")
    states = orbit_states(d, states)
    start = states.index_of(np.asarray(x0, dtype=np.int64))[0]
    if start < 0:
        raise OrbitEscapeError(f"start point {tuple(x0)} lies outside the state set {states!r}")

    successors = d.successor_matrix(states)
    rng = generator_for(seed, stream)
    uniforms = rng.random(steps)
    path = np.empty(steps + 1, dtype=np.int64)
    path[0] = start

    if d.probabilities.is_constant:
        indices = draw_indices(d.probabilities.cumulative, uniforms)
        table = successors.tolist()
        state = int(start)
        for k, i in enumerate(indices.tolist(), start=1):
            state = table[state][i]
            path[k] = state
    else:
        cumulative = np.cumsum(d.probability_rows(states), axis=1)
        indices = np.empty(steps, dtype=np.int64)
        state = int(start)
        for k in range(steps):
            i = int(np.searchsorted(cumulative[state], uniforms[k], side='right'))
            i = min(i, d.n_maps - 1)
            indices[k] = i
            state = int(successors[state, i])
            path[k + 1] = state

    logger.debug(f"RIA orbit of {steps} steps from {tuple(x0)} (seed {seed})")
    return OrbitRecord(points=states.points[path], indices=np.asarray(indices, dtype=np.int64), seed=seed)


def empirical_measure(orbit: OrbitRecord, burn_in: int = 0) -> Dict[GridPoint, float]:
    """Normalized visit counts of x~_{burn_in+1}..x~_M."""
    if not 0 <= burn_in < orbit.steps:
        raise InvalidInputError(f"burn_in must lie in [0, {orbit.steps}), got {burn_in}")
    visited, counts = np.unique(orbit.points[burn_in + 1:], axis=0, return_counts=True)
    total = float(counts.sum())
    return {tuple(int(v) for v in p): c / total for p, c in zip(visited, counts)}


def visit_frequencies(orbit: OrbitRecord, states: LatticeRegion, burn_in: int = 0) -> np.ndarray:
    """Empirical measure as an array over the state indices of a region."""
    idx = states.index_of(orbit.points[burn_in + 1:])
    if np.any(idx < 0):
        raise OrbitEscapeError("orbit visits points outside the given state set")
    counts = np.bincount(idx, minlength=len(states)).astype(np.float64)
    return counts / counts.sum()


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def coupled_shadowing(
    maps: Sequence[AffineMap],
    probabilities: Sequence[float],
    x0: Sequence[int],
    steps: int,
    seed: int,
    g: GridSpace,
) -> ShadowingReport:
    """
    Run the exact chain x_k = w_{I_k}(x_{k-1}) and the grid chain
    x~_k = w~_{I_k}(x~_{k-1}) on one index sequence from embed(x0).

    Returns the largest d(x_k, embed(x~_k)) with the bound
    theta / (1 - lambda_max) it must respect.
    """
    factors = [contractivity(w, g.norm) for w in maps]
    lam = max(factors)
    if lam >= 1.0:
        raise NotAContractionError(f"contractivity {lam:.6g} >= 1")
    cumulative = np.cumsum(np.asarray(probabilities, dtype=np.float64))
    cumulative[-1] = 1.0
    indices = draw_indices(cumulative, generator_for(seed, 0).random(steps)).tolist()

    rounded = [roundoff_map(w, g) for w in maps]
    grid_point = np.asarray(x0, dtype=np.int64).reshape(1, g.n)
    exact = g.embed_points(grid_point)
    exact_orbit = np.empty((steps, g.n))
    grid_orbit = np.empty((steps, g.n), dtype=np.int64)
    for k, i in enumerate(indices):
        exact = maps[i](exact)
        grid_point = rounded[i].apply(grid_point)
        exact_orbit[k] = exact[0]
        grid_orbit[k] = grid_point[0]
    worst = float(np.max(g.distance(exact_orbit, g.embed_points(grid_orbit)), initial=0.0))

    bound = g.theta() / (1.0 - lam)
    logger.debug(f"Coupled shadowing over {steps} steps: max distance {worst:.6g}, bound {bound:.6g}")
    return ShadowingReport(max_distance=worst, bound=bound, steps=steps)


def absorption_time(
    d: Difs,
    ms: MarkovStructure,
    x0: Sequence[int],
    seed: int,
    max_steps: int = 1_000_000,
    stream: int = 0,
) -> int:
    """
    Steps until an orbit from x0 first enters a recurrent class.

    Raises:
        BudgetExceededError: no recurrent state reached within max_steps
    """
    start = ms.state_index(x0)
    if start < 0:
        raise OrbitEscapeError(f"start point {tuple(x0)} lies outside the classified state set")
    if ms.class_of[start] >= 0:
        return 0
    successors = d.successor_matrix(ms.states)
    rows = d.probability_rows(ms.states)
    rng = generator_for(seed, stream)
    state = start
    for step in range(1, max_steps + 1):
        cumulative = np.cumsum(rows[state])
        i = min(int(np.searchsorted(cumulative, rng.random(), side='right')), d.n_maps - 1)
        state = int(successors[state, i])
        if ms.class_of[state] >= 0:
            return step
    raise BudgetExceededError(f"orbit from {tuple(x0)} stayed transient for {max_steps} steps")
