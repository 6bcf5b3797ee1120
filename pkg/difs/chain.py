"""
Discrete IFSs with place-dependent probabilities as finite Markov chains.

A DIFS is a list of N discrete maps on the delta-grid plus strictly
positive probabilities p_i(x). Over a finite state set S mapped into
itself by every map, the chain's transition matrix has entries

    P[x, y] = sum of p_i(x) over all i with w~_i(x) = y

and S splits uniquely into transient states and closed communication
classes. Every finite closed class is positive recurrent and carries a
unique stationary distribution.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from absorbing.services import minimal_absorbing_set
from affine.maps import AffineMap, contractivity, fixed_point, from_fixed_point
from grid.lattice import DiscreteMap, GridPoint, GridSpace, LatticeRegion, lattice_ball, roundoff_map
from PyDIFS.conf import difs_setting
from PyDIFS.exceptions import (
    BoundUnavailableError,
    ConvergenceFailureError,
    DimensionMismatchError,
    InvalidInputError,
    NotAContractionError,
    RegionNotClosedError,
)

logger = logging.getLogger(__name__)

PROBABILITY_SUM_TOLERANCE = 1e-12


class ProbabilityTable:
    """
    Map-selection probabilities of a DIFS.

    Either one constant row [q_1..q_N] or one row per point of a region.
    Rows are strictly positive and sum to one; cumulative rows are kept
    for O(log N) sampling.
    """

    def __init__(self, values, region: Optional[LatticeRegion] = None):
        values = np.array(values, dtype=np.float64)
        if values.ndim == 1:
            self.region = None
        elif values.ndim == 2:
            if region is None:
                raise InvalidInputError("place-dependent probabilities need the region they are defined on")
            if values.shape[0] != len(region):
                raise DimensionMismatchError(
                    f"probability table has {values.shape[0]} rows for a region of {len(region)} points"
                )
            self.region = region
        else:
            raise InvalidInputError(f"probabilities must be a vector or a table, got {values.ndim} axes")
        if values.shape[-1] < 1:
            raise InvalidInputError("a DIFS needs at least one map")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise InvalidInputError("every probability must be strictly positive and finite")
        sums = values.sum(axis=-1)
        worst = float(np.max(np.abs(sums - 1.0)))
        if worst > PROBABILITY_SUM_TOLERANCE:
            raise InvalidInputError(f"probability rows must sum to 1 (worst deviation {worst:.3e})")
        values.setflags(write=False)
        self.values = values
        cumulative = np.cumsum(values, axis=-1)
        cumulative[..., -1] = 1.0
        cumulative.setflags(write=False)
        self.cumulative = cumulative

    @classmethod
    def uniform(cls, n_maps: int) -> 'ProbabilityTable':
        return cls(np.full(n_maps, 1.0 / n_maps))

    @property
    def is_constant(self) -> bool:
        return self.region is None

    @property
    def n_maps(self) -> int:
        return int(self.values.shape[-1])

    def rows_for(self, region: LatticeRegion) -> np.ndarray:
        """(len(region), N) probability rows for the points of a region."""
        if self.is_constant:
            return np.broadcast_to(self.values, (len(region), self.n_maps))
        idx = self.region.index_of(region.points)
        if np.any(idx < 0):
            raise InvalidInputError("state set reaches points without a probability row")
        return self.values[idx]

    def __repr__(self) -> str:
        if self.is_constant:
            return f"ProbabilityTable(constant={self.values.tolist()})"
        return f"ProbabilityTable(rows={self.values.shape[0]}, maps={self.n_maps})"


class Difs:
    """
    A discrete IFS: N maps on one grid with their probabilities.

    region is set for tabulated systems (the table's domain); affine_maps is
    set when the maps are roundoffs of affine contractions.
    """

    def __init__(
        self,
        grid: GridSpace,
        maps: Sequence[DiscreteMap],
        probabilities: ProbabilityTable,
        region: Optional[LatticeRegion] = None,
        affine_maps: Optional[Sequence[AffineMap]] = None,
    ):
        if not maps:
            raise InvalidInputError("a DIFS needs at least one map")
        if probabilities.n_maps != len(maps):
            raise DimensionMismatchError(f"{probabilities.n_maps} probabilities for {len(maps)} maps")
        for dm in maps:
            grid.check_dimension(dm.n)
        if not probabilities.is_constant and region is not None and probabilities.region != region:
            raise InvalidInputError("place-dependent probabilities must be defined on the table region")
        self.grid = grid
        self.maps = list(maps)
        self.probabilities = probabilities
        self.region = region if region is not None else probabilities.region
        self.affine_maps = list(affine_maps) if affine_maps is not None else None

    @classmethod
    def from_affine(
        cls,
        affine_maps: Sequence[AffineMap],
        g: GridSpace,
        probabilities: Optional[Sequence[float]] = None,
    ) -> 'Difs':
        """Roundoffs of affine maps with constant probabilities (uniform by default)."""
        table = ProbabilityTable(probabilities) if probabilities is not None else ProbabilityTable.uniform(len(affine_maps))
        return cls(g, [roundoff_map(w, g) for w in affine_maps], table, affine_maps=affine_maps)

    @property
    def n_maps(self) -> int:
        return len(self.maps)

    def successor_matrix(self, states: LatticeRegion) -> np.ndarray:
        """
        (len(states), N) state index of w~_i(x) for every state x and map i.

        Raises:
            RegionNotClosedError: some map leaves the state set
        """
        return np.column_stack([dm.successor_indices(states) for dm in self.maps])

    def probability_rows(self, states: LatticeRegion) -> np.ndarray:
        return self.probabilities.rows_for(states)

    def __repr__(self) -> str:
        return f"Difs(maps={self.n_maps}, delta={self.grid.delta}, probabilities={self.probabilities!r})"


@dataclass
class TransitionGraph:
    """Merged transition matrix over a closed state set."""
    states: LatticeRegion
    successors: np.ndarray
    matrix: sparse.csr_matrix

    @property
    def size(self) -> int:
        return len(self.states)


@dataclass
class MarkovStructure:
    """
    Transient/recurrent decomposition of a closed state set.

    classes[k] holds sorted state indices of the k-th recurrent class;
    classes are ordered by their smallest state. class_of[i] is the class
    of state i, or -1 for transient states.
    """
    states: LatticeRegion
    transient: np.ndarray
    classes: List[np.ndarray]
    class_of: np.ndarray
    matrix: sparse.csr_matrix = field(repr=False)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def state_index(self, p: Sequence[int]) -> int:
        return int(self.states.index_of(np.asarray(p, dtype=np.int64))[0])

    def class_points(self, k: int) -> np.ndarray:
        return self.states.points[self.classes[k]]

    def class_matrix(self, k: int) -> sparse.csr_matrix:
        idx = self.classes[k]
        return self.matrix[idx][:, idx].tocsr()

    def recurrent_mask(self) -> np.ndarray:
        return self.class_of >= 0


@dataclass
class StationaryDistribution:
    class_index: int
    states: np.ndarray
    weights: np.ndarray
    residual: float
    method: str

    def as_dict(self, region: LatticeRegion) -> Dict[GridPoint, float]:
        return {region.point(int(i)): float(w) for i, w in zip(self.states, self.weights)}

    def expectation(self, values: np.ndarray) -> float:
        """Sum of values[state] * pi(state); values is indexed by state."""
        return float(np.dot(np.asarray(values, dtype=np.float64)[self.states], self.weights))


@dataclass(frozen=True)
class AttractorBound:
    bound: int
    unique: bool
    component_counts: Tuple[Optional[int], ...]


def sierpinski_maps(centered: bool = False) -> List[AffineMap]:
    """
    Three half-scale similarities with fixed points at the vertices of an
    equilateral triangle with unit side.

    With centered set the triangle is moved so the vertex centroid sits at
    the origin, which makes the equal-weight invariant measure have zero
    mean.
    """
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
    if centered:
        vertices = vertices - vertices.mean(axis=0)
    return [from_fixed_point(0.5 * np.eye(2), v) for v in vertices]


def trap_region_difs(
    maps: Sequence[AffineMap],
    g: GridSpace,
    origin: Optional[Sequence[float]] = None,
) -> LatticeRegion:
    """
    Finite state set S = B(o, r + delta) mapped into itself by every roundoff.

    r = alpha * r_max + theta / (1 - lambda_max), alpha = (1 + lambda_max) / (1 - lambda_max),
    r_max = max_i d(x_f_i, o). The origin defaults to the centroid of the
    fixed points.

    Raises:
        NotAContractionError: some lambda_i >= 1
        RegionNotClosedError: closure check failed
    """
    if not maps:
        raise InvalidInputError("need at least one map")
    for w in maps:
        g.check_dimension(w.dimension)
    factors = [contractivity(w, g.norm) for w in maps]
    lam = max(factors)
    if lam >= 1.0:
        raise NotAContractionError(f"map {factors.index(lam)} has contractivity {lam:.6g} >= 1")
    fixed = np.array([fixed_point(w) for w in maps])
    o = fixed.mean(axis=0) if origin is None else np.asarray(origin, dtype=np.float64).reshape(g.n)
    r_max = float(np.max(g.distance(fixed, o)))
    alpha = (1.0 + lam) / (1.0 - lam)
    r = alpha * r_max + g.theta() / (1.0 - lam)
    states = lattice_ball(o, r + g.delta, g)
    for i, w in enumerate(maps):
        try:
            roundoff_map(w, g).successor_indices(states)
        except RegionNotClosedError as exc:
            raise RegionNotClosedError(f"map {i}: {exc.message}", point=exc.point, image=exc.image) from exc
    logger.debug(f"DIFS trap region: radius {r:.6g} + delta, {len(states)} states, lambda_max {lam:.6g}")
    return states


def hyperbolic_difs(
    maps: Sequence[AffineMap],
    g: GridSpace,
    probabilities: Optional[Sequence[float]] = None,
    origin: Optional[Sequence[float]] = None,
) -> Tuple[Difs, LatticeRegion]:
    """Discretized hyperbolic IFS together with its closed analysis state set."""
    return Difs.from_affine(maps, g, probabilities), trap_region_difs(maps, g, origin)


def transition_graph(d: Difs, states: LatticeRegion) -> TransitionGraph:
    """
    Directed graph x -> w~_i(x) weighted by p_i(x); parallel edges merged.

    Raises:
        RegionNotClosedError: some map leaves the state set
    """
    successors = d.successor_matrix(states)
    weights = d.probability_rows(states)
    size = len(states)
    rows = np.repeat(np.arange(size, dtype=np.int64), d.n_maps)
    matrix = sparse.coo_matrix(
        (np.ascontiguousarray(weights).ravel(), (rows, successors.ravel())), shape=(size, size)
    ).tocsr()
    matrix.sum_duplicates()
    return TransitionGraph(states=states, successors=successors, matrix=matrix)


def strongly_connected_components(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """
    Component label per node of a CSR adjacency structure.

    Tarjan's algorithm with an explicit call stack; labels are assigned in
    the order components are completed (reverse topological order).
    """
    size = len(indptr) - 1
    indptr = indptr.tolist()
    indices = indices.tolist()
    index = [-1] * size
    lowlink = [0] * size
    on_stack = [False] * size
    label = [-1] * size
    stack: List[int] = []
    counter = 0
    n_components = 0

    for root in range(size):
        if index[root] >= 0:
            continue
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        work = [(root, indptr[root])]
        while work:
            v, edge = work[-1]
            if edge < indptr[v + 1]:
                work[-1] = (v, edge + 1)
                u = indices[edge]
                if index[u] < 0:
                    index[u] = lowlink[u] = counter
                    counter += 1
                    stack.append(u)
                    on_stack[u] = True
                    work.append((u, indptr[u]))
                elif on_stack[u] and index[u] < lowlink[v]:
                    lowlink[v] = index[u]
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if lowlink[v] < lowlink[parent]:
                    lowlink[parent] = lowlink[v]
            if lowlink[v] == index[v]:
                while True:
                    u = stack.pop()
                    on_stack[u] = False
                    label[u] = n_components
                    if u == v:
                        break
                n_components += 1

    return np.asarray(label, dtype=np.int64)


def classify_graph(graph: TransitionGraph) -> MarkovStructure:
    """Recurrent classes are the strongly connected components with no leaving edge."""
    matrix = graph.matrix
    labels = strongly_connected_components(matrix.indptr, matrix.indices)
    size = graph.size
    n_components = int(labels.max()) + 1 if size else 0

    rows = np.repeat(np.arange(size, dtype=np.int64), np.diff(matrix.indptr))
    leaving = labels[rows] != labels[matrix.indices]
    closed = np.ones(n_components, dtype=bool)
    closed[np.unique(labels[rows[leaving]])] = False

    class_ids = np.flatnonzero(closed)
    members = [np.flatnonzero(labels == c) for c in class_ids]
    members.sort(key=lambda m: int(m[0]))
    class_of = np.full(size, -1, dtype=np.int64)
    for k, m in enumerate(members):
        class_of[m] = k
    transient = np.flatnonzero(class_of < 0)

    logger.debug(
        f"Classified {size} states: {len(members)} recurrent classes, {transient.size} transient, "
        f"{n_components} strongly connected components"
    )
    return MarkovStructure(
        states=graph.states, transient=transient, classes=members, class_of=class_of, matrix=matrix
    )


def classify(d: Difs, states: LatticeRegion) -> MarkovStructure:
    """Transient states and recurrent communication classes of d over a closed state set."""
    return classify_graph(transition_graph(d, states))


def stationary(
    ms: MarkovStructure,
    k: int,
    matrix: Optional[sparse.csr_matrix] = None,
) -> StationaryDistribution:
    """
    Stationary distribution of recurrent class k.

    Up to STATIONARY_DIRECT_LIMIT states the balance equations are solved
    directly with one equation replaced by sum(pi) = 1. Larger classes use
    averaged iteration x <- (x + xP) / 2, the two-term Cesaro mean of the
    chain, which converges on periodic classes as well.

    Raises:
        ConvergenceFailureError: residual above STATIONARY_TOLERANCE
    """
    if not 0 <= k < ms.class_count:
        raise InvalidInputError(f"class index {k} out of range (0..{ms.class_count - 1})")
    states = ms.classes[k]
    P = matrix if matrix is not None else ms.class_matrix(k)
    size = P.shape[0]
    tolerance = difs_setting('STATIONARY_TOLERANCE')

    if size <= difs_setting('STATIONARY_DIRECT_LIMIT'):
        method = 'direct'
        system = (P.T - sparse.identity(size, format='csr')).tolil()
        system[size - 1, :] = np.ones(size)
        rhs = np.zeros(size)
        rhs[-1] = 1.0
        pi = np.atleast_1d(spsolve(system.tocsc(), rhs))
    else:
        method = 'averaged_iteration'
        logger.warning(f"Class {k} has {size} states; using averaged iteration instead of a direct solve")
        pi = averaged_iteration(P, tolerance)

    pi = np.asarray(pi, dtype=np.float64)
    if not np.all(np.isfinite(pi)) or np.any(pi <= 0.0):
        raise ConvergenceFailureError(f"stationary solve for class {k} produced non-positive weights")
    pi = pi / pi.sum()
    residual = float(np.abs(P.T @ pi - pi).sum())
    if residual > tolerance:
        raise ConvergenceFailureError(f"stationary residual {residual:.3e} for class {k} exceeds {tolerance:.1e}")
    logger.debug(f"Stationary distribution of class {k} ({size} states, {method}): residual {residual:.3e}")
    return StationaryDistribution(class_index=k, states=states, weights=pi, residual=residual, method=method)


def averaged_iteration(P: sparse.csr_matrix, tolerance: float) -> np.ndarray:
    size = P.shape[0]
    PT = P.T.tocsr()
    x = np.full(size, 1.0 / size)
    limit = difs_setting('STATIONARY_MAX_ITERATIONS')
    for iteration in range(1, limit + 1):
        moved = PT @ x
        if float(np.abs(moved - x).sum()) <= tolerance:
            logger.debug(f"Averaged iteration converged after {iteration} steps")
            return x
        x = 0.5 * (x + moved)
    raise ConvergenceFailureError(f"averaged iteration missed residual {tolerance:.1e} after {limit} steps")


def attractor_count_bound(d: Difs, states: LatticeRegion) -> AttractorBound:
    """
    Upper bound on the number of recurrent classes from single-map MAS.

    bound = min over maps of the component count of MAS[w~_i, S]. The
    bound is tight at one (unique flag) when some MAS[w~_i, S] lies
    entirely inside one basin of some MAS[w~_j, S].

    Raises:
        BoundUnavailableError: no map maps S into itself
    """
    sets = []
    for i, dm in enumerate(d.maps):
        try:
            sets.append(minimal_absorbing_set(dm, states))
        except RegionNotClosedError:
            logger.debug(f"Map {i} does not map the state set into itself; skipped for the bound")
            sets.append(None)
    available = [mas for mas in sets if mas is not None]
    if not available:
        raise BoundUnavailableError("no map of the DIFS has a minimal absorbing set within the state set")

    bound = min(mas.component_count for mas in available)
    unique = False
    for mas_i in available:
        idx = states.index_of(np.asarray(mas_i.points, dtype=np.int64))
        for mas_j in available:
            if np.unique(mas_j.labels[idx]).size == 1:
                unique = True
                break
        if unique:
            break
    counts = tuple(mas.component_count if mas is not None else None for mas in sets)
    return AttractorBound(bound=bound, unique=unique, component_counts=counts)
