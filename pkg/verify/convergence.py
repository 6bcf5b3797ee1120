"""
Numerical checks of the convergence results for discretized hyperbolic
IFSs: recurrent classes approach the attractor in the Hausdorff metric and
their stationary measures approach the invariant measure weakly.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from affine.maps import AffineMap, contractivity, fixed_point
from affine.sampling import generator_for
from difs.chain import classify, hyperbolic_difs, stationary
from grid.lattice import EUCLIDEAN, GridSpace, euclidean_factor, vector_norm
from PyDIFS.conf import difs_setting
from PyDIFS.exceptions import BudgetExceededError, ConvergenceFailureError, InvalidInputError
from verify.attractor import FLOAT_SLACK, ReferenceAttractor, directed_distance, hausdorff, reference_attractor

logger = logging.getLogger(__name__)

POLYNOMIAL = 'polynomial'
GAUSSIAN = 'gaussian'
CLIPPED_LINEAR = 'clipped_linear'
FUNCTION_KINDS = (POLYNOMIAL, GAUSSIAN, CLIPPED_LINEAR)

ELTON_STREAM = 7
ELTON_BURN_IN = 1000


@dataclass(frozen=True)
class TestFunction:
    """
    Bounded continuous test function on R^2.

    polynomial: sum of c * x^a * y^b over terms {(a, b): c} with a + b <= 2
    gaussian: exp(-|x - center|^2 / (2 width^2))
    clipped_linear: clip(direction . x + offset, low, high)
    """
    kind: str
    name: str
    terms: Tuple[Tuple[int, int, float], ...] = ()
    center: Tuple[float, float] = (0.0, 0.0)
    width: float = 1.0
    direction: Tuple[float, float] = (1.0, 0.0)
    offset: float = 0.0
    low: float = -1.0
    high: float = 1.0

    __test__ = False

    def __post_init__(self):
        if self.kind not in FUNCTION_KINDS:
            raise InvalidInputError(f"unknown test function kind {self.kind!r}")
        if self.kind == POLYNOMIAL:
            if not self.terms:
                raise InvalidInputError("a polynomial test function needs at least one term")
            if any(a < 0 or b < 0 or a + b > 2 for a, b, _ in self.terms):
                raise InvalidInputError("polynomial test functions are limited to degree 2")
        if self.kind == GAUSSIAN and not self.width > 0.0:
            raise InvalidInputError(f"gaussian width must be positive, got {self.width}")
        if self.kind == CLIPPED_LINEAR and not self.low < self.high:
            raise InvalidInputError("clipped linear function needs low < high")

    @classmethod
    def polynomial(cls, name: str, terms: Dict[Tuple[int, int], float]) -> 'TestFunction':
        return cls(POLYNOMIAL, name, terms=tuple((a, b, float(c)) for (a, b), c in sorted(terms.items())))

    @classmethod
    def gaussian(cls, center: Sequence[float], width: float) -> 'TestFunction':
        return cls(GAUSSIAN, 'gaussian', center=(float(center[0]), float(center[1])), width=float(width))

    @classmethod
    def clipped_linear(cls, direction: Sequence[float], offset: float = 0.0,
                       low: float = -1.0, high: float = 1.0) -> 'TestFunction':
        return cls(
            CLIPPED_LINEAR, 'clipped_linear',
            direction=(float(direction[0]), float(direction[1])), offset=float(offset), low=low, high=high,
        )

    def __call__(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if p.shape[1] != 2:
            raise InvalidInputError(f"test functions act on planar points, got dimension {p.shape[1]}")
        x, y = p[:, 0], p[:, 1]
        if self.kind == POLYNOMIAL:
            values = np.zeros(p.shape[0])
            for a, b, c in self.terms:
                values = values + c * x ** a * y ** b
            return values
        if self.kind == GAUSSIAN:
            sq = (x - self.center[0]) ** 2 + (y - self.center[1]) ** 2
            return np.exp(-sq / (2.0 * self.width ** 2))
        return np.clip(self.direction[0] * x + self.direction[1] * y + self.offset, self.low, self.high)

    def lipschitz(self, radius: float) -> float:
        """Euclidean Lipschitz constant on the disc of the given radius about the origin."""
        if self.kind == POLYNOMIAL:
            return sum(abs(c) * math.hypot(a, b) * radius ** max(a + b - 1, 0) for a, b, c in self.terms)
        if self.kind == GAUSSIAN:
            return 1.0 / (self.width * math.sqrt(math.e))
        return math.hypot(*self.direction)

    def modulus(self, r: float, radius: float) -> float:
        """Bound on |f(u) - f(v)| for |u - v| <= r with u, v inside the disc of the given radius."""
        return self.lipschitz(radius) * r


NAMED_FUNCTIONS = {
    'one': TestFunction.polynomial('one', {(0, 0): 1.0}),
    'x': TestFunction.polynomial('x', {(1, 0): 1.0}),
    'y': TestFunction.polynomial('y', {(0, 1): 1.0}),
    'r2': TestFunction.polynomial('r2', {(2, 0): 1.0, (0, 2): 1.0}),
    'xy': TestFunction.polynomial('xy', {(1, 1): 1.0}),
}


def named_function(name: str) -> TestFunction:
    try:
        return NAMED_FUNCTIONS[name]
    except KeyError:
        raise InvalidInputError(f"unknown test function {name!r}; expected one of {sorted(NAMED_FUNCTIONS)}")


@dataclass(frozen=True)
class EltonEstimate:
    mean: float
    stderr: float
    steps: int
    batches: int


@dataclass(frozen=True)
class HausdorffRow:
    delta: float
    class_index: int
    class_size: int
    distance: float
    containment: float
    bound: float
    resolution: float

    @property
    def holds(self) -> bool:
        return self.distance <= self.bound + self.resolution


@dataclass
class HausdorffReport:
    rows: List[HausdorffRow]
    reference: ReferenceAttractor = field(repr=False)

    @property
    def holds(self) -> bool:
        return all(row.holds for row in self.rows)

    def worst_by_delta(self) -> List[Tuple[float, float]]:
        worst: Dict[float, float] = {}
        for row in self.rows:
            worst[row.delta] = max(worst.get(row.delta, 0.0), row.distance)
        return sorted(worst.items(), reverse=True)

    @property
    def monotone(self) -> bool:
        """
        Largest class distance shrinks as delta shrinks.

        No step may grow by more than 2 * resolution, and the finest delta
        must end strictly below the coarsest. A series that never leaves
        2 * resolution has nothing left to shrink and passes on the first
        condition alone.
        """
        series = [h for _, h in self.worst_by_delta()]
        slack = 2.0 * self.reference.resolution
        steps_ok = all(later <= earlier + slack for earlier, later in zip(series, series[1:]))
        if len(series) < 2 or max(series) <= slack:
            return steps_ok
        return steps_ok and series[-1] < series[0]


@dataclass(frozen=True)
class WeakConvergenceRow:
    delta: float
    class_size: int
    value: float
    gap: float
    tolerance: float

    @property
    def available(self) -> bool:
        return not math.isnan(self.value)


@dataclass
class WeakConvergenceReport:
    function: TestFunction
    reference: EltonEstimate
    rows: List[WeakConvergenceRow]

    @property
    def achievable(self) -> List[float]:
        return [row.delta for row in self.rows if row.available]

    @property
    def monotone(self) -> bool:
        rows = [row for row in self.rows if row.available]
        return all(b.gap <= a.gap + b.tolerance for a, b in zip(rows, rows[1:]))

    @property
    def final_within_tolerance(self) -> bool:
        rows = [row for row in self.rows if row.available]
        return bool(rows) and rows[-1].gap <= rows[-1].tolerance

    @property
    def holds(self) -> bool:
        return self.monotone and self.final_within_tolerance


def max_contractivity(maps: Sequence[AffineMap], norm: str = EUCLIDEAN) -> float:
    return max(contractivity(w, norm) for w in maps)


def reference_depth(maps: Sequence[AffineMap], target: float, norm: str = EUCLIDEAN) -> int:
    """Smallest depth whose geometric gap lambda^depth * R0 is below target, capped by REFERENCE_MAX_DEPTH."""
    lam = max_contractivity(maps, norm)
    fixed = np.array([fixed_point(w) for w in maps])
    r_max = float(np.max(vector_norm(fixed - fixed.mean(axis=0), norm)))
    start = (2.0 / (1.0 - lam)) * r_max
    cap = difs_setting('REFERENCE_MAX_DEPTH')
    if start <= target or lam == 0.0:
        return 0
    return min(cap, int(math.ceil(math.log(target / start) / math.log(lam))))


def hausdorff_rows(
    maps: Sequence[AffineMap],
    probabilities: Optional[Sequence[float]],
    g: GridSpace,
    reference: ReferenceAttractor,
) -> List[HausdorffRow]:
    d, states = hyperbolic_difs(maps, g, probabilities)
    ms = classify(d, states)
    lam = max_contractivity(maps, g.norm)
    bound = g.theta() / (1.0 - lam)
    rows = []
    for k in range(ms.class_count):
        embedded = g.embed_points(ms.class_points(k))
        rows.append(HausdorffRow(
            delta=g.delta,
            class_index=k,
            class_size=int(embedded.shape[0]),
            distance=hausdorff(embedded, reference.points, g.norm),
            containment=directed_distance(embedded, reference.points, g.norm),
            bound=bound,
            resolution=reference.resolution,
        ))
    logger.debug(f"delta={g.delta}: {ms.class_count} recurrent classes against bound {bound:.4e}")
    return rows


def check_hausdorff_bound(
    maps: Sequence[AffineMap],
    probabilities: Optional[Sequence[float]],
    g: GridSpace,
    depth: Optional[int] = None,
) -> HausdorffReport:
    """
    Hausdorff distance of every recurrent class of the discretized IFS to a
    reference attractor, with the bound theta / (1 - lambda_max) each must meet
    up to the reference resolution.
    """
    lam = max_contractivity(maps, g.norm)
    if depth is None:
        depth = reference_depth(maps, g.theta() / (1.0 - lam) / 8.0, g.norm)
    reference = reference_attractor(maps, depth, g.norm)
    report = HausdorffReport(rows=hausdorff_rows(maps, probabilities, g, reference), reference=reference)
    logger.info(
        f"Hausdorff check at delta={g.delta}: {len(report.rows)} classes, "
        f"{'all within' if report.holds else 'VIOLATES'} the bound"
    )
    return report


def check_hausdorff_convergence(
    maps: Sequence[AffineMap],
    probabilities: Optional[Sequence[float]],
    deltas: Sequence[float],
    norm: str = EUCLIDEAN,
    depth: Optional[int] = None,
    n_jobs: Optional[int] = None,
) -> HausdorffReport:
    """Hausdorff rows over a delta sweep against one reference sized for the smallest delta."""
    if not deltas:
        raise InvalidInputError("need at least one delta")
    grids = [GridSpace(maps[0].dimension, float(delta), norm) for delta in sorted(deltas, reverse=True)]
    lam = max_contractivity(maps, norm)
    if depth is None:
        depth = reference_depth(maps, grids[-1].theta() / (1.0 - lam) / 8.0, norm)
    reference = reference_attractor(maps, depth, norm)
    workers = n_jobs if n_jobs is not None else difs_setting('DEFAULT_THREADS')
    if workers == 1 or len(grids) == 1:
        chunks = [hausdorff_rows(maps, probabilities, g, reference) for g in grids]
    else:
        chunks = Parallel(n_jobs=workers if workers is not None else -1)(
            delayed(hausdorff_rows)(maps, probabilities, g, reference) for g in grids
        )
    report = HausdorffReport(rows=[row for chunk in chunks for row in chunk], reference=reference)
    logger.info(
        f"Hausdorff sweep over {len(grids)} deltas: bound {'holds' if report.holds else 'violated'}, "
        f"distance {'shrinks' if report.monotone else 'does not shrink'} with delta"
    )
    return report


def elton_average(
    maps: Sequence[AffineMap],
    probabilities: Sequence[float],
    f: TestFunction,
    steps: Optional[int] = None,
    seed: int = 0,
    batches: Optional[int] = None,
    burn_in: int = ELTON_BURN_IN,
) -> EltonEstimate:
    """
    Time average of f along the exact random iteration chain.

    The chain starts at the fixed point of the first map and discards
    burn_in steps; the standard error comes from batch means.
    """
    steps = difs_setting('ELTON_STEPS') if steps is None else int(steps)
    batches = difs_setting('ELTON_BATCHES') if batches is None else int(batches)
    if batches < 2 or steps < batches:
        raise InvalidInputError(f"need at least 2 batches and one step per batch, got {steps} steps / {batches}")
    p = np.asarray(probabilities, dtype=np.float64)
    if p.shape != (len(maps),) or np.any(p <= 0.0) or abs(float(p.sum()) - 1.0) > 1e-9:
        raise InvalidInputError("Elton averages need one positive constant probability per map, summing to 1")
    cumulative = np.cumsum(p)
    cumulative[-1] = 1.0

    rng = generator_for(seed, ELTON_STREAM)
    linear = [w.matrix.ravel().tolist() for w in maps]
    shifts = [w.translation.tolist() for w in maps]
    x, y = (float(v) for v in fixed_point(maps[0]))
    chunk = 1 << 16
    total = burn_in + steps
    values = np.empty(steps)
    filled = 0
    done = 0
    while done < total:
        size = min(chunk, total - done)
        indices = np.minimum(np.searchsorted(cumulative, rng.random(size), side='right'), len(maps) - 1)
        xs = np.empty(size)
        ys = np.empty(size)
        for k, i in enumerate(indices.tolist()):
            a, b, c, e = linear[i]
            tx, ty = shifts[i]
            x, y = a * x + b * y + tx, c * x + e * y + ty
            xs[k] = x
            ys[k] = y
        skip = max(0, burn_in - done)
        if skip < size:
            kept = f(np.column_stack([xs[skip:], ys[skip:]]))
            values[filled:filled + kept.size] = kept
            filled += kept.size
        done += size

    means = np.array([batch.mean() for batch in np.array_split(values, batches)])
    stderr = float(means.std(ddof=1) / math.sqrt(batches))
    mean = float(values.mean())
    logger.debug(f"Elton average of {f.name} over {steps} steps: {mean:.6g} +/- {stderr:.2e}")
    return EltonEstimate(mean=mean, stderr=stderr, steps=steps, batches=batches)


def stationary_value(
    maps: Sequence[AffineMap],
    probabilities: Sequence[float],
    f: TestFunction,
    g: GridSpace,
) -> Tuple[float, int]:
    """Sum of f(embed(x)) * pi(x) over the first recurrent class; NaN when the class cannot be solved."""
    try:
        d, states = hyperbolic_difs(maps, g, probabilities)
        ms = classify(d, states)
        pi = stationary(ms, 0)
    except (BudgetExceededError, ConvergenceFailureError) as exc:
        logger.warning(f"No stationary distribution at delta={g.delta}: {exc}")
        return math.nan, 0
    points = g.embed_points(ms.states.points[pi.states])
    return float(np.dot(f(points), pi.weights)), int(pi.states.size)


def check_weak_convergence(
    maps: Sequence[AffineMap],
    probabilities: Sequence[float],
    f: TestFunction,
    deltas: Sequence[float],
    steps: Optional[int] = None,
    seed: int = 0,
    n_jobs: Optional[int] = None,
) -> WeakConvergenceReport:
    """
    Compare S(delta) = sum f(x) pi_delta(x) with the Elton estimate of the
    integral of f against the invariant measure.

    Each delta gets the tolerance 3 * stderr + modulus of f over the
    shadowing radius theta / (1 - lambda_max); gaps must not grow beyond it
    as delta shrinks and the smallest delta must land within it.
    """
    if not deltas:
        raise InvalidInputError("need at least one delta")
    if maps[0].dimension != 2:
        raise InvalidInputError("weak convergence checks use planar test functions")
    ordered = sorted((float(v) for v in deltas), reverse=True)
    grids = [GridSpace(2, delta, EUCLIDEAN) for delta in ordered]
    reference = elton_average(maps, probabilities, f, steps=steps, seed=seed)

    workers = n_jobs if n_jobs is not None else difs_setting('DEFAULT_THREADS')
    if workers == 1 or len(grids) == 1:
        results = [stationary_value(maps, probabilities, f, g) for g in grids]
    else:
        results = Parallel(n_jobs=workers if workers is not None else -1)(
            delayed(stationary_value)(maps, probabilities, f, g) for g in grids
        )

    lam = max_contractivity(maps, EUCLIDEAN)
    fixed = np.array([fixed_point(w) for w in maps])
    # A_inf lies in the ball about the fixed point centroid o of radius alpha * r_max
    centroid = fixed.mean(axis=0)
    r_max = float(np.max(np.linalg.norm(fixed - centroid, axis=1)))
    radius = float(np.linalg.norm(centroid)) + r_max * (1.0 + lam) / (1.0 - lam)
    rows = []
    for g, (value, size) in zip(grids, results):
        shadow = g.theta() * euclidean_factor(g.norm, g.n) / (1.0 - lam)
        tolerance = 3.0 * reference.stderr + f.modulus(shadow, radius + shadow) + FLOAT_SLACK
        gap = abs(value - reference.mean) if not math.isnan(value) else math.nan
        rows.append(WeakConvergenceRow(delta=g.delta, class_size=size, value=value, gap=gap, tolerance=tolerance))

    report = WeakConvergenceReport(function=f, reference=reference, rows=rows)
    if len(report.achievable) < len(rows):
        logger.warning(f"Stationary solves succeeded for delta in {report.achievable} only")
    logger.info(
        f"Weak convergence of {f.name}: reference {reference.mean:.6g} +/- {reference.stderr:.2e}, "
        f"{'holds' if report.holds else 'fails'}"
    )
    return report
