"""
Monte Carlo statistics of minimal absorbing sets of random contractions.

Every sample is drawn on the unit grid (delta = 1) with its fixed point in
the cube C_1(0); one cube at one spacing represents every spacing, since
translation by lattice vectors and rescaling map minimal absorbing sets
onto each other exactly.

Two conditionings are supported:

    lambda_cap_sweep  max(lambda_1, lambda_2) <= s, signed, by rejection
                      from U(-cap, cap); X_f uniform on C_1(0)
    distance_sweep    d_inf(X_f, 0) = d, X_f uniform on that square's
                      perimeter, lambda_i ~ U(-cap, cap)

In both, cap bounds the contractivity of every sample (0.95 by default):
close to 1 the trap ball grows like 1 / (1 - lambda) and single samples
would dominate the run time.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, TextIO, Tuple

import numpy as np
from joblib import Parallel, delayed

from absorbing.services import mas_for_contraction
from affine.maps import AffineMap, scale_map
from affine.sampling import AFFINE, KINDS, ContractionDraw, RandomContractionSpec, draw_lambdas, generator_for
from grid.lattice import EUCLIDEAN, GridSpace
from PyDIFS.conf import difs_setting
from PyDIFS.exceptions import InvalidInputError, RejectionStallError

logger = logging.getLogger(__name__)

LAMBDA_CAP_SWEEP = 'lambda_cap_sweep'
DISTANCE_SWEEP = 'distance_sweep'
CONDITIONINGS = (LAMBDA_CAP_SWEEP, DISTANCE_SWEEP)

DEFAULT_LAMBDA_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))
DEFAULT_DISTANCE_GRID = tuple(round(0.025 * k, 3) for k in range(0, 21))

CSV_HEADER = [
    'kind', 'conditioning', 'param',
    'p_nonsingleton', 'se1', 'p_multicomponent', 'se2', 'e_components', 'se3', 'n',
]

UNIT_GRID = GridSpace(2, 1.0, EUCLIDEAN)


@dataclass(frozen=True)
class SweepConfig:
    kind: str = AFFINE
    conditioning: str = LAMBDA_CAP_SWEEP
    parameter_grid: Tuple[float, ...] = DEFAULT_LAMBDA_GRID
    samples_per_point: int = 20000
    lambda_cap_for_distance_sweep: float = 0.95
    contractivity_cap: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"kind must be one of {', '.join(KINDS)}, got '{self.kind}'")
        if self.conditioning not in CONDITIONINGS:
            raise InvalidInputError(
                f"conditioning must be one of {', '.join(CONDITIONINGS)}, got '{self.conditioning}'"
            )
        if self.samples_per_point < 1:
            raise InvalidInputError(f"samples_per_point must be >= 1, got {self.samples_per_point}")
        if not self.parameter_grid:
            raise InvalidInputError("parameter_grid must hold at least one value")
        object.__setattr__(self, 'parameter_grid', tuple(float(v) for v in self.parameter_grid))
        if self.conditioning == LAMBDA_CAP_SWEEP:
            if any(not (0.0 <= s < 1.0) for s in self.parameter_grid):
                raise InvalidInputError("lambda caps s must lie in [0, 1)")
            if not (0.0 < self.contractivity_cap <= 1.0):
                raise InvalidInputError("contractivity_cap must lie in (0, 1]")
        else:
            if any(not (0.0 <= d <= 0.5) for d in self.parameter_grid):
                raise InvalidInputError("fixed point distances d must lie in [0, 0.5]")
            if not (0.0 < self.lambda_cap_for_distance_sweep <= 1.0):
                raise InvalidInputError("lambda_cap_for_distance_sweep must lie in (0, 1]")


@dataclass
class SweepPoint:
    """Aggregated counts for one parameter value."""
    param: float
    n: int
    nonsingleton: int
    multicomponent: int
    component_total: int
    component_sq_total: int

    @property
    def p_nonsingleton(self) -> float:
        return self.nonsingleton / self.n

    @property
    def se_nonsingleton(self) -> float:
        return binomial_standard_error(self.p_nonsingleton, self.n)

    @property
    def p_multicomponent(self) -> float:
        return self.multicomponent / self.n

    @property
    def se_multicomponent(self) -> float:
        return binomial_standard_error(self.p_multicomponent, self.n)

    @property
    def expected_components(self) -> float:
        return self.component_total / self.n

    @property
    def se_components(self) -> float:
        if self.n < 2:
            return 0.0
        mean = self.expected_components
        variance = (self.component_sq_total - self.n * mean * mean) / (self.n - 1)
        return math.sqrt(max(variance, 0.0) / self.n)

    @classmethod
    def from_outcomes(cls, param: float, outcomes: np.ndarray) -> 'SweepPoint':
        """outcomes: int array (n, 2) of (cardinality, component count) per sample."""
        cardinality = outcomes[:, 0]
        components = outcomes[:, 1].astype(np.int64)
        return cls(
            param=param,
            n=int(outcomes.shape[0]),
            nonsingleton=int(np.count_nonzero(cardinality > 1)),
            multicomponent=int(np.count_nonzero(components > 1)),
            component_total=int(components.sum()),
            component_sq_total=int(np.sum(components * components)),
        )


@dataclass
class SweepResult:
    config: SweepConfig
    points: List[SweepPoint] = field(default_factory=list)

    def point_for(self, param: float) -> SweepPoint:
        for point in self.points:
            if math.isclose(point.param, param, rel_tol=0.0, abs_tol=1e-12):
                return point
        raise KeyError(f"no sweep point for parameter {param}")


@dataclass(frozen=True)
class TrendReport:
    slope: float
    intercept: float
    level: float
    params: Tuple[float, ...]

    def as_text(self, label: str = '') -> str:
        prefix = f"{label}: " if label else ''
        return (
            f"{prefix}E(components | d) ~ {self.intercept:.6f} + {self.slope:.6f} d "
            f"over d in [{min(self.params):g}, {max(self.params):g}]; trend level {self.level:.6f}"
        )


def binomial_standard_error(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def perimeter_point(u: float, d: float) -> Tuple[float, float]:
    """
    Point of the square {d_inf(x, 0) = d} at arc length u in [0, 8d).

    Sides are walked counterclockwise starting from the bottom edge.
    """
    if d == 0.0:
        return 0.0, 0.0
    side = min(int(u // (2.0 * d)), 3)
    offset = u - side * 2.0 * d - d
    if side == 0:
        return offset, -d
    if side == 1:
        return d, offset
    if side == 2:
        return -offset, d
    return -d, -offset


def conditioned_draw(cfg: SweepConfig, param_index: int, sample_index: int) -> ContractionDraw:
    """
    Parameters of sample number sample_index at parameter value number param_index.

    The generator is keyed by (seed, param_index, sample_index), so every
    sample is reproducible on its own.
    """
    rng = generator_for(cfg.seed, param_index, sample_index)
    param = cfg.parameter_grid[param_index]
    alpha, beta = rng.uniform(0.0, 2.0 * math.pi, size=2)

    if cfg.conditioning == LAMBDA_CAP_SWEEP:
        capped = RandomContractionSpec(kind=cfg.kind, lambda_cap=cfg.contractivity_cap)
        limit = difs_setting('MAX_REJECTION_ATTEMPTS')
        for _ in range(limit):
            lambdas = draw_lambdas(capped, rng)
            if max(lambdas) <= param:
                break
        else:
            raise RejectionStallError(f"no sample with max(lambda_1, lambda_2) <= {param} in {limit} attempts")
        fixed = (float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5)))
    else:
        capped = RandomContractionSpec(kind=cfg.kind, lambda_cap=cfg.lambda_cap_for_distance_sweep)
        lambdas = draw_lambdas(capped, rng)
        fixed = perimeter_point(float(rng.uniform(0.0, 8.0 * param)), param)

    return ContractionDraw(float(alpha), float(beta), lambdas, fixed)


def mas_outcome(w: AffineMap) -> Tuple[int, int]:
    mas = mas_for_contraction(w, UNIT_GRID)
    return mas.cardinality, mas.component_count


def sweep_chunk(cfg: SweepConfig, param_index: int, start: int, stop: int) -> np.ndarray:
    """(cardinality, component count) for samples start..stop-1 of one parameter value."""
    outcomes = np.empty((stop - start, 2), dtype=np.int64)
    for row, sample_index in enumerate(range(start, stop)):
        outcomes[row] = mas_outcome(conditioned_draw(cfg, param_index, sample_index).to_map())
    return outcomes


def run_sweep(cfg: SweepConfig, n_jobs: Optional[int] = None, chunk_size: int = 500) -> SweepResult:
    """
    Estimate P(cardinality > 1), P(components > 1) and E(components)
    for every parameter value.

    Work is split into (parameter, chunk) items keyed deterministically;
    results are reduced in submission order, so the outcome does not
    depend on n_jobs.
    """
    workers = n_jobs if n_jobs is not None else (difs_setting('DEFAULT_THREADS') or -1)
    items = [
        (param_index, start, min(start + chunk_size, cfg.samples_per_point))
        for param_index in range(len(cfg.parameter_grid))
        for start in range(0, cfg.samples_per_point, chunk_size)
    ]
    logger.info(
        f"Starting {cfg.kind} {cfg.conditioning}: {len(cfg.parameter_grid)} values x "
        f"{cfg.samples_per_point} samples in {len(items)} chunks (n_jobs={workers})"
    )
    if workers == 1:
        chunks = [sweep_chunk(cfg, *item) for item in items]
    else:
        chunks = Parallel(n_jobs=workers)(delayed(sweep_chunk)(cfg, *item) for item in items)

    result = SweepResult(config=cfg)
    for param_index, param in enumerate(cfg.parameter_grid):
        outcomes = np.concatenate([chunk for item, chunk in zip(items, chunks) if item[0] == param_index])
        point = SweepPoint.from_outcomes(param, outcomes)
        result.points.append(point)
        logger.debug(
            f"{cfg.conditioning} {param:g}: P(nonsingleton)={point.p_nonsingleton:.4f} "
            f"E(components)={point.expected_components:.4f}"
        )
    logger.info(f"Finished {cfg.kind} {cfg.conditioning} sweep")
    return result


def expected_components_summary(result: SweepResult) -> TrendReport:
    """
    Least-squares line through E(components | param).

    The level is the mean of the fitted line over the swept values, which
    for a least-squares fit equals the mean of the estimates.
    """
    params = np.array([p.param for p in result.points], dtype=np.float64)
    values = np.array([p.expected_components for p in result.points], dtype=np.float64)
    if params.size < 2 or np.ptp(params) == 0.0:
        slope, intercept = 0.0, float(values.mean())
    else:
        slope, intercept = (float(v) for v in np.polyfit(params, values, 1))
    level = float(np.mean(intercept + slope * params))
    return TrendReport(slope=slope, intercept=intercept, level=level, params=tuple(params.tolist()))


def delta_invariance_check(
    w: AffineMap, delta1: float, delta2: float, norm: str = EUCLIDEAN, rescale: bool = True
) -> bool:
    """
    Compare the multi-index structure of MAS(w) on the delta1 grid with
    MAS(alpha w) on the delta2 grid, alpha = delta2 / delta1.

    With rescale=False the second MAS is taken of w itself, which in
    general breaks the correspondence.
    """
    original = mas_for_contraction(w, GridSpace(w.dimension, delta1, norm))
    scaled_map = scale_map(w, delta2 / delta1) if rescale else w
    scaled = mas_for_contraction(scaled_map, GridSpace(w.dimension, delta2, norm))
    return original.structure() == scaled.structure()


def format_float(value: float) -> str:
    return repr(float(value))


def sweep_rows(result: SweepResult) -> List[List[str]]:
    cfg = result.config
    return [
        [
            cfg.kind,
            cfg.conditioning,
            format_float(point.param),
            format_float(point.p_nonsingleton),
            format_float(point.se_nonsingleton),
            format_float(point.p_multicomponent),
            format_float(point.se_multicomponent),
            format_float(point.expected_components),
            format_float(point.se_components),
            str(point.n),
        ]
        for point in result.points
    ]


def write_sweep_csv(results: Sequence[SweepResult], stream: TextIO):
    """Write one header row and one row per parameter value of every result."""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for result in results:
        writer.writerows(sweep_rows(result))
