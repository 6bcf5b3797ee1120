"""
Random planar contractions L = U(alpha) diag(lambda_1, lambda_2) V(beta).

alpha, beta ~ U[0, 2pi); lambda_1, lambda_2 ~ U(-cap, cap) (negative values
are reflections). A similarity keeps |lambda_2| = |lambda_1| with an
independent sign, so scaled reflections are drawn as often as scaled
rotations; the fixed point X_f is uniform over a sampling box,
C_1(0) = [-1/2, 1/2)^2 by default. Every draw has its own generator keyed
by (seed, *keys), so samples can be produced in any order or on any worker.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from affine.maps import AffineMap, from_fixed_point, rotation
from PyDIFS.exceptions import InvalidInputError, UnsupportedDimensionError

logger = logging.getLogger(__name__)

AFFINE = 'affine'
SIMILARITY = 'similarity'
KINDS = (AFFINE, SIMILARITY)

UNIT_CUBE_BOX = ((-0.5, 0.5), (-0.5, 0.5))


def generator_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent PCG64 stream for a (seed, keys...) tuple."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class RandomContractionSpec:
    kind: str = AFFINE
    lambda_cap: float = 1.0
    fixed_point_box: Tuple[Tuple[float, float], ...] = field(default=UNIT_CUBE_BOX)
    seed: int = 0
    n: int = 2

    def __post_init__(self):
        if self.n != 2:
            raise UnsupportedDimensionError(f"random contractions are sampled in the plane only, got n={self.n}")
        if self.kind not in KINDS:
            raise InvalidInputError(f"contraction kind must be one of {', '.join(KINDS)}, got '{self.kind}'")
        if not (0.0 < self.lambda_cap <= 1.0):
            raise InvalidInputError(f"lambda_cap must lie in (0, 1], got {self.lambda_cap}")
        if len(self.fixed_point_box) != self.n or any(lo >= hi for lo, hi in self.fixed_point_box):
            raise InvalidInputError(f"fixed_point_box must hold {self.n} non-empty intervals")


@dataclass(frozen=True)
class ContractionDraw:
    """The random parameters behind one sampled contraction."""
    alpha: float
    beta: float
    lambdas: Tuple[float, float]
    fixed_point: Tuple[float, float]

    @property
    def linear_part(self) -> np.ndarray:
        return rotation(self.alpha) @ np.diag(self.lambdas) @ rotation(self.beta)

    @property
    def max_abs_lambda(self) -> float:
        return max(abs(self.lambdas[0]), abs(self.lambdas[1]))

    def to_map(self) -> AffineMap:
        return from_fixed_point(self.linear_part, self.fixed_point)


def draw_lambdas(spec: RandomContractionSpec, rng: np.random.Generator) -> Tuple[float, float]:
    first, second = rng.uniform(-spec.lambda_cap, spec.lambda_cap, size=2)
    if spec.kind == SIMILARITY:
        second = math.copysign(first, second)
    return float(first), float(second)


def draw_parameters(spec: RandomContractionSpec, rng: np.random.Generator) -> ContractionDraw:
    """Draw alpha, beta, lambdas and X_f from one generator, in that order."""
    alpha, beta = rng.uniform(0.0, 2.0 * math.pi, size=2)
    lambdas = draw_lambdas(spec, rng)
    fixed = tuple(float(rng.uniform(lo, hi)) for lo, hi in spec.fixed_point_box)
    return ContractionDraw(float(alpha), float(beta), lambdas, fixed)


def sample_contraction(spec: RandomContractionSpec, sample_index: int) -> AffineMap:
    """Deterministic random contraction number sample_index drawn from spec.seed."""
    return draw_parameters(spec, generator_for(spec.seed, sample_index)).to_map()
