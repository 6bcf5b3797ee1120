"""
Affine maps w(x) = Lx + t on R^n.

Provides fixed points, contractivity factors for the three supported
norms, and the translation/scaling operations under which minimal
absorbing sets transform equivariantly:

    (w + t)(x) = w(x - t) + t
    (alpha w)(x) = alpha * w(x / alpha)
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from grid.lattice import EUCLIDEAN, MANHATTAN, MAXIMUM, NORMS
from PyDIFS.exceptions import DimensionMismatchError, InvalidInputError, NoUniqueFixedPointError

logger = logging.getLogger(__name__)

FIXED_POINT_TOLERANCE = 1e-12


class AffineMap:
    """
    Affine map x -> Lx + t.

    The matrix and translation are stored as read-only float64 arrays;
    two maps compare equal when both arrays are bit-for-bit identical.
    """

    def __init__(self, matrix, translation):
        L = np.array(matrix, dtype=np.float64)
        t = np.array(translation, dtype=np.float64).reshape(-1)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise DimensionMismatchError(f"linear part must be a square matrix, got shape {L.shape}")
        if L.shape[0] != t.size:
            raise DimensionMismatchError(
                f"linear part is {L.shape[0]}x{L.shape[1]} but the translation has {t.size} entries"
            )
        if not (np.all(np.isfinite(L)) and np.all(np.isfinite(t))):
            raise InvalidInputError("affine map coefficients must be finite")
        L.setflags(write=False)
        t.setflags(write=False)
        self.matrix = L
        self.translation = t

    @property
    def dimension(self) -> int:
        return int(self.translation.size)

    def __call__(self, x) -> np.ndarray:
        """Apply the map to one point (n,) or a batch (k, n)."""
        x = np.asarray(x, dtype=np.float64)
        return x @ self.matrix.T + self.translation

    def __eq__(self, other) -> bool:
        if not isinstance(other, AffineMap):
            return NotImplemented
        return (
            self.matrix.shape == other.matrix.shape
            and self.matrix.tobytes() == other.matrix.tobytes()
            and self.translation.tobytes() == other.translation.tobytes()
        )

    def __hash__(self):
        return hash((self.matrix.tobytes(), self.translation.tobytes()))

    def __repr__(self) -> str:
        return f"AffineMap(matrix={self.matrix.tolist()}, translation={self.translation.tolist()})"

    def fixed_point(self) -> np.ndarray:
        return fixed_point(self)

    def contractivity(self, norm: str = EUCLIDEAN) -> float:
        return contractivity(self, norm)

    def compose(self, other: 'AffineMap') -> 'AffineMap':
        """self after other: x -> self(other(x))."""
        if other.dimension != self.dimension:
            raise DimensionMismatchError("cannot compose maps of different dimension")
        return AffineMap(self.matrix @ other.matrix, self.matrix @ other.translation + self.translation)


def fixed_point(w: AffineMap) -> np.ndarray:
    """
    Solve (I - L) x_f = t.

    Raises:
        NoUniqueFixedPointError: when I - L is singular
    """
    n = w.dimension
    system = np.eye(n) - w.matrix
    try:
        x_f = np.linalg.solve(system, w.translation)
    except np.linalg.LinAlgError as exc:
        raise NoUniqueFixedPointError(f"I - L is singular for {w!r}") from exc
    residual = float(np.linalg.norm(w(x_f) - x_f))
    if not np.all(np.isfinite(x_f)) or residual > FIXED_POINT_TOLERANCE * (1.0 + float(np.linalg.norm(x_f))):
        raise NoUniqueFixedPointError(
            f"fixed point solve for {w!r} left residual {residual:.3e}; I - L is numerically singular"
        )
    return x_f


def singular_values_2x2(L: np.ndarray):
    """
    Closed-form singular values of a 2x2 matrix.

    With E=(a+d)/2, F=(a-d)/2, G=(c+b)/2, H=(c-b)/2 the singular values are
    Q+R and |Q-R| where Q=hypot(E, H) and R=hypot(F, G).
    """
    a, b = float(L[0, 0]), float(L[0, 1])
    c, d = float(L[1, 0]), float(L[1, 1])
    q = math.hypot((a + d) / 2.0, (c - b) / 2.0)
    r = math.hypot((a - d) / 2.0, (c + b) / 2.0)
    return q + r, abs(q - r)


def contractivity(w: AffineMap, norm: str = EUCLIDEAN) -> float:
    """
    Lipschitz constant of w under the given norm.

    euclidean -> largest singular value of L; maximum -> largest absolute
    row sum; manhattan -> largest absolute column sum.
    """
    L = w.matrix
    if norm == EUCLIDEAN:
        if L.shape == (2, 2):
            return singular_values_2x2(L)[0]
        return float(np.linalg.svd(L, compute_uv=False)[0])
    if norm == MAXIMUM:
        return float(np.max(np.sum(np.abs(L), axis=1)))
    if norm == MANHATTAN:
        return float(np.max(np.sum(np.abs(L), axis=0)))
    raise InvalidInputError(f"Unknown norm '{norm}'; expected one of {', '.join(NORMS)}")


def translate_map(w: AffineMap, t: Sequence[float]) -> AffineMap:
    """The map x -> w(x - t) + t; same linear part, fixed point shifted by t."""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if t.size != w.dimension:
        raise DimensionMismatchError(f"shift has {t.size} entries for a map of dimension {w.dimension}")
    if not np.any(t):
        return AffineMap(w.matrix, w.translation)
    return AffineMap(w.matrix, w.translation + t - w.matrix @ t)


def scale_map(w: AffineMap, alpha: float) -> AffineMap:
    """The map x -> alpha * w(x / alpha); same linear part, fixed point scaled by alpha."""
    if alpha == 0 or not math.isfinite(alpha):
        raise InvalidInputError(f"scaling factor must be finite and nonzero, got {alpha}")
    return AffineMap(w.matrix, alpha * w.translation)


def from_fixed_point(L, x_f: Sequence[float]) -> AffineMap:
    """Affine map with linear part L and fixed point x_f: t = x_f - L x_f."""
    L = np.asarray(L, dtype=np.float64)
    x_f = np.asarray(x_f, dtype=np.float64).reshape(-1)
    return AffineMap(L, x_f - L @ x_f)


def rotation(radians: float) -> np.ndarray:
    c, s = math.cos(radians), math.sin(radians)
    return np.array([[c, -s], [s, c]])


def similarity(scale: float, degrees: float, fixed_point: Optional[Sequence[float]] = None) -> AffineMap:
    """Planar similarity scale*R(degrees) about a fixed point (origin by default)."""
    L = scale * rotation(math.radians(degrees))
    return from_fixed_point(L, fixed_point if fixed_point is not None else (0.0, 0.0))
