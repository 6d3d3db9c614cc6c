"""
Limit processes: closed-form covariance kernels and grid samplers
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cholesky

from ..config import settings
from .errors import DomainError, NumericalError
from .processes import Grid, GridPath, PathKind
from .random_streams import as_generator

logger = logging.getLogger(__name__)

Point = Tuple[float, float]


class KernelKind(str, Enum):
    BRIDGE_B0 = "B0"              # one-parameter Brownian bridge
    BIVARIATE_B00 = "B00"         # bivariate Brownian bridge
    TIED_DOWN_WINF = "Winf"       # tied-down bivariate bridge
    CAL_WINF = "calWinf"          # s B0(t) + t B0'(s)
    TENSOR_B0B0 = "B0xB0"         # B0(s) B0'(t), non-Gaussian

    @property
    def dimension(self) -> int:
        return 1 if self is KernelKind.BRIDGE_B0 else 2


def _check_point(p) -> Point:
    s, t = (float(p[0]), float(p[1])) if np.ndim(p) else (float(p), 0.0)
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise DomainError(f"kernel coordinates must lie in [0, 1], got {p}")
    return s, t


def _bridge(a: float, b: float) -> float:
    return min(a, b) - a * b


def _raw_kernel(kind: KernelKind, p: Point, q: Point) -> float:
    (s, t), (s2, t2) = p, q
    if kind is KernelKind.BRIDGE_B0:
        return _bridge(s, s2)
    if kind is KernelKind.BIVARIATE_B00:
        return min(s, s2) * min(t, t2) - s * s2 * t * t2
    if kind in (KernelKind.TIED_DOWN_WINF, KernelKind.TENSOR_B0B0):
        return _bridge(s, s2) * _bridge(t, t2)
    return s * s2 * min(t, t2) + min(s, s2) * t * t2 - 2 * s * s2 * t * t2


@dataclass(frozen=True)
class Kernel:
    kind: KernelKind
    prefactor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if not self.prefactor > 0:
            raise DomainError(f"kernel prefactor must be positive, got {self.prefactor}")

    @property
    def name(self) -> str:
        if self.prefactor == 1.0:
            return self.kind.value
        return f"{self.prefactor:g}*{self.kind.value}"

    def __call__(self, p, q) -> float:
        return kernel_eval(self.kind, p, q, self.prefactor)

    def matrix(self, points: Sequence) -> np.ndarray:
        return np.array([[self(p, q) for q in points] for p in points])


def kernel_eval(kind: KernelKind, p, q, prefactor: float = 1.0) -> float:
    """Covariance of the limit process at p = (s, t), q = (s', t'); 1-param kinds ignore t"""
    return prefactor * _raw_kernel(KernelKind(kind), _check_point(p), _check_point(q))


def kernel_identity_residual(p, q) -> float:
    """B00(p, q) - [Winf(p, q) + calWinf(p, q)], zero up to rounding"""
    return (kernel_eval(KernelKind.BIVARIATE_B00, p, q)
            - kernel_eval(KernelKind.TIED_DOWN_WINF, p, q)
            - kernel_eval(KernelKind.CAL_WINF, p, q))


class SamplerMethod(str, Enum):
    CONSTRUCTIVE = "constructive"
    CHOLESKY = "cholesky_on_grid"


@dataclass(frozen=True)
class LimitSampler:
    kernel: Kernel
    grid: Grid
    method: SamplerMethod = SamplerMethod.CONSTRUCTIVE

    def __post_init__(self):
        object.__setattr__(self, "method", SamplerMethod(self.method))
        if self.method is SamplerMethod.CHOLESKY and self.kernel.kind is KernelKind.TENSOR_B0B0:
            raise DomainError("B0xB0 is not Gaussian; it has no Cholesky sampler")


def default_sampler(kernel: Kernel, grid: Grid) -> LimitSampler:
    method = (SamplerMethod.CHOLESKY if kernel.kind is KernelKind.TIED_DOWN_WINF
              else SamplerMethod.CONSTRUCTIVE)
    return LimitSampler(kernel, grid, method)


def _brownian_motion(gen: np.random.Generator, m: int) -> np.ndarray:
    increments = gen.normal(0.0, np.sqrt(1.0 / m), size=m)
    return np.concatenate([[0.0], increments.cumsum()])


def _brownian_bridge(gen: np.random.Generator, grid: Grid) -> np.ndarray:
    motion = _brownian_motion(gen, grid.m)
    bridge = motion - grid.levels * motion[-1]
    bridge[-1] = 0.0
    return bridge


def _brownian_sheet(gen: np.random.Generator, m: int) -> np.ndarray:
    sheet = np.zeros((m + 1, m + 1))
    sheet[1:, 1:] = gen.normal(0.0, 1.0 / m, size=(m, m)).cumsum(axis=0).cumsum(axis=1)
    return sheet


def _constructive(kind: KernelKind, grid: Grid, gen: np.random.Generator) -> np.ndarray:
    levels = grid.levels
    if kind is KernelKind.BRIDGE_B0:
        return _brownian_bridge(gen, grid)
    if kind is KernelKind.CAL_WINF:
        b_t = _brownian_bridge(gen, grid)
        b_s = _brownian_bridge(gen, grid)
        return np.outer(levels, b_t) + np.outer(b_s, levels)
    if kind is KernelKind.TENSOR_B0B0:
        return np.outer(_brownian_bridge(gen, grid), _brownian_bridge(gen, grid))

    sheet = _brownian_sheet(gen, grid.m)
    corner = sheet[-1, -1]
    if kind is KernelKind.BIVARIATE_B00:
        values = sheet - np.outer(levels, levels) * corner
    else:
        # pinned sheet: W(s,t) - s W(1,t) - t W(s,1) + s t W(1,1)
        values = (sheet - levels[:, None] * sheet[-1][None, :]
                  - levels[None, :] * sheet[:, -1][:, None]
                  + np.outer(levels, levels) * corner)
    values[0, :] = 0.0
    values[:, 0] = 0.0
    return values


def _grid_points(grid: Grid, dimension: int):
    levels = grid.levels
    if dimension == 1:
        return [(s, 0.0) for s in levels]
    return [(s, t) for s in levels for t in levels]


@lru_cache(maxsize=32)
def _cholesky_factor(kernel: Kernel, m: int):
    """Factor of the covariance on the grid points with nonzero variance"""
    grid = Grid(m)
    points = _grid_points(grid, kernel.kind.dimension)
    diagonal = np.array([kernel(p, p) for p in points])
    free = np.flatnonzero(diagonal > 1e-15)
    covariance = kernel.matrix([points[i] for i in free])
    covariance += settings.cholesky_jitter * np.eye(free.size)
    try:
        factor = cholesky(covariance, lower=True)
    except LinAlgError as e:
        raise NumericalError(f"covariance of {kernel.name} on m={m} grid is not positive definite: {e}")
    factor.setflags(write=False)
    logger.info(f"Cholesky factor of {kernel.name} on m={m}: {free.size} free points")
    return free, factor


def sample_limit_path(sampler: LimitSampler, rng) -> GridPath:
    gen = as_generator(rng)
    grid = sampler.grid
    kind = sampler.kernel.kind
    shape = (grid.m + 1,) if kind.dimension == 1 else (grid.m + 1, grid.m + 1)

    if sampler.method is SamplerMethod.CONSTRUCTIVE:
        values = _constructive(kind, grid, gen) * np.sqrt(sampler.kernel.prefactor)
    else:
        free, factor = _cholesky_factor(sampler.kernel, grid.m)
        flat = np.zeros(int(np.prod(shape)))
        flat[free] = factor @ gen.standard_normal(free.size)
        values = flat.reshape(shape)
    return GridPath(values, grid, PathKind.LIMIT, n=0)
