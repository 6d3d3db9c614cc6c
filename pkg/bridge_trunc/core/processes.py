"""
Truncation statistics as paths on a uniform (s, t) grid

All two-parameter truncation sums are read off a 2-D prefix grid of the
(possibly row/column permuted) weight matrix; permutation matrices use the
sparse sigma representation and bucket counts instead.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..config import settings
from .ensembles import WeightMatrix, _is_permutation, check_size
from .environment import Environment, counts_on_levels, sort_environment
from .errors import ContractError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    """Levels s_k = k/m, k = 0..m"""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"grid size m must be a positive integer, got {self.m!r}")

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.m + 1) / self.m

    def floor_indices(self, n: int) -> np.ndarray:
        """floor(n k / m) in exact integer arithmetic"""
        return (n * np.arange(self.m + 1)) // self.m

    def index_of(self, s: float) -> int:
        k = int(round(s * self.m))
        if not 0 <= k <= self.m or abs(k / self.m - s) > 1e-9:
            raise DomainError(f"level {s} is not a point of the grid with m={self.m}")
        return k


class PathKind(str, Enum):
    BRIDGE_DET = "B"           # B(s)
    BRIDGE_RAND = "calB"       # random one-parameter truncation
    TRUNC_DET = "T"            # deterministic truncation
    TRUNC_RAND = "calT"        # random truncation
    TRUNC_SUB = "That"         # subordinated deterministic truncation
    V_PROCESS = "V"            # calT - S (x) S' / n
    COPULA = "X"               # two-parameter empirical process
    LIMIT = "limit"            # sampled limit process


class Centering(str, Enum):
    NONE = "none"
    ANNEALED_MEAN = "annealed_mean"              # s, or n s t
    DETERMINISTIC_MEAN = "deterministic_mean"    # floor(ns)/n, or floor(ns) floor(nt)/n
    CONDITIONAL_MEAN = "conditional_mean"        # S/n, or S (x) S' / n


class Scale(str, Enum):
    ONE = "one"
    SQRT_N = "sqrt_n"
    INV_SQRT_N = "inv_sqrt_n"


_ALLOWED_CENTERINGS = {
    PathKind.BRIDGE_DET: {Centering.ANNEALED_MEAN, Centering.DETERMINISTIC_MEAN},
    PathKind.BRIDGE_RAND: {Centering.ANNEALED_MEAN, Centering.CONDITIONAL_MEAN},
    PathKind.TRUNC_DET: {Centering.DETERMINISTIC_MEAN},
    PathKind.TRUNC_RAND: {Centering.ANNEALED_MEAN, Centering.CONDITIONAL_MEAN},
    PathKind.TRUNC_SUB: {Centering.ANNEALED_MEAN, Centering.CONDITIONAL_MEAN},
}


@dataclass(frozen=True)
class GridPath:
    """
    A process sampled on the grid: shape (m+1,) for one-parameter paths,
    (m+1, m+1) with values[k, l] at (s_k, t_l) for two-parameter paths.
    Paths built from an environment carry its counts S, S' on the grid.
    """

    values: np.ndarray
    grid: Grid
    kind: PathKind
    n: int
    centering: Centering = Centering.NONE
    scale: Scale = Scale.ONE
    row_counts: Optional[np.ndarray] = None
    col_counts: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def label(self) -> str:
        return f"{self.kind.value}[centering={self.centering.value},scale={self.scale.value}]"

    def at(self, s: float, t: Optional[float] = None) -> float:
        k = self.grid.index_of(s)
        if self.dimension == 1:
            return float(self.values[k])
        return float(self.values[k, self.grid.index_of(t)])

    def to_frame(self) -> pd.DataFrame:
        levels = self.grid.levels
        if self.dimension == 1:
            return pd.DataFrame({"s": levels, "value": self.values})
        s, t = np.meshgrid(levels, levels, indexing="ij")
        return pd.DataFrame({"s": s.ravel(), "t": t.ravel(), "value": self.values.ravel()})

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


@dataclass(frozen=True)
class PrefixGrid:
    """K[p, q] = sum_{i <= p, j <= q} w_ij, with K[0, :] = K[:, 0] = 0"""

    K: np.ndarray

    @property
    def n(self) -> int:
        return self.K.shape[0] - 1

    def read(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return self.K[np.ix_(rows, cols)]


def _kahan_cumsum(a: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    total = np.zeros(a.shape[1:])
    compensation = np.zeros(a.shape[1:])
    for k in range(a.shape[0]):
        y = a[k] - compensation
        t = total + y
        compensation = (t - total) - y
        total = t
        out[k] = total
    return np.moveaxis(out, 0, axis)


def _prefix_of(w: np.ndarray) -> PrefixGrid:
    n = w.shape[0]
    K = np.zeros((n + 1, n + 1))
    if n > settings.kahan_threshold:
        K[1:, 1:] = _kahan_cumsum(_kahan_cumsum(w, 0), 1)
    else:
        K[1:, 1:] = w.cumsum(axis=0).cumsum(axis=1)
    return PrefixGrid(K)


def prefix_grid(weights: WeightMatrix) -> PrefixGrid:
    return _prefix_of(weights.w)


def _box_counts(row_bucket: np.ndarray, col_bucket: np.ndarray, m: int,
                weights: Optional[np.ndarray] = None) -> np.ndarray:
    """
    values[k, l] = total weight of items with row_bucket <= k and
    col_bucket <= l; O(items + m^2).
    """
    flat = row_bucket * (m + 1) + col_bucket
    hist = np.bincount(flat, weights=weights, minlength=(m + 1) ** 2)
    return hist.reshape(m + 1, m + 1).cumsum(axis=0).cumsum(axis=1).astype(float)


def _check_same_size(weights: WeightMatrix, env: Environment):
    if weights.n != env.n:
        raise ContractError(f"weight matrix has n={weights.n} but environment has n={env.n}")


def _environment_counts(env: Environment, grid: Grid):
    ordered = sort_environment(env)
    levels = grid.levels
    return (ordered,
            counts_on_levels(ordered.rows_sorted, levels),
            counts_on_levels(ordered.cols_sorted, levels))


def det_truncation_path(weights: WeightMatrix, grid: Grid,
                        prefix: Optional[PrefixGrid] = None) -> GridPath:
    """T_{s,t} = sum_{i <= floor(ns), j <= floor(nt)} w_ij"""
    p = grid.floor_indices(weights.n)
    if weights.is_sparse and prefix is None:
        rows = np.arange(weights.n)
        values = _box_counts(np.searchsorted(p, rows, side="right"),
                             np.searchsorted(p, weights.sigma, side="right"), grid.m)
    else:
        prefix = prefix or prefix_grid(weights)
        values = prefix.read(p, p)
    return GridPath(values, grid, PathKind.TRUNC_DET, weights.n)


def rand_truncation_path(weights: WeightMatrix, env: Environment, grid: Grid) -> GridPath:
    """
    calT_{s,t} = sum_ij w_ij 1{R_i <= s} 1{C_j <= t}, computed by sorting the
    marks, permuting rows / columns of W accordingly and reading the prefix
    grid of the permuted matrix at (S_s, S'_t).
    """
    _check_same_size(weights, env)
    ordered, S, S_prime = _environment_counts(env, grid)
    if weights.is_sparse:
        levels = grid.levels
        values = _box_counts(np.searchsorted(levels, env.rows, side="left"),
                             np.searchsorted(levels, env.cols[weights.sigma], side="left"),
                             grid.m)
    else:
        permuted = weights.w[np.ix_(ordered.row_order, ordered.col_order)]
        values = _prefix_of(permuted).read(S, S_prime)
    return GridPath(values, grid, PathKind.TRUNC_RAND, weights.n,
                    row_counts=S, col_counts=S_prime)


def subordinated_path(weights: WeightMatrix, env: Environment, grid: Grid,
                      prefix: Optional[PrefixGrid] = None) -> GridPath:
    """That_{s,t} = T at (S_s / n, S'_t / n), read off the unpermuted prefix grid"""
    _check_same_size(weights, env)
    _, S, S_prime = _environment_counts(env, grid)
    if weights.is_sparse and prefix is None:
        rows = np.arange(weights.n)
        values = _box_counts(np.searchsorted(S, rows, side="right"),
                             np.searchsorted(S_prime, weights.sigma, side="right"), grid.m)
    else:
        prefix = prefix or prefix_grid(weights)
        values = prefix.read(S, S_prime)
    return GridPath(values, grid, PathKind.TRUNC_SUB, weights.n,
                    row_counts=S, col_counts=S_prime)


def _centered_indicators(marks: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """A[k, i] = 1{marks_i <= s_k} - s_k"""
    return (marks[None, :] <= levels[:, None]).astype(float) - levels[:, None]


def v_process_routes(weights: WeightMatrix, env: Environment,
                     grid: Grid) -> Tuple[GridPath, GridPath]:
    """
    Both forms of V:
      route A: calT - S (x) S' / n
      route B: sum_ij (w_ij - 1/n)(1{R_i <= s} - s)(1{C_j <= t} - t)
    They coincide when W is doubly stochastic.
    """
    n = weights.n
    rand = rand_truncation_path(weights, env, grid)
    S, S_prime = rand.row_counts, rand.col_counts
    route_a = rand.values - np.outer(S, S_prime) / n

    levels = grid.levels
    A = _centered_indicators(env.rows, levels)
    B = _centered_indicators(env.cols, levels)
    if weights.is_sparse:
        # (A W)[k, j] = A[k, sigma^{-1}(j)]
        AW = A[:, np.argsort(weights.sigma)]
    else:
        AW = A @ weights.w
    route_b = AW @ B.T - np.outer(A.sum(axis=1), B.sum(axis=1)) / n

    def as_path(values):
        return GridPath(values, grid, PathKind.V_PROCESS, n,
                        centering=Centering.CONDITIONAL_MEAN,
                        row_counts=S, col_counts=S_prime)

    return as_path(route_a), as_path(route_b)


def v_process(weights: WeightMatrix, env: Environment, grid: Grid,
              tol: Optional[float] = None) -> GridPath:
    """V = calT - S (x) S' / n, checked against the centered triple-product form"""
    tol = settings.route_tol if tol is None else tol
    route_a, route_b = v_process_routes(weights, env, grid)
    deviation = float(np.max(np.abs(route_a.values - route_b.values)))
    if deviation > tol:
        raise ContractError(
            f"V routes disagree by {deviation:.3e}; weight matrix is not doubly stochastic"
        )
    return route_a


def _check_column(column) -> np.ndarray:
    column = np.asarray(column, dtype=float)
    if column.ndim != 1:
        raise ContractError("weight column must be a vector")
    check_size(column.size)
    if abs(column.sum() - 1.0) > 1e-10:
        raise ContractError(f"weight column must sum to 1, sums to {column.sum():.12g}")
    return column


def det_bridge_path(column, grid: Grid) -> GridPath:
    """B_s = sum_{i <= floor(ns)} w_i"""
    column = _check_column(column)
    n = column.size
    cumulative = np.concatenate([[0.0], np.cumsum(column)])
    return GridPath(cumulative[grid.floor_indices(n)], grid, PathKind.BRIDGE_DET, n)


def rand_bridge_path(column, env: Environment, grid: Grid) -> GridPath:
    """calB_s = sum_i w_i 1{R_i <= s}"""
    column = _check_column(column)
    if column.size != env.n:
        raise ContractError(f"weight column has n={column.size} but environment has n={env.n}")
    levels = grid.levels
    buckets = np.searchsorted(levels, env.rows, side="left")
    values = np.bincount(buckets, weights=column, minlength=grid.m + 1).cumsum()
    counts = counts_on_levels(np.sort(env.rows), levels)
    return GridPath(values, grid, PathKind.BRIDGE_RAND, column.size, row_counts=counts)


def one_param_paths(column, env: Environment, grid: Grid) -> Tuple[GridPath, GridPath]:
    """(B, calB) for one weight column"""
    return det_bridge_path(column, grid), rand_bridge_path(column, env, grid)


def _mean_surface(path: GridPath, centering: Centering) -> np.ndarray:
    n = path.n
    levels = path.grid.levels
    if centering is Centering.NONE:
        return np.zeros_like(path.values)

    if centering is Centering.ANNEALED_MEAN:
        one = levels
    elif centering is Centering.DETERMINISTIC_MEAN:
        one = path.grid.floor_indices(n) / n
    else:
        if path.row_counts is None:
            raise ContractError(f"{path.kind.value} carries no environment to condition on")
        one = path.row_counts / n

    if path.dimension == 1:
        return one

    if centering is Centering.ANNEALED_MEAN:
        return n * np.outer(levels, levels)
    if centering is Centering.DETERMINISTIC_MEAN:
        p = path.grid.floor_indices(n)
        return np.outer(p, p) / n
    return np.outer(path.row_counts, path.col_counts) / n


_SCALE_FACTORS = {
    Scale.ONE: lambda n: 1.0,
    Scale.SQRT_N: lambda n: np.sqrt(n),
    Scale.INV_SQRT_N: lambda n: 1.0 / np.sqrt(n),
}


def centered_scaled(path: GridPath, centering: Centering, scale: Scale = Scale.ONE) -> GridPath:
    """scale * (path - mean), with the mean chosen by `centering`"""
    centering, scale = Centering(centering), Scale(scale)
    if path.centering is not Centering.NONE or path.scale is not Scale.ONE:
        raise ContractError(f"{path.label} is already centered or scaled")
    if centering is not Centering.NONE and centering not in _ALLOWED_CENTERINGS.get(path.kind, ()):
        raise ContractError(f"centering {centering.value} does not apply to {path.kind.value}")
    values = _SCALE_FACTORS[scale](path.n) * (path.values - _mean_surface(path, centering))
    return replace(path, values=values, centering=centering, scale=scale)


def empirical_copula_path(env: Environment, sigma, grid: Grid) -> GridPath:
    """X_n(s, t) = n^{-1/2} (sum_i 1{R_i <= s} 1{C_sigma(i) <= t} - n s t)"""
    sigma = np.asarray(sigma)
    if not _is_permutation(sigma) or sigma.size != env.n:
        raise ContractError("sigma must be a permutation of the environment's indices")
    n = env.n
    levels = grid.levels
    counts = _box_counts(np.searchsorted(levels, env.rows, side="left"),
                         np.searchsorted(levels, env.cols[sigma], side="left"), grid.m)
    values = (counts - n * np.outer(levels, levels)) / np.sqrt(n)
    return GridPath(values, grid, PathKind.COPULA, n,
                    centering=Centering.ANNEALED_MEAN, scale=Scale.INV_SQRT_N)


def annealed_decomposition(weights: WeightMatrix, env: Environment,
                           grid: Grid) -> Dict[str, np.ndarray]:
    """
    calT - n I(x)I = V + S~(x)S~' + n^{1/2}(S~(x)I + I(x)S~'), and the same
    with That and W^ = That - S(x)S'/n in place of calT and V.
    """
    n = weights.n
    levels = grid.levels
    rand = rand_truncation_path(weights, env, grid)
    sub = subordinated_path(weights, env, grid)
    S, S_prime = rand.row_counts, rand.col_counts

    s_tilde = (S - n * levels) / np.sqrt(n)
    t_tilde = (S_prime - n * levels) / np.sqrt(n)
    product = np.outer(s_tilde, t_tilde)
    linear = np.sqrt(n) * (np.outer(s_tilde, levels) + np.outer(levels, t_tilde))
    conditional = np.outer(S, S_prime) / n

    total = rand.values - n * np.outer(levels, levels)
    v = rand.values - conditional
    sub_total = sub.values - n * np.outer(levels, levels)
    w_hat = sub.values - conditional
    return {
        "total": total,
        "v": v,
        "counts_product": product,
        "counts_linear": linear,
        "residual": total - (v + product + linear),
        "subordinated_total": sub_total,
        "w_hat": w_hat,
        "subordinated_residual": sub_total - (w_hat + product + linear),
    }


def brute_force_truncation(weights: WeightMatrix, env: Environment, grid: Grid) -> np.ndarray:
    """O(n^2 m^2) masked double sum, the oracle for rand_truncation_path"""
    _check_same_size(weights, env)
    w = weights.w
    levels = grid.levels
    values = np.zeros((grid.m + 1, grid.m + 1))
    for k, s in enumerate(levels):
        row_mask = (env.rows <= s).astype(float)
        for l, t in enumerate(levels):
            col_mask = (env.cols <= t).astype(float)
            values[k, l] = row_mask @ w @ col_mask
    return values
