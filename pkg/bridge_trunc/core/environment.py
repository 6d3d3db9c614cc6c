"""
The environment omega = (R_1..R_n, C_1..C_n) of uniform row / column marks
and the counting processes S, S' it induces
"""
from dataclasses import dataclass

import numpy as np

from .ensembles import check_size
from .errors import ContractError, DomainError
from .random_streams import as_generator


@dataclass(frozen=True)
class Environment:
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        cols = np.asarray(self.cols, dtype=float)
        if rows.ndim != 1 or rows.shape != cols.shape:
            raise ContractError("row and column marks must be vectors of equal length")
        check_size(rows.size)
        if rows.min() < 0 or rows.max() > 1 or cols.min() < 0 or cols.max() > 1:
            raise DomainError("environment marks must lie in [0, 1]")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @property
    def n(self) -> int:
        return self.rows.size


@dataclass(frozen=True)
class SortedEnvironment:
    """
    Order statistics of the marks. `row_order[i]` is sigma^{-1}(i), the index
    of the i-th smallest row mark (0-based), and likewise for columns.
    """

    rows_sorted: np.ndarray
    cols_sorted: np.ndarray
    row_order: np.ndarray
    col_order: np.ndarray

    @property
    def row_rank(self) -> np.ndarray:
        """sigma: rank of each row mark"""
        return np.argsort(self.row_order)

    @property
    def col_rank(self) -> np.ndarray:
        return np.argsort(self.col_order)


def sample_environment(n: int, rng) -> Environment:
    n = check_size(n)
    gen = as_generator(rng)
    rows = gen.random(n)
    cols = gen.random(n)
    return Environment(rows, cols)


def sort_environment(env: Environment) -> SortedEnvironment:
    # stable sort: ties (measure zero) are broken by index
    row_order = np.argsort(env.rows, kind="stable")
    col_order = np.argsort(env.cols, kind="stable")
    return SortedEnvironment(env.rows[row_order], env.cols[col_order], row_order, col_order)


def _check_level(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s > 1) or np.any(np.isnan(s)):
        raise DomainError(f"level must lie in [0, 1], got {s}")
    return s


def counting(marks, s):
    """S_s = #{i : marks_i <= s}; vectorized over s"""
    s = _check_level(s)
    sorted_marks = np.sort(np.asarray(marks, dtype=float))
    counts = np.searchsorted(sorted_marks, s, side="right")
    return int(counts) if counts.ndim == 0 else counts


def counts_on_levels(sorted_marks: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Counting process read off already sorted marks"""
    return np.searchsorted(sorted_marks, levels, side="right")


def normalized_counting(marks, s):
    """n^{-1/2} (S_s - n s)"""
    s = _check_level(s)
    n = np.asarray(marks).size
    value = (np.asarray(counting(marks, s), dtype=float) - n * s) / np.sqrt(n)
    return float(value) if value.ndim == 0 else value


def product_count_variance(n: int, s: float, t: float) -> float:
    """
    Exact Var(S_s S'_t / n) for independent Binomial(n, s), Binomial(n, t):
    n (s^2 t(1-t) + t^2 s(1-s)) + s t (1-s)(1-t)
    """
    n = check_size(n)
    s, t = float(_check_level(s)), float(_check_level(t))
    return n * (s * s * t * (1 - t) + t * t * s * (1 - s)) + s * t * (1 - s) * (1 - t)
