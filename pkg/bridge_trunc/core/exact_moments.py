"""
Exact finite-n moments of the weight entries and the covariances they induce

Verdicts compare against these values rather than the n -> infinity kernels,
so the O(1/n) bias of the limit never enters a pass/fail decision.
"""
from dataclasses import dataclass

import numpy as np

from .ensembles import EnsembleKind, beta_prime, check_size
from .errors import DomainError


def beta_moment(beta_prime_value: float, n: int, k: int) -> float:
    """
    E w^k for w ~ Beta(beta', (n-1) beta'), the law of |U_11|^2:
    prod_{r<k} (beta' + r) / (n beta' + r)
    """
    n = check_size(n)
    if not beta_prime_value > 0:
        raise DomainError(f"beta' must be positive, got {beta_prime_value}")
    a, total = beta_prime_value, n * beta_prime_value
    return float(np.prod([(a + r) / (total + r) for r in range(k)]))


@dataclass(frozen=True)
class EntryMoments:
    """
    Cov(w_ij, w_kl) by equality pattern:
      var      (i, j) == (k, l)
      row_cov  exactly one of i == k, j == l
      off_cov  i != k and j != l
    """

    var: float
    row_cov: float
    off_cov: float


def entry_moments(kind: EnsembleKind, n: int) -> EntryMoments:
    kind = EnsembleKind(kind)
    n = check_size(n)
    mean_sq = 1.0 / n ** 2
    if kind is EnsembleKind.DFT:
        return EntryMoments(0.0, 0.0, 0.0)
    if n == 1:
        return EntryMoments(0.0, 0.0, 0.0)
    if kind is EnsembleKind.PERMUTATION:
        return EntryMoments(1.0 / n - mean_sq, -mean_sq, 1.0 / (n * n * (n - 1)))

    b = beta_prime(kind)
    second = beta_moment(b, n, 2)
    # Dirichlet column: E w_i w_j = beta'^2 / (n beta' (n beta' + 1))
    same_row = b / (n * (n * b + 1))
    # every row and column sums to one: E w_11 * sum_kl w_kl = 1
    off = (1.0 - second - 2 * (n - 1) * same_row) / (n - 1) ** 2
    return EntryMoments(second - mean_sq, same_row - mean_sq, off - mean_sq)


def bilinear_covariance(moments: EntryMoments, a, b, a2, b2) -> float:
    """
    Cov(sum_ij a_i b_j w_ij, sum_kl a2_k b2_l w_kl) for an exchangeable
    doubly stochastic ensemble
    """
    a, b, a2, b2 = (np.asarray(x, dtype=float) for x in (a, b, a2, b2))
    rows_equal = a @ a2
    cols_equal = b @ b2
    rows_distinct = a.sum() * a2.sum() - rows_equal
    cols_distinct = b.sum() * b2.sum() - cols_equal
    return float(
        moments.var * rows_equal * cols_equal
        + moments.row_cov * (rows_equal * cols_distinct + rows_distinct * cols_equal)
        + moments.off_cov * rows_distinct * cols_distinct
    )


def weight_vector_covariance(beta_prime_value: float, n: int, a, a2) -> float:
    """Cov(sum_i a_i w_i, sum_k a2_k w_k) for w ~ Dirichlet(beta', ..., beta')"""
    a, a2 = np.asarray(a, dtype=float), np.asarray(a2, dtype=float)
    b = beta_prime_value
    var = beta_moment(b, n, 2) - 1.0 / n ** 2
    cov = b / (n * (n * b + 1)) - 1.0 / n ** 2
    same = a @ a2
    return float(var * same + cov * (a.sum() * a2.sum() - same))


def _bridge(s, s2):
    return min(s, s2) - s * s2


def annealed_sheet(p, q) -> float:
    """ss'(t^t') + (s^s')tt' - 2ss'tt'"""
    (s, t), (s2, t2) = p, q
    return s * s2 * min(t, t2) + min(s, s2) * t * t2 - 2 * s * s2 * t * t2


def annealed_truncation_covariance(moments: EntryMoments, n: int, p, q) -> float:
    """
    Cov of n^{-1/2}(calT - n s t) at p, q under d(omega) x ensemble:
    the conditional-mean part is S S'/n, the remainder V has conditional
    mean zero and averaged conditional covariance n^2 var (s^s'-ss')(t^t'-tt').
    """
    (s, t), (s2, t2) = p, q
    tied = _bridge(s, s2) * _bridge(t, t2)
    return annealed_sheet(p, q) + tied * (1.0 + n * n * moments.var) / n


def fixed_matrix_truncation_covariance(w: np.ndarray, p, q) -> float:
    """Cov over omega of n^{-1/2}(calT - n s t) for one fixed doubly stochastic W"""
    (s, t), (s2, t2) = p, q
    n = w.shape[0]
    tied = _bridge(s, s2) * _bridge(t, t2)
    return annealed_sheet(p, q) + tied * float(np.sum(w * w)) / n


def binomial_product_covariance(n: int, p, q) -> float:
    """Cov(S_s S'_t / n, S_s' S'_t' / n) for independent binomial counts"""
    (s, t), (s2, t2) = p, q
    row = n * _bridge(s, s2) + n * n * s * s2
    col = n * _bridge(t, t2) + n * n * t * t2
    return (row * col - n ** 4 * s * s2 * t * t2) / n ** 2


def averaged_bilinear_covariance(moments: EntryMoments, n: int, p, q) -> float:
    """
    bilinear_covariance with indicators 1{R_i <= s}, 1{C_j <= t}, averaged
    over uniform marks: E #{i in both} = n (s^s'), E #{i != k} = n(n-1) s s'
    """
    (s, t), (s2, t2) = p, q
    rows_equal, cols_equal = n * min(s, s2), n * min(t, t2)
    rows_distinct, cols_distinct = n * (n - 1) * s * s2, n * (n - 1) * t * t2
    return float(
        moments.var * rows_equal * cols_equal
        + moments.row_cov * (rows_equal * cols_distinct + rows_distinct * cols_equal)
        + moments.off_cov * rows_distinct * cols_distinct
    )
