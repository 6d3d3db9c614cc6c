"""
Matrix ensembles: Haar unitary / orthogonal, DFT and uniform permutations,
and their squared-modulus weight matrices
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import qr

from ..config import settings
from .errors import ContractError, DomainError, InvalidSizeError
from .random_streams import as_generator

logger = logging.getLogger(__name__)


class EnsembleKind(str, Enum):
    UNITARY = "unitary"
    ORTHOGONAL = "orthogonal"
    DFT = "dft"
    PERMUTATION = "permutation"


HAAR_KINDS = frozenset({EnsembleKind.UNITARY, EnsembleKind.ORTHOGONAL})


def beta_prime(kind: EnsembleKind) -> Optional[float]:
    """beta' = 1 for unitary, 1/2 for orthogonal, None otherwise"""
    kind = EnsembleKind(kind)
    if kind is EnsembleKind.UNITARY:
        return 1.0
    if kind is EnsembleKind.ORTHOGONAL:
        return 0.5
    return None


def check_size(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidSizeError(f"matrix size must be a positive integer, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class EnsembleSpec:
    kind: EnsembleKind
    n: int

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        check_size(self.n)

    @property
    def beta_prime(self) -> Optional[float]:
        return beta_prime(self.kind)


@dataclass(frozen=True)
class GenericMatrix:
    """
    A sampled matrix. Permutations keep only the index array `sigma`
    (row i holds its unit entry in column sigma[i]).
    """

    kind: EnsembleKind
    n: int
    entries: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None

    def to_dense(self) -> np.ndarray:
        if self.entries is not None:
            return self.entries
        dense = np.zeros((self.n, self.n))
        dense[np.arange(self.n), self.sigma] = 1.0
        return dense

    def unitarity_defect(self) -> float:
        """max-abs norm of M*M - I"""
        if self.sigma is not None:
            return 0.0 if _is_permutation(self.sigma) else np.inf
        gram = self.entries.conj().T @ self.entries
        return float(np.max(np.abs(gram - np.eye(self.n))))


@dataclass(frozen=True)
class WeightMatrix:
    """
    w_ij = |U_ij|^2. Dense for the matrix ensembles, sparse (`sigma`) for
    permutations.
    """

    kind: EnsembleKind
    n: int
    dense: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None

    @property
    def is_sparse(self) -> bool:
        return self.sigma is not None

    @property
    def w(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        dense = np.zeros((self.n, self.n))
        dense[np.arange(self.n), self.sigma] = 1.0
        return dense

    @property
    def first_column(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense[:, 0]
        return (self.sigma == 0).astype(float)

    def stochasticity_defect(self) -> float:
        if self.is_sparse:
            return 0.0
        rows = np.abs(self.dense.sum(axis=1) - 1.0).max()
        cols = np.abs(self.dense.sum(axis=0) - 1.0).max()
        return float(max(rows, cols))

    @classmethod
    def from_array(cls, w, kind: EnsembleKind = EnsembleKind.UNITARY,
                   validate: bool = True, tol: Optional[float] = None) -> "WeightMatrix":
        """Wrap a user-supplied nonnegative square matrix"""
        w = np.asarray(w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ContractError(f"weight matrix must be square, got shape {w.shape}")
        check_size(w.shape[0])
        weights = cls(EnsembleKind(kind), w.shape[0], dense=w)
        if validate:
            tol = settings.stochastic_tol if tol is None else tol
            if np.any(w < 0):
                raise ContractError("weight matrix has negative entries")
            defect = weights.stochasticity_defect()
            if defect > tol:
                raise ContractError(f"weight matrix is not doubly stochastic (defect {defect:.3e})")
        return weights


def _is_permutation(sigma: np.ndarray) -> bool:
    sigma = np.asarray(sigma)
    return sigma.ndim == 1 and np.array_equal(np.sort(sigma), np.arange(sigma.size))


def sample_haar(spec: EnsembleSpec, rng) -> GenericMatrix:
    """
    Haar unitary / orthogonal matrix: Gaussian fill, QR, then multiply
    column j of Q by the phase (sign) of R_jj so the law is exactly Haar.
    """
    if spec.kind not in HAAR_KINDS:
        raise DomainError(f"sample_haar needs a Haar ensemble, got {spec.kind.value}")
    n = check_size(spec.n)
    gen = as_generator(rng)

    if spec.kind is EnsembleKind.UNITARY:
        z = (gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))) * np.sqrt(0.5)
    else:
        z = gen.standard_normal((n, n))

    q, r = qr(z)
    d = np.diag(r)
    phases = d / np.abs(d)
    return GenericMatrix(spec.kind, n, entries=q * phases)


@lru_cache(maxsize=16)
def _dft_entries(n: int) -> np.ndarray:
    j = np.arange(n)
    # reduce jk mod n before the exponential to keep the phases exact
    phase = np.outer(j, j) % n
    entries = np.exp(-2j * np.pi * phase / n) / np.sqrt(n)
    entries.setflags(write=False)
    return entries


def dft_matrix(n: int) -> GenericMatrix:
    """F_jk = n^{-1/2} exp(-2 pi i (j-1)(k-1) / n)"""
    n = check_size(n)
    return GenericMatrix(EnsembleKind.DFT, n, entries=_dft_entries(n))


def sample_permutation(n: int, rng) -> GenericMatrix:
    """Uniform permutation (numpy's Fisher-Yates shuffle), kept sparse"""
    n = check_size(n)
    sigma = as_generator(rng).permutation(n)
    return GenericMatrix(EnsembleKind.PERMUTATION, n, sigma=sigma)


def squared_moduli(matrix: GenericMatrix, check_unitary: bool = True) -> WeightMatrix:
    """
    w_ij = |M_ij|^2. The unitarity check is O(n^3); callers that built the
    matrix themselves may skip it, the O(n^2) stochasticity check always runs.
    """
    if matrix.sigma is not None:
        if not _is_permutation(matrix.sigma):
            raise ContractError("sigma is not a permutation")
        return WeightMatrix(EnsembleKind.PERMUTATION, matrix.n, sigma=np.asarray(matrix.sigma))

    if check_unitary:
        defect = matrix.unitarity_defect()
        if defect > settings.unitarity_tol:
            raise ContractError(f"matrix is not unitary: max |M*M - I| = {defect:.3e}")

    w = matrix.entries.real ** 2 + matrix.entries.imag ** 2
    weights = WeightMatrix(matrix.kind, matrix.n, dense=w)

    defect = weights.stochasticity_defect()
    if defect > settings.stochastic_tol:
        raise ContractError(f"squared moduli are not doubly stochastic (defect {defect:.3e})")
    return weights


def sample_first_column_weights(n: int, beta_prime_value: float, rng) -> np.ndarray:
    """
    Dirichlet(beta', ..., beta') vector, equal in law to (|U_i1|^2)_i under
    Haar measure: n independent Gamma(beta', 1) normalized by their sum.
    """
    n = check_size(n)
    if not beta_prime_value > 0:
        raise DomainError(f"beta' must be positive, got {beta_prime_value}")
    gammas = as_generator(rng).gamma(beta_prime_value, 1.0, size=n)
    return gammas / gammas.sum()


def sample_weights(spec: EnsembleSpec, rng, check_unitary: bool = False) -> WeightMatrix:
    """One weight matrix from the ensemble (DFT ignores rng)"""
    if spec.kind in HAAR_KINDS:
        return squared_moduli(sample_haar(spec, rng), check_unitary=check_unitary)
    if spec.kind is EnsembleKind.DFT:
        return squared_moduli(dft_matrix(spec.n), check_unitary=False)
    return squared_moduli(sample_permutation(spec.n, rng))


def sample_column(spec: EnsembleSpec, rng, fast_path: bool = True) -> np.ndarray:
    """First column of the weight matrix, via the Dirichlet law when allowed"""
    if spec.kind in HAAR_KINDS and fast_path:
        return sample_first_column_weights(spec.n, spec.beta_prime, rng)
    return sample_weights(spec, rng).first_column
