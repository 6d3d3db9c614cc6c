import numpy as np
import pytest

from bridge_trunc.core.ensembles import (
    EnsembleKind,
    EnsembleSpec,
    GenericMatrix,
    WeightMatrix,
    beta_prime,
    check_size,
    dft_matrix,
    sample_column,
    sample_first_column_weights,
    sample_haar,
    sample_permutation,
    sample_weights,
    squared_moduli,
)
from bridge_trunc.core.errors import ContractError, DomainError, InvalidSizeError
from bridge_trunc.core.random_streams import RngState
from bridge_trunc.core.stats import ks_two_sample


def test_beta_prime():
    assert beta_prime(EnsembleKind.UNITARY) == 1.0
    assert beta_prime(EnsembleKind.ORTHOGONAL) == 0.5
    assert beta_prime(EnsembleKind.DFT) is None
    assert beta_prime("permutation") is None


@pytest.mark.parametrize("bad", [0, -3, 2.5, True, "x"])
def test_check_size_rejects(bad):
    with pytest.raises((InvalidSizeError, ValueError)):
        check_size(bad)


def test_dft_two_by_two():
    entries = dft_matrix(2).entries
    expected = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.max(np.abs(entries - expected)) < 1e-15


def test_dft_weights_are_one_over_n():
    weights = squared_moduli(dft_matrix(8))
    assert np.max(np.abs(weights.w - 1.0 / 8)) < 1e-14


def test_squared_moduli_reads_dft_entries():
    swapped = GenericMatrix(EnsembleKind.DFT, 2, entries=np.array([[0.0, 1.0j], [1.0, 0.0]]))
    assert np.array_equal(squared_moduli(swapped).w, np.array([[0.0, 1.0], [1.0, 0.0]]))


@pytest.mark.parametrize("kind", [EnsembleKind.UNITARY, EnsembleKind.ORTHOGONAL])
@pytest.mark.parametrize("n", [1, 10, 100])
def test_haar_unitary_and_doubly_stochastic(kind, n):
    for seed in range(3):
        matrix = sample_haar(EnsembleSpec(kind, n), RngState(seed))
        assert matrix.unitarity_defect() <= 1e-10
        weights = squared_moduli(matrix)
        assert weights.stochasticity_defect() <= 1e-12


def test_orthogonal_entries_are_real():
    matrix = sample_haar(EnsembleSpec(EnsembleKind.ORTHOGONAL, 6), RngState(1))
    assert not np.iscomplexobj(matrix.entries)


def test_sample_haar_rejects_other_kinds():
    with pytest.raises(DomainError):
        sample_haar(EnsembleSpec(EnsembleKind.DFT, 4), RngState(1))


def test_haar_is_reproducible():
    spec = EnsembleSpec(EnsembleKind.UNITARY, 8)
    a = sample_haar(spec, RngState(11, (0, 3, 0)))
    b = sample_haar(spec, RngState(11, (0, 3, 0)))
    c = sample_haar(spec, RngState(11, (0, 4, 0)))
    assert np.array_equal(a.entries, b.entries)
    assert not np.array_equal(a.entries, c.entries)


def test_permutation_stays_sparse():
    matrix = sample_permutation(5, RngState(7))
    assert matrix.entries is None
    assert sorted(matrix.sigma) == list(range(5))
    weights = squared_moduli(matrix)
    assert weights.is_sparse
    dense = weights.w
    assert set(np.unique(dense)) <= {0.0, 1.0}
    assert np.all(dense.sum(axis=0) == 1) and np.all(dense.sum(axis=1) == 1)
    assert np.array_equal(matrix.to_dense(), dense)


def test_permutation_is_uniform():
    count = 60_000
    gen = np.random.default_rng(31)
    draws = np.array([sample_permutation(3, gen).sigma for _ in range(count)])
    codes = draws @ np.array([9, 3, 1])
    frequencies = np.bincount(codes, minlength=27)
    observed = frequencies[frequencies > 0] / count
    assert observed.size == 6
    se = np.sqrt((1 / 6) * (5 / 6) / count)
    assert np.max(np.abs(observed - 1 / 6)) <= 4 * se


def test_squared_moduli_rejects_non_unitary():
    matrix = GenericMatrix(EnsembleKind.UNITARY, 2, entries=np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ContractError):
        squared_moduli(matrix)


def test_squared_moduli_rejects_bad_sigma():
    with pytest.raises(ContractError):
        squared_moduli(GenericMatrix(EnsembleKind.PERMUTATION, 3, sigma=np.array([0, 0, 2])))


def test_weight_matrix_from_array_validates():
    WeightMatrix.from_array(np.full((3, 3), 1 / 3))
    with pytest.raises(ContractError):
        WeightMatrix.from_array(np.eye(3) * 0.5)
    with pytest.raises(ContractError):
        WeightMatrix.from_array(np.ones((2, 3)))


def test_dirichlet_column_sums_to_one():
    column = sample_first_column_weights(50, 1.0, RngState(3))
    assert column.shape == (50,)
    assert np.all(column >= 0)
    assert abs(column.sum() - 1.0) < 1e-12
    with pytest.raises(DomainError):
        sample_first_column_weights(5, 0.0, RngState(3))


def test_dirichlet_second_moment():
    n, count = 50, 20000
    root = RngState(17)
    squares = np.array([sample_first_column_weights(n, 1.0, root.split(k))[0] ** 2
                        for k in range(count)])
    se = squares.std(ddof=1) / np.sqrt(count)
    assert abs(squares.mean() - 2.0 / (n * (n + 1))) <= 4 * se


def test_mean_weight_is_one_over_n():
    n, count = 6, 3000
    spec = EnsembleSpec(EnsembleKind.ORTHOGONAL, n)
    stack = np.array([sample_weights(spec, RngState(2).split(k)).w for k in range(count)])
    mean = stack.mean(axis=0)
    se = stack.std(axis=0, ddof=1) / np.sqrt(count)
    for i, j in [(0, 0), (1, 4), (5, 2), (3, 3), (2, 5)]:
        assert abs(mean[i, j] - 1.0 / n) <= 4 * se[i, j]


def test_fast_path_matches_full_haar():
    spec = EnsembleSpec(EnsembleKind.UNITARY, 10)
    fast = [sample_column(spec, RngState(1).split(k), fast_path=True)[0] for k in range(5000)]
    full = [sample_column(spec, RngState(2).split(k), fast_path=False)[0] for k in range(5000)]
    assert ks_two_sample(fast, full).p_value > 0.01


def test_dft_sampling_ignores_rng():
    spec = EnsembleSpec(EnsembleKind.DFT, 4)
    assert np.array_equal(sample_weights(spec, RngState(1)).w, sample_weights(spec, RngState(2)).w)
