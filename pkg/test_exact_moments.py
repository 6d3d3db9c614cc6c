import numpy as np
import pytest

from bridge_trunc.core.ensembles import EnsembleKind, EnsembleSpec, sample_weights
from bridge_trunc.core.environment import product_count_variance
from bridge_trunc.core.errors import DomainError
from bridge_trunc.core.exact_moments import (
    annealed_sheet,
    annealed_truncation_covariance,
    averaged_bilinear_covariance,
    beta_moment,
    bilinear_covariance,
    binomial_product_covariance,
    entry_moments,
    fixed_matrix_truncation_covariance,
    weight_vector_covariance,
)
from bridge_trunc.core.random_streams import RngState

POINTS = [((0.5, 0.5), (0.5, 0.5)), ((0.3, 0.7), (0.6, 0.2)), ((0.25, 0.75), (0.75, 0.25))]


def test_beta_moments_of_haar_entries():
    n = 100
    assert n ** 2 * beta_moment(1.0, n, 2) == pytest.approx(2 * n / (n + 1))
    assert n ** 2 * beta_moment(0.5, n, 2) == pytest.approx(3 * n / (n + 2))
    assert n ** 3 * beta_moment(1.0, n, 3) == pytest.approx(6 * n ** 3 / (n * (n + 1) * (n + 2)))
    assert beta_moment(1.0, n, 1) == pytest.approx(1 / n)
    with pytest.raises(DomainError):
        beta_moment(-1.0, n, 2)


@pytest.mark.parametrize("kind", [EnsembleKind.UNITARY, EnsembleKind.ORTHOGONAL, EnsembleKind.PERMUTATION])
@pytest.mark.parametrize("n", [2, 5, 50])
def test_entry_moments_respect_row_and_column_sums(kind, n):
    moments = entry_moments(kind, n)
    assert moments.row_cov == pytest.approx(-moments.var / (n - 1))
    assert moments.off_cov == pytest.approx(moments.var / (n - 1) ** 2)
    ones = np.ones(n)
    assert abs(bilinear_covariance(moments, ones, ones, ones, ones)) <= 1e-12


def test_dft_has_no_fluctuation():
    moments = entry_moments(EnsembleKind.DFT, 8)
    assert (moments.var, moments.row_cov, moments.off_cov) == (0.0, 0.0, 0.0)


def test_entry_covariances_monte_carlo():
    n, count = 4, 20000
    spec = EnsembleSpec(EnsembleKind.ORTHOGONAL, n)
    stack = np.array([sample_weights(spec, RngState(23).split(k)).w for k in range(count)])
    moments = entry_moments(EnsembleKind.ORTHOGONAL, n)
    for (a, b), target in [((0, 0), moments.var), ((1, 0), moments.row_cov), ((2, 3), moments.off_cov)]:
        products = (stack[:, 0, 0] - 1 / n) * (stack[:, a, b] - 1 / n)
        se = products.std(ddof=1) / np.sqrt(count)
        assert abs(products.mean() - target) <= 4 * se


def test_weight_vector_covariance_sums_to_zero():
    ones = np.ones(10)
    assert abs(weight_vector_covariance(1.0, 10, ones, ones)) <= 1e-15
    head = np.arange(10) < 5
    expected = 5 * (beta_moment(1.0, 10, 2) - 0.01) + 20 * (1 / (10 * 11) - 0.01)
    assert weight_vector_covariance(1.0, 10, head, head) == pytest.approx(expected)


@pytest.mark.parametrize("p,q", POINTS)
def test_dft_annealed_covariance_is_binomial(p, q):
    n = 40
    dft = entry_moments(EnsembleKind.DFT, n)
    exact = binomial_product_covariance(n, p, q) / n
    assert annealed_truncation_covariance(dft, n, p, q) == pytest.approx(exact, abs=1e-12)
    assert fixed_matrix_truncation_covariance(np.full((n, n), 1 / n), p, q) == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("kind", [EnsembleKind.UNITARY, EnsembleKind.ORTHOGONAL, EnsembleKind.PERMUTATION])
@pytest.mark.parametrize("p,q", POINTS)
def test_total_variance_splits(kind, p, q):
    n = 30
    moments = entry_moments(kind, n)
    total = annealed_truncation_covariance(moments, n, p, q)
    parts = (averaged_bilinear_covariance(moments, n, p, q) + binomial_product_covariance(n, p, q)) / n
    assert total == pytest.approx(parts, abs=1e-12)


def test_annealed_covariance_approaches_limit():
    p = (0.5, 0.5)
    moments = entry_moments(EnsembleKind.UNITARY, 10_000)
    assert annealed_truncation_covariance(moments, 10_000, p, p) == pytest.approx(annealed_sheet(p, p), abs=1e-3)
    assert annealed_sheet(p, p) == pytest.approx(0.125)


def test_product_covariance_matches_closed_variance():
    n, p = 100, (0.3, 0.7)
    assert binomial_product_covariance(n, p, p) == pytest.approx(product_count_variance(n, 0.3, 0.7))
