import numpy as np
import pytest

from bridge_trunc.core.environment import (
    Environment,
    counting,
    normalized_counting,
    product_count_variance,
    sample_environment,
    sort_environment,
)
from bridge_trunc.core.errors import ContractError, DomainError
from bridge_trunc.core.random_streams import RngState


def test_counting_closed_inequality():
    marks = np.array([0.1, 0.5, 0.5, 0.9])
    assert counting(marks, 0.5) == 3
    assert counting(marks, 0.0) == 0
    assert counting(marks, 1.0) == 4
    assert list(counting(marks, np.array([0.1, 0.6]))) == [1, 3]


def test_counting_is_monotone():
    env = sample_environment(200, RngState(4))
    values = counting(env.rows, np.linspace(0, 1, 101))
    assert np.all(np.diff(values) >= 0)
    assert values[-1] == 200


def test_counting_rejects_levels_outside_unit_interval():
    with pytest.raises(DomainError):
        counting(np.array([0.2]), 1.5)


def test_environment_validation():
    with pytest.raises(DomainError):
        Environment(np.array([0.2, 1.2]), np.array([0.1, 0.3]))
    with pytest.raises(ContractError):
        Environment(np.array([0.2]), np.array([0.1, 0.3]))


def test_sorted_environment_reproduces_order():
    env = sample_environment(50, RngState(8))
    ordered = sort_environment(env)
    assert np.array_equal(env.rows[ordered.row_order], ordered.rows_sorted)
    assert np.all(np.diff(ordered.cols_sorted) >= 0)
    assert np.array_equal(ordered.rows_sorted[ordered.row_rank], env.rows)


def test_rank_is_independent_of_order_statistics():
    firsts, minima = [], []
    for k in range(4000):
        ordered = sort_environment(sample_environment(10, RngState(6).split(k)))
        firsts.append(ordered.row_rank[0])
        minima.append(ordered.rows_sorted[0])
    assert abs(np.corrcoef(firsts, minima)[0, 1]) < 4 / np.sqrt(4000)


def test_binomial_count_variance():
    n, s, count = 500, 0.4, 10000
    counts = np.array([counting(sample_environment(n, RngState(3).split(k)).rows, s)
                       for k in range(count)])
    assert abs(counts.var(ddof=1) - n * s * (1 - s)) <= 0.05 * 120


def test_normalized_counting_covariance():
    n, count = 1000, 20000
    values = np.array([normalized_counting(sample_environment(n, RngState(9).split(k)).rows,
                                           np.array([0.25, 0.75]))
                       for k in range(count)])
    products = (values[:, 0] - values[:, 0].mean()) * (values[:, 1] - values[:, 1].mean())
    se = products.std(ddof=1) / np.sqrt(count)
    assert abs(products.mean() - 0.0625) <= 4 * se


def test_product_count_variance_closed_form():
    assert product_count_variance(100, 0.5, 0.5) == pytest.approx(12.5625, abs=1e-12)


@pytest.mark.parametrize("n,s,t", [(100, 0.5, 0.5), (200, 0.3, 0.7)])
def test_product_count_variance_monte_carlo(n, s, t):
    count = 20000
    products = np.array([
        counting(env.rows, s) * counting(env.cols, t) / n
        for env in (sample_environment(n, RngState(12).split(k)) for k in range(count))
    ])
    centred = (products - products.mean()) ** 2
    se = centred.std(ddof=1) / np.sqrt(count)
    assert abs(products.var(ddof=1) - product_count_variance(n, s, t)) <= 4 * se
