import numpy as np
import pytest

from bridge_trunc.core.errors import DomainError
from bridge_trunc.core.limits import (
    Kernel,
    KernelKind,
    LimitSampler,
    SamplerMethod,
    default_sampler,
    kernel_eval,
    kernel_identity_residual,
    sample_limit_path,
)
from bridge_trunc.core.processes import Grid
from bridge_trunc.core.random_streams import RngState
from bridge_trunc.core.stats import empirical_moments

CENTRE = (0.5, 0.5)


def _paths(sampler, count, seed):
    root = RngState(seed)
    return np.array([sample_limit_path(sampler, root.split(k)).values for k in range(count)])


def test_kernel_values_at_centre():
    assert kernel_eval(KernelKind.TIED_DOWN_WINF, CENTRE, CENTRE) == pytest.approx(0.0625)
    assert kernel_eval(KernelKind.CAL_WINF, CENTRE, CENTRE) == pytest.approx(0.125)
    assert kernel_eval(KernelKind.BIVARIATE_B00, CENTRE, CENTRE) == pytest.approx(0.1875)
    assert kernel_eval(KernelKind.BRIDGE_B0, 0.5, 0.5) == pytest.approx(0.25)


@pytest.mark.parametrize("kind", list(KernelKind))
def test_kernels_vanish_at_zero(kind):
    assert kernel_eval(kind, (0.0, 0.4), (0.7, 0.3)) == 0.0


def test_kernel_rejects_out_of_range():
    with pytest.raises(DomainError):
        kernel_eval(KernelKind.CAL_WINF, (1.2, 0.5), CENTRE)
    with pytest.raises(DomainError):
        Kernel(KernelKind.BRIDGE_B0, 0.0)


def test_identity_residual():
    assert abs(kernel_identity_residual(CENTRE, CENTRE)) <= 1e-12
    assert abs(kernel_identity_residual((0.3, 0.7), (0.6, 0.2))) <= 1e-12
    assert abs(kernel_identity_residual((1.0, 0.4), (0.2, 0.9))) <= 1e-12
    gen = np.random.default_rng(100)
    for p, q in gen.random((100, 2, 2)):
        assert abs(kernel_identity_residual(p, q)) <= 1e-12


@pytest.mark.parametrize("kind", list(KernelKind))
def test_kernels_symmetric_and_psd(kind):
    levels = Grid(6).levels
    points = [(s, t) for s in levels for t in levels]
    matrix = Kernel(kind).matrix(points)
    assert np.allclose(matrix, matrix.T, rtol=0, atol=1e-15)
    assert np.linalg.eigvalsh(matrix).min() >= -1e-10


def test_prefactor_scales_linearly():
    p, q = (0.3, 0.8), (0.6, 0.4)
    for kind in KernelKind:
        assert kernel_eval(kind, p, q, 2.0) == pytest.approx(2 * kernel_eval(kind, p, q))
    assert Kernel(KernelKind.TIED_DOWN_WINF, 2.0).name == "2*Winf"


def test_default_sampler_methods():
    grid = Grid(4)
    assert default_sampler(Kernel(KernelKind.TIED_DOWN_WINF), grid).method is SamplerMethod.CHOLESKY
    assert default_sampler(Kernel(KernelKind.CAL_WINF), grid).method is SamplerMethod.CONSTRUCTIVE
    with pytest.raises(DomainError):
        LimitSampler(Kernel(KernelKind.TENSOR_B0B0), grid, SamplerMethod.CHOLESKY)


@pytest.mark.parametrize("method", list(SamplerMethod))
def test_bridge_paths_are_pinned(method):
    path = sample_limit_path(LimitSampler(Kernel(KernelKind.BRIDGE_B0), Grid(10), method), RngState(1))
    assert path.values[0] == 0.0 and path.values[-1] == 0.0


def test_tied_down_sheet_vanishes_on_boundary():
    for method in SamplerMethod:
        values = sample_limit_path(LimitSampler(Kernel(KernelKind.TIED_DOWN_WINF), Grid(8), method),
                                   RngState(2)).values
        for edge in (values[0], values[-1], values[:, 0], values[:, -1]):
            assert np.max(np.abs(edge)) <= 1e-12


def test_cal_winf_variance_at_centre():
    grid = Grid(4)
    values = _paths(LimitSampler(Kernel(KernelKind.CAL_WINF), grid), 20000, 3)[:, 2, 2]
    moments = empirical_moments(values)
    assert abs(moments.covariance[0, 0] - 0.125) <= 4 * moments.covariance_se[0, 0]


def test_samplers_agree_with_kernel():
    grid = Grid(4)
    points = [(1, 1), (1, 3), (2, 2), (3, 1), (3, 3)]
    kernel = Kernel(KernelKind.CAL_WINF, 2.0)
    targets = kernel.matrix([(k / 4, l / 4) for k, l in points])
    for seed, method in enumerate(SamplerMethod):
        paths = _paths(LimitSampler(kernel, grid, method), 10000, 10 + seed)
        samples = np.column_stack([paths[:, k, l] for k, l in points])
        moments = empirical_moments(samples)
        z = (moments.covariance - targets) / moments.covariance_se
        assert np.max(np.abs(z)) <= 4


def test_tensor_product_is_not_gaussian():
    grid = Grid(4)
    tensor = _paths(LimitSampler(Kernel(KernelKind.TENSOR_B0B0), grid), 20000, 4)
    tied = _paths(default_sampler(Kernel(KernelKind.TIED_DOWN_WINF), grid), 20000, 5)
    points = [(2, 2), (1, 3), (3, 1)]
    targets = Kernel(KernelKind.TIED_DOWN_WINF).matrix([(k / 4, l / 4) for k, l in points])
    for paths in (tensor, tied):
        moments = empirical_moments(np.column_stack([paths[:, k, l] for k, l in points]))
        assert np.max(np.abs(moments.covariance - targets) / moments.covariance_se) <= 4

    def kurtosis(x):
        x = x - x.mean()
        return np.mean(x ** 4) / np.mean(x ** 2) ** 2

    assert kurtosis(tensor[:, 2, 2]) > 6
    assert abs(kurtosis(tied[:, 2, 2]) - 3) < 0.3
