import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partialreg.core import ContractError, KernelSpec
from partialreg.kernels import gaussian_kernel, kernel_matrix, tps_kernel


def test_gaussian_values():
    assert gaussian_kernel([1.0, 2.0], [1.0, 2.0], 3.0) == 1.0
    assert gaussian_kernel([0.0, 0.0], [1.0, 0.0], 1.0) == pytest.approx(0.3678794, abs=1e-7)
    assert gaussian_kernel([0.0, 5.0], [3.0, -1.0], 1e12) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("s2", [0.0, -1.0])
def test_gaussian_rejects_nonpositive_width(s2):
    with pytest.raises(ContractError):
        gaussian_kernel([0.0], [1.0], s2)


def test_tps_values():
    for d in (2, 3, 4, 5):
        assert tps_kernel(np.ones(d), np.ones(d), d) == 0.0
    assert tps_kernel([0.0, 0.0, 0.0], [0.0, 3.0, 4.0], 3) == pytest.approx(5.0)
    assert tps_kernel([0.0, 0.0], [1.0, 0.0], 2) == 0.0
    # 2-D: r^2 ln r, the same as (1/2) r^2 ln r^2
    r = 2.5
    assert tps_kernel([0.0, 0.0], [r, 0.0], 2) == pytest.approx(r * r * np.log(r))
    # D >= 4 uses r^2 ln r^2
    assert tps_kernel(np.zeros(4), [r, 0, 0, 0], 4) == pytest.approx(r * r * np.log(r * r))
    with pytest.raises(ContractError):
        tps_kernel([0.0], [1.0], 1)


def test_kernel_matrix_entries():
    Phi = kernel_matrix([[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0]], KernelSpec.gaussian(1.0))
    np.testing.assert_allclose(Phi[:, 0], [1.0, np.exp(-1.0)])
    X = np.random.default_rng(0).standard_normal((8, 3))
    np.testing.assert_array_equal(np.diag(kernel_matrix(X, X, KernelSpec.gaussian(0.3))), 1.0)
    np.testing.assert_array_equal(np.diag(kernel_matrix(X, X, KernelSpec.tps(3))), 0.0)


def test_kernel_matrix_matches_pointwise():
    rng = np.random.default_rng(1)
    X, C = rng.standard_normal((5, 2)), rng.standard_normal((4, 2))
    for spec, f in ((KernelSpec.gaussian(0.8), lambda x, c: gaussian_kernel(x, c, 0.8)),
                    (KernelSpec.tps(2), lambda x, c: tps_kernel(x, c, 2))):
        ref = np.array([[f(x, c) for c in C] for x in X])
        np.testing.assert_allclose(kernel_matrix(X, C, spec), ref, rtol=1e-13, atol=1e-15)


def test_kernel_matrix_dimension_checks():
    with pytest.raises(ContractError):
        kernel_matrix(np.zeros((2, 2)), np.zeros((2, 3)), KernelSpec.gaussian(1.0))
    with pytest.raises(ContractError):
        kernel_matrix(np.zeros((2, 2)), np.zeros((2, 2)), KernelSpec.tps(3))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), dim=st.sampled_from([2, 3, 4]),
       s2=st.floats(0.05, 20.0))
def test_symmetry_and_gaussian_psd(seed, dim, s2):
    X = np.random.default_rng(seed).standard_normal((10, dim))
    G = kernel_matrix(X, X, KernelSpec.gaussian(s2))
    T = kernel_matrix(X, X, KernelSpec.tps(dim))
    assert np.abs(G - G.T).max() <= 1e-12
    assert np.abs(T - T.T).max() <= 1e-12
    assert np.all((G > 0) & (G <= 1))
    assert np.linalg.eigvalsh(G).min() >= -1e-8
