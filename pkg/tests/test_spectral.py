import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.fft import dst

from ergodic_spde.spectral import (Spectrum, constant_coefficients, difference_bound_check,
                                   dirichlet_laplacian_spectrum, fractional_power_apply, grid_nodes, h_norm,
                                   project, semigroup_apply, smoothing_bound_check, to_grid, to_spectral)

PI2 = 9.869604401089358  # pi**2


def test_eigenvalues_oracle():
    assert dirichlet_laplacian_spectrum(1).lambda1 == pytest.approx(9.8696044, abs=1e-7)
    np.testing.assert_allclose(dirichlet_laplacian_spectrum(3).eigenvalues, [PI2, 4 * PI2, 9 * PI2], rtol=1e-15)
    lam = dirichlet_laplacian_spectrum(2).eigenvalues
    assert lam[1] / lam[0] == 4.0


def test_spectrum_rejects_bad_input():
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, 0.5]))
    with pytest.raises(ValueError):
        Spectrum(np.array([-1.0]))
    with pytest.raises(ValueError):
        dirichlet_laplacian_spectrum(0)


def test_semigroup_oracle():
    s = dirichlet_laplacian_spectrum(1)
    # exp(-pi^2/10) to 20 digits: 0.37270783885343791358
    assert semigroup_apply(s, 0.1, [1.0])[0] == pytest.approx(0.3727078388534379, rel=1e-14)
    x = np.array([0.3, -2.0, 5.0])
    np.testing.assert_array_equal(semigroup_apply(dirichlet_laplacian_spectrum(3), 0.0, x), x)
    with pytest.raises(ValueError):
        semigroup_apply(s, -1.0, [1.0])


def test_fractional_power_and_norm():
    s = dirichlet_laplacian_spectrum(2)
    np.testing.assert_allclose(fractional_power_apply(s, 1, [1.0, 0.0]), [PI2, 0.0])
    x = np.array([0.5, -1.5])
    np.testing.assert_array_equal(fractional_power_apply(s, 0, x), x)
    assert h_norm(s, x, 2.0) == pytest.approx(np.sqrt(PI2**2 * 0.25 + 16 * PI2**2 * 2.25))


def test_project():
    np.testing.assert_array_equal(project([1, 2, 3], 2), [1, 2])
    with pytest.raises(ValueError):
        project([1, 2], 3)


def test_to_grid_single_mode():
    assert to_grid(np.array([1.0]), 1)[0] == pytest.approx(np.sqrt(2.0), rel=1e-15)
    np.testing.assert_array_equal(to_grid(np.zeros(4), 9), np.zeros(9))
    with pytest.raises(ValueError):
        to_grid(np.ones(5), 4)


def test_constant_field_quadrature():
    # <1, sqrt(2) sin(i pi x)> = sqrt(2)(1 - cos i pi)/(i pi)
    c = to_spectral(np.ones(4095), 3)
    np.testing.assert_allclose(c, [0.900316, 0.0, 0.300105], atol=1e-6)
    np.testing.assert_allclose(constant_coefficients(3), [0.9003163161571061, 0.0, 0.3001054387190354], rtol=1e-14)
    np.testing.assert_array_equal(to_spectral(np.zeros(7), 3), np.zeros(3))


def test_dense_and_fft_paths_agree():
    # the FFT DST-I is an independent implementation of the same sums
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 40))
    np.testing.assert_allclose(to_grid(x, 97), dst(x, type=1, n=97, axis=-1) * np.sqrt(2) / 2, atol=1e-12)
    g = rng.standard_normal((3, 97))
    np.testing.assert_allclose(to_spectral(g, 40), dst(g, type=1)[:, :40] / (np.sqrt(2) * 98), atol=1e-13)
    big = rng.standard_normal(2048)
    np.testing.assert_allclose(to_spectral(to_grid(big, 4096), 2048), big, atol=1e-11)


def test_grid_nodes():
    np.testing.assert_allclose(grid_nodes(3), [0.25, 0.5, 0.75])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 64), st.integers(0, 3), st.integers(0, 2**31))
def test_round_trip_property(n, extra, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    n_grid = n + extra * n
    assert np.max(np.abs(to_spectral(to_grid(x, n_grid), n) - x)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 0.2), st.floats(0, 0.2), st.integers(0, 2**31))
def test_semigroup_law_property(t, u, seed):
    s = dirichlet_laplacian_spectrum(64)
    x = np.random.default_rng(seed).uniform(-1, 1, 64)
    lhs = semigroup_apply(s, t, semigroup_apply(s, u, x))
    assert np.max(np.abs(lhs - semigroup_apply(s, t + u, x))) <= 1e-14


def test_smoothing_bound_examples():
    s = dirichlet_laplacian_spectrum(256)
    rep = smoothing_bound_check(s, 0, [0.01, 0.1, 1.0])
    for t, measured, bound in rep.rows:
        assert measured == pytest.approx(np.exp(-PI2 * t), rel=1e-14)
        assert bound == pytest.approx(np.exp(-PI2 * t / 2), rel=1e-14)
        assert measured < bound
    (t, measured, bound), = smoothing_bound_check(s, 1, [0.01]).rows
    lam = s.eigenvalues
    assert measured == pytest.approx(np.max(lam * np.exp(-0.01 * lam)), rel=1e-14)
    assert bound == pytest.approx(2 / np.e * 100 * np.exp(-PI2 * 0.005), rel=1e-14)
    assert smoothing_bound_check(s, 1, [0.01]).holds
    late = smoothing_bound_check(s, 0.5, [50.0, 100.0]).rows
    assert all(m <= b for _, m, b in late) and late[-1][2] < 1e-20


def test_bound_checks_hold_on_grid():
    s = dirichlet_laplacian_spectrum(1024)
    ts = np.logspace(-4, 1, 41)
    assert all(smoothing_bound_check(s, g, ts).holds for g in (0, 0.25, 0.5, 1, 2))
    pairs = [(a, a + d) for a in (0, 0.01, 1) for d in (1e-4, 0.1, 5)]
    assert all(difference_bound_check(s, r, pairs).holds for r in (0, 0.5, 1))
    with pytest.raises(ValueError):
        difference_bound_check(s, 1.5, pairs)
    with pytest.raises(ValueError):
        difference_bound_check(s, 0.5, [(1.0, 0.5)])
