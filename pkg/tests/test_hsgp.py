"""Unit tests for the reduced-rank GP basis and Matérn 3/2 machinery."""

import math

import numpy as np
import pytest
from scipy import integrate

from strainfield import (
    HsgpBasis,
    KernelHyper,
    approx_kernel,
    build_design_matrix,
    eigenfunction,
    eigenvalue,
    matern32_kernel_exact,
    matern32_spectral_density,
    spectral_weights,
)
from strainfield.errors import DomainOverflowError

HYPER = KernelHyper(alpha=1.0, ell=1.0)


class TestEigenvalue:
    def test_hand_value(self):
        assert eigenvalue(1, 3.0) == pytest.approx((math.pi / 6.0) ** 2)
        assert eigenvalue(1, 3.0) == pytest.approx(0.2741557, abs=1e-6)

    def test_quadratic_in_m(self):
        assert eigenvalue(2, 3.0) == pytest.approx(4.0 * eigenvalue(1, 3.0))

    def test_doubling_L_quarters(self):
        assert eigenvalue(5, 6.0) == pytest.approx(eigenvalue(5, 3.0) / 4.0)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            eigenvalue(0, 3.0)
        with pytest.raises(ValueError):
            eigenvalue(1, 0.0)

    def test_basis_eigenvalues_increasing(self):
        basis = HsgpBasis(L=3.0, M=40)
        assert np.all(np.diff(basis.eigenvalues) > 0)


class TestEigenfunction:
    def test_zero_at_lower_boundary(self):
        for m in (1, 2, 7):
            assert eigenfunction(m, 3.0, -3.0) == 0.0

    def test_zero_at_upper_boundary(self):
        for m in (1, 2, 7):
            assert eigenfunction(m, 3.0, 3.0) == 0.0

    def test_zero_outside_domain(self):
        assert eigenfunction(1, 3.0, 3.5) == 0.0
        assert eigenfunction(4, 3.0, -10.0) == 0.0

    def test_hand_value_at_origin(self):
        assert eigenfunction(1, 3.0, 0.0) == pytest.approx(0.5773503, abs=1e-6)

    def test_vectorized_evaluation(self):
        x = np.linspace(-3, 3, 11)
        values = eigenfunction(2, 3.0, x)
        assert values.shape == x.shape


class TestSpectralDensity:
    def test_hand_value_at_zero(self):
        assert matern32_spectral_density(0.0, HYPER) == pytest.approx(
            4.0 / math.sqrt(3.0)
        )
        assert matern32_spectral_density(0.0, HYPER) == pytest.approx(
            2.3094011, abs=1e-6
        )

    def test_even_function(self):
        for w in (0.3, 1.7, 12.0):
            assert matern32_spectral_density(w, HYPER) == matern32_spectral_density(
                -w, HYPER
            )

    def test_monotone_decreasing_in_frequency(self):
        w = np.linspace(0, 20, 200)
        s = matern32_spectral_density(w, HYPER)
        assert np.all(np.diff(s) < 0)

    @pytest.mark.parametrize("ell", [0.5, 1.0, 2.0])
    def test_integral_recovers_variance(self, ell):
        hyper = KernelHyper(alpha=1.3, ell=ell)
        total, _ = integrate.quad(
            lambda w: matern32_spectral_density(w, hyper) / (2.0 * math.pi),
            -np.inf,
            np.inf,
        )
        assert total == pytest.approx(hyper.alpha**2, abs=1e-6)


class TestExactKernel:
    def test_zero_lag_is_variance(self):
        hyper = KernelHyper(alpha=2.0, ell=0.7)
        assert matern32_kernel_exact(0.3, 0.3, hyper) == pytest.approx(4.0)

    def test_hand_value_at_unit_lag(self):
        assert matern32_kernel_exact(0.0, 1.0, HYPER) == pytest.approx(
            0.4833577, abs=1e-6
        )

    def test_vanishes_at_long_range(self):
        assert matern32_kernel_exact(0.0, 100.0, HYPER) < 1e-12


class TestApproxKernel:
    BASIS = HsgpBasis(L=3.0, M=40)

    def test_boundary_gives_exact_zero(self):
        assert approx_kernel(-3.0, 0.5, self.BASIS, HYPER) == 0.0
        assert approx_kernel(0.5, 3.0, self.BASIS, HYPER) == 0.0

    def test_matches_exact_kernel_in_interior(self):
        approx = approx_kernel(0.0, 0.5, self.BASIS, HYPER)
        exact = matern32_kernel_exact(0.0, 0.5, HYPER)
        assert abs(approx - exact) < 0.01

    def test_symmetric(self):
        assert approx_kernel(0.3, -1.2, self.BASIS, HYPER) == approx_kernel(
            -1.2, 0.3, self.BASIS, HYPER
        )

    def test_out_of_domain_rejected(self):
        with pytest.raises(DomainOverflowError):
            approx_kernel(3.5, 0.0, self.BASIS, HYPER)

    @pytest.mark.parametrize("ell", [0.5, 1.0, 2.0])
    def test_error_monotone_in_basis_size(self, ell):
        hyper = KernelHyper(alpha=1.0, ell=ell)
        grid = np.linspace(-2.0, 2.0, 41)
        xi, xj = np.meshgrid(grid, grid)
        errors = []
        for m in (10, 20, 40, 80):
            basis = HsgpBasis(L=3.0, M=m)
            approx = approx_kernel(xi.ravel(), xj.ravel(), basis, hyper)
            exact = matern32_kernel_exact(xi.ravel(), xj.ravel(), hyper)
            errors.append(np.max(np.abs(approx - exact)))
        assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))

    def test_gram_matrix_positive_semidefinite(self):
        x = np.linspace(-2.8, 2.8, 60)
        phi = np.column_stack(
            [eigenfunction(m, 3.0, x) for m in range(1, self.BASIS.M + 1)]
        )
        s = spectral_weights(self.BASIS, HYPER) ** 2
        gram = phi @ np.diag(s) @ phi.T
        assert np.linalg.eigvalsh(gram).min() >= -1e-10

    def test_prior_sample_covariance_matches(self, rng):
        # empirical covariance of the linear form against the kernel it encodes
        points = np.array([-1.0, 0.0, 0.8])
        phi = np.column_stack(
            [eigenfunction(m, 3.0, points) for m in range(1, self.BASIS.M + 1)]
        )
        w = spectral_weights(self.BASIS, HYPER)
        draws = (phi * w) @ rng.normal(size=(self.BASIS.M, 10_000))
        empirical = np.cov(draws)
        for i in range(3):
            for j in range(3):
                expected = approx_kernel(points[i], points[j], self.BASIS, HYPER)
                mc_se = 1.0 / math.sqrt(10_000) * (1.0 + abs(expected))
                assert abs(empirical[i, j] - expected) < 5 * mc_se


class TestDesignMatrix:
    def test_boundary_row_is_zero(self):
        design = build_design_matrix(np.array([-3.0]), HsgpBasis(L=3.0, M=8))
        np.testing.assert_array_equal(design.entries, 0.0)

    def test_shape(self):
        x = np.linspace(-2, 2, 750)
        design = build_design_matrix(x, HsgpBasis(L=3.0, M=40))
        assert design.entries.shape == (750, 40)

    def test_columns_match_eigenfunctions(self):
        basis = HsgpBasis(L=3.0, M=6)
        design = build_design_matrix(np.array([0.0, 0.7]), basis)
        for m in range(1, 7):
            assert design.entries[0, m - 1] == pytest.approx(
                eigenfunction(m, 3.0, 0.0)
            )
            assert design.entries[1, m - 1] == pytest.approx(
                eigenfunction(m, 3.0, 0.7)
            )

    def test_out_of_domain_fails_fast(self):
        with pytest.raises(DomainOverflowError):
            build_design_matrix(np.array([0.0, 3.2]), HsgpBasis(L=3.0, M=8))


class TestSpectralWeights:
    BASIS = HsgpBasis(L=3.0, M=40)

    def test_strictly_positive(self):
        assert np.all(spectral_weights(self.BASIS, HYPER) > 0)

    def test_non_increasing(self):
        w = spectral_weights(self.BASIS, HYPER)
        assert np.all(np.diff(w) <= 0)

    def test_squares_to_spectral_density(self):
        w = spectral_weights(self.BASIS, HYPER)
        s = matern32_spectral_density(np.sqrt(self.BASIS.eigenvalues), HYPER)
        np.testing.assert_allclose(w**2, s, rtol=1e-12)
