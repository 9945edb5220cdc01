import numpy as np
import pytest
from scipy.integrate import quad

from wignerlab.ensemble import GAUSSIAN, MatrixSample, make_profile, sample_matrix
from wignerlab.spectral import (
    ScaleParams,
    SpectralError,
    Spectrum,
    characteristic,
    eigenvalues,
    log_char_poly,
    log_potential,
    m_sc,
    normalized_fluct,
    quantile,
    quantiles,
    rho,
    scale_params,
    semicircle_cdf,
    stieltjes,
    ward_residual,
)


def diag_sample(values) -> MatrixSample:
    vals = np.asarray(values, dtype=np.float64)
    return MatrixSample(n=len(vals), symmetry="real", entries=np.diag(vals),
                        seed_record={"diag": True})


class TestEigenvalues:
    def test_one_by_one(self):
        spec = eigenvalues(diag_sample([0.7]))
        assert spec.lambdas.tolist() == [0.7]

    def test_sorted_diagonal(self):
        spec = eigenvalues(diag_sample([3.0, -1.0, 2.0]))
        assert np.allclose(spec.lambdas, [-1.0, 2.0, 3.0])

    def test_trace_invariance(self):
        for seed in range(5):
            s = sample_matrix(make_profile("goe", 64), GAUSSIAN, seed=seed)
            spec = eigenvalues(s)
            assert abs(spec.lambdas.sum() - s.trace()) <= 1e-8 * 64


class TestSemicircle:
    def test_rho_values(self):
        assert abs(rho(0.0) - 1.0 / np.pi) < 1e-15
        assert rho(2.0) == 0.0 and rho(-2.0) == 0.0
        assert rho(3.0) == 0.0

    def test_m_sc_golden_point(self):
        assert abs(m_sc(1j) - 1j * (np.sqrt(5.0) - 1.0) / 2.0) < 1e-14

    def test_m_sc_equation_residual_grid(self):
        # |m^2 + z m + 1| <= 1e-12 and Im m > 0 on 10^3 upper-half-plane points
        rs = np.random.default_rng(1)
        z = rs.uniform(-3, 3, 1000) + 1j * rs.uniform(1e-4, 2.0, 1000)
        m = m_sc(z)
        assert np.all(m.imag > 0)
        assert np.max(np.abs(m * m + z * m + 1.0)) <= 1e-12

    def test_m_sc_real_axis_guard(self):
        with pytest.raises(SpectralError):
            m_sc(0.5)
        assert abs(m_sc(3.0) - (-3 + np.sqrt(5)) / 2) < 1e-14


class TestQuantile:
    def test_midpoint_and_edge(self):
        assert abs(quantile(500, 1000)) < 1e-10
        assert quantile(1000, 1000) == 2.0

    def test_round_trip_all_k(self):
        n = 1000
        for k in range(1, n + 1):
            g = quantile(k, n)
            assert abs(semicircle_cdf(g) - k / n) <= 1e-10

    def test_out_of_range(self):
        with pytest.raises(SpectralError):
            quantile(0, 10)
        with pytest.raises(SpectralError):
            quantile(11, 10)


class TestScaleParams:
    def test_kappa(self):
        assert scale_params(1.5, 100).kappa == 0.5

    def test_bulk_spacing(self):
        sp = scale_params(0.0, 100)
        assert abs(sp.ell - 1e-2 / np.sqrt(2.0)) < 1e-15

    def test_edge_spacing(self):
        for n in (10, 100, 1000):
            assert scale_params(2.0, n).ell == n ** (-2.0 / 3.0)


class TestStieltjes:
    def test_single_atom(self):
        spec = Spectrum(n=1, lambdas=np.array([0.0]), meta={})
        assert stieltjes(spec, 1j) == 1j

    def test_conjugation(self):
        spec = eigenvalues(diag_sample([0.3, -0.4, 1.1]))
        z = 0.2 + 0.7j
        assert abs(stieltjes(spec, np.conj(z)) - np.conj(stieltjes(spec, z))) < 1e-15

    def test_eigenvalue_collision_rejected(self):
        spec = Spectrum(n=1, lambdas=np.array([0.5]), meta={})
        with pytest.raises(SpectralError):
            stieltjes(spec, 0.5)

    def test_local_law_scale_mc(self):
        # |s(z) - m(z)| <= 5/(n eta) at z = i*0.1, 50 GOE replicas, n = 1024
        n, eta = 1024, 0.1
        z = 1j * eta
        bound = 5.0 / (n * eta)
        from wignerlab.ensemble import tridiagonal_gaussian_spectrum

        for i in range(50):
            lam = tridiagonal_gaussian_spectrum(n, 1, 4242 + i)
            spec = Spectrum(n=n, lambdas=lam, meta={})
            assert abs(stieltjes(spec, z) - m_sc(z)) <= bound


class TestLogPotential:
    def test_value_at_two(self):
        assert abs(log_potential(2.0) - 0.5) < 1e-12

    def test_against_quadrature(self):
        # U(2) = int log(2 - x) rho(x) dx by adaptive quadrature
        val, _ = quad(lambda x: np.log(2.0 - x) * rho(x), -2.0, 2.0)
        assert abs(log_potential(2.0).real - val) < 1e-8
        # and at a complex point
        z = 1.3 + 0.4j
        re, _ = quad(lambda x: np.log(abs(z - x)) * rho(x), -2, 2)
        im, _ = quad(lambda x: np.angle(z - x) * rho(x), -2, 2)
        assert abs(log_potential(z) - (re + 1j * im)) < 1e-8

    def test_normalization_at_infinity(self):
        z = 1e6
        assert abs(log_potential(z) - np.log(z)) < 1e-6

    def test_derivative_is_minus_m_sc(self):
        z = 1.0 + 1.0j
        h = 1e-6
        fd = (log_potential(z + h) - log_potential(z - h)) / (2 * h)
        assert abs(fd - (-m_sc(z))) < 1e-7

    def test_branch_cut_rejected(self):
        with pytest.raises(SpectralError):
            log_potential(-2.5)
        with pytest.raises(SpectralError):
            log_potential(-2.0)


class TestLogCharPoly:
    def test_real_axis_right_of_spectrum(self):
        spec = eigenvalues(diag_sample([-0.5, 0.1, 0.9]))
        val = log_char_poly(spec, 2.0)
        assert abs(val.imag) < 1e-12

    def test_counts_eigenvalues_above(self):
        rs = np.random.default_rng(7)
        lam = np.sort(rs.uniform(-1.8, 1.8, 12))
        spec = Spectrum(n=12, lambdas=lam, meta={})
        for gap in range(11):
            e = 0.5 * (lam[gap] + lam[gap + 1])
            total = np.sum(np.where(e - lam < 0, np.pi, 0.0))
            count = total / np.pi
            assert abs(count - np.sum(lam > e)) < 1e-12
            # via log_char_poly: Im L = Im sum log - n Im U
            l_val = log_char_poly(spec, e)
            n_above = (l_val.imag / np.pi
                       + 12 * log_potential(e).imag / np.pi)
            assert abs(n_above - np.sum(lam > e)) < 1e-9

    def test_quantile_spectrum_is_order_one(self):
        for n in (100, 1000):
            spec = Spectrum(n=n, lambdas=quantiles(n), meta={})
            assert abs(log_char_poly(spec, 1j)) <= 2.0

    def test_conjugation(self):
        spec = eigenvalues(diag_sample([0.2, -0.7, 1.4]))
        z = 0.3 + 0.8j
        assert abs(log_char_poly(spec, np.conj(z))
                   - np.conj(log_char_poly(spec, z))) < 1e-10

    def test_im_drops_by_one_across_eigenvalue(self):
        lam = np.array([-1.0, 0.2, 1.3])
        spec = Spectrum(n=3, lambdas=lam, meta={})
        eps = 1e-9
        for k in range(3):
            below = log_char_poly(spec, lam[k] - eps)
            above = log_char_poly(spec, lam[k] + eps)
            du = 3 * (log_potential(lam[k] + eps).imag
                      - log_potential(lam[k] - eps).imag)
            drop = (below.imag - above.imag - du) / np.pi
            assert abs(drop - 1.0) < 1e-5

    def test_collision_rejected(self):
        spec = Spectrum(n=1, lambdas=np.array([0.25]), meta={})
        with pytest.raises(SpectralError):
            log_char_poly(spec, 0.25)


class TestCharacteristic:
    def test_identity_at_zero(self):
        z = 0.4 + 0.9j
        assert abs(characteristic(z, 0.0) - z) < 1e-14

    def test_initial_velocity(self):
        z = 0.5 + 0.1j
        h = 1e-6
        fd = (characteristic(z, h) - z) / h
        expected = m_sc(z) + z / 2.0
        assert abs(fd - expected) < 1e-6

    def test_closed_form_vs_ode(self):
        z = 1.9 + 0.01j
        for t in np.linspace(0.05, 1.0, 8):
            a = characteristic(z, t)
            b = characteristic(z, t, mode="ode")
            assert abs(a - b) <= 1e-8

    def test_semigroup(self):
        z = -0.7 + 0.2j
        lhs = characteristic(z, 0.7)
        rhs = characteristic(characteristic(z, 0.3), 0.4)
        assert abs(lhs - rhs) <= 1e-8

    def test_lower_half_rejected(self):
        with pytest.raises(SpectralError):
            characteristic(1.0 - 0.1j, 0.5)


class TestNormalizedFluct:
    def test_zero_at_quantile(self):
        n = 64
        spec = Spectrum(n=n, lambdas=quantiles(n), meta={})
        assert normalized_fluct(spec, 10, 1) == 0.0

    def test_midpoint_substitution(self):
        # n=100, beta=1, k=50, lambda - gamma = 1e-3:
        # Y = pi * 100 * (1/sqrt(log 100)) * rho(0) * 1e-3 = 0.1/sqrt(log 100)
        n = 100
        lam = quantiles(n)
        lam[49] += 1e-3
        spec = Spectrum(n=n, lambdas=lam, meta={})
        expected = np.pi * n / np.sqrt(np.log(n)) * rho(0.0) * 1e-3
        assert abs(expected - 0.1 / np.sqrt(np.log(100.0))) < 1e-12
        assert abs(normalized_fluct(spec, 50, 1) - expected) < 1e-9

    def test_edge_rejected(self):
        n = 32
        spec = Spectrum(n=n, lambdas=quantiles(n), meta={})
        with pytest.raises(SpectralError):
            normalized_fluct(spec, n, 1)


class TestWardResidual:
    def test_two_by_two_diagonal(self):
        # G = diag(1/(1-i), 1/(-1-i)): sum_j |G_1j|^2 = 1/2 = Im G_11 / eta
        s = diag_sample([1.0, -1.0])
        assert ward_residual(s, 1j) < 1e-15

    def test_identity_matrix(self):
        s = diag_sample([1.0, 1.0, 1.0])
        assert ward_residual(s, 2j) <= 1e-12

    def test_random_goe(self):
        s = sample_matrix(make_profile("goe", 64), GAUSSIAN, seed=9)
        assert ward_residual(s, 0.3 + 0.05j) <= 1e-9

    def test_requires_upper_half(self):
        with pytest.raises(SpectralError):
            ward_residual(diag_sample([1.0]), 1.0)
