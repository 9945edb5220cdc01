import numpy as np
import pytest

from wignerlab.clt import (
    CltError,
    ContourMesh,
    TestFunction,
    bump_test_function,
    char_curve,
    covariance_exponents,
    delta_shift,
    expectation_terms,
    log_test_function,
    poly_test_function,
    variance_gw,
    variance_main_symmetric,
    variance_wigner_type,
)
from wignerlab.ensemble import GAUSSIAN, make_profile, sample_matrix


def chebyshev_main_oracle(f: TestFunction, kmax: int = 40, npts: int = 4096) -> float:
    """Independent oracle: main = (1/2) sum_{k>=1} k c_k^2 with c_k the
    Chebyshev coefficients of f(2 cos theta), computed by quadrature."""
    theta = (np.arange(npts) + 0.5) * np.pi / npts
    vals = f.f(2.0 * np.cos(theta))
    cks = []
    for k in range(1, kmax + 1):
        cks.append(2.0 / npts * np.sum(vals * np.cos(k * theta)))
    return 0.5 * sum(k * c * c for k, c in enumerate(cks, start=1))


def probe_derivatives(f: TestFunction, lo=-1.9, hi=1.9):
    xs = np.linspace(lo, hi, 101)
    h = 1e-5
    fd1 = (f.f(xs + h) - f.f(xs - h)) / (2 * h)
    fd2 = (f.f(xs + h) - 2 * f.f(xs) + f.f(xs - h)) / h ** 2
    scale1 = 1.0 + np.max(np.abs(fd1))
    scale2 = 1.0 + np.max(np.abs(fd2))
    assert np.max(np.abs(f.df(xs) - fd1)) / scale1 < 1e-5
    assert np.max(np.abs(f.d2f(xs) - fd2)) / scale2 < 1e-3


class TestTestFunctions:
    def test_poly_derivatives(self):
        probe_derivatives(poly_test_function([0.0, 1.0, 2.0, -0.5]))

    def test_bump_derivatives(self):
        probe_derivatives(bump_test_function(0.3, 0.8), lo=-0.4, hi=1.0)

    def test_log_derivatives(self):
        probe_derivatives(log_test_function(0.2, 0.4, 256, part="re"))
        probe_derivatives(log_test_function(0.2, 0.4, 256, part="im"))

    def test_log_far_field(self):
        f = log_test_function(0.5, 0.5, 1024, part="re")
        xs = np.array([-1.5, 2.0, 2.5])
        assert np.max(np.abs(f.f(xs) - np.log(np.abs(xs - 0.5)))) < 1e-3

    def test_log_f2_norm_scale(self):
        # ||f''||_1 <= C n^gamma with C = 10
        for gamma in (0.2, 0.35, 0.5):
            f = log_test_function(0.0, gamma, 512, part="re")
            _, _, l1d2 = f.l1_norms()
            assert l1d2 <= 10.0 * 512 ** gamma

    def test_log_gamma_range(self):
        with pytest.raises(CltError):
            log_test_function(0.0, 1.5, 64)


class TestVarianceGw:
    def test_constant_function_vanishes(self):
        f = poly_test_function([3.0])
        vb = variance_gw(f, make_profile("uniform", 16), "gaussian")
        assert vb.main == 0.0
        assert abs(vb.trace_s_term) < 1e-20
        assert abs(vb.quartic_term) < 1e-18

    def test_linear_main_term(self):
        f = poly_test_function([0.0, 1.0])
        vb = variance_gw(f, make_profile("uniform", 16), "gaussian")
        assert abs(vb.main - 2.0) <= 1e-9

    def test_quadratic_main_term(self):
        f = poly_test_function([0.0, 0.0, 1.0])
        vb = variance_gw(f, make_profile("uniform", 16), "gaussian")
        assert abs(vb.main - 4.0) <= 1e-9

    def test_beta_two_halves_main(self):
        f = poly_test_function([0.0, 1.0])
        v1 = variance_gw(f, make_profile("uniform", 16), "gaussian", beta=1)
        v2 = variance_gw(f, make_profile("uniform", 16), "gaussian", beta=2)
        assert abs(v2.main - v1.main / 2.0) < 1e-12
        assert v2.beta == 2

    def test_trace_term_values(self):
        # f = x: I1 = 2 pi, so trace term = TrS * 4pi^2/(4pi^2) = TrS
        f = poly_test_function([0.0, 1.0])
        for kind, exp in (("uniform", 1.0), ("goe", 2.0)):
            vb = variance_gw(f, make_profile(kind, 32), "gaussian")
            assert abs(vb.trace_s_term - exp) <= 1e-9

    def test_quartic_term_value(self):
        # uniform rademacher, f = x^2: I2 = -2pi, s4 = -2: quartic = -8
        f = poly_test_function([0.0, 0.0, 1.0])
        vb = variance_gw(f, make_profile("uniform", 24), "rademacher")
        assert abs(vb.quartic_term - (-8.0)) <= 1e-8
        # gaussian: 0
        vb = variance_gw(f, make_profile("uniform", 24), "gaussian")
        assert vb.quartic_term == 0.0

    def test_classical_total_exact_identities(self):
        # Var(Tr H) = sum sigma2_ii; Var(Tr H^2) = 0 for uniform rademacher
        fx = poly_test_function([0.0, 1.0])
        for kind, target in (("uniform", 1.0), ("goe", 2.0)):
            vb = variance_gw(fx, make_profile(kind, 64), "gaussian")
            assert abs(vb.classical_total - target) <= 0.05
        fx2 = poly_test_function([0.0, 0.0, 1.0])
        vb = variance_gw(fx2, make_profile("uniform", 64), "rademacher")
        assert abs(vb.classical_total) <= 1e-6

    def test_epsilon_band_nonnegative_and_log_form(self):
        prof = make_profile("goe", 32)
        f = log_test_function(0.0, 0.3, 256, part="re")
        vb = variance_gw(f, prof, "gaussian")
        assert abs(vb.epsilon_band - 5.0 * 0.3 * np.log(32)) < 1e-12
        g = poly_test_function([0.0, 1.0])
        vb2 = variance_gw(g, prof, "gaussian")
        assert vb2.epsilon_band >= 0.0
        # GOE f=x: the A-diagonal part alone is ~2
        assert vb2.epsilon_band >= 1.8

    def test_main_vs_oracles_on_polynomials(self):
        rs = np.random.default_rng(3)
        for _ in range(5):
            coeffs = rs.uniform(-1, 1, 7)
            f = poly_test_function(coeffs)
            vb = variance_gw(f, make_profile("uniform", 8), "gaussian")
            sym = variance_main_symmetric(f)
            cheb = chebyshev_main_oracle(f)
            assert abs(vb.main - sym) <= 1e-6 * max(1.0, abs(sym))
            assert abs(vb.main - cheb) <= 1e-6 * max(1.0, abs(cheb))


class TestVarianceMainSymmetric:
    def test_linear(self):
        assert abs(variance_main_symmetric(poly_test_function([0.0, 1.0])) - 2.0) <= 1e-9

    def test_constant(self):
        assert abs(variance_main_symmetric(poly_test_function([5.0]))) <= 1e-12


class TestVarianceWignerType:
    def test_uniform_matches_gw_total_on_even_bump(self):
        # f = x^2 * bump (even): I1 = 0, so the sign-ambiguous O(1) terms drop
        # and both engines must agree within 5e-2 relative
        bump = bump_test_function(0.0, 1.5)
        f = TestFunction(
            f=lambda x: x ** 2 * bump.f(x),
            df=lambda x: 2 * x * bump.f(x) + x ** 2 * bump.df(x),
            d2f=lambda x: 2 * bump.f(x) + 4 * x * bump.df(x) + x ** 2 * bump.d2f(x),
            support=(-1.5, 1.5),
        )
        prof = make_profile("uniform", 16)
        vt = variance_wigner_type(f, prof, "gaussian")
        vb = variance_gw(f, prof, "gaussian")
        total = vb.main + vb.trace_s_term + vb.quartic_term
        assert abs(vt - total) <= 5e-2 * abs(total)

    def test_constant_function_vanishes(self):
        f = poly_test_function([2.0])
        f = TestFunction(f=f.f, df=f.df, d2f=f.d2f, support=(-3.0, 3.0))
        prof = make_profile("uniform", 12)
        vt = variance_wigner_type(f, prof, "gaussian",
                                  mesh=ContourMesh(refine_check=False))
        assert abs(vt) <= 5e-3

    def test_two_block_linear_matches_exact_identity(self):
        # f(x) = x: Var(Tr H) = sum sigma2_ii = TrS exactly
        half = 8
        s = np.full((16, 16), 0.5 / 16)
        s[:half, :half] = 1.5 / 16
        s[half:, half:] = 1.5 / 16
        prof = make_profile("custom", 16, sigma2=s)
        f = poly_test_function([0.0, 1.0])
        vt = variance_wigner_type(f, prof, "gaussian",
                                  mesh=ContourMesh(refine_check=False))
        assert abs(vt - 1.5) <= 0.05

    def test_two_block_matches_mc(self):
        # MC Var(Tr H) over dense samples at n=256 vs the contour engine on
        # the (n-independent) block-equivalent n=16 profile
        half = 128
        s = np.full((256, 256), 0.5 / 256)
        s[:half, :half] = 1.5 / 256
        s[half:, half:] = 1.5 / 256
        prof256 = make_profile("custom", 256, sigma2=s)
        reps = 800
        traces = np.array([
            sample_matrix(prof256, GAUSSIAN, seed=i).trace() for i in range(reps)
        ])
        mc = traces.var(ddof=1)
        se = mc * np.sqrt(2.0 / (reps - 1))
        s16 = np.full((16, 16), 0.5 / 16)
        s16[:8, :8] = 1.5 / 16
        s16[8:, 8:] = 1.5 / 16
        prof16 = make_profile("custom", 16, sigma2=s16)
        vt = variance_wigner_type(poly_test_function([0.0, 1.0]), prof16, "gaussian",
                                  mesh=ContourMesh(refine_check=False))
        assert abs(vt - mc) <= 3.0 * se


class TestExpectationTerms:
    def test_constant(self):
        et = expectation_terms(poly_test_function([1.0]),
                               make_profile("uniform", 16), "gaussian")
        assert abs(et.leading - (-0.5)) <= 1e-10
        assert abs(et.boundary - 0.5) <= 1e-12
        assert abs(et.s_ii_term) <= 1e-10
        assert abs(et.total) <= 1e-9
        assert et.o1_ambiguous

    def test_linear_all_vanish(self):
        et = expectation_terms(poly_test_function([0.0, 1.0]),
                               make_profile("goe", 16), "gaussian")
        for v in (et.leading, et.boundary, et.s_ii_term, et.quartic_term):
            assert abs(v) <= 1e-10

    def test_quadratic(self):
        et = expectation_terms(poly_test_function([0.0, 0.0, 1.0]),
                               make_profile("uniform", 16), "gaussian")
        assert abs(et.leading - (-1.0)) <= 1e-9
        assert abs(et.boundary - 2.0) <= 1e-12


class TestDeltaShift:
    def test_beta_two_vanishes(self):
        for e in (-2.0, 0.0, 1.3, 2.0):
            assert delta_shift(e, 500, 2) == 0.0

    def test_edge_value(self):
        assert abs(delta_shift(2.0, 1000, 1) - (-np.log(1000) / 6.0)) < 1e-12
        assert abs(delta_shift(2.0, 1000, 1) - (-1.1512925)) < 1e-6

    def test_center_value(self):
        assert abs(delta_shift(0.0, 100, 1) - 0.25 * np.log(2.0)) < 1e-15
        assert abs(delta_shift(0.0, 100, 1) - 0.1732868) < 1e-6

    def test_crossover_continuity(self):
        n = 729
        kcross = float(n) ** (-2.0 / 3.0)
        left = delta_shift(2.0 - kcross * (1 - 1e-12), n, 1)
        right = delta_shift(2.0 - kcross * (1 + 1e-12), n, 1)
        assert abs(left - right) < 1e-10


class TestCovarianceExponents:
    def test_diagonal_center(self):
        ce = covariance_exponents([0.0], 1000, 1)
        expected = (np.log(1000) + np.log(np.sqrt(2.0))) / np.log(1000)
        assert abs(ce.a[0, 0] - expected) < 1e-12
        assert abs(ce.a[0, 0] - 1.0502) < 1e-4

    def test_off_diagonal(self):
        ce = covariance_exponents([0.0, 0.5], 1000, 1)
        assert abs(ce.a[0, 1] - (-np.log(0.5) / np.log(1000))) < 1e-9
        assert abs(ce.a[0, 1] - 0.10034) < 1e-4

    def test_edge_b_clipped(self):
        ce = covariance_exponents([2.0], 1000, 1)
        assert ce.b[0, 0] == 0.0

    def test_symmetric_and_monotone(self):
        es = [0.0, 0.1, 0.4, 1.0]
        ce = covariance_exponents(es, 512, 1)
        assert np.array_equal(ce.a, ce.a.T)
        assert np.array_equal(ce.b, ce.b.T)
        # a decreases as the separation grows from a fixed base point
        seps = [ce.a[0, j] for j in range(1, 4)]
        assert seps[0] > seps[1] > seps[2]

    def test_c_from_indices(self):
        ce = covariance_exponents([], 256, 1, indices=[128, 4])
        assert ce.c is not None and ce.c.shape == (2, 2)

    def test_energy_range(self):
        with pytest.raises(CltError):
            covariance_exponents([2.5], 100, 1)


class TestCharCurve:
    def test_values(self):
        assert char_curve(3.0, [0.0])[0] == 1.0
        assert abs(char_curve(2.0, [1.0])[0] - np.exp(-1.0)) < 1e-15

    def test_negative_variance_rejected(self):
        with pytest.raises(CltError):
            char_curve(-0.1, [0.0])


class TestLogEpsilonBand:
    def test_band_scales_with_gamma_log_n(self):
        for n, gamma in ((256, 0.2), (1024, 0.4)):
            f = log_test_function(0.3, gamma, n, part="re")
            vb = variance_gw(f, make_profile("uniform", 16), "gaussian")
            assert vb.epsilon_band <= 5.0 * gamma * np.log(n) + 1e-12
