import math

import gmpy2
import pytest
from gmpy2 import mpfr

from miscost import asymptotics as asym
from miscost import exact
from miscost.errors import DomainError
from miscost.numerics import ModelParams, NumericContext, required_precision, to_real


# ---------------------------------------------------------------------------
# Lambert W and the saddle point
# ---------------------------------------------------------------------------

def test_lambert_trivial_points(ctx256):
    assert asym.lambert_w(0, ctx256) == 0
    with ctx256.gmp():
        e = gmpy2.exp(1)
        w = asym.lambert_w(e, ctx256)
        assert abs(w - 1) < mpfr(2) ** -240


def test_lambert_residual_grid(ctx128):
    # 13 log-spaced arguments, defining-equation residual < 1e-30
    for k in range(13):
        y = 10 ** k
        w = asym.lambert_w(y, ctx128)
        with gmpy2.context(precision=200):
            resid = abs(w * gmpy2.exp(w) - y) / y
        assert resid < mpfr(10) ** -30, (k, float(resid))


def test_lambert_domain(ctx128):
    with pytest.raises(DomainError):
        asym.lambert_w(-0.5, ctx128)


def test_saddle_consistency(p_half, ctx256):
    for x in (50, 400, 3000):
        sd = asym.SaddleData.from_x(x, p_half, ctx256)
        with ctx256.gmp():
            bound = mpfr(2) ** (-ctx256.precision_bits + 8) * x * gmpy2.log(2)
            assert sd.residual(p_half, ctx256) <= bound
        assert 0 < float(sd.r) < 1
        assert 1 <= float(sd.Q) < float(p_half.kappa)
        assert -1 < float(sd.eta) <= 0
        assert sd.N == math.floor(float(sd.log_inv_r) / math.log(2))


# ---------------------------------------------------------------------------
# theta-like series
# ---------------------------------------------------------------------------

def wide_window_F(s, q, ctx, window=60):
    with ctx.gmp():
        S = to_real(s, ctx)
        Q = to_real(q, ctx)
        total = mpfr(0)
        for j in range(-window, window + 1):
            total += Q ** (j * (j + 1) // 2) * S ** (j + 1) / (1 + Q ** j * S)
        return total


def wide_window_vartheta(x, q, ctx, window=60):
    with ctx.gmp():
        X = to_real(x, ctx)
        Q = to_real(q, ctx)
        total = mpfr(0)
        for j in range(-window, window + 1):
            total += Q ** (j * (j - 1) // 2) * X ** j
        return total


def test_F_functional_equation(p_half, ctx256):
    resid = asym.theta_F_residual(2.0, p_half, ctx256)
    assert resid < mpfr(2) ** -128


def test_F_shift_identity(p_half, ctx256):
    # F(1/q) = F(1)/q
    with ctx256.gmp():
        lhs = asym.theta_F(float(p_half.kappa), p_half, ctx256)
        rhs = asym.theta_F(1.0, p_half, ctx256) * to_real(p_half.kappa, ctx256)
        assert abs(lhs - rhs) < mpfr(2) ** -120


def test_F_against_wide_window(p_half, ctx256):
    with ctx256.gmp():
        got = asym.theta_F(3.0, p_half, ctx256)
        want = wide_window_F(3, p_half.q, ctx256)
        assert abs(got - want) < mpfr(2) ** -120


def test_F_derivative_against_finite_difference(p_half, ctx256):
    with ctx256.gmp():
        h = mpfr(2) ** -60
        f_plus = asym.theta_F(mpfr(2) + h, p_half, ctx256)
        f_minus = asym.theta_F(mpfr(2) - h, p_half, ctx256)
        fd = (f_plus - f_minus) / (2 * h)
        d1 = asym.theta_F(2.0, p_half, ctx256, deriv_order=1)
        assert abs(fd - d1) < mpfr(2) ** -100  # O(h^2) = 2^-120 truncation


def test_F_domain(p_half, ctx256):
    with pytest.raises(DomainError):
        asym.theta_F(-1.0, p_half, ctx256)


def test_vartheta_functional_equation(p_half, ctx256):
    assert asym.theta_bound_residual(5.0, p_half, ctx256) < mpfr(2) ** -128
    # substitute x = 1/q: residual of the same identity, trivially covered
    assert asym.theta_bound_residual(2.0, p_half, ctx256) < mpfr(2) ** -128


def test_vartheta_against_wide_window(p_half, ctx256):
    with ctx256.gmp():
        got = asym.theta_bound(1.0, p_half, ctx256)
        want = wide_window_vartheta(1, p_half.q, ctx256)
        assert abs(got - want) < mpfr(2) ** -120


def test_vartheta_domain(p_half, ctx256):
    with pytest.raises(DomainError):
        asym.theta_bound(0.0, p_half, ctx256)


# ---------------------------------------------------------------------------
# periodic amplitude G
# ---------------------------------------------------------------------------

def test_G_periodicity(p_half, ctx256):
    with ctx256.gmp():
        u = to_real(0.3, ctx256)
        shifted = u + 1
    assert asym.periodic_G(u, p_half, ctx256) == asym.periodic_G(shifted, p_half, ctx256)


def test_G_at_zero_is_F_of_one(p_half, ctx256):
    with ctx256.gmp():
        assert abs(
            asym.periodic_G(0.0, p_half, ctx256) - asym.theta_F(1.0, p_half, ctx256)
        ) < mpfr(2) ** -200


@pytest.mark.parametrize("u", [0.0, 0.25, 0.5, 0.75])
def test_G_two_printed_forms_agree(u, p_half, ctx256):
    with ctx256.gmp():
        lemma = asym.periodic_G(u, p_half, ctx256, form="lemma")
        series = asym.periodic_G(u, p_half, ctx256, form="series")
        assert abs(lemma - series) < mpfr(2) ** -120


def test_G_positive_on_grid(p_half, ctx256):
    for i in range(100):
        assert asym.periodic_G(i / 100.0, p_half, ctx256) > 0


# ---------------------------------------------------------------------------
# M(x) series
# ---------------------------------------------------------------------------

def test_M_at_zero(p_half, ctx256):
    assert asym.m_series(0, p_half, ctx256) == 1


def test_M_functional_equation(p_half, ctx256):
    assert asym.m_series_residual(50, p_half, ctx256) < mpfr(10) ** -30


def test_M_tracks_J(p_half, ctx256):
    gaps = []
    for n in (100, 400, 1600):
        with ctx256.gmp():
            ratio = asym.m_series(n, p_half, ctx256) / exact.J_direct(n, p_half, ctx256)
        gaps.append(abs(float(ratio) - 1.0))
    assert gaps[-1] < gaps[0]
    assert gaps[-1] < 0.05


# ---------------------------------------------------------------------------
# leading-order estimates
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p_str", ["1/3", "1/2", "2/3"])
def test_mu_leading_band_small_grid(p_str, ctx256):
    params = ModelParams.from_string(p_str)
    mu = exact.mu_recurrence(1000, params, ctx256)
    ratios = []
    for n in (500, 1000):
        est = asym.mu_leading(n, params, ctx256)
        ratios.append(float(est.value / mu[n]))
    assert all(0.5 < r < 2.0 for r in ratios)
    assert abs(ratios[1] - 1) < abs(ratios[0] - 1)


def test_mu_leading_requires_reasonable_n(p_half, ctx256):
    with pytest.raises(DomainError):
        asym.mu_leading(8, p_half, ctx256)


def test_j_leading_tracks_J(p_half, ctx256):
    J = exact.J_direct(800, p_half, ctx256)
    est = asym.j_leading(800, p_half, ctx256)
    with ctx256.gmp():
        ratio = float(est.value / J)
    assert 0.5 < ratio < 2.0


def test_estimate_log_consistency(p_half, ctx256):
    est = asym.mu_leading(500, p_half, ctx256)
    with ctx256.gmp():
        assert abs(gmpy2.exp(est.log_value) / est.value - 1) < mpfr("1e-20")


# ---------------------------------------------------------------------------
# Charlier correction
# ---------------------------------------------------------------------------

def test_tau_values():
    assert asym.charlier_tau(0, 10) == 1
    assert asym.charlier_tau(1, 10) == 0
    assert asym.charlier_tau(2, 10) == -10
    assert asym.charlier_tau(3, 10) == 20
    assert asym.charlier_tau(4, 10) == 240  # 3n^2 - 6n at n=10


@pytest.fixture(scope="module")
def gf200(p_half):
    ctx = NumericContext(precision_bits=required_precision(200))
    return exact.PoissonGF(p_half, 200, ctx=ctx, cache_dir=False)


def test_charlier_beats_poisson_heuristic(p_half, gf200, ctx256):
    mu = exact.mu_recurrence(200, p_half, ctx256)
    for n in (100, 200):
        est = asym.charlier_correction(n, 2, p_half, gf200)
        with gf200.ctx.gmp():
            err_plain = abs(est.extras["poisson_heuristic"] - mpfr(mu[n], precision=256))
            err_corr = abs(est.value - mpfr(mu[n], precision=256))
        assert err_corr < err_plain


def test_charlier_rejects_bad_terms(p_half, gf200):
    with pytest.raises(DomainError):
        asym.charlier_correction(100, 7, p_half, gf200)


# ---------------------------------------------------------------------------
# alternative expansion
# ---------------------------------------------------------------------------

def test_alt_expansion_T_values(p_half, ctx256):
    est = asym.alt_expansion(300, 1, p_half, ctx256)
    N = est.extras["N"]
    # T_0 = 1 and T_1 = 1/(N+1) under the r = N/x convention: recompute
    # the m=1 partial from its pieces
    with ctx256.gmp():
        T1 = 1 - to_real(N, ctx256) * gmpy2.fac(N) / gmpy2.fac(N + 1)
        assert abs(T1 - 1 / to_real(N + 1, ctx256)) < mpfr(2) ** -200


def test_alt_expansion_improves(p_half):
    x = 300
    ctx = NumericContext(precision_bits=required_precision(x))
    gf = exact.PoissonGF(p_half, x, ctx=ctx, cache_dir=False)
    ref = gf.eval(x, 0)
    est = asym.alt_expansion(x, 3, p_half, ctx)
    partials = est.extras["partials"]
    with ctx.gmp():
        err1 = abs(float((partials[1] - ref) / ref))
        err3 = abs(float((partials[3] - ref) / ref))
    assert err3 < err1


def test_alt_expansion_conventions_differ(p_half, ctx256):
    a = asym.alt_expansion(300, 2, p_half, ctx256, convention="N")
    b = asym.alt_expansion(300, 2, p_half, ctx256, convention="N1")
    assert a.extras["N"] == b.extras["N"]
    assert float(a.value) != float(b.value)


def test_alt_expansion_needs_big_x(p_half, ctx256):
    with pytest.raises(DomainError):
        asym.alt_expansion(3, 1, p_half, ctx256)


# ---------------------------------------------------------------------------
# ratio checks
# ---------------------------------------------------------------------------

def test_ratio_checks_drift(p_half):
    ctx = NumericContext(precision_bits=required_precision(440))
    gf = exact.PoissonGF(p_half, 440, ctx=ctx, cache_dir=False)
    rows = asym.ratio_checks(p_half, gf, xs=(100, 200, 400), js=(1, 2))
    by_j = {}
    for row in rows:
        if "deriv_ratio" in row:
            by_j.setdefault(row["j"], []).append(row["deriv_ratio"])
    for j, seq in by_j.items():
        assert asym.trend_toward_one(seq), (j, seq)
    shift = [r for r in rows if "shift_ratio" in r]
    for row in shift:
        assert abs(row["shift_ratio"] - 1) < 3 * row["shift_band"]


def test_ratio_checks_include_identity(p_half):
    ctx = NumericContext(precision_bits=required_precision(110))
    gf = exact.PoissonGF(p_half, 110, ctx=ctx, cache_dir=False)
    rows = asym.ratio_checks(p_half, gf, xs=(100,), js=(0,))
    row = [r for r in rows if r.get("j") == 0 and "deriv_ratio" in r][0]
    assert row["deriv_ratio"] == 1.0


# ---------------------------------------------------------------------------
# Z mean law
# ---------------------------------------------------------------------------

def test_z_constant_quadrature_matches_printed(ctx256):
    C = asym.z_constant_quadrature(ctx256)
    assert abs(float(C) - 0.0690646192) < 5e-10


def test_z_integrand_vanishes_at_one(ctx256):
    with ctx256.gmp():
        v = to_real(1, ctx256)
        assert (1 - 1 / v) * gmpy2.exp(-v) == 0


def test_z_printed_integral_diverges(ctx256):
    probe = asym.z_printed_integral_probe(ctx256, deltas=(1e-2, 1e-4, 1e-6))
    vals = [probe[d] for d in (1e-2, 1e-4, 1e-6)]
    # drops without bound as the lower limit approaches 0
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < -8


def test_fitted_constant_and_mean_law(ctx256):
    C, c1 = asym.fit_z_constant(ctx256, n_lo=40000, n_hi=160000)
    assert abs(float(C) - 0.0690646192) < 5e-8  # >= 6 digits
    nu = exact.nu_recurrence(10000, ctx256)
    est = asym.z_mean_asymptotic(10000, ctx256, C=C, c1=c1)
    with ctx256.gmp():
        rel = abs(float(est.value / nu[10000] - 1))
    assert rel < 1e-4


def test_z_mean_with_quadrature_constant(ctx256):
    nu = exact.nu_recurrence(10000, ctx256)
    est = asym.z_mean_asymptotic(10000, ctx256)
    with ctx256.gmp():
        rel = abs(float(est.value / nu[10000] - 1))
    # printed correction series misses an O(n^-1/2) term; the gap at
    # n = 1e4 sits near c1/sqrt(n) ~ 8e-4
    assert rel < 5e-3


# ---------------------------------------------------------------------------
# variance law predictions
# ---------------------------------------------------------------------------

def test_variance_prediction_constants(p_half, ctx256):
    pred_s2, pred_t2 = asym.variance_asymptotic(1000, p_half, ctx256, 1.0)
    with ctx256.gmp():
        lk = gmpy2.log(mpfr(2))
        logk = gmpy2.log(mpfr(1000)) / lk
        want_s2 = mpfr(0.5) * mpfr(1000) ** -2 * logk ** 3
        want_t2 = mpfr(1.0) * mpfr(1000) ** -3 * logk ** 4
        assert abs(pred_s2 / want_s2 - 1) < mpfr(2) ** -200
        assert abs(pred_t2 / want_t2 - 1) < mpfr(2) ** -200


# ---------------------------------------------------------------------------
# trend helpers
# ---------------------------------------------------------------------------

def test_trend_helpers():
    assert asym.trend_toward_one([1.5, 1.3, 1.2])
    assert asym.trend_toward_one([1.5, 1.6, 1.2])      # one uptick allowed
    assert not asym.trend_toward_one([1.5, 1.6, 1.7])  # two upticks
    assert asym.shrinks_in_magnitude([-0.5, 0.3, -0.1])
    assert not asym.shrinks_in_magnitude([0.1, 0.2, 0.3])
