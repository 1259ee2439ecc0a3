import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcmbrown import analytics as an
from lcmbrown.oracle import enumerate_iid, enumerate_log_u_tilde
from lcmbrown.primes import build_table

T = build_table(100_000)


def _tau_moments_fraction(n, m):
    """tau(m) = sum of independent geometrics with success (n - i) / n."""
    mean = var = Fraction(0)
    for i in range(m):
        q = Fraction(n - i, n)
        mean += 1 / q
        var += (1 - q) / (q * q)
    return mean, var


def test_harmonic_examples():
    assert an.harmonic(1) == 1.0 and an.harmonic2(1) == 1.0
    assert an.harmonic(4) == pytest.approx(25 / 12, abs=1e-15)
    d = an.harmonic(10**6) - (math.log(1e6) + 0.5772156649)
    assert 0 < d < 1e-6 + 1e-9


def test_harmonic_expansion_continuity():
    n = an.HARMONIC_EXACT_MAX
    exact = an.harmonic(n)
    x = 1.0 / n
    asym = math.log(n) + an.EULER_GAMMA + x / 2 - x * x / 12
    assert abs(exact - asym) < 1e-12
    assert abs(an.harmonic2(n) - (an.ZETA2 - x + x * x / 2)) < 1e-12


def test_tau_examples():
    assert an.expected_tau(37, 1) == 1.0
    assert an.expected_tau(4, 2) == pytest.approx(7 / 3, abs=1e-14)
    assert an.expected_tau(3, 3) == pytest.approx(5.5, abs=1e-14)
    assert an.expected_tau(10, 0) == 0.0
    assert an.variance_tau(9, 1) == 0.0
    assert an.variance_tau(2, 2) == pytest.approx(2.0, abs=1e-14)
    assert an.variance_tau(100, 10) / (10**2 / 100) <= 10


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 300), st.data())
def test_tau_moments_match_fraction_oracle(n, data):
    m = data.draw(st.integers(0, n))
    mean, var = _tau_moments_fraction(n, m)
    assert an.expected_tau(n, m) == pytest.approx(float(mean), rel=1e-12, abs=1e-12)
    assert an.variance_tau(n, m) == pytest.approx(float(var), rel=1e-11, abs=1e-11)


def test_tau_large_m_switches_to_expansion():
    n, m = 3_000_000, 2_000_000
    mean, _ = _tau_moments_fraction(50, 20)  # smoke that the oracle is cheap; large case checked by formula
    direct = n * (an.harmonic(n) - an.harmonic(n - m))
    assert an.expected_tau(n, m) == pytest.approx(direct, rel=1e-12)
    assert mean > 0


def test_centering_examples():
    assert an.centering_c(10, 0, T) == 0.0
    hand = sum(math.log(p) * (10 // p) / 10 for p in (2, 3, 5, 7))
    assert an.centering_c(10, 1, T) == pytest.approx(hand, abs=1e-12)
    assert an.centering_c(10, 1, T) == pytest.approx(1.19264, abs=5e-6)
    assert an.centering_c(10, 10**6, T) == pytest.approx(math.log(210), abs=1e-6)


def test_centering_monotone_and_subadditive():
    n = 5000
    ys = np.linspace(0, 400, 81)
    vals = [an.centering_c(n, y, T) for y in ys]
    assert np.all(np.diff(vals) >= 0)
    for x, y in itertools.product(ys[::8], ys[::8]):
        assert an.centering_c(n, x + y, T) <= an.centering_c(n, x, T) + an.centering_c(n, y, T) + 1e-9


def test_time_changed_centering():
    assert an.centering_c_timechanged(10_000, 1000, 0.0, T) == 0.0
    y = an.time_changed_argument(10_000, 1000, 1.0)
    assert y == pytest.approx(-10_000 * math.log(0.9), rel=1e-14)
    assert y == pytest.approx(1053.605, abs=1e-3)
    assert an.centering_c_timechanged(10_000, 1000, 1.0, T) == an.centering_c(10_000, y, T)
    assert an.centering_c_timechanged(10_000, 1000, 1.0, T) >= an.centering_c(10_000, 1000, T)
    with pytest.raises(an.AnalyticsDomainError):
        an.time_changed_argument(100, 10, 10.0)


def test_normalization_a_examples():
    a, label = an.normalization_a(10**6, 10**3)
    assert label is an.RegimeLabel.CaseA
    assert a == pytest.approx(500 * math.log(1000) ** 2, rel=1e-14)
    assert a == pytest.approx(23858.6, rel=1e-4)
    a, label = an.normalization_a(10**4, 10**3)
    assert label is an.RegimeLabel.CaseB
    assert a == pytest.approx(500 * math.log(10) * (3 * math.log(1000) - math.log(1e4)), rel=1e-14)
    assert a == pytest.approx(13255.6, rel=1e-4)


def test_normalization_continuous_at_boundary():
    a_a, _ = an.normalization_a(10**6, 10**3, an.RegimeLabel.CaseA)
    a_b, _ = an.normalization_a(10**6, 10**3, "CaseB")
    assert a_a == pytest.approx(a_b, rel=1e-12)


def test_normalization_b():
    assert an.normalization_b(10**6, 10**3) == pytest.approx(71575.7, rel=1e-5)
    for n in (10**4, 10**6, 10**8):
        m = math.isqrt(n)
        assert an.normalization_b(n, m) / an.normalization_a(n, m)[0] == pytest.approx(3.0, rel=1e-12)
    # b = m (L^2 - l^2) / 2 falls once L^2 - l^2 < 2 l, i.e. on the final stretch below n
    bs = [an.normalization_b(1000, m) for m in range(700, 1000)]
    assert np.all(np.diff(bs) < 0) and bs[-1] > 0


def test_normalization_domain():
    with pytest.raises(an.AnalyticsDomainError):
        an.normalization_a(10, 10)
    with pytest.raises(an.AnalyticsDomainError):
        an.normalization_b(10, 1)


def test_asymptotic_variance_examples():
    assert an.asymptotic_variance(10**6, 10**3) == pytest.approx(23.8586, abs=1e-4)
    assert an.asymptotic_variance(10**4, 10**3) == pytest.approx(13.2556, rel=1e-4)


def test_multiplicity_tail():
    assert an.multiplicity_tail(10, 2, 1) == 0.5
    assert an.multiplicity_tail(10, 3, 2) == 0.1
    for n in (97, 1000, 12345):
        for p in (2, 3, 7, 31):
            for j in (1, 2, 3):
                assert abs(an.multiplicity_tail(n, p, j) - p ** (-j)) <= 1 / n


def test_u_tilde_mean_examples():
    assert an.exact_mean_log_u_tilde(10, 7, T) == 0.0
    hand = math.log(3) * 0.3 + math.log(5) * 0.2 + math.log(7) * 0.1
    assert an.exact_mean_log_u_tilde(10, 2, T) == pytest.approx(hand, abs=1e-12)
    assert hand == pytest.approx(0.84606, abs=5e-6)
    vals = [an.exact_mean_log_u_tilde(500, m, T) for m in range(1, 500)]
    assert np.all(np.diff(vals) <= 0)


def test_u_tilde_variance_examples():
    assert an.exact_variance_log_u_tilde(10, 4, T) == pytest.approx(0.62997, abs=1e-5)
    assert an.exact_variance_log_u_tilde(10, 9, T) == 0.0


def test_u_tilde_against_enumeration_all_small_n():
    worst = 0.0
    for n in range(2, 51):
        for m in range(1, n):
            mean, var = enumerate_log_u_tilde(n, m, T)
            worst = max(
                worst,
                abs(mean - an.exact_mean_log_u_tilde(n, m, T)),
                abs(var - an.exact_variance_log_u_tilde(n, m, T)),
            )
    assert worst < 1e-12


def test_variance_ratio_case_a_boundary():
    big = build_table(10**6)
    r = an.exact_variance_log_u_tilde(10**6, 10**3, big) / an.asymptotic_variance(10**6, 10**3)
    assert 0.7 < r < 1.3


def _binomial_plus_variance_oracle(m, theta):
    theta = Fraction(theta)
    e = e2 = Fraction(0)
    for k in range(m + 1):
        w = math.comb(m, k) * theta**k * (1 - theta) ** (m - k)
        v = max(k - 1, 0)
        e += w * v
        e2 += w * v * v
    return float(e2 - e * e)


def test_binomial_plus_variance():
    assert an.binomial_plus_variance(1, 0.3) == pytest.approx(0.0, abs=1e-15)
    assert an.binomial_plus_variance(2, 0.5) == pytest.approx(3 / 16, abs=1e-15)
    for m in range(1, 51):
        for theta in np.linspace(0.01, 0.5, 50):
            assert an.binomial_plus_variance(m, theta) <= (m * theta) ** 2 + 1e-12


@pytest.mark.parametrize("m, theta", [(1, 0.2), (3, 0.5), (7, 0.125), (20, 0.03125)])
def test_binomial_plus_variance_oracle(m, theta):
    assert an.binomial_plus_variance(m, theta) == pytest.approx(_binomial_plus_variance_oracle(m, theta), abs=1e-13)


@pytest.mark.parametrize("n, m", [(2, 2), (6, 3), (10, 2), (12, 4)])
def test_expected_log_lcm_matches_enumeration(n, m):
    assert an.expected_log_lcm(n, m, T) == pytest.approx(enumerate_iid(n, m, T).mean, abs=1e-12)


def _geom_max_moments_bruteforce(p, m, jmax=80):
    """E and E^2 of max of m iid geometrics via the pmf, summed to jmax."""
    cdf = lambda j: (1 - p ** (-(j + 1))) ** m  # noqa: E731  P(max <= j)
    e = e2 = 0.0
    prev = 0.0
    for j in range(jmax):
        c = cdf(j)
        e += j * (c - prev)
        e2 += j * j * (c - prev)
        prev = c
    return e, e2


def test_y_hat_exact_moments_small_n():
    n, m = 30, 7
    ps = [p for p in range(2, n + 1) if all(p % d for d in range(2, p))]
    mean = var = 0.0
    for p in ps:
        e, e2 = _geom_max_moments_bruteforce(p, m)
        mean += math.log(p) * e
        var += math.log(p) ** 2 * (e2 - e * e)
    assert an.expected_y_hat(n, m, T) == pytest.approx(mean, rel=1e-12)
    assert an.variance_y_hat(n, m, T) == pytest.approx(var, rel=1e-10)
    zmean = sum(math.log(p) * (1 - (1 - 1 / p) ** m) for p in ps)
    zvar = sum(math.log(p) ** 2 * (1 - (1 - 1 / p) ** m) * (1 - 1 / p) ** m for p in ps)
    assert an.expected_z_hat(n, m, T) == pytest.approx(zmean, rel=1e-12)
    assert an.variance_z_hat(n, m, T) == pytest.approx(zvar, rel=1e-12)


def test_exponential_moments_are_derangements():
    assert [an.exponential_central_moment(r) for r in range(7)] == [1, 0, 1, 2, 9, 44, 265]


def test_log_uniform_central_moments_approach_limits():
    big = 10**6
    assert abs(an.log_uniform_central_moment(big, 2) - 1) < 1e-3
    # finite-n error of the 4th moment is of order log(n)**4 / n
    assert abs(an.log_uniform_central_moment(big, 4) - 9) < 0.05
    # direct small case
    logs = [math.log(k) for k in range(1, 6)]
    mu = sum(logs) / 5
    assert an.log_uniform_central_moment(5, 3) == pytest.approx(sum((x - mu) ** 3 for x in logs) / 5, abs=1e-14)


def test_regime_label_boundary():
    assert an.regime(10**6, 1000) is an.RegimeLabel.CaseA
    assert an.regime(10**6, 1001) is an.RegimeLabel.CaseB
    assert an.time_change_hypothesis(10**6, 1000)
    assert not an.time_change_hypothesis(10**6, 500_000)
