import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ai_zeros, jn_zeros

from transeig import special_fn as sf
from oracles import bisect, series_j, series_spherical_j

# frozen from tests/oracles.py (bisection on the extended-precision series)
J0_FIRST_ZERO = 2.404825557695773
J1_PRIME_FIRST_ZERO = 1.841183781340659
J0_PRIME_FIRST_ZERO = 3.831705970207512


def test_trivial_values():
    assert sf.bessel_j(0, 0.0) == 1.0
    assert sf.bessel_j(1, 0.0) == 0.0
    assert sf.bessel_j_prime(0, 0.0) == 0.0
    assert sf.bessel_j_prime(1, 0.0) == 0.5
    assert abs(sf.spherical_j(0, math.pi)) < 1e-12
    assert sf.spherical_j(0, 0.0) == 1.0


def test_frozen_oracle_values():
    assert bisect(lambda x: series_j(0, x), 2.0, 3.0) == pytest.approx(J0_FIRST_ZERO, abs=1e-12)
    assert abs(sf.bessel_j(0, J0_FIRST_ZERO)) < 1e-10


@pytest.mark.parametrize("m,x", [(0, 0.3), (1, 2.5), (3, 7.1), (10, 12.0), (25, 30.0), (60, 45.5), (5, 48.0)])
def test_bessel_j_matches_series(m, x):
    ref = series_j(m, x)
    assert sf.bessel_j(m, x) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_bessel_j_prime_finite_difference():
    h = 1e-5
    fd = (sf.bessel_j(5, 3.0 + h) - sf.bessel_j(5, 3.0 - h)) / (2 * h)
    assert sf.bessel_j_prime(5, 3.0) == pytest.approx(fd, abs=1e-8)


def test_spherical_j_series_oracle():
    assert sf.spherical_j(2, 1.5) == pytest.approx(series_spherical_j(2, 1.5), abs=1e-10)
    x = 0.7
    assert sf.spherical_j(0, x) == pytest.approx(math.sin(x) / x, rel=1e-14)


def test_domain_errors():
    with pytest.raises(sf.BesselDomainError):
        sf.bessel_j(513, 1.0)
    with pytest.raises(sf.BesselDomainError):
        sf.bessel_j(-1, 1.0)
    with pytest.raises(sf.BesselDomainError):
        sf.bessel_j(2.5, 1.0)
    with pytest.raises(sf.BesselDomainError):
        sf.bessel_j(1, float("nan"))
    with pytest.raises(sf.BesselDomainError):
        sf.bessel_zero(3, 0)


def test_zero_values():
    assert sf.bessel_zero(0, 1) == pytest.approx(J0_FIRST_ZERO, abs=1e-9)
    assert sf.bessel_zero_prime(1, 1) == pytest.approx(J1_PRIME_FIRST_ZERO, abs=1e-8)
    assert sf.bessel_zero_prime(0, 1) == pytest.approx(J0_PRIME_FIRST_ZERO, abs=1e-8)
    ref = bisect(lambda x: series_j(1, x), 3.0, 4.5)
    assert sf.bessel_zero_prime(0, 1) == pytest.approx(ref, abs=1e-9)


def test_zero_inside_airy_bounds():
    a1 = ai_zeros(1)[0][0]
    m = 100
    lo, hi = sf.airy_bounds(m, 1, a1)
    assert lo < sf.bessel_zero(m, 1) < hi


@pytest.mark.parametrize("m", [10, 37, 100, 250])
def test_brackets_hold_exactly_one_zero(m):
    ref = jn_zeros(m, 14)
    for s in (1, 2, 5, 12):
        br = sf.zero_bracket(m, s)
        assert br.has_sign_change()
        inside = [z for z in ref if br.lo < z < br.hi]
        assert inside == [pytest.approx(ref[s - 1])]
        assert sf.bessel_zero(m, s) == pytest.approx(ref[s - 1], abs=1e-10)
        assert abs(sf.bessel_j(m, sf.bessel_zero(m, s))) < 1e-12


def test_airy_bracket_used_for_large_order():
    m, s = 100, 3
    br = sf._airy_bracket(m, s)
    assert br is not None
    a_lo, a_hi = sf.airy_zero_estimate(s)
    assert sf.airy_bounds(m, s, a_hi)[0] - 1.0 <= br.lo < br.hi <= sf.airy_bounds(m, s, a_lo)[1] + 1.0
    assert br.lo < jn_zeros(m, s)[-1] < br.hi


def test_derivative_zero_lower_bound():
    for m in (5, 50):
        assert sf.bessel_zero_prime(m, 1) >= m


@pytest.mark.parametrize("m", [0, 1, 7, 15, 64])
def test_interlacing_and_monotone(m):
    z = [sf.bessel_zero(m, s) for s in range(1, 7)]
    zp = [sf.bessel_zero_prime(m, s) for s in range(1, 7)]
    assert np.all(np.diff(z) > 0)
    if m == 0:
        # x = 0 is the excluded zero of J_0', so the pattern starts with j_{0,1}
        for s in range(5):
            assert z[s] < zp[s] < z[s + 1]
        return
    assert m <= zp[0]
    for s in range(5):
        assert zp[s] < z[s] < zp[s + 1]


def test_zeros_match_independent_bisection():
    for m, s in [(2, 3), (9, 1), (12, 4)]:
        z = sf.bessel_zero(m, s)
        ref = bisect(lambda x: series_j(m, x), z - 0.3, z + 0.3)
        assert z == pytest.approx(ref, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(m=st.integers(1, 60), x=st.floats(0.1, 200.0))
def test_recurrence_residual(m, x):
    lhs = sf.bessel_j(m - 1, x) + sf.bessel_j(m + 1, x)
    rhs = 2 * m / x * sf.bessel_j(m, x)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(sf.bessel_j(m, x)))


@settings(max_examples=200, deadline=None)
@given(m=st.integers(1, 60), x=st.floats(0.1, 200.0))
def test_wronskian_two_ways(m, x):
    # J_m J_{m-1}' - J_m' J_{m-1}; second route uses J' = J_{m-1} - (m/x) J_m
    # and J_{m-1}' = -J_m + ((m-1)/x) J_{m-1}
    jm, jm1 = sf.bessel_j(m, x), sf.bessel_j(m - 1, x)
    w1 = jm * sf.bessel_j_prime(m - 1, x) - sf.bessel_j_prime(m, x) * jm1
    d_m = jm1 - m / x * jm
    d_m1 = -jm + (m - 1) / x * jm1
    w2 = jm * d_m1 - d_m * jm1
    assert abs(w1 - w2) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(m=st.integers(0, 120), s=st.integers(1, 15))
def test_brackets_show_sign_change(m, s):
    assert sf.zero_bracket(m, s).has_sign_change()
    assert sf.zero_bracket(m, s, derivative=True).has_sign_change()
