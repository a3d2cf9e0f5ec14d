import math

import mpmath
import numpy as np
import pytest

from valdist import special


def test_gamma_matches_mpmath_on_strip():
    rng = np.random.default_rng(0)
    z = rng.uniform(0.1, 10, 40) + 1j * rng.uniform(-5, 5, 40)
    got = special.gamma(z)
    want = np.array([complex(mpmath.gamma(complex(w))) for w in z])
    assert np.max(np.abs(got / want - 1)) < 1e-13


def test_gamma_reflection_and_integers():
    assert special.gamma(np.array([5.0]))[0] == pytest.approx(24.0, rel=1e-14)
    assert special.gamma(np.array([-0.5]))[0].real == pytest.approx(-2 * math.sqrt(math.pi), rel=1e-13)
    assert special.loggamma(np.array([-2.0]))[0].real == np.inf


def test_loggamma_large_argument_does_not_overflow():
    lg = special.loggamma(np.array([500.0 + 0j]))[0]
    assert lg.real == pytest.approx(math.lgamma(500.0), rel=1e-13)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_polygamma_matches_mpmath(m):
    z = np.array([0.3 + 0.2j, 2.5, 7 - 3j, 25 + 1j])
    got = special.polygamma(m, z)
    want = np.array([complex(mpmath.polygamma(m, complex(w))) for w in z])
    assert np.max(np.abs(got - want) / np.abs(want)) < 1e-12


def test_mittag_leffler_alpha_one_is_exp():
    rng = np.random.default_rng(1)
    r = 10 * np.sqrt(rng.uniform(0, 1, 50))
    w = r * np.exp(2j * np.pi * rng.uniform(0, 1, 50))
    got = special.mittag_leffler(1.0, w)
    assert np.max(np.abs(got / np.exp(w) - 1)) < 1e-9


def test_mittag_leffler_closed_forms():
    assert special.mittag_leffler(2.0, np.array([4.0]))[0].real == pytest.approx(math.cosh(2.0), rel=1e-13)
    want = math.e * math.erfc(-1.0)
    assert special.mittag_leffler(0.5, np.array([1.0]))[0].real == pytest.approx(want, rel=1e-12)


def test_mittag_leffler_half_matches_series_off_axis():
    w = np.array([0.3 + 0.2j, -2 + 1j, 3j, -5.5, 4 - 4j, -9 + 6j])
    got = special.mittag_leffler(0.5, w)
    for g, x in zip(got, w):
        with mpmath.workdps(80):
            t = mpmath.mpc(complex(x))
            want = complex(mpmath.fsum(t ** k * mpmath.rgamma(mpmath.mpf(k) / 2 + 1) for k in range(900)))
        assert abs(g - want) <= 1e-12 * abs(want)


def test_mittag_leffler_derivative_and_beta():
    w = np.array([1.5 + 0.5j, -3.0, 6j])
    for beta, order in [(2.0, 0), (1.0, 1), (1.5, 2)]:
        got = special.mittag_leffler(0.7, w, beta, order)
        for g, x in zip(got, w):
            # termwise derivative of the defining series, in 40 digits
            with mpmath.workdps(40):
                t = mpmath.mpc(complex(x))
                want = mpmath.fsum(mpmath.ff(k, order) * t ** (k - order) / mpmath.gamma(mpmath.mpf(0.7) * k + beta)
                                   for k in range(order, 300))
            assert abs(g - complex(want)) <= 1e-10 * abs(complex(want))


def test_mittag_leffler_log_stays_finite_when_value_overflows():
    lm, _ = special.mittag_leffler_log(0.5, np.array([40.0]))
    # E_{1/2}(w) ~ 2 exp(w^2) for large positive w
    assert lm[0] == pytest.approx(1600 + math.log(2), rel=1e-10)
