"""Special functions used by expression trees: Gamma, polygamma, Mittag-Leffler.

All routines accept numpy arrays of complex arguments and evaluate
elementwise.  The Gamma function uses the Lanczos approximation with
g = 7 and nine coefficients; log-Gamma is computed directly in log form
so that large arguments do not overflow.
"""
import functools
import math

import mpmath
import numpy as np
import scipy.special

__all__ = [
    "loggamma",
    "gamma",
    "polygamma",
    "mittag_leffler_log",
    "mittag_leffler",
]

LANCZOS_G = 7.0
LANCZOS_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _loggamma_right(z):
    # valid for Re z >= 0.5
    z = z - 1.0
    x = np.full_like(z, LANCZOS_COEF[0])
    for i in range(1, len(LANCZOS_COEF)):
        x = x + LANCZOS_COEF[i] / (z + i)
    t = z + LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(x)


def loggamma(z):
    """Logarithm of Gamma for complex input.

    The real part is log|Gamma(z)| exactly; the imaginary part is *a*
    branch of arg Gamma(z), which is all the expression evaluator needs.
    Poles (non-positive integers) return ``+inf`` for log|Gamma|.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    right = z.real >= 0.5
    out[right] = _loggamma_right(z[right])
    left = ~right
    if np.any(left):
        zl = z[left]
        # reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        s = np.sin(np.pi * zl)
        with np.errstate(divide="ignore"):
            out[left] = math.log(math.pi) - np.log(s) - _loggamma_right(1.0 - zl)
        pole = (zl.imag == 0) & (zl.real == np.round(zl.real))
        if np.any(pole):
            tmp = out[left]
            tmp[pole] = np.inf
            out[left] = tmp
    return out


def gamma(z):
    """Gamma function via the Lanczos approximation (complex, vectorised)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    right = z.real >= 0.5
    out[right] = np.exp(_loggamma_right(z[right]))
    left = ~right
    if np.any(left):
        zl = z[left]
        s = np.sin(np.pi * zl)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.pi / (s * np.exp(_loggamma_right(1.0 - zl)))
        pole = (zl.imag == 0) & (zl.real == np.round(zl.real))
        vals[pole] = np.inf
        out[left] = vals
    return out


# Bernoulli numbers B_2 .. B_20 for the asymptotic polygamma series.
_BERNOULLI = [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6,
              -3617 / 510, 43867 / 798, -174611 / 330]


def polygamma(m, z):
    """Polygamma psi^(m)(z) for integer m >= 0 and complex z.

    Uses upward recurrence to Re z >= 20 and then the Stirling-type
    asymptotic expansion.
    """
    m = int(m)
    z = np.array(z, dtype=complex, copy=True)
    acc = np.zeros_like(z)
    sign = (-1.0) ** (m + 1)
    mfact = math.factorial(m)
    while True:
        small = z.real < 20.0
        if not np.any(small):
            break
        zs = z[small]
        # psi^(m)(z) = psi^(m)(z+1) + (-1)^(m+1) m! / z^(m+1)
        acc[small] += sign * mfact / zs ** (m + 1)
        z[small] = zs + 1.0
    if m == 0:
        s = np.log(z) - 0.5 / z
        zz = z * z
        zp = zz
        for k, b in enumerate(_BERNOULLI, start=1):
            s = s - b / (2 * k * zp)
            zp = zp * zz
        return acc + s
    # m >= 1
    s = math.factorial(m - 1) / z ** m + mfact / (2.0 * z ** (m + 1))
    for k, b in enumerate(_BERNOULLI, start=1):
        coef = b * math.factorial(2 * k + m - 1) / math.factorial(2 * k)
        s = s + coef / z ** (2 * k + m)
    return acc + sign * s


def _ml_terms_log(alpha, beta, order, w, kmax):
    """log-magnitude and phase of the series terms of the order-th derivative."""
    k = np.arange(kmax, dtype=float)[:, None]
    logw = np.log(w)[None, :]
    # falling-factorial weight (k+order)!/k!
    logweight = np.array([math.lgamma(kk + order + 1) - math.lgamma(kk + 1)
                          for kk in range(kmax)])[:, None]
    lg = loggamma(alpha * (k[:, 0] + order) + beta).real[:, None]
    logt = k * logw + logweight - lg
    return logt.real, logt.imag


@functools.lru_cache(maxsize=32)
def _ml_coeffs(alpha, beta, order, dps, kmax):
    """Series coefficients (k+1)_order / Gamma(alpha (k+order) + beta) at ``dps`` digits."""
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        return tuple(mpmath.rf(k + 1, order) * mpmath.rgamma(a * (k + order) + b)
                     for k in range(kmax))


def _ml_mpmath(alpha, beta, order, w, dps, kmax):
    dps = 10 * math.ceil(dps / 10)
    while True:
        coeffs = _ml_coeffs(alpha, beta, order, dps, kmax)
        with mpmath.workdps(dps):
            w = mpmath.mpc(w)
            total = mpmath.mpc(0)
            wk = mpmath.mpc(1)
            eps = mpmath.mpf(10) ** (-dps)
            done = False
            for k, ck in enumerate(coeffs):
                t = ck * wk
                total += t
                if k > 10 and abs(t) < eps * (abs(total) + 1e-300):
                    done = True
                    break
                wk *= w
        if done or kmax >= 20000:
            break
        kmax *= 2
    if total == 0:
        return -math.inf, 0.0
    return float(mpmath.log(abs(total))), float(mpmath.arg(total))


def mittag_leffler_log(alpha, w, beta=1.0, order=0):
    """Log form of the order-th derivative of E_{alpha,beta}(w).

    Returns ``(logmag, phase)`` arrays.  The series
    sum_k w^k / Gamma(alpha k + beta) is summed with term scaling by the
    largest term and Neumaier compensation; it is truncated once the term
    magnitude drops below 1e-18 of the partial sum.  Points where the
    summation is ill-conditioned (heavy cancellation, e.g. E_1 on the
    negative axis) are re-evaluated in extended precision.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    alpha = float(alpha)
    if alpha <= 0:
        raise ValueError("Mittag-Leffler parameter alpha must be positive")
    absw = np.abs(w)
    rmax = float(absw.max()) if absw.size else 0.0
    # terms decay once alpha*k*log(alpha*k) outgrows k*log|w|
    kmax = int(max(40, 4 * (rmax + 2.0) ** (1.0 / alpha) + 60 + order))
    logmag = np.full(w.shape, -np.inf)
    phase = np.zeros(w.shape)
    nz = absw > 0
    if np.any(~nz):
        # only the k = 0 term survives
        lg0 = float(loggamma(np.array([alpha * order + beta])).real[0])
        logmag[~nz] = math.lgamma(order + 1) - lg0
    if not np.any(nz):
        return logmag, phase
    if alpha == 0.5 and beta == 1.0 and order == 0:
        # E_{1/2}(w) = exp(w^2) erfc(-w) is the Faddeeva function at -i w
        with np.errstate(over="ignore", invalid="ignore"):
            v = scipy.special.wofz(-1j * w)
        ok = nz & np.isfinite(v) & (v != 0)
        logmag[ok] = np.log(np.abs(v[ok]))
        phase[ok] = np.angle(v[ok])
        nz = nz & ~ok
        if not np.any(nz):
            return logmag, phase
    wn = w[nz]
    lt, ph = _ml_terms_log(alpha, beta, order, wn, kmax)
    peak = lt.max(axis=0)
    scaled = np.exp(lt - peak) * np.exp(1j * ph)
    s = np.zeros(wn.shape, dtype=complex)
    c = np.zeros(wn.shape, dtype=complex)
    for k in range(kmax):
        t = scaled[k]
        tot = s + t
        big = np.abs(s) >= np.abs(t)
        c += np.where(big, (s - tot) + t, (t - tot) + s)
        s = tot
    s = s + c
    mag = np.abs(s)
    absum = np.exp(lt - peak).sum(axis=0)
    with np.errstate(divide="ignore"):
        lm = peak + np.log(mag)
        cond = absum / np.where(mag > 0, mag, np.finfo(float).tiny)
    lp = np.angle(s)
    bad = np.nonzero(cond > 1e3)[0]
    for i in bad:
        dps = int(20 + math.log10(cond[i]) + 5)
        dps = min(dps, 400)
        lm[i], lp[i] = _ml_mpmath(alpha, beta, order, complex(wn[i]), dps, kmax + 40)
    logmag[nz] = lm
    phase[nz] = lp
    return logmag, phase


def mittag_leffler(alpha, w, beta=1.0, order=0):
    """Value of the order-th derivative of E_{alpha,beta} at w."""
    lm, ph = mittag_leffler_log(alpha, w, beta, order)
    with np.errstate(over="ignore"):
        return np.exp(lm) * np.exp(1j * ph)
