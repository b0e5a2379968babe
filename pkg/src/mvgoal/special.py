"""Error function family and the standard normal distribution.

Everything here is vectorised over numpy arrays and returns a Python float
when given a scalar.
"""

import math

import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)

# Below this the power series is used, above it the continued fraction.
_SERIES_CUTOFF = 1.0
_SERIES_TERMS = 60
_CF_TERMS = 200


def _scalar_out(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


def _erf_series_sum(x):
    # erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n x / (2n+1)!!
    # All terms are positive, so there is no cancellation.
    two_x2 = 2.0 * x * x
    term = x.copy()
    total = x.copy()
    for n in range(1, _SERIES_TERMS):
        term = term * two_x2 / (2 * n + 1)
        total = total + term
    return total


def _erfcx_cf(x):
    # Backward evaluation of erfc(x) e^{x^2} = 1/sqrt(pi) / (x + 1/2/(x + 1/(x + 3/2/(x + ...))))
    t = x.copy()
    for k in range(_CF_TERMS, 0, -1):
        t = x + (0.5 * k) / t
    with np.errstate(over="ignore"):
        return 1.0 / (SQRT_PI * t)


def erfcx(x):
    """Scaled complementary error function ``exp(x**2) * erfc(x)``.

    Accurate to a few ulps for ``x >= 0`` and never overflows there. Negative
    arguments use ``2 exp(x**2) - erfcx(-x)``, which overflows for x < -26.6.
    """
    xa = np.asarray(x, dtype=float)
    flat = np.atleast_1d(xa).astype(float)
    ax = np.abs(flat)
    out = np.empty_like(ax)

    small = ax < _SERIES_CUTOFF
    if small.any():
        xs = ax[small]
        out[small] = np.exp(xs * xs) - (2.0 / SQRT_PI) * _erf_series_sum(xs)
    big = ~small & np.isfinite(ax)
    if big.any():
        out[big] = _erfcx_cf(ax[big])
    out[np.isinf(ax)] = 0.0
    out[np.isnan(ax)] = np.nan

    neg = flat < 0
    if neg.any():
        with np.errstate(over="ignore"):
            out[neg] = 2.0 * np.exp(flat[neg] ** 2) - out[neg]
    return _scalar_out(x, out.reshape(xa.shape))


def erfc(x):
    """Complementary error function ``2/sqrt(pi) * int_x^inf exp(-v^2) dv``."""
    xa = np.asarray(x, dtype=float)
    flat = np.atleast_1d(xa).astype(float)
    ax = np.abs(flat)
    out = np.empty_like(ax)

    small = ax < _SERIES_CUTOFF
    if small.any():
        xs = ax[small]
        out[small] = 1.0 - (2.0 / SQRT_PI) * np.exp(-xs * xs) * _erf_series_sum(xs)
    big = ~small & np.isfinite(ax)
    if big.any():
        xb = ax[big]
        out[big] = np.exp(-xb * xb) * _erfcx_cf(xb)
    out[np.isinf(ax)] = 0.0
    out[np.isnan(ax)] = np.nan

    neg = flat < 0
    out[neg] = 2.0 - out[neg]
    return _scalar_out(x, out.reshape(xa.shape))


def norm_cdf(x):
    """Standard normal distribution function N(x)."""
    return _scalar_out(x, 0.5 * erfc(-np.asarray(x, dtype=float) / SQRT2))


def norm_sf(x):
    """Upper tail 1 - N(x), without cancellation for large x."""
    return _scalar_out(x, 0.5 * erfc(np.asarray(x, dtype=float) / SQRT2))


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return _scalar_out(x, np.exp(-0.5 * x * x) / SQRT_2PI)
