"""Upper incomplete Gamma function."""

import math

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def gamma(a):
    return math.gamma(a)


def _lower_series(a, x):
    """``gamma(a, x) = x^a e^{-x} sum_n x^n / (a (a+1) ... (a+n))``."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(a * math.log(x) - x)


def _upper_cf(a, x):
    """Continued fraction for ``Gamma(a, x)``, modified Lentz evaluation."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(a * math.log(x) - x)


def _incomplete_gamma_scalar(a, x):
    if not a > 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return gamma(a)
    if x < a + 1.0:
        return gamma(a) - _lower_series(a, x)
    return _upper_cf(a, x)


def incomplete_gamma(a, x):
    """``Gamma(a, x) = int_x^inf t^{a-1} e^{-t} dt`` for ``a > 0, x >= 0``.

    Power series of the lower function below ``x = a + 1``, continued fraction
    above it.  Broadcasts over array arguments.
    """
    if np.ndim(a) == 0 and np.ndim(x) == 0:
        return _incomplete_gamma_scalar(float(a), float(x))
    return np.vectorize(_incomplete_gamma_scalar, otypes=[float])(a, x)
