"""Gamma-function helpers for the pump model.

The regularized lower incomplete gamma function uses the power series
below ``x = a + 1`` and a modified-Lentz continued fraction for the upper
function above it (the classical split, where both converge fast).
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError, NumericalError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def ln_gamma(a: float) -> float:
    if not a > 0:
        raise DomainError(f"ln_gamma needs a > 0, got {a}")
    return math.lgamma(a)


def _log_prefactor(a: float, x: float) -> float:
    return a * math.log(x) - x - math.lgamma(a)


def _lower_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(_log_prefactor(a, x))
    raise NumericalError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _upper_continued_fraction(a: float, x: float) -> float:
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
            return math.exp(_log_prefactor(a, x)) * h
    raise NumericalError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def regularized_gamma_P(a: float, x: float) -> float:
    """``P(a, x) = gamma(a, x) / Gamma(a)``, the Gamma(a, 1) CDF at ``x``."""
    if not a > 0:
        raise DomainError(f"regularized_gamma_P needs a > 0, got {a}")
    if x < 0:
        raise DomainError(f"regularized_gamma_P needs x >= 0, got {x}")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _lower_series(a, x)
    return 1.0 - _upper_continued_fraction(a, x)


def regularized_gamma_Q(a: float, x: float) -> float:
    """Upper counterpart ``1 - P(a, x)``, computed without cancellation."""
    if not a > 0:
        raise DomainError(f"regularized_gamma_Q needs a > 0, got {a}")
    if x < 0:
        raise DomainError(f"regularized_gamma_Q needs x >= 0, got {x}")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _lower_series(a, x)
    return _upper_continued_fraction(a, x)


def gamma_log_pdf(x, shape: float, rate: float):
    """Log density of ``G(shape, rate)`` (rate parametrization) at ``x > 0``."""
    x = np.asarray(x, dtype=float)
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1.0) * np.log(x) - rate * x


def gamma_sampler(shape, rate, rng: np.random.Generator, size=None):
    """Draw from ``G(shape, rate)``.

    Delegates to numpy's generator, which uses Marsaglia-Tsang squeeze
    rejection for ``shape >= 1`` and boosts smaller shapes.
    """
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(rate) <= 0):
        raise DomainError("gamma shape and rate must be positive")
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)
