"""Closed-form convergence bounds from drift and minorization data.

Everything here is a pure function of its arguments.  Powers such as
``rho**t`` and ``V**r`` are evaluated as ``exp(t*log(rho))`` so that very
long horizons or very large drift values neither overflow nor underflow
prematurely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DomainError, NotReachedError

__all__ = [
    "DriftParams",
    "RateParams",
    "BoundPolynomial",
    "VNormBound",
    "compute_rate_params",
    "tail_bound",
    "nu_drift_bound",
    "tv_bound_poly",
    "vnorm_bound_poly",
    "mixing_time",
]


@dataclass(frozen=True)
class DriftParams:
    """Drift rate ``lam``, ceiling ``K`` on the small set, and an
    ``m``-step minorization of mass ``epsilon``."""

    lam: float
    K: float
    m: int = 1
    epsilon: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise DomainError(f"lambda must lie in (0, 1), got {self.lam}")
        if not self.K >= 1.0:
            raise DomainError(f"K must be >= 1, got {self.K}")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be an integer >= 1, got {self.m}")
        if not 0.0 < self.epsilon <= 1.0:
            raise DomainError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def B(self) -> float:
        lam, m = self.lam, self.m
        return (1.0 - lam**m) / (1.0 - lam) * (self.K - lam) + lam**m


@dataclass(frozen=True)
class RateParams:
    B: float
    rho: float
    r: float


def _powt(base: float, t):
    t = np.asarray(t, dtype=float)
    out = np.exp(t * math.log(base))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundPolynomial:
    """The curve ``(f1*t + f0) * rho**t``."""

    f1: float
    f0: float
    rho: float

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = (self.f1 * t + self.f0) * np.exp(t * math.log(self.rho))
        return float(out) if out.ndim == 0 else out

    def _terms(self):
        return [((self.f0, self.f1), self.rho)]


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _divided_differences(rho: float, lam: float, t: np.ndarray):
    """``f[rho, lam]`` and ``f[rho, rho, lam]`` for ``f(x) = x**t``, ``rho > lam``.

    Both are positive for ``t >= 2`` and are computed without the
    cancellation that ``(rho**t - lam**t) / (rho - lam)`` suffers when the
    two rates nearly coincide.  The second uses Gauss-Legendre on
    ``int_0^1 s f''(lam + s (rho - lam)) ds`` while ``t log(rho/lam) < 1``.
    """
    gap = rho - lam
    L = math.log1p(gap / lam)
    d1 = np.exp(t * math.log(rho)) * -np.expm1(-t * L) / gap
    d2 = np.empty_like(t)
    far = t * L >= 1.0
    tf = t[far]
    d2[far] = (tf * np.exp((tf - 1.0) * math.log(rho)) - d1[far]) / gap
    tn = t[~far][:, None]
    x = lam + _GL_NODES * gap
    integrand = _GL_NODES * tn * (tn - 1.0) * np.exp((tn - 2.0) * np.log(x))
    d2[~far] = integrand @ _GL_WEIGHTS
    return d1, d2


@dataclass(frozen=True)
class VNormBound:
    """V-norm bound curve.

    ``branch == "rho_equals_lambda"``: ``(g2 t^2 + g1 t + g0) lam^t``.
    ``branch == "rho_above_lambda"``: ``(h1 t + h0) rho^t + (g0 - h0) lam^t``.
    Coefficients that do not belong to the active branch are ``None``.

    When ``K``, ``F0`` and ``F1`` are supplied the two-rate curve is
    evaluated in the equivalent form
    ``g0 lam^t + 2K F0 f[rho, lam] + 2K rho F1 f[rho, rho, lam]``
    (divided differences of ``x**t``), which stays accurate as ``rho``
    approaches ``lam``.
    """

    branch: str
    g0: float
    rho: float
    lam: float
    g1: Optional[float] = None
    g2: Optional[float] = None
    h0: Optional[float] = None
    h1: Optional[float] = None
    K: Optional[float] = None
    F0: Optional[float] = None
    F1: Optional[float] = None

    def value(self, t):
        t = np.asarray(t, dtype=float)
        lam_t = np.exp(t * math.log(self.lam))
        if self.branch == "rho_equals_lambda":
            out = (self.g2 * t * t + self.g1 * t + self.g0) * lam_t
        elif self.F1 is not None:
            d1, d2 = _divided_differences(self.rho, self.lam, np.atleast_1d(t))
            out = (self.g0 * lam_t + 2.0 * self.K * self.F0 * d1.reshape(t.shape)
                   + 2.0 * self.K * self.rho * self.F1 * d2.reshape(t.shape))
        else:
            rho_t = np.exp(t * math.log(self.rho))
            out = (self.h1 * t + self.h0) * rho_t + (self.g0 - self.h0) * lam_t
        return float(out) if out.ndim == 0 else out

    def _terms(self):
        if self.branch == "rho_equals_lambda":
            return [((self.g0, self.g1, self.g2), self.lam)]
        return [((self.h0, self.h1), self.rho), ((self.g0 - self.h0,), self.lam)]


def compute_rate_params(p: DriftParams) -> RateParams:
    """Tail decay rate ``rho`` and Jensen exponent ``r`` for the data ``p``.

    Raises DomainError when ``epsilon < 1`` and ``B <= epsilon``; the
    logarithm in the rate formula is then undefined, which means the
    minorization mass is inconsistent with the drift data.
    """
    lam, m, eps = p.lam, p.m, p.epsilon
    B = p.B
    if eps == 1.0:
        return RateParams(B=B, rho=lam, r=1.0)
    if not B > eps:
        raise DomainError(f"B = {B} must exceed epsilon = {eps}")
    log_lam = math.log(lam)
    log_tails = math.log1p(-eps)
    denom = -m * log_lam + math.log(B - eps) - log_tails
    rho0 = math.exp(-log_tails * log_lam / denom)
    rho = max(lam, rho0)
    r = 1.0 if rho == lam else math.log(rho) / log_lam
    return RateParams(B=B, rho=rho, r=r)


def tail_bound(rate: RateParams, m: int, muV: float, t):
    """Upper bound ``muV**r * rho**(t + 1 - m)`` on ``P_mu(T > t)``.

    Not clipped at 1.
    """
    t = np.asarray(t, dtype=float)
    out = np.exp(rate.r * math.log(muV) + (t + 1 - m) * math.log(rate.rho))
    return float(out) if out.ndim == 0 else out


def nu_drift_bound(rate: RateParams, epsilon: float) -> float:
    """Upper bound on ``nu(V)``."""
    return (rate.B - (1.0 - epsilon)) / epsilon


def _tv_pieces(rate: RateParams, p: DriftParams, Vx: float):
    rho, r, m = rate.rho, rate.r, p.m
    log_rho = math.log(rho)
    A_nu = math.exp(r * math.log(nu_drift_bound(rate, p.epsilon)) + (1 - m) * log_rho)
    A_x = math.exp(r * math.log(Vx) + (1 - m) * log_rho)
    D = 0.5 * math.sqrt(A_nu * rho / (1.0 - rho))
    f1 = (1.0 - rho) / rho * D * A_x
    f0 = max(1.0 - D, 0.0) * A_x + D
    return f1, f0


def tv_bound_poly(rate: RateParams, p: DriftParams, Vx: float) -> BoundPolynomial:
    """Total-variation bound ``F(x, t) rho^t`` from the state with ``V(x) = Vx``."""
    if Vx < 1.0:
        raise DomainError(f"V(x) must be >= 1, got {Vx}")
    f1, f0 = _tv_pieces(rate, p, Vx)
    return BoundPolynomial(f1=f1, f0=f0, rho=rate.rho)


def vnorm_bound_poly(rate: RateParams, p: DriftParams, Vx: float) -> VNormBound:
    """V-norm bound from the state with ``V(x) = Vx``."""
    if Vx < 1.0:
        raise DomainError(f"V(x) must be >= 1, got {Vx}")
    F1, F0 = _tv_pieces(rate, p, Vx)
    lam, rho, K = p.lam, rate.rho, p.K
    G0 = Vx + (K - lam) / (1.0 - lam)
    if rho == lam:
        return VNormBound(
            branch="rho_equals_lambda",
            g0=G0,
            g1=K / lam * (2.0 * F0 - F1),
            g2=K / lam * F1,
            rho=rho,
            lam=lam,
        )
    gap = rho - lam
    return VNormBound(
        branch="rho_above_lambda",
        g0=G0,
        h0=2.0 * K * (F0 / gap - rho * F1 / gap**2),
        h1=2.0 * K * F1 / gap,
        rho=rho,
        lam=lam,
        K=K,
        F0=F0,
        F1=F1,
    )


def _envelope(terms, t: float) -> float:
    total = 0.0
    for coeffs, base in terms:
        poly = sum(max(c, 0.0) * t**k for k, c in enumerate(coeffs))
        total += poly * math.exp(t * math.log(base))
    return total


def _last_root(q) -> Optional[float]:
    """Largest real root of ``q[0] + q[1] t + q[2] t^2`` (degree <= 2)."""
    q = list(q)
    while q and q[-1] == 0.0:
        q.pop()
    with np.errstate(all="ignore"):
        if len(q) <= 1:
            return None
        if len(q) == 2:
            return -q[0] / q[1]
        q0, q1, q2 = q
        disc = q1 * q1 - 4.0 * q0 * q2
        if disc < 0:
            return None
        w = -(q1 + math.copysign(math.sqrt(disc), q1))
        roots = [w / (2.0 * q2)] + ([2.0 * q0 / w] if w != 0.0 else [])
    roots = [r for r in roots if not math.isnan(r)]
    return max(roots) if roots else None


def _monotone_from(terms) -> float:
    """A time past which every term of the positive-part envelope decreases."""
    start = 0.0
    for coeffs, base in terms:
        c = [max(x, 0.0) for x in coeffs]
        log_b = math.log(base)
        # d/dt [p(t) b^t] = b^t (p'(t) + log(b) p(t)); leading coefficient < 0
        q = [log_b * c[k] + ((k + 1) * c[k + 1] if k + 1 < len(c) else 0.0)
             for k in range(len(c))]
        root = _last_root(q)
        if root is not None:
            start = max(start, root)
    return start


Bound = Union[BoundPolynomial, VNormBound]


def mixing_time(bound: Bound, target: float, t_max: Optional[int] = None) -> int:
    """Smallest ``t`` with ``bound.value(u) <= target`` for every ``u >= t``.

    Values on ``[0, t_max]`` are evaluated directly.  Beyond ``t_max`` the
    curve is dominated by its positive-part envelope, which is decreasing
    past its last critical point; ``t_max`` must lie past that point with
    the envelope already below ``target``.  With ``t_max=None`` the horizon
    is grown until this holds.
    """
    if not target > 0.0:
        raise DomainError(f"target must be positive, got {target}")
    terms = bound._terms()
    crit = _monotone_from(terms)
    if t_max is None:
        t_max = max(64, int(math.ceil(crit)) + 1)
        while _envelope(terms, t_max) > target:
            t_max *= 2
            if t_max > 10**8:
                raise NotReachedError(f"bound never drops below {target}")
    elif t_max < crit or _envelope(terms, t_max) > target:
        raise NotReachedError(
            f"bound not certified below {target} beyond t_max={t_max}"
        )
    values = bound.value(np.arange(t_max + 1))
    above = np.flatnonzero(values > target)
    return int(above[-1]) + 1 if above.size else 0
