"""Gibbs sampler for the hierarchical gamma-Poisson pump-failure model.

The chain tracked here is ``S_t``, the sum of the ten failure rates.  One
step draws ``beta ~ G(shape_beta, rate_offset + S)`` and then
``theta_j ~ G(theta_shape_offset + s_j, beta + t_j)`` independently, and
returns ``sum(theta_j)``.  Gamma laws are in (shape, rate) form.

Drift and minorization data for the S-chain with
``V(x) = 1 + (x - center)^2`` are found numerically: ``PV`` by adaptive
quadrature over ``beta``, the small set as ``{PV > lam V}``, and the
minorization mass as the overlap of the extreme ``beta`` densities.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from .. import bounds
from ..errors import DomainError, DriftBoundsError, NumericalError, SmallSetError
from .specfun import gamma_log_pdf, gamma_sampler, regularized_gamma_P, regularized_gamma_Q

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = tuple(round(0.01 * k, 2) for k in range(1, 100))


def load_pump_data(path=None) -> tuple:
    """Read ``(s, t)`` pairs, one whitespace-separated pair per line."""
    if path is None:
        text = resources.files(__package__).joinpath("data/pump_failures.txt").read_text()
    else:
        text = Path(path).read_text()
    pairs = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            s, t = line.split()
            pairs.append((int(s), float(t)))
    return tuple(pairs)


@dataclass(frozen=True)
class PumpModel:
    shape_beta: float = 18.03
    rate_offset: float = 1.0
    theta_shape_offset: float = 1.802
    data: tuple = field(default_factory=load_pump_data)
    center: float = 6.5

    def __post_init__(self):
        data = tuple((int(s), float(t)) for s, t in self.data)
        if len(data) != 10:
            raise DomainError(f"expected 10 (s, t) pairs, got {len(data)}")
        if any(s < 0 or t <= 0 for s, t in data):
            raise DomainError("counts must be >= 0 and exposure times > 0")
        object.__setattr__(self, "data", data)

    @property
    def shapes(self) -> np.ndarray:
        return np.array([self.theta_shape_offset + s for s, _ in self.data])

    @property
    def times(self) -> np.ndarray:
        return np.array([t for _, t in self.data])

    def V(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 + (x - self.center) ** 2


def gibbs_step(model: PumpModel, x, rng: np.random.Generator):
    """One transition of the S-chain from ``x`` (scalar or array of states)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("state must be >= 0")
    beta = gamma_sampler(model.shape_beta, model.rate_offset + x, rng)
    return _theta_sum(model, beta, rng)


def _theta_sum(model: PumpModel, beta, rng: np.random.Generator):
    beta = np.asarray(beta, dtype=float)
    theta = gamma_sampler(model.shapes, beta[..., None] + model.times, rng)
    out = theta.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def conditional_moments(model: PumpModel, beta):
    """Mean and variance of ``S`` given ``beta``."""
    beta = np.asarray(beta, dtype=float)[..., None]
    inv = 1.0 / (beta + model.times)
    a = model.shapes
    return (a * inv).sum(axis=-1), (a * inv * inv).sum(axis=-1)


def pv(model: PumpModel, x, rtol: float = 1e-9):
    """``PV(x) = E[V(S_1) | S_0 = x]`` by adaptive Gauss-Kronrod quadrature.

    With ``u = (rate_offset + x) beta`` the mixing law becomes ``G(shape, 1)``
    for every ``x``, so one vector-valued integral over ``u`` (truncated to
    its 1e-12 and 1 - 1e-12 quantiles) serves a whole array of states.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise DomainError("PV is defined for x >= 0")
    a = model.shape_beta
    lo, hi = special.gammaincinv(a, [1e-12, 1.0 - 1e-12])
    rates = model.rate_offset + xs
    log_norm = -math.lgamma(a)

    def integrand(u):
        mean, var = conditional_moments(model, u / rates)
        weight = math.exp((a - 1.0) * math.log(u) - u + log_norm)
        return (1.0 + var + (mean - model.center) ** 2) * weight

    val, err = integrate.quad_vec(integrand, lo, hi, epsabs=0.0, epsrel=rtol * 1e-2,
                                  norm="max", limit=2000)
    if not np.all(np.isfinite(val)) or err > rtol * np.abs(val).min():
        raise NumericalError(f"PV quadrature did not converge (error estimate {err:.3g})")
    return float(val[0]) if np.ndim(x) == 0 else val


@functools.lru_cache(maxsize=8)
def _pv_grid(model: PumpModel, x_max: float, step: float):
    xs = np.arange(0.0, x_max + 0.5 * step, step)
    values = pv(model, xs)
    xs.setflags(write=False)
    values.setflags(write=False)
    return xs, values


@dataclass(frozen=True)
class SmallSet:
    C_lo: float
    C_hi: float
    K: float


def _bisect(f, lo: float, hi: float, tol: float, k: int = 16) -> float:
    """Bracketing root search; each round evaluates ``f`` at ``k`` interior
    points at once (``k = 1`` is plain bisection)."""
    f_lo = f(np.array([lo]))[0] > 0
    while hi - lo > tol:
        pts = np.linspace(lo, hi, k + 2)[1:-1]
        same = (f(pts) > 0) == f_lo
        j = int(np.argmin(same)) if not same.all() else k
        lo = pts[j - 1] if j > 0 else lo
        hi = pts[j] if j < k else hi
    return 0.5 * (lo + hi)


def _zoom_max(f, lo: float, hi: float, tol: float, k: int = 32):
    """Maximize a unimodal ``f`` on ``[lo, hi]`` by repeated grid zooming."""
    while hi - lo > tol:
        pts = np.linspace(lo, hi, k + 1)
        j = int(np.argmax(f(pts)))
        lo, hi = pts[max(j - 1, 0)], pts[min(j + 1, k)]
    x = 0.5 * (lo + hi)
    return x, float(f(np.array([x]))[0])


def find_small_set(model: PumpModel, lam: float, x_max: float = 40.0, step: float = 0.005,
                   tol: float = 1e-9) -> SmallSet:
    """Interval ``C = {x : PV(x) > lam V(x)}`` and ``K = sup_C PV``.

    ``PV - lam V`` is scanned on a grid over ``[0, x_max]``; sign changes
    are refined by bisection.  ``C`` may start at the boundary ``x = 0``.
    Raises SmallSetError if the set is empty, reaches ``x_max``, or is not
    a single interval.
    """
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    xs, values = _pv_grid(model, float(x_max), float(step))
    excess = values - lam * model.V(xs)
    inside = excess > 0
    if not inside.any():
        raise SmallSetError(f"PV <= {lam} V everywhere on [0, {x_max}]")
    if inside[-1]:
        raise SmallSetError(f"PV > {lam} V at x_max = {x_max}; C is unbounded at this lambda")
    flips = np.flatnonzero(inside[1:] != inside[:-1])

    def g(x):
        return pv(model, x) - lam * model.V(x)

    if inside[0]:
        if flips.size != 1:
            raise SmallSetError(f"{{PV > {lam} V}} is not an interval ({flips.size} sign changes)")
        c_lo = 0.0
        c_hi = _bisect(g, xs[flips[0]], xs[flips[0] + 1], tol)
    else:
        if flips.size != 2:
            raise SmallSetError(f"{{PV > {lam} V}} is not an interval ({flips.size} sign changes)")
        c_lo = _bisect(g, xs[flips[0]], xs[flips[0] + 1], tol)
        c_hi = _bisect(g, xs[flips[1]], xs[flips[1] + 1], tol)

    K = float(pv(model, np.array([c_lo, c_hi])).max())
    grid_in = np.flatnonzero((xs > c_lo) & (xs < c_hi))
    if grid_in.size:
        i = grid_in[int(values[grid_in].argmax())]
        a, b = max(c_lo, xs[max(i - 1, 0)]), min(c_hi, xs[min(i + 1, xs.size - 1)])
    else:
        a, b = c_lo, c_hi
    K = max(K, _zoom_max(lambda x: pv(model, x), a, b, tol)[1])
    return SmallSet(C_lo=float(c_lo), C_hi=float(c_hi), K=K)


@dataclass(frozen=True)
class MinorizingMeasure:
    """``epsilon * nu_beta(beta) = min(G(shape, rate_lo), G(shape, rate_hi))``.

    The minorizing measure on S-space is ``beta ~ nu_beta`` followed by one
    theta draw; it minorizes the S-kernel because ``S_1`` depends on
    ``S_0`` only through ``beta``.
    """

    shape: float
    rate_lo: float
    rate_hi: float
    beta_star: float
    epsilon: float

    def min_density(self, beta):
        """Pointwise minimum of the two endpoint densities (mass ``epsilon``)."""
        return np.exp(np.minimum(gamma_log_pdf(beta, self.shape, self.rate_lo),
                                 gamma_log_pdf(beta, self.shape, self.rate_hi)))

    def sample_beta(self, rng: np.random.Generator, size=None):
        a = self.shape
        left_mass = regularized_gamma_P(a, self.rate_lo * self.beta_star)
        u = rng.random(size)
        pick_left = rng.random(size) * self.epsilon < left_mass
        # left piece: G(rate_lo) below beta*; right piece: G(rate_hi) above beta*
        right_start = regularized_gamma_P(a, self.rate_hi * self.beta_star)
        left = special.gammaincinv(a, u * left_mass) / self.rate_lo
        right = special.gammaincinv(a, right_start + u * (1.0 - right_start)) / self.rate_hi
        return np.where(pick_left, left, right)


def minorization_epsilon(model: PumpModel, C_lo: float, C_hi: float):
    """Overlap mass of ``G(shape, 1 + x)`` over ``x`` in ``[C_lo, C_hi]``.

    For fixed ``beta`` the density is unimodal in ``x``, so the minimum over
    the interval sits at an endpoint; the two endpoint densities cross at
    ``beta* = shape * log(r_hi / r_lo) / (r_hi - r_lo)``.
    Returns ``(epsilon, MinorizingMeasure)``.
    """
    if not 0.0 <= C_lo < C_hi:
        raise DomainError(f"need 0 <= C_lo < C_hi, got [{C_lo}, {C_hi}]")
    a = model.shape_beta
    r_lo, r_hi = model.rate_offset + C_lo, model.rate_offset + C_hi
    beta_star = a * math.log(r_hi / r_lo) / (r_hi - r_lo)
    eps = regularized_gamma_P(a, r_lo * beta_star) + regularized_gamma_Q(a, r_hi * beta_star)
    return eps, MinorizingMeasure(shape=a, rate_lo=r_lo, rate_hi=r_hi,
                                  beta_star=beta_star, epsilon=eps)


@dataclass(frozen=True)
class SmallSetResult:
    lam: float
    C_lo: float
    C_hi: float
    K: float
    epsilon: float
    rho: float
    r: float = 1.0
    B: float = 0.0

    @property
    def K_reported(self) -> float:
        """``K`` rounded up to the next 0.01, as a conservative printed value."""
        return math.ceil(self.K * 100.0 - 1e-9) / 100.0

    @property
    def drift_params(self) -> bounds.DriftParams:
        return bounds.DriftParams(lam=self.lam, K=self.K, m=1, epsilon=self.epsilon)


def small_set_result(model: PumpModel, lam: float, **scan) -> SmallSetResult:
    """Small set and rate for one value of ``lam``."""
    ss = find_small_set(model, lam, **scan)
    eps, _ = minorization_epsilon(model, ss.C_lo, ss.C_hi)
    rate = bounds.compute_rate_params(bounds.DriftParams(lam=lam, K=ss.K, m=1, epsilon=eps))
    return SmallSetResult(lam=lam, C_lo=ss.C_lo, C_hi=ss.C_hi, K=ss.K, epsilon=eps,
                          rho=rate.rho, r=rate.r, B=rate.B)


@dataclass(frozen=True)
class LambdaScan:
    best: SmallSetResult
    results: tuple          # SmallSetResult for every lambda that succeeded
    skipped: tuple          # (lambda, reason) pairs

    def curve(self):
        return [(res.lam, res.rho) for res in self.results]


def scan_lambda(model: PumpModel, grid: Optional[Sequence[float]] = None, **scan) -> LambdaScan:
    """Evaluate every ``lam`` on the grid; the best has the smallest ``rho``,
    ties going to the smaller ``lam``."""
    grid = sorted(DEFAULT_LAMBDA_GRID if grid is None else grid)
    results, skipped = [], []
    for lam in grid:
        try:
            results.append(small_set_result(model, lam, **scan))
        except DriftBoundsError as exc:
            log.info("lambda=%.2f skipped: %s", lam, exc)
            skipped.append((lam, str(exc)))
    if not results:
        raise SmallSetError("no lambda on the grid produced a valid small set")
    best = results[0]
    for res in results[1:]:
        if res.rho < best.rho:
            best = res
    return LambdaScan(best=best, results=tuple(results), skipped=tuple(skipped))


def optimize_lambda(model: PumpModel, grid: Optional[Sequence[float]] = None,
                    **scan) -> SmallSetResult:
    return scan_lambda(model, grid, **scan).best


@dataclass(frozen=True)
class PumpReport:
    result: SmallSetResult
    tau_tv: int
    tau_v: int
    start: float
    scan: Optional[LambdaScan] = None

    @property
    def rho(self) -> float:
        return self.result.rho

    def as_dict(self) -> dict:
        r = self.result
        return {
            "lambda": r.lam, "C_lo": r.C_lo, "C_hi": r.C_hi, "K": r.K,
            "K_reported": r.K_reported, "epsilon": r.epsilon, "rho": r.rho, "r": r.r,
            "start": self.start, "tau_tv": self.tau_tv, "tau_v": self.tau_v,
        }


def reproduce_table(model: Optional[PumpModel] = None, grid: Optional[Sequence[float]] = None,
                    start: Optional[float] = None, target_tv: float = 0.01,
                    target_v: float = 0.02) -> PumpReport:
    """Optimize ``lam`` and turn the result into TV and V-norm mixing times."""
    model = model or PumpModel()
    start = model.center if start is None else start
    scan = scan_lambda(model, grid)
    res = scan.best
    p = res.drift_params
    rate = bounds.compute_rate_params(p)
    Vx = float(model.V(start))
    tau_tv = bounds.mixing_time(bounds.tv_bound_poly(rate, p, Vx), target_tv)
    tau_v = bounds.mixing_time(bounds.vnorm_bound_poly(rate, p, Vx), target_v)
    return PumpReport(result=res, tau_tv=tau_tv, tau_v=tau_v, start=start, scan=scan)
