"""Monte Carlo construction of the regeneration time by Nummelin splitting.

A split kernel knows how to take an ordinary step, whether a state is in
the small set, and how to run one ``m``-step block from a small-set state
together with its coin.  ``simulate_T`` runs the construction: walk until
the small set is hit, flip the coin through the block, and stop at the
end of the first heads block.

Two kernels ship.  ``FiniteSplitKernel`` samples the remainder law
``(P(x, .) - eps nu) / (1 - eps)`` directly.  ``PumpSplitKernel`` decides
the coin retrospectively: it draws the latent ``beta`` from its usual
conditional law and calls heads with probability
``min_density(beta) / density_x(beta)``.  Both have ``m = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from . import bounds
from .chains import FiniteChain, MinorizationSpec, as_state_set, verify_minorization
from .errors import DomainError, PreconditionError

WILSON_LEVEL = 0.997

__all__ = [
    "FiniteSplitKernel",
    "PumpSplitKernel",
    "TailEstimate",
    "TailComparison",
    "wilson_interval",
    "replication_rng",
    "simulate_T",
    "sample_path",
    "estimate_tail",
    "compare_tail_to_bound",
]


class FiniteSplitKernel:
    """Exact splitting of a finite chain with one-step minorization on ``C``."""

    m = 1

    def __init__(self, chain: FiniteChain, C: Sequence[int], spec: MinorizationSpec):
        if spec.m != 1:
            raise PreconditionError("only one-step minorization is supported")
        C = as_state_set(C, chain.n)
        if not verify_minorization(chain, C, spec):
            raise PreconditionError("minorization does not hold on C")
        self.chain = chain
        self.C = C
        self.epsilon = spec.epsilon
        self._in_C = np.zeros(chain.n, dtype=bool)
        self._in_C[list(C)] = True
        self._cum = np.cumsum(chain.P, axis=1)
        self._cum_nu = np.cumsum(spec.nu)
        self._cum_rem = {}
        if self.epsilon < 1.0:
            for x in C:
                rem = np.clip(chain.P[x] - self.epsilon * spec.nu, 0.0, None)
                self._cum_rem[x] = np.cumsum(rem / rem.sum())

    @staticmethod
    def _draw(cum: np.ndarray, rng: np.random.Generator) -> int:
        j = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return min(j, cum.size - 1)

    def step(self, x: int, rng: np.random.Generator) -> int:
        return self._draw(self._cum[x], rng)

    def in_small_set(self, x: int) -> bool:
        return bool(self._in_C[x])

    def regen_block(self, x: int, rng: np.random.Generator):
        if self.epsilon >= 1.0 or rng.random() < self.epsilon:
            return True, (self._draw(self._cum_nu, rng),)
        return False, (self._draw(self._cum_rem[x], rng),)


class PumpSplitKernel:
    """Retrospective-coin splitting of the pump S-chain on ``[C_lo, C_hi]``."""

    m = 1

    def __init__(self, model, C_lo: float, C_hi: float):
        from .pump.model import minorization_epsilon

        self.model = model
        self.C_lo, self.C_hi = float(C_lo), float(C_hi)
        self.epsilon, self.measure = minorization_epsilon(model, C_lo, C_hi)

    def step(self, x: float, rng: np.random.Generator) -> float:
        from .pump.model import gibbs_step

        return gibbs_step(self.model, x, rng)

    def in_small_set(self, x: float) -> bool:
        return self.C_lo <= x <= self.C_hi

    def regen_block(self, x: float, rng: np.random.Generator):
        from .pump.model import _theta_sum
        from .pump.specfun import gamma_log_pdf

        model = self.model
        rate = model.rate_offset + x
        beta = rng.gamma(model.shape_beta, 1.0 / rate)
        log_ratio = (np.log(self.measure.min_density(beta))
                     - gamma_log_pdf(beta, model.shape_beta, rate))
        heads = rng.random() < math.exp(min(float(log_ratio), 0.0))
        return heads, (_theta_sum(model, beta, rng),)


Initial = Union[Callable[[np.random.Generator], object], int, float]


def _initial_state(initial: Initial, rng: np.random.Generator):
    return initial(rng) if callable(initial) else initial


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index`` under root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def simulate_T(kernel, initial: Initial, rng: np.random.Generator, cap: int):
    """Run the splitting construction until the first heads block ends.

    Returns ``(T, n)`` where ``n`` is the number of transitions simulated;
    ``T`` is None when no heads occurred within ``cap`` transitions.
    """
    x = _initial_state(initial, rng)
    n = 0
    while n < cap:
        if not kernel.in_small_set(x):
            x = kernel.step(x, rng)
            n += 1
            continue
        heads, block = kernel.regen_block(x, rng)
        n += len(block)
        x = block[-1]
        if heads:
            return n, n
    return None, n


def sample_path(kernel, initial: Initial, rng: np.random.Generator, length: int):
    """Trajectory ``X_0..X_length`` of the split chain and its ``T`` (None if
    ``T > length``).  After ``T`` the chain keeps running with ordinary steps."""
    x = _initial_state(initial, rng)
    path = [x]
    T = None
    while len(path) <= length:
        if T is None and kernel.in_small_set(x):
            heads, block = kernel.regen_block(x, rng)
            path.extend(block)
            x = block[-1]
            if heads:
                T = len(path) - 1
        else:
            x = kernel.step(x, rng)
            path.append(x)
    if T is not None and T > length:
        T = None
    return path[:length + 1], T


def wilson_interval(successes, n: int, level: float = WILSON_LEVEL):
    """Two-sided Wilson score interval for a binomial proportion."""
    z = stats.norm.ppf(0.5 + level / 2.0)
    k = np.asarray(successes, dtype=float)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    lower = np.where(k <= 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    upper = np.where(k >= n, 1.0, np.clip(centre + half, 0.0, 1.0))
    return lower, upper


@dataclass(frozen=True, eq=False)
class TailEstimate:
    reps: int
    horizon: int
    empirical_tail: np.ndarray
    wilson_lower: np.ndarray
    wilson_upper: np.ndarray
    truncated_count: int

    def covers(self, exact) -> np.ndarray:
        """Pointwise test that ``exact`` lies inside the Wilson band."""
        exact = np.asarray(exact, dtype=float)[: self.horizon + 1]
        return (self.wilson_lower <= exact) & (exact <= self.wilson_upper)


def estimate_tail(kernel, initial: Initial, reps: int, horizon: int, seed: int) -> TailEstimate:
    """Empirical ``P(T > t)`` for ``t = 0..horizon`` from ``reps`` replications.

    Replication ``i`` draws from ``replication_rng(seed, i)``.  Replications
    still running at the horizon count as ``T > t`` for every ``t``.
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    counts = np.zeros(horizon + 2, dtype=np.int64)   # counts[k] = #{T = k}, k <= horizon
    truncated = 0
    for i in range(reps):
        T, _ = simulate_T(kernel, initial, replication_rng(seed, i), cap=horizon + 1)
        if T is None or T > horizon:
            truncated += 1
        else:
            counts[T] += 1
    done_by = np.cumsum(counts[: horizon + 1])       # #{T <= t}
    above = reps - done_by
    lower, upper = wilson_interval(above, reps)
    return TailEstimate(reps=reps, horizon=horizon, empirical_tail=above / reps,
                        wilson_lower=lower, wilson_upper=upper, truncated_count=truncated)


@dataclass(frozen=True, eq=False)
class TailComparison:
    bound: np.ndarray
    violations: tuple       # t values with a significant excess over the bound

    @property
    def ok(self) -> bool:
        return not self.violations


def compare_tail_to_bound(est: TailEstimate, rate: bounds.RateParams, m: int,
                          muV: float) -> TailComparison:
    """Flag ``t`` where the empirical tail exceeds the formula bound by more
    than three binomial standard errors."""
    t = np.arange(est.horizon + 1)
    bound = bounds.tail_bound(rate, m, muV, t)
    p = est.empirical_tail
    se = np.sqrt(p * (1.0 - p) / est.reps)
    bad = np.flatnonzero(p - 3.0 * se > bound)
    return TailComparison(bound=bound, violations=tuple(int(v) for v in bad))
