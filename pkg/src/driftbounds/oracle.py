"""Exact computations on finite chains.

These routines are the ground truth the closed-form bounds are checked
against: stationary laws, distance-to-stationarity curves, the exact law
of the regeneration time through a killed-kernel recursion, and direct
evaluation of both sides of every inequality the bounds rest on.

Distributions are propagated by repeated vector-matrix products; spectral
decompositions are used only for rates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bounds
from .chains import (
    CHECK_SLACK,
    DriftSpec,
    FiniteChain,
    MinorizationSpec,
    as_state_set,
    is_irreducible,
    spectral_report,
    verify_drift,
    verify_minorization,
)
from .errors import (
    DomainError,
    HorizonTooSmallError,
    PreconditionError,
    ReducibleChainError,
)

__all__ = [
    "DistanceCurves",
    "RegenerationTail",
    "stationary_distribution",
    "distance_curves",
    "killed_kernel",
    "exact_regeneration_tail",
    "stationary_via_regeneration",
    "check_l2_theorem",
    "check_core_lemma",
    "exponential_hitting_moment",
    "check_supporting_lemmas",
    "check_tail_bound",
    "check_tv_theorem",
    "drift_params",
    "nearly_periodic_chain",
    "tv_rate",
    "cubic_scaling_experiment",
    "random_lazy_reversible_chain",
    "minimal_drift_spec",
]


@dataclass(frozen=True, eq=False)
class DistanceCurves:
    horizon: int
    tv: np.ndarray
    l2: np.ndarray
    vnorm: np.ndarray


@dataclass(frozen=True, eq=False)
class RegenerationTail:
    """Exact law of ``T`` up to ``horizon``.

    ``tail[t] = P(T > t)``; ``residual_mass = P(T > horizon)`` and
    ``remainder_sum = sum_{n > horizon} P(T > n)``, the latter obtained
    exactly from the fundamental matrix of the killed kernel.
    """

    tail: np.ndarray
    expected_T: float
    residual_mass: float
    remainder_sum: float

    @property
    def horizon(self) -> int:
        return self.tail.size - 1

    def suffix_sums(self) -> np.ndarray:
        """``out[k] = sum_{n >= k} P(T > n)`` for ``k = 0..horizon + 1``."""
        out = np.empty(self.tail.size + 1)
        out[-1] = self.remainder_sum
        out[:-1] = np.cumsum(self.tail[::-1])[::-1] + self.remainder_sum
        return out


def _require_irreducible(chain: FiniteChain):
    if not is_irreducible(chain):
        raise ReducibleChainError("chain is reducible; stationary distribution is not unique")


def stationary_distribution(chain: FiniteChain) -> np.ndarray:
    """Solve ``pi P = pi``, ``sum(pi) = 1`` directly, with one refinement step."""
    _require_irreducible(chain)
    n = chain.n
    A = chain.P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi += np.linalg.solve(A, b - A @ pi)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _start_vector(chain: FiniteChain, x) -> np.ndarray:
    if np.ndim(x) == 0:
        mu = np.zeros(chain.n)
        mu[int(x)] = 1.0
        return mu
    mu = np.asarray(x, dtype=float)
    if mu.shape != (chain.n,):
        raise DomainError("initial distribution has the wrong length")
    return mu


def distance_curves(chain: FiniteChain, x, V, horizon: int,
                    pi: Optional[np.ndarray] = None) -> DistanceCurves:
    """TV, L2(pi) and V-norm distances of ``P^t(x, .)`` from ``pi``, ``t <= horizon``.

    ``x`` is a state index or an initial distribution.
    """
    if pi is None:
        pi = stationary_distribution(chain)
    V = np.asarray(V, dtype=float)
    mu = _start_vector(chain, x)
    tv = np.empty(horizon + 1)
    l2 = np.empty(horizon + 1)
    vn = np.empty(horizon + 1)
    for t in range(horizon + 1):
        diff = mu - pi
        tv[t] = 0.5 * np.abs(diff).sum()
        vn[t] = (V * np.abs(diff)).sum()
        l2[t] = math.sqrt(float((diff * diff / pi).sum()))
        mu = mu @ chain.P
    return DistanceCurves(horizon=horizon, tv=tv, l2=l2, vnorm=vn)


def killed_kernel(chain: FiniteChain, C: Sequence[int], spec: MinorizationSpec) -> np.ndarray:
    """Sub-stochastic kernel ``Q(x, y) = P(x, y, no regeneration)`` for ``m = 1``."""
    if spec.m != 1:
        raise PreconditionError("exact regeneration law is implemented for m = 1 only")
    C = as_state_set(C, chain.n)
    if not verify_minorization(chain, C, spec):
        raise PreconditionError("minorization does not hold on C")
    Q = chain.P.copy()
    Q[list(C)] -= spec.epsilon * spec.nu
    return np.clip(Q, 0.0, None)


def _expected_times(Q: np.ndarray) -> Optional[np.ndarray]:
    """``g(x) = E_x[T] = sum_n (Q^n 1)(x)``, or None if it diverges."""
    n = Q.shape[0]
    try:
        g = np.linalg.solve(np.eye(n) - Q, np.ones(n))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(g)) or np.any(g < 1.0 - 1e-9):
        return None
    return g


def exact_regeneration_tail(chain: FiniteChain, C: Sequence[int], spec: MinorizationSpec,
                            initial, horizon: int) -> RegenerationTail:
    """Law of the regeneration time ``T`` from ``initial`` (state or distribution).

    ``u_{n+1} = u_n Q`` with ``u_0 = initial`` gives ``u_n(y) = P(X_n = y, T > n)``.
    """
    Q = killed_kernel(chain, C, spec)
    u = _start_vector(chain, initial)
    tail = np.empty(horizon + 1)
    for t in range(horizon + 1):
        tail[t] = u.sum()
        if t < horizon:
            u = u @ Q
    g = _expected_times(Q)
    if g is None:
        return RegenerationTail(tail=tail, expected_T=math.inf,
                                residual_mass=float(tail[-1]), remainder_sum=math.inf)
    remainder = float((u @ Q) @ g)
    return RegenerationTail(
        tail=tail,
        expected_T=float(_start_vector(chain, initial) @ g),
        residual_mass=float(tail[-1]),
        remainder_sum=remainder,
    )


def stationary_via_regeneration(chain: FiniteChain, C: Sequence[int], spec: MinorizationSpec,
                                horizon: int = 1_000_000, residual_tol: float = 1e-12,
                                stop_tol: float = 1e-16) -> np.ndarray:
    """``pi(y) = sum_n P_nu(X_n = y, T > n) / E_nu[T]`` accumulated from the recursion.

    Iteration stops once ``P_nu(T > n)`` falls below ``stop_tol``; reaching
    ``horizon`` with more than ``residual_tol`` left raises HorizonTooSmallError.
    """
    Q = killed_kernel(chain, C, spec)
    u = spec.nu.copy()
    occupation = np.zeros(chain.n)
    mass = 1.0
    for _ in range(horizon + 1):
        occupation += u
        u = u @ Q
        mass = u.sum()
        if mass <= stop_tol:
            break
    if mass > residual_tol:
        raise HorizonTooSmallError(
            f"P_nu(T > {horizon}) = {mass:.3g} exceeds tolerance {residual_tol:g}"
        )
    return occupation / occupation.sum()


def _require_reversible_nonneg(chain: FiniteChain):
    rep = spectral_report(chain)
    if not rep.reversible:
        raise PreconditionError(
            "chain is not reversible (max detailed-balance violation "
            f"{rep.max_balance_violation:.3g}); the L2 theorem does not apply"
        )
    if not rep.nonnegative_spectrum:
        raise PreconditionError(
            f"chain has a negative eigenvalue {rep.min_eigenvalue:.6g}; pass to the lazy chain"
        )
    return rep


@dataclass(frozen=True, eq=False)
class L2TheoremReport:
    l2_squared: np.ndarray
    tail_sum: np.ndarray
    max_violation: float

    @property
    def holds(self) -> bool:
        return self.max_violation <= 1e-10


def check_l2_theorem(chain: FiniteChain, C: Sequence[int], spec: MinorizationSpec,
                     horizon: int) -> L2TheoremReport:
    """Compare ``||P^t(nu, .) - pi||^2_{L2(pi)}`` with ``sum_{n > 2t} P_nu(T > n)``."""
    rep = _require_reversible_nonneg(chain)
    pi = rep.stationary
    reg = exact_regeneration_tail(chain, C, spec, spec.nu, 2 * horizon + 1)
    suffix = reg.suffix_sums()
    tail_sum = suffix[2 * np.arange(horizon + 1) + 1]
    mu = spec.nu.copy()
    l2sq = np.empty(horizon + 1)
    for t in range(horizon + 1):
        diff = mu - pi
        l2sq[t] = float((diff * diff / pi).sum())
        mu = mu @ chain.P
    return L2TheoremReport(l2_squared=l2sq, tail_sum=tail_sum,
                           max_violation=float((l2sq - tail_sum).max()))


@dataclass(frozen=True, eq=False)
class CoreLemmaReport:
    expectations: np.ndarray
    max_increase: float
    max_violation: float

    @property
    def holds(self) -> bool:
        return self.max_increase <= 1e-12 and self.max_violation <= 1e-10


def check_core_lemma(chain: FiniteChain, C: Sequence[int], spec: MinorizationSpec,
                     horizon: int) -> CoreLemmaReport:
    """With ``f = d nu / d pi``: ``E_nu f(X_t)`` is nonincreasing with limit 1 and
    ``E_nu f(X_t) - 1 <= sum_{n > t} P_nu(T > n)``."""
    rep = _require_reversible_nonneg(chain)
    pi = rep.stationary
    f = spec.nu / pi
    reg = exact_regeneration_tail(chain, C, spec, spec.nu, horizon + 1)
    rhs = reg.suffix_sums()[1:horizon + 2]
    mu = spec.nu.copy()
    e = np.empty(horizon + 1)
    for t in range(horizon + 1):
        e[t] = float(mu @ f)
        mu = mu @ chain.P
    increase = float(np.diff(e).max()) if horizon > 0 else -math.inf
    return CoreLemmaReport(expectations=e, max_increase=increase,
                           max_violation=float((e - 1.0 - rhs).max()))


def exponential_hitting_moment(chain: FiniteChain, C: Sequence[int], lam: float) -> np.ndarray:
    """``h(x) = E_x[lam^{-tau_C}]``, the minimal drift function for ``(C, lam)``.

    Solves ``h = 1`` on ``C`` and ``h = (P h) / lam`` off ``C``.  Raises
    DomainError when the moment is infinite, i.e. when ``lam`` does not
    exceed the spectral radius of ``P`` restricted to the complement of ``C``.
    """
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    C = as_state_set(C, chain.n)
    inC = np.zeros(chain.n, dtype=bool)
    inC[list(C)] = True
    off = np.flatnonzero(~inC)
    h = np.ones(chain.n)
    if off.size == 0:
        return h
    sub = chain.P[np.ix_(off, off)]
    radius = float(np.abs(np.linalg.eigvals(sub)).max())
    if radius >= lam * (1.0 - 1e-12):
        raise DomainError(
            f"E[lambda^-tau_C] is infinite: spectral radius {radius:.6g} off C is >= lambda = {lam}"
        )
    rhs = chain.P[np.ix_(off, np.flatnonzero(inC))].sum(axis=1) / lam
    h[off] = np.linalg.solve(np.eye(off.size) - sub / lam, rhs)
    return h


def drift_params(drift: DriftSpec, mino: MinorizationSpec) -> bounds.DriftParams:
    return bounds.DriftParams(lam=drift.lam, K=drift.K, m=mino.m, epsilon=mino.epsilon)


def _require_verified(chain: FiniteChain, drift: DriftSpec, mino: MinorizationSpec):
    chk = verify_drift(chain, drift)
    if not chk.holds:
        raise PreconditionError(
            f"drift condition fails at state {chk.witness} by {chk.worst_violation:.3g}"
        )
    if not verify_minorization(chain, drift.C, mino):
        raise PreconditionError("minorization condition fails on C")


@dataclass(frozen=True)
class SupportingLemmaReport:
    b_bound_slack: float        # max_{x in C} P^m V(x) - B
    pi_v_slack: float           # pi(V) - (K - lam)/(1 - lam) pi(C)
    tv_to_v_slack: float        # max over x, t of lhs - rhs
    tv_to_v_witness: tuple      # (x, t) attaining tv_to_v_slack
    failures: tuple

    @property
    def holds(self) -> bool:
        return not self.failures


def check_supporting_lemmas(chain: FiniteChain, drift: DriftSpec, mino: MinorizationSpec,
                            horizon: int, slack: float = 1e-10) -> SupportingLemmaReport:
    """Check the m-step drift ceiling ``B``, the ``pi(V)`` bound, and the
    TV-to-V-norm inequality from every starting state."""
    _require_verified(chain, drift, mino)
    lam, K, V = drift.lam, drift.K, drift.V
    B = drift_params(drift, mino).B
    pi = stationary_distribution(chain)
    failures = []

    PmV = chain.power(mino.m) @ V
    b_slack = float(PmV[list(drift.C)].max() - B)
    if b_slack > slack:
        worst = drift.C[int(np.argmax(PmV[list(drift.C)]))]
        failures.append(f"B-bound: P^m V({worst}) exceeds B by {b_slack:.3g}")

    piV = float(pi @ V)
    pi_slack = piV - (K - lam) / (1.0 - lam) * float(pi[list(drift.C)].sum())
    if pi_slack > slack:
        failures.append(f"pi(V) bound exceeded by {pi_slack:.3g}")

    R = np.eye(chain.n) - pi[None, :]
    conv = np.zeros(chain.n)          # sum_{n=1}^t lam^{n-1} TV_{t-n}, per start state
    worst_gap, witness = -math.inf, (0, 0)
    for t in range(horizon + 1):
        absR = np.abs(R)
        tv = 0.5 * absR.sum(axis=1)
        vnorm = absR @ V
        rhs = 2.0 * K * conv + (V + piV) * lam**t
        gap = vnorm - rhs
        j = int(gap.argmax())
        if gap[j] > worst_gap:
            worst_gap, witness = float(gap[j]), (j, t)
        conv = lam * conv + tv
        R = R @ chain.P
    if worst_gap > slack:
        failures.append(
            f"TV-to-V-norm inequality fails at x={witness[0]}, t={witness[1]} by {worst_gap:.3g}"
        )
    return SupportingLemmaReport(b_bound_slack=b_slack, pi_v_slack=pi_slack,
                                 tv_to_v_slack=worst_gap, tv_to_v_witness=witness,
                                 failures=tuple(failures))


@dataclass(frozen=True)
class DominanceReport:
    max_excess: float       # max of exact - bound over starts and t
    witness: tuple          # (start, t)

    @property
    def holds(self) -> bool:
        return self.max_excess <= 1e-12


def check_tail_bound(chain: FiniteChain, drift: DriftSpec, mino: MinorizationSpec,
                     horizon: int, starts=None) -> DominanceReport:
    """Exact ``P_mu(T > t)`` against ``mu(V)^r rho^(t+1-m)``.

    ``starts`` defaults to every point mass plus ``nu``; the label ``-1``
    in the witness stands for ``nu``.
    """
    _require_verified(chain, drift, mino)
    rate = bounds.compute_rate_params(drift_params(drift, mino))
    if starts is None:
        starts = list(range(chain.n)) + [-1]
    t = np.arange(horizon + 1)
    worst, witness = -math.inf, None
    for s in starts:
        mu = mino.nu if s == -1 else _start_vector(chain, s)
        reg = exact_regeneration_tail(chain, drift.C, mino, mu, horizon)
        bound = bounds.tail_bound(rate, mino.m, float(mu @ drift.V), t)
        excess = reg.tail - bound
        j = int(excess.argmax())
        if excess[j] > worst:
            worst, witness = float(excess[j]), (s, j)
    return DominanceReport(max_excess=worst, witness=witness)


@dataclass(frozen=True)
class TVTheoremReport:
    tv: DominanceReport
    vnorm: DominanceReport

    @property
    def holds(self) -> bool:
        return self.tv.holds and self.vnorm.holds


def check_tv_theorem(chain: FiniteChain, drift: DriftSpec, mino: MinorizationSpec,
                     horizon: int) -> TVTheoremReport:
    """Exact TV and V-norm curves from every state against the closed-form bounds."""
    _require_reversible_nonneg(chain)
    _require_verified(chain, drift, mino)
    p = drift_params(drift, mino)
    rate = bounds.compute_rate_params(p)
    pi = stationary_distribution(chain)
    t = np.arange(horizon + 1)
    worst = {"tv": (-math.inf, None), "v": (-math.inf, None)}
    for x in range(chain.n):
        curves = distance_curves(chain, x, drift.V, horizon, pi=pi)
        Vx = float(drift.V[x])
        for key, exact, curve in (
            ("tv", curves.tv, bounds.tv_bound_poly(rate, p, Vx)),
            ("v", curves.vnorm, bounds.vnorm_bound_poly(rate, p, Vx)),
        ):
            excess = exact - curve.value(t)
            j = int(excess.argmax())
            if excess[j] > worst[key][0]:
                worst[key] = (float(excess[j]), (x, j))
    return TVTheoremReport(tv=DominanceReport(*worst["tv"]),
                           vnorm=DominanceReport(*worst["v"]))


def nearly_periodic_chain(N: int):
    """Cycle ``j -> j-1`` with a fair hold-or-wrap step at 0, plus its
    drift and minorization data.  Returns ``(chain, drift, minorization)``."""
    if N < 3:
        raise DomainError(f"N must be >= 3, got {N}")
    P = np.zeros((N, N))
    P[np.arange(1, N), np.arange(N - 1)] = 1.0
    P[0, 0] = P[0, N - 1] = 0.5
    chain = FiniteChain(P)
    lam = 1.0 - 1.0 / N
    V = lam ** (-np.arange(N, dtype=float))
    drift = DriftSpec(V=V, C=(0,), lam=lam, K=(1.0 + math.e) / 2.0)
    nu = np.zeros(N)
    nu[0] = nu[N - 1] = 0.5
    return chain, drift, MinorizationSpec(m=1, epsilon=1.0, nu=nu)


def tv_rate(chain: FiniteChain) -> float:
    """Second-largest eigenvalue modulus of ``P``."""
    _require_irreducible(chain)
    ev = np.linalg.eigvals(chain.P)
    ev = np.delete(ev, int(np.argmin(np.abs(ev - 1.0))))
    return float(np.abs(ev).max())


@dataclass(frozen=True)
class ScalingReport:
    slope: float
    intercept: float
    per_N: tuple        # (N, 1 - rho_TV) pairs


def cubic_scaling_experiment(N_values: Sequence[int]) -> ScalingReport:
    """Least-squares slope of ``log(1 - rho_TV)`` against ``log N`` for the
    nearly periodic chain."""
    N_values = [int(N) for N in N_values]
    if len(N_values) < 4 or min(N_values) < 3:
        raise DomainError("need at least 4 values of N, each >= 3")
    gaps = [1.0 - tv_rate(nearly_periodic_chain(N)[0]) for N in N_values]
    slope, intercept = np.polyfit(np.log(N_values), np.log(gaps), 1)
    return ScalingReport(slope=float(slope), intercept=float(intercept),
                         per_N=tuple(zip(N_values, gaps)))


def random_lazy_reversible_chain(rng: np.random.Generator, n: int,
                                 density: float = 0.6) -> FiniteChain:
    """Lazy random walk on a random weighted connected graph (reversible by construction)."""
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    W = np.triu(W, 1)
    path = rng.permutation(n)
    for a, b in zip(path[:-1], path[1:]):
        i, j = min(a, b), max(a, b)
        W[i, j] = max(W[i, j], 0.05 + rng.random())
    W = W + W.T + np.diag(rng.random(n) * (rng.random(n) < density))
    P = W / W.sum(axis=1, keepdims=True)
    return FiniteChain(0.5 * (np.eye(n) + P))


def minimal_drift_spec(chain: FiniteChain, C: Sequence[int],
                       lam: Optional[float] = None) -> DriftSpec:
    """Drift data built from an exponential hitting moment.

    ``V`` is ``E_x[lam0^{-tau_C}]`` for some ``lam0 < lam`` above the spectral
    radius off ``C``, so ``PV = lam0 V < lam V`` off ``C`` holds strictly.
    ``K`` is the largest value of ``PV`` on ``C``.
    """
    C = as_state_set(C, chain.n)
    off = np.setdiff1d(np.arange(chain.n), C)
    radius = float(np.abs(np.linalg.eigvals(chain.P[np.ix_(off, off)])).max()) if off.size else 0.0
    if lam is None:
        lam = max(0.5 * (1.0 + radius), 0.05)
    if not radius < lam < 1.0:
        raise DomainError(f"lambda must lie in ({radius:.6g}, 1), got {lam}")
    lam0 = 0.5 * (radius + lam) if radius > 0 else 0.5 * lam
    V = exponential_hitting_moment(chain, C, lam0)
    K = max(1.0, float((chain.P @ V)[list(C)].max()) * (1.0 + 1e-12))
    return DriftSpec(V=np.maximum(V, 1.0), C=C, lam=lam, K=K)
