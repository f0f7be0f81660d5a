"""Finite Markov chains with drift and minorization data.

A chain is a dense row-stochastic matrix.  The helpers here check the
drift inequality and the small-set minorization exactly (up to a fixed
floating-point slack), build the lazy version of a chain, and report on
reversibility and the spectrum.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateMinorizationError, DomainError, ReducibleChainError

STOCHASTIC_TOL = 1e-12
CHECK_SLACK = 1e-12
REVERSIBILITY_TOL = 1e-10
EIGENVALUE_TOL = 1e-10

__all__ = [
    "FiniteChain",
    "DriftSpec",
    "MinorizationSpec",
    "SpectralReport",
    "DriftCheck",
    "as_state_set",
    "load_chain",
    "save_chain",
    "is_irreducible",
    "verify_drift",
    "extract_minorization",
    "verify_minorization",
    "make_lazy",
    "spectral_report",
]


def _frozen_array(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """Transition matrix ``P`` with optional state labels."""

    P: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        P = _frozen_array(self.P)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 2:
            raise DomainError(f"transition matrix must be n x n with n >= 2, got {P.shape}")
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise DomainError("transition matrix has negative or non-finite entries")
        row_err = np.abs(P.sum(axis=1) - 1.0)
        if row_err.max() > STOCHASTIC_TOL:
            bad = int(row_err.argmax())
            raise DomainError(f"row {bad} sums to {P[bad].sum()!r}, not 1")
        object.__setattr__(self, "P", P)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != P.shape[0]:
                raise DomainError("number of labels does not match state count")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def power(self, m: int) -> np.ndarray:
        return np.linalg.matrix_power(self.P, m)


def as_state_set(C: Iterable[int], n: int) -> tuple:
    """Normalize a collection of state indices (or a boolean mask) to a sorted tuple."""
    arr = np.asarray(list(C) if not isinstance(C, np.ndarray) else C)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise DomainError("boolean mask has the wrong length")
        states = np.flatnonzero(arr)
    else:
        states = np.unique(arr.astype(int))
    if states.size == 0:
        raise DomainError("state set must be nonempty")
    if states.min() < 0 or states.max() >= n:
        raise DomainError(f"state index out of range for {n} states")
    return tuple(int(s) for s in states)


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Drift function values ``V`` with small-set candidate ``C`` and
    constants ``lam`` (off ``C``) and ``K`` (on ``C``)."""

    V: np.ndarray
    C: tuple
    lam: float
    K: float

    def __post_init__(self):
        V = _frozen_array(self.V)
        if V.ndim != 1 or np.any(V < 1.0):
            raise DomainError("drift function must be a vector with all values >= 1")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "C", as_state_set(self.C, V.size))
        if not 0.0 < self.lam < 1.0:
            raise DomainError(f"lambda must lie in (0, 1), got {self.lam}")
        if not self.K >= 1.0:
            raise DomainError(f"K must be >= 1, got {self.K}")

    @property
    def in_C(self) -> np.ndarray:
        mask = np.zeros(self.V.size, dtype=bool)
        mask[list(self.C)] = True
        return mask


@dataclass(frozen=True, eq=False)
class MinorizationSpec:
    m: int
    epsilon: float
    nu: np.ndarray

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be an integer >= 1, got {self.m}")
        if not 0.0 < self.epsilon <= 1.0:
            raise DomainError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        nu = _frozen_array(self.nu)
        if nu.ndim != 1 or np.any(nu < 0) or abs(nu.sum() - 1.0) > STOCHASTIC_TOL:
            raise DomainError("nu must be a probability vector")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "m", int(self.m))


@dataclass(frozen=True, eq=False)
class SpectralReport:
    reversible: bool
    min_eigenvalue: float
    stationary: np.ndarray
    max_balance_violation: float = 0.0

    @property
    def nonnegative_spectrum(self) -> bool:
        return self.min_eigenvalue >= -EIGENVALUE_TOL


@dataclass(frozen=True)
class DriftCheck:
    holds: bool
    worst_violation: float
    witness: int


def load_chain(path) -> FiniteChain:
    """Read a whitespace-separated matrix, one row per line.

    A first line starting with ``#`` may carry whitespace-separated state
    labels.  Blank lines are ignored.
    """
    labels = None
    rows = []
    for line in Path(path).read_text().splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if labels is None and not rows:
                labels = tuple(s[1:].split()) or None
            continue
        rows.append([float(v) for v in s.split()])
    if len({len(r) for r in rows}) != 1:
        raise DomainError(f"{path}: ragged matrix rows")
    return FiniteChain(np.array(rows), labels=labels)


def save_chain(chain: FiniteChain, path) -> None:
    lines = []
    if chain.labels is not None:
        lines.append("# " + " ".join(str(l) for l in chain.labels))
    for row in chain.P:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def is_irreducible(chain: FiniteChain) -> bool:
    """Strong connectivity of the support graph."""
    ncomp, _ = connected_components(csr_matrix(chain.P > 0), directed=True, connection="strong")
    return ncomp == 1


def _check_dims(chain: FiniteChain, length: int, what: str):
    if length != chain.n:
        raise DomainError(f"{what} has length {length}, chain has {chain.n} states")


def verify_drift(chain: FiniteChain, spec: DriftSpec, slack: float = CHECK_SLACK) -> DriftCheck:
    """Check ``PV <= lam V`` off ``C`` and ``PV <= K`` on ``C``."""
    _check_dims(chain, spec.V.size, "drift function")
    PV = chain.P @ spec.V
    ceiling = np.where(spec.in_C, spec.K, spec.lam * spec.V)
    excess = PV - ceiling
    witness = int(excess.argmax())
    worst = float(excess[witness])
    return DriftCheck(holds=worst <= slack, worst_violation=worst, witness=witness)


def extract_minorization(chain: FiniteChain, C: Sequence[int], m: int = 1) -> MinorizationSpec:
    """Largest-mass minorization ``P^m(x, .) >= eps nu`` over ``x`` in ``C``.

    ``eps nu(y)`` is the columnwise minimum of the rows of ``P^m`` indexed by ``C``.
    """
    C = as_state_set(C, chain.n)
    Q = chain.power(m)
    floor = Q[list(C)].min(axis=0)
    eps = float(floor.sum())
    if eps <= 0.0:
        raise DegenerateMinorizationError(
            f"rows of P^{m} over C={C} have disjoint supports; epsilon = 0"
        )
    return MinorizationSpec(m=m, epsilon=min(eps, 1.0), nu=floor / eps)


def verify_minorization(chain: FiniteChain, C: Sequence[int], spec: MinorizationSpec,
                        slack: float = CHECK_SLACK) -> bool:
    _check_dims(chain, spec.nu.size, "nu")
    C = as_state_set(C, chain.n)
    Q = chain.power(spec.m)[list(C)]
    return bool(np.all(Q >= spec.epsilon * spec.nu - slack))


def make_lazy(chain: FiniteChain) -> FiniteChain:
    """The chain with kernel ``(I + P) / 2``."""
    return FiniteChain(0.5 * (np.eye(chain.n) + chain.P), labels=chain.labels)


def spectral_report(chain: FiniteChain, tol: float = REVERSIBILITY_TOL) -> SpectralReport:
    """Detailed balance test and the smallest eigenvalue of ``D^1/2 P D^-1/2``.

    For a non-reversible chain the symmetrized kernel is not symmetric and
    the smallest real part of its eigenvalues is reported.
    """
    from .oracle import stationary_distribution

    pi = stationary_distribution(chain)
    flow = pi[:, None] * chain.P
    violation = float(np.abs(flow - flow.T).max())
    reversible = violation <= tol
    root = np.sqrt(pi)
    S = root[:, None] * chain.P / root[None, :]
    if reversible:
        min_eig = float(np.linalg.eigvalsh(0.5 * (S + S.T)).min())
    else:
        min_eig = float(np.linalg.eigvals(S).real.min())
    return SpectralReport(
        reversible=reversible,
        min_eigenvalue=min_eig,
        stationary=pi,
        max_balance_violation=violation,
    )
