"""Quantitative convergence bounds for Markov chains from drift and minorization data.

The closed-form bounds live in :mod:`driftbounds.bounds`, finite-chain
data types in :mod:`driftbounds.chains`, exact reference computations in
:mod:`driftbounds.oracle`, the splitting simulator in
:mod:`driftbounds.simulation` and the pump-failure Gibbs sampler in
:mod:`driftbounds.pump`.
"""
from .bounds import (
    BoundPolynomial,
    DriftParams,
    RateParams,
    VNormBound,
    compute_rate_params,
    mixing_time,
    nu_drift_bound,
    tail_bound,
    tv_bound_poly,
    vnorm_bound_poly,
)
from .chains import (
    DriftSpec,
    FiniteChain,
    MinorizationSpec,
    extract_minorization,
    load_chain,
    make_lazy,
    spectral_report,
    verify_drift,
    verify_minorization,
)
from .errors import (
    DegenerateMinorizationError,
    DomainError,
    DriftBoundsError,
    NotReachedError,
    NumericalError,
    PreconditionError,
    ReducibleChainError,
)

__version__ = "0.1.0"
