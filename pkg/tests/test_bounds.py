import math
from unittest import mock

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from driftbounds import bounds
from driftbounds.bounds import (
    BoundPolynomial,
    DriftParams,
    RateParams,
    compute_rate_params,
    mixing_time,
    nu_drift_bound,
    tail_bound,
    tv_bound_poly,
    vnorm_bound_poly,
)
from driftbounds.errors import DomainError, NotReachedError

# Reference values below were produced by an independent 40-digit mpmath
# evaluation of the same closed forms.
PUMP = DriftParams(lam=0.61, K=3.05, m=1, epsilon=0.287)
PUMP_RHO = 0.91353202790056767594
PUMP_R = 0.18296078514232753198


def valid_params():
    return st.builds(
        DriftParams,
        lam=st.floats(0.01, 0.99),
        K=st.floats(1.0, 50.0),
        m=st.integers(1, 5),
        epsilon=st.floats(0.01, 1.0),
    )


class TestDriftParams:
    @pytest.mark.parametrize("kw", [
        dict(lam=0.0, K=2.0), dict(lam=1.0, K=2.0), dict(lam=0.5, K=0.9),
        dict(lam=0.5, K=2.0, m=0), dict(lam=0.5, K=2.0, m=1.5),
        dict(lam=0.5, K=2.0, epsilon=0.0), dict(lam=0.5, K=2.0, epsilon=1.01),
    ])
    def test_rejects_out_of_domain(self, kw):
        with pytest.raises(DomainError):
            DriftParams(**kw)

    def test_B_two_step(self):
        assert DriftParams(lam=0.5, K=2.0, m=2, epsilon=0.5).B == pytest.approx(2.5, abs=1e-15)

    def test_B_one_step_is_K(self):
        assert PUMP.B == pytest.approx(3.05, abs=1e-15)


class TestRateParams:
    def test_pump_rate(self):
        rate = compute_rate_params(PUMP)
        assert rate.B == pytest.approx(3.05)
        assert rate.rho == pytest.approx(PUMP_RHO, rel=1e-13)
        assert rate.r == pytest.approx(PUMP_R, rel=1e-12)
        assert round(rate.rho, 3) == 0.914

    def test_eps_one_gives_lambda(self):
        rate = compute_rate_params(DriftParams(lam=0.5, K=2.0, m=1, epsilon=1.0))
        assert (rate.rho, rate.r, rate.B) == (0.5, 1.0, 2.0)

    def test_rho0_below_lambda_is_clamped(self):
        # rho0 = 0.8175... < lambda
        rate = compute_rate_params(DriftParams(lam=0.9, K=1.2, m=1, epsilon=0.9))
        assert rate.rho == 0.9
        assert rate.r == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("params, rho, r", [
        ((0.5, 2.0, 2, 0.5), 0.84089641525371454303, 0.25),
        ((0.3, 5.0, 3, 0.1), 0.97753483884672836703, 0.018871976935174697013),
    ])
    def test_multi_step(self, params, rho, r):
        rate = compute_rate_params(DriftParams(*params))
        assert rate.rho == pytest.approx(rho, rel=1e-13)
        assert rate.r == pytest.approx(r, rel=1e-11)

    def test_B_not_above_eps_is_domain_error(self):
        # K >= 1 keeps B >= 1 > eps for validated data, so force B directly
        with mock.patch.object(DriftParams, "B", new_callable=mock.PropertyMock, return_value=0.2):
            with pytest.raises(DomainError, match="must exceed epsilon"):
                compute_rate_params(DriftParams(lam=0.5, K=1.0, m=1, epsilon=0.5))

    def test_smallest_B_is_accepted(self):
        rate = compute_rate_params(DriftParams(lam=0.5, K=1.0, m=1, epsilon=0.999))
        assert rate.B == 1.0 and 0.5 <= rate.rho < 1.0

    @settings(max_examples=300, deadline=None)
    @given(valid_params())
    def test_rho_range_and_r_identity(self, p):
        assume(p.epsilon == 1.0 or p.B > p.epsilon * (1 + 1e-9))
        rate = compute_rate_params(p)
        assert p.lam <= rate.rho < 1.0
        assert 0.0 < rate.r <= 1.0
        assert rate.r == pytest.approx(math.log(rate.rho) / math.log(p.lam), abs=1e-12)

    @settings(max_examples=150, deadline=None)
    @given(lam=st.floats(0.05, 0.95), K=st.floats(1.1, 20.0), m=st.integers(1, 4),
           e1=st.floats(0.01, 0.99), e2=st.floats(0.01, 0.99))
    def test_rho_nonincreasing_in_epsilon(self, lam, K, m, e1, e2):
        lo, hi = sorted((e1, e2))
        r_lo = compute_rate_params(DriftParams(lam, K, m, lo)).rho
        r_hi = compute_rate_params(DriftParams(lam, K, m, hi)).rho
        assert r_hi <= r_lo * (1 + 1e-13)

    @settings(max_examples=150, deadline=None)
    @given(lam=st.floats(0.05, 0.95), K1=st.floats(1.1, 20.0), K2=st.floats(1.1, 20.0),
           eps=st.floats(0.01, 0.99))
    def test_rho_nondecreasing_in_K(self, lam, K1, K2, eps):
        lo, hi = sorted((K1, K2))
        assume(DriftParams(lam, lo, 1, eps).B > eps)
        assert (compute_rate_params(DriftParams(lam, lo, 1, eps)).rho
                <= compute_rate_params(DriftParams(lam, hi, 1, eps)).rho * (1 + 1e-13))

    def test_rho_nondecreasing_in_m(self):
        for lam in np.linspace(0.1, 0.9, 9):
            for eps in (0.05, 0.3, 0.7):
                rhos = [compute_rate_params(DriftParams(lam, 2.5, m, eps)).rho for m in range(1, 8)]
                assert np.all(np.diff(rhos) >= -1e-14)

    def test_continuity_as_eps_approaches_one(self):
        # the gap to lambda closes only like 1 / log(1 / (1 - eps))
        for lam, K in ((0.5, 2.0), (0.61, 3.05), (0.9, 1.2)):
            at = compute_rate_params(DriftParams(lam, K, 1, 1.0)).rho
            gaps = [compute_rate_params(DriftParams(lam, K, 1, 1.0 - d)).rho - at
                    for d in 10.0 ** -np.arange(2, 16)]
            assert np.all(np.diff(gaps) <= 1e-15)
            assert 0.0 <= gaps[6] < 0.02          # eps = 1 - 1e-8


class TestTailAndNu:
    def test_tail_at_zero_is_muV_power(self):
        rate = compute_rate_params(PUMP)
        assert tail_bound(rate, 1, 1.0, 0) == pytest.approx(1.0)
        assert tail_bound(rate, 1, 1.0, 1) == pytest.approx(PUMP_RHO, rel=1e-13)
        assert tail_bound(rate, 1, 4.0, 3) == pytest.approx(4.0**PUMP_R * PUMP_RHO**3, rel=1e-13)

    def test_eps_one_reduces_to_lambda_power(self):
        rate = compute_rate_params(DriftParams(0.5, 2.0, 2, 1.0))
        t = np.arange(10)
        assert np.allclose(tail_bound(rate, 2, 7.0, t), 7.0 * 0.5 ** (t - 1.0), rtol=1e-14)

    def test_tail_vanishes(self):
        rate = compute_rate_params(PUMP)
        assert tail_bound(rate, 1, 1e6, 10**5) == 0.0

    def test_log_domain_no_overflow(self):
        rate = compute_rate_params(PUMP)
        assert math.isfinite(tail_bound(rate, 1, 1e300, 10))

    def test_nu_bound(self):
        rate = compute_rate_params(PUMP)
        assert nu_drift_bound(rate, 0.287) == pytest.approx(8.1428571428571422382, rel=1e-14)
        assert nu_drift_bound(RateParams(B=2.2, rho=0.5, r=1.0), 1.0) == pytest.approx(2.2)
        assert nu_drift_bound(RateParams(B=1.0, rho=0.5, r=1.0), 0.3) == pytest.approx(1.0)


class TestTVBound:
    def test_pump_coefficients(self):
        poly = tv_bound_poly(compute_rate_params(PUMP), PUMP, 1.0)
        assert poly.f1 == pytest.approx(0.18636054541779884435, rel=1e-12)
        assert poly.f0 == pytest.approx(1.9688946420578229052, rel=1e-12)
        assert poly.value(82) == pytest.approx(0.0103788794093112, rel=1e-10)
        assert poly.value(83) == pytest.approx(0.00958386884366732, rel=1e-10)

    def test_large_D_gives_f0_equal_D(self):
        poly = tv_bound_poly(compute_rate_params(PUMP), PUMP, 25.0)
        f1, f0 = bounds._tv_pieces(compute_rate_params(PUMP), PUMP, 25.0)
        assert f0 == pytest.approx(1.9688946420578229052, rel=1e-12)
        assert poly.f0 == f0

    def test_rejects_V_below_one(self):
        with pytest.raises(DomainError):
            tv_bound_poly(compute_rate_params(PUMP), PUMP, 0.5)

    @settings(max_examples=100, deadline=None)
    @given(valid_params(), st.floats(1.0, 1e4))
    def test_value_nonnegative_and_vanishing(self, p, Vx):
        assume(p.epsilon == 1.0 or p.B > p.epsilon * (1 + 1e-9))
        rate = compute_rate_params(p)
        poly = tv_bound_poly(rate, p, Vx)
        assume(rate.rho < 0.999)
        t = np.arange(0, 2000)
        vals = poly.value(t)
        assert np.all(vals >= 0)
        assert poly.value(10**6) < 1e-6


class TestVNormBound:
    def test_pump_two_rate_branch(self):
        vb = vnorm_bound_poly(compute_rate_params(PUMP), PUMP, 1.0)
        assert vb.branch == "rho_above_lambda"
        assert vb.h1 == pytest.approx(3.7452368203495499056, rel=1e-12)
        assert vb.h0 == pytest.approx(28.296399521649485027, rel=1e-12)
        assert vb.g0 == pytest.approx(7.2564102564102564103, rel=1e-14)
        assert vb.value(110) == pytest.approx(0.0210541201743895, rel=1e-10)
        assert vb.value(111) == pytest.approx(0.0193972264157453, rel=1e-10)

    def test_eps_one_quadratic_branch(self):
        p = DriftParams(0.5, 2.0, 1, 1.0)
        vb = vnorm_bound_poly(compute_rate_params(p), p, 3.0)
        assert vb.branch == "rho_equals_lambda"
        assert vb.g2 == pytest.approx(8.4852813742385702928, rel=1e-14)
        assert vb.g1 == pytest.approx(4.2010101267766693168, rel=1e-14)
        assert vb.g0 == pytest.approx(6.0)
        assert vb.value(2) == pytest.approx((8.4852813742385702928 * 4 + 4.2010101267766693168 * 2 + 6) / 4)

    def test_stable_form_matches_two_rate_form(self):
        vb = vnorm_bound_poly(compute_rate_params(PUMP), PUMP, 1.0)
        plain = bounds.VNormBound(branch=vb.branch, g0=vb.g0, rho=vb.rho, lam=vb.lam,
                                  h0=vb.h0, h1=vb.h1)
        t = np.arange(400)
        assert np.allclose(vb.value(t), plain.value(t), rtol=1e-11, atol=0)

    def test_nearly_equal_rates_approach_quadratic_branch(self):
        K, F0, F1, lam = 2.0, 1.3, 0.4, 0.8
        quad = bounds.VNormBound("rho_equals_lambda", g0=5.0, rho=lam, lam=lam,
                                 g1=K / lam * (2 * F0 - F1), g2=K / lam * F1)
        t = np.array([0, 1, 2, 3, 10, 100, 1000, 5000])
        for gap in (1e-6, 1e-9, 1e-13):
            rho = lam + gap
            near = bounds.VNormBound("rho_above_lambda", g0=5.0, rho=rho, lam=lam,
                                     h0=2 * K * (F0 / gap - rho * F1 / gap**2),
                                     h1=2 * K * F1 / gap, K=K, F0=F0, F1=F1)
            assert np.allclose(near.value(t), quad.value(t), rtol=max(1e-9, 1e4 * gap), atol=0)

    @settings(max_examples=100, deadline=None)
    @given(valid_params(), st.floats(1.0, 1e4))
    def test_value_nonnegative(self, p, Vx):
        assume(p.epsilon == 1.0 or p.B > p.epsilon * (1 + 1e-9))
        rate = compute_rate_params(p)
        assume(rate.rho < 0.999)
        vb = vnorm_bound_poly(rate, p, Vx)
        assert np.all(vb.value(np.arange(3000)) >= 0)
        assert vb.value(10**6) < 1e-6


class TestMixingTime:
    def test_pump_table_values(self):
        rate = compute_rate_params(PUMP)
        assert mixing_time(tv_bound_poly(rate, PUMP, 1.0), 0.01) == 83
        assert mixing_time(vnorm_bound_poly(rate, PUMP, 1.0), 0.02) == 111

    def test_already_below_target(self):
        assert mixing_time(BoundPolynomial(f1=0.0, f0=0.5, rho=0.5), 0.6) == 0

    def test_permanent_semantics(self):
        # starts below target, rises above it, then decays
        poly = BoundPolynomial(f1=1.0, f0=0.01, rho=0.9)
        tau = mixing_time(poly, 0.05)
        t = np.arange(tau, tau + 5000)
        assert np.all(poly.value(t) <= 0.05)
        assert poly.value(tau - 1) > 0.05
        assert poly.value(0) < 0.05

    def test_explicit_horizon(self):
        poly = tv_bound_poly(compute_rate_params(PUMP), PUMP, 1.0)
        assert mixing_time(poly, 0.01, t_max=500) == 83
        with pytest.raises(NotReachedError):
            mixing_time(poly, 0.01, t_max=60)

    def test_rejects_nonpositive_target(self):
        with pytest.raises(DomainError):
            mixing_time(BoundPolynomial(f1=0.0, f0=0.5, rho=0.5), 0.0)

    @settings(max_examples=100, deadline=None)
    @given(f1=st.floats(0, 100), f0=st.floats(0, 100), rho=st.floats(0.05, 0.99),
           target=st.floats(1e-6, 1.0))
    def test_is_minimal_and_permanent(self, f1, f0, rho, target):
        poly = BoundPolynomial(f1=f1, f0=f0, rho=rho)
        tau = mixing_time(poly, target)
        t = np.arange(tau, tau + 20000)
        assert np.all(poly.value(t) <= target * (1 + 1e-12))
        if tau > 0:
            assert poly.value(tau - 1) > target
