import math

import numpy as np
import pytest
from scipy import integrate, stats

from driftbounds import bounds
from driftbounds.errors import DomainError, SmallSetError
from driftbounds.pump.model import (
    PumpModel,
    find_small_set,
    gibbs_step,
    load_pump_data,
    minorization_epsilon,
    pv,
    reproduce_table,
    scan_lambda,
    small_set_result,
)

MODEL = PumpModel()


@pytest.fixture(scope="module")
def report():
    return reproduce_table(MODEL)


def pv_direct(model, x):
    """PV by integrating over beta with its own density (no change of variables)."""
    a, rate = model.shape_beta, model.rate_offset + x

    def f(beta):
        inv = 1.0 / (beta + model.times)
        mean = (model.shapes * inv).sum()
        var = (model.shapes * inv * inv).sum()
        return (1.0 + var + (mean - model.center) ** 2) * stats.gamma.pdf(beta, a, scale=1 / rate)

    lo, hi = stats.gamma.ppf([1e-14, 1 - 1e-14], a, scale=1 / rate)
    return integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=400)[0]


class TestData:
    def test_shipped_values(self):
        data = load_pump_data()
        assert [s for s, _ in data] == [5, 1, 5, 14, 3, 19, 1, 1, 4, 22]
        assert sum(t for _, t in data) == pytest.approx(350.032)

    def test_custom_file(self, tmp_path):
        path = tmp_path / "pumps.txt"
        path.write_text("# s t\n" + "\n".join(f"{k} {k + 1.5}" for k in range(10)))
        model = PumpModel(data=load_pump_data(path))
        assert model.times[0] == 1.5

    def test_validation(self):
        with pytest.raises(DomainError):
            PumpModel(data=((1, 2.0),) * 9)
        with pytest.raises(DomainError):
            PumpModel(data=((1, 0.0),) * 10)


class TestDriftFunction:
    @pytest.mark.parametrize("x", [0.0, 2.0, 6.5, 15.0])
    def test_pv_two_quadratures_agree(self, x):
        assert pv(MODEL, x) == pytest.approx(pv_direct(MODEL, x), rel=1e-9)

    def test_pv_monte_carlo(self):
        rng = np.random.default_rng(12)
        draws = gibbs_step(MODEL, np.full(200000, 6.5), rng)
        vals = MODEL.V(draws)
        se = vals.std() / math.sqrt(vals.size)
        assert abs(vals.mean() - pv(MODEL, 6.5)) < 4 * se

    def test_pv_vectorized(self):
        xs = np.array([1.0, 6.5, 9.0])
        assert np.allclose(pv(MODEL, xs), [pv(MODEL, x) for x in xs], rtol=1e-10)

    def test_negative_state(self):
        with pytest.raises(DomainError):
            pv(MODEL, -1.0)
        with pytest.raises(DomainError):
            gibbs_step(MODEL, -0.5, np.random.default_rng(0))


class TestSmallSet:
    def test_defining_inequality_at_endpoints(self):
        ss = find_small_set(MODEL, 0.61)
        for c in (ss.C_lo, ss.C_hi):
            assert pv(MODEL, c) == pytest.approx(0.61 * MODEL.V(c), rel=1e-7)
        inside = np.linspace(ss.C_lo, ss.C_hi, 41)[1:-1]
        assert np.all(pv(MODEL, inside) > 0.61 * MODEL.V(inside))
        assert ss.K >= pv(MODEL, inside).max() - 1e-9

    def test_starts_at_zero_for_small_lambda(self):
        ss = find_small_set(MODEL, 0.05)
        assert ss.C_lo == 0.0 and ss.C_hi > 15

    def test_unbounded(self):
        with pytest.raises(SmallSetError, match="unbounded"):
            find_small_set(MODEL, 0.01)

    def test_empty(self):
        with pytest.raises(SmallSetError, match="everywhere"):
            find_small_set(MODEL, 0.9, x_max=3.0)

    @pytest.mark.parametrize("lam", [0.0, 1.0, -0.2])
    def test_lambda_domain(self, lam):
        with pytest.raises(DomainError):
            find_small_set(MODEL, lam)

    def test_shrinks_as_lambda_grows(self):
        a, b = find_small_set(MODEL, 0.5), find_small_set(MODEL, 0.8)
        assert a.C_lo < b.C_lo and b.C_hi < a.C_hi


class TestMinorization:
    def test_epsilon_is_overlap_integral(self):
        eps, measure = minorization_epsilon(MODEL, 4.74, 8.5)
        hi = stats.gamma.ppf(1 - 1e-15, MODEL.shape_beta, scale=1 / measure.rate_lo)
        num, _ = integrate.quad(measure.min_density, 0, hi, points=[measure.beta_star],
                                epsabs=1e-14, limit=400)
        assert eps == pytest.approx(num, rel=1e-10)

    def test_min_density_is_minimum_over_interval(self):
        _, measure = minorization_epsilon(MODEL, 4.74, 8.5)
        betas = np.linspace(0.5, 5.0, 30)
        dens = [stats.gamma.pdf(betas, MODEL.shape_beta, scale=1 / (1 + x))
                for x in np.linspace(4.74, 8.5, 50)]
        assert np.allclose(measure.min_density(betas), np.min(dens, axis=0), rtol=1e-9, atol=1e-300)

    def test_sample_beta_law(self):
        eps, measure = minorization_epsilon(MODEL, 4.74, 8.5)
        draws = measure.sample_beta(np.random.default_rng(3), size=20000)

        a, bs = MODEL.shape_beta, measure.beta_star
        lo_cdf = stats.gamma(a, scale=1 / measure.rate_lo).cdf
        hi_cdf = stats.gamma(a, scale=1 / measure.rate_hi).cdf

        def cdf(b):
            # the rate_lo density is the smaller one below beta*
            below = lo_cdf(np.minimum(b, bs))
            above = np.clip(hi_cdf(b) - hi_cdf(bs), 0.0, None)
            return (below + above) / eps

        assert stats.kstest(draws, cdf).pvalue > 0.001

    def test_shrinks_with_wider_set(self):
        assert minorization_epsilon(MODEL, 4.0, 9.0)[0] < minorization_epsilon(MODEL, 5.0, 8.0)[0]

    def test_bad_interval(self):
        with pytest.raises(DomainError):
            minorization_epsilon(MODEL, 5.0, 5.0)


class TestLambdaScan:
    def test_short_grid_records_skips(self):
        scan = scan_lambda(MODEL, [0.01, 0.5, 0.61])
        assert [lam for lam, _ in scan.skipped] == [0.01]
        assert scan.best.lam == 0.61
        assert [lam for lam, _ in scan.curve()] == [0.5, 0.61]

    def test_all_skipped(self):
        with pytest.raises(SmallSetError):
            scan_lambda(MODEL, [0.01])

    def test_result_rate_consistent(self):
        res = small_set_result(MODEL, 0.61)
        rate = bounds.compute_rate_params(res.drift_params)
        assert rate.rho == res.rho
        assert res.K_reported == 3.05


@pytest.mark.slow
class TestReproduction:
    def test_optimum(self, report):
        r = report.result
        assert r.lam == 0.61
        assert r.C_lo == pytest.approx(4.74, abs=0.02)
        assert r.C_hi == pytest.approx(8.50, abs=0.02)
        assert r.K == pytest.approx(3.05, abs=0.02)
        assert r.epsilon == pytest.approx(0.287, abs=0.003)
        assert r.rho == pytest.approx(0.914, abs=0.001)

    def test_mixing_times(self, report):
        assert (report.tau_tv, report.tau_v) == (83, 111)

    def test_curve_is_minimized_at_optimum(self, report):
        curve = dict(report.scan.curve())
        assert min(curve, key=curve.get) == 0.61
        assert all(rho < 1 for rho in curve.values())

    def test_as_dict(self, report):
        d = report.as_dict()
        assert d["tau_tv"] == 83 and d["K_reported"] == 3.05 and d["start"] == 6.5
