import json
import math

import numpy as np
import pytest

from opcap.calibration import (
    GRID_1,
    GRID_2,
    CalibrationResult,
    GridEvaluator,
    GridSpec,
    QisBankStatistics,
    SampleAggregates,
    aggregate_statistics,
    condition_residuals_lognormal,
    estimate_lambda,
    grid_search_calibrate,
    maximum_condition,
    model_average_var,
    opcar_filters,
    pareto_pick,
    population_aggregates,
    simulate_qis_statistics,
    weak_pareto_mask,
)
from opcap.distributions import Lognormal
from opcap.lda import CompoundPoissonModel, sla_var

TRUTH = Lognormal(10.0, 2.0)


def truth_aggregates(u=20_000.0, ut=10_000.0, d=TRUTH):
    return population_aggregates(1000.0, d, u, ut)


class TestStatistics:
    def test_aggregate_arithmetic(self):
        s = QisBankStatistics(n_tilde=(3, 6, 4), n=(2, 4, 0), S=(4e4 + 10, 8e4 + 30, 0.0), M=(2e4, 6e4, 3e4))
        a = aggregate_statistics(s)
        assert a.lambda_u == pytest.approx(2.0)
        assert a.lambda_u_tilde == pytest.approx(13 / 3)
        assert a.mu_u == pytest.approx((12e4 + 40) / 6)
        assert a.mu_m1 == 6e4
        assert a.mu_m2 == pytest.approx(11e4 / 3)
        assert a.n_tilde_total == 13

    def test_small_example(self):
        s = QisBankStatistics(n_tilde=(2, 4), n=(2, 4), S=(10.0, 30.0), M=(1.0, 5.0), u=1.0, u_tilde=0.5)
        a = aggregate_statistics(s)
        assert a.lambda_u == 3.0
        assert a.mu_u == pytest.approx(20 / 3, rel=1e-12)
        s = QisBankStatistics(n_tilde=(1, 1, 1), n=(1, 1, 1), S=(1.0, 5.0, 3.0), M=(1.0, 5.0, 3.0), u=1.0, u_tilde=0.5)
        a = aggregate_statistics(s)
        assert (a.mu_m1, a.mu_m2) == (5.0, 3.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_tilde=(1,), n=(2,), S=(5e4,), M=(3e4,)),
            dict(n_tilde=(2,), n=(1,), S=(1.0,), M=(3e4,)),
            dict(n_tilde=(2, 3), n=(1,), S=(3e4,), M=(3e4,)),
            dict(n_tilde=(2,), n=(1,), S=(3e4,), M=(3e4,), u=1e4, u_tilde=2e4),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            QisBankStatistics(**kwargs)

    def test_no_exceedances(self):
        with pytest.raises(ValueError):
            aggregate_statistics(QisBankStatistics(n_tilde=(1,), n=(0,), S=(0.0,), M=(1.5e4,)))

    def test_csv_roundtrip(self, tmp_path):
        s = QisBankStatistics(n_tilde=(3, 6), n=(2, 4), S=(5e4, 9e4), M=(3e4, 4e4), years=(2011, 2012))
        p = tmp_path / "s.csv"
        p.write_text("year,n_tilde,n,S,M\n" + "".join(f"{r['year']},{r['n_tilde']},{r['n']},{r['S']},{r['M']}\n" for r in s.rows()))
        assert QisBankStatistics.from_csv(p) == s
        (tmp_path / "bad.csv").write_text("year,n\n1,2\n")
        with pytest.raises(ValueError):
            QisBankStatistics.from_csv(tmp_path / "bad.csv")


class TestConditions:
    def test_population_residuals_vanish(self):
        o1, o2 = condition_residuals_lognormal(10.0, 2.0, truth_aggregates())
        assert abs(o1) < 1e-12
        assert abs(o2) < 1e-8 * truth_aggregates().mu_u

    @pytest.mark.parametrize("objective", ["sum_of_squares", "pareto_optimal"])
    def test_truth_recovered_on_grid(self, objective):
        r = grid_search_calibrate(truth_aggregates(), objective=objective)
        assert r.params == (10.0, 2.0)
        assert r.lam == pytest.approx(1000.0, rel=1e-12)
        assert r.converged

    @pytest.mark.parametrize("variant", ["heavy", "medium"])
    def test_maximum_condition_zero_at_expected_rank(self, variant):
        n = 40
        ut = 1e4
        m = float(TRUTH.isf(TRUTH.sf(ut) / (n + 1)))
        agg = SampleAggregates(1.0, 1.0, 3e4, m, m, float(n), n)
        assert maximum_condition(TRUTH, agg, ut, variant) == pytest.approx(0.0, abs=1e-12)

    def test_maximum_condition_validation(self):
        agg = SampleAggregates(1.0, 1.0, 3e4, 5e3, 5e3, 1.0, 1)
        with pytest.raises(ValueError):
            maximum_condition(TRUTH, agg)
        with pytest.raises(ValueError):
            maximum_condition(TRUTH, truth_aggregates(), variant="light")

    def test_order_statistic_identity(self):
        """E[F(max of n draws)] = n / (n + 1), checked by simulation."""
        rng = np.random.default_rng(17)
        n, reps = 20, 100_000
        x = rng.lognormal(10.0, 2.0, size=(reps, n)).max(axis=1)
        f = TRUTH.cdf(x)
        se = f.std(ddof=1) / math.sqrt(reps)
        assert abs(f.mean() - n / (n + 1)) < 3 * se

    def test_max_condition_on_grid(self):
        stats = simulate_qis_statistics(CompoundPoissonModel.poisson_lognormal(1000, 10, 2), 5, 3)
        agg = aggregate_statistics(stats)
        r = GridEvaluator("lognormal", GRID_1).calibrate(agg, first_condition="maximum_medium")
        assert r.converged and r.first_condition == "maximum_medium"
        with pytest.raises(ValueError):
            GridEvaluator("lognormal", GRID_1).calibrate(agg, first_condition="median")


class TestPareto:
    def test_brute_force_non_dominance(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a1 = rng.integers(0, 8, 40).astype(float)
            a2 = rng.integers(0, 8, 40).astype(float)
            mask = weak_pareto_mask(a1, a2)
            for i in range(40):
                dominated = np.any((a1 < a1[i]) & (a2 < a2[i]))
                assert mask[i] == (not dominated)

    def test_nonfinite_excluded(self):
        m = weak_pareto_mask(np.array([0.0, np.inf, 1.0]), np.array([1.0, 0.0, np.nan]))
        assert m.tolist() == [True, False, False]

    def test_pick_is_on_front(self):
        rng = np.random.default_rng(6)
        o1, o2 = rng.normal(size=200), rng.normal(size=200) * 1e5
        p1, p2 = np.arange(200.0), np.zeros(200)
        agg = SampleAggregates(1.0, 2.0, 3e5, math.nan, math.nan, 2.0, 0)
        for tb in ("relative", "absolute"):
            i = pareto_pick(o1, o2, p1, p2, agg, tie_break=tb)
            assert weak_pareto_mask(np.abs(o1), np.abs(o2))[i]
        with pytest.raises(ValueError):
            pareto_pick(o1, o2, p1, p2, agg, tie_break="random")

    def test_scale_equivariance(self):
        """Amounts in millions with mu shifted by ln(1e6) give the same fit."""
        shift = math.log(1e6)
        stats = simulate_qis_statistics(CompoundPoissonModel.poisson_lognormal(1000, 10, 2), 5, 21)
        base = aggregate_statistics(stats)
        scaled = SampleAggregates(
            base.lambda_u, base.lambda_u_tilde, base.mu_u / 1e6, base.mu_m1 / 1e6, base.mu_m2 / 1e6,
            base.n_tilde_mean, base.n_tilde_total, base.u / 1e6, base.u_tilde / 1e6,
        )
        g1 = GridSpec((8.0, 12.0), (1.0, 3.0))
        g2 = GridSpec((8.0 - shift, 12.0 - shift), (1.0, 3.0))
        a = GridEvaluator("lognormal", g1, base.u, base.u_tilde).calibrate(base, "pareto_optimal")
        b = GridEvaluator("lognormal", g2, scaled.u, scaled.u_tilde).calibrate(scaled, "pareto_optimal")
        assert b.params[0] + shift == pytest.approx(a.params[0], abs=1e-8)
        assert b.params[1] == pytest.approx(a.params[1], abs=1e-12)
        assert b.lam == pytest.approx(a.lam, rel=1e-8)


class TestGrid:
    def test_sizes(self):
        assert GRID_1.size == 81 * 41
        assert GRID_2.size == 161 * 61
        a, _ = GRID_1.axes()
        assert 9.35 in a.tolist()

    def test_invalid(self):
        with pytest.raises(ValueError):
            GridSpec((2.0, 1.0), (1.0, 2.0))
        with pytest.raises(ValueError):
            GridSpec((1.0, 2.0), (1.0, 2.0), p1_step=0.0)

    def test_unknown_objective(self):
        with pytest.raises(ValueError):
            grid_search_calibrate(truth_aggregates(), objective="median")

    def test_result_json(self):
        r = grid_search_calibrate(truth_aggregates())
        d = json.loads(r.to_json())
        assert d["params"] == [10.0, 2.0]
        assert d["grid"]["p1_bounds"] == [8.0, 12.0]


class TestFrequencyAndFilters:
    def test_estimate_lambda(self):
        d = Lognormal(10.0, 2.0)
        assert estimate_lambda(d, 10.0) == pytest.approx(10.0 / d.sf(2e4), rel=1e-14)
        assert estimate_lambda(d, 10.0, u=math.exp(10.0)) == pytest.approx(20.0, rel=1e-12)
        with pytest.raises(ValueError):
            estimate_lambda(Lognormal(0.0, 0.1), 1.0)

    def _result(self, lam, converged=True):
        return CalibrationResult("lognormal", (10.0, 2.0), lam, 0.0, converged, GRID_1)

    def test_filters(self):
        ok = opcar_filters(self._result(1000.0), 50.0, 100.0)
        assert ok.passed and ok.proportion_above_u == pytest.approx(0.1)
        assert opcar_filters(self._result(1000.0), 50.0, 500.0).reasons == ("proportion",)
        assert opcar_filters(self._result(1000.0), 5.0, 100.0).reasons == ("frequency/assets",)
        assert opcar_filters(self._result(math.nan, False), 50.0, 100.0).reasons == ("convergence",)
        assert opcar_filters(self._result(1000.0), 50.0, 10.0).passed

    def test_model_average(self):
        a, b = self._result(1000.0), CalibrationResult("lognormal", (11.0, 2.0), 500.0, 0.0, True, GRID_1)
        expect = (sla_var(a.model(), 0.999, "opcar", unit=1.0) + sla_var(b.model(), 0.999, "opcar", unit=1.0)) / 2
        assert model_average_var([a, b]) == pytest.approx(expect, rel=1e-14)
        with pytest.raises(ValueError):
            model_average_var([])
