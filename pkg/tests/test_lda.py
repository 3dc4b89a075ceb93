"""Compound Poisson engine: merging, simulation, SLA and Monte Carlo VaR."""

import math

import numpy as np
import pytest
from scipy import stats

from opcap.distributions import Gamma, Lognormal, Mixture, Pareto
from opcap.lda import (
    CompoundPoissonModel,
    annual_loss_mean,
    empirical_var,
    long_term_lc,
    lognormal_long_term_lc,
    mc_var,
    merge,
    models_from_spec,
    simulate,
    simulate_totals,
    sla_var,
)


def small_bank():
    return CompoundPoissonModel(((990.0, Gamma(1.0, 1e4)), (10.0, Lognormal(10.0, 2.5))))


class TestModel:
    def test_rates_validated(self):
        with pytest.raises(ValueError):
            CompoundPoissonModel.single(0.0, Gamma(1, 1))
        with pytest.raises(ValueError):
            CompoundPoissonModel.single(math.inf, Gamma(1, 1))
        with pytest.raises(ValueError):
            CompoundPoissonModel(())

    def test_total_rate_and_scaling(self):
        m = small_bank()
        assert m.total_rate == 1000.0
        assert m.scaled(0.5).total_rate == 500.0

    def test_from_spec(self):
        m = models_from_spec([{"rate": 5, "family": "lognormal", "params": [1, 2]}])
        assert m.components[0][1] == Lognormal(1, 2)


class TestMerge:
    def test_weights(self):
        f1, f2 = Gamma(1, 1), Lognormal(0, 1)
        lam, sev = merge(CompoundPoissonModel(((2.0, f1), (3.0, f2))))
        assert lam == 5.0
        assert isinstance(sev, Mixture)
        assert sev.weights == pytest.approx((0.4, 0.6))

    def test_single_component_unchanged(self):
        f = Lognormal(3, 1)
        assert merge(CompoundPoissonModel.single(7.0, f)) == (7.0, f)

    def test_identical_components_collapse(self):
        f = Gamma(2, 3)
        lam, sev = merge(CompoundPoissonModel(((5.0, f), (5.0, f))))
        assert lam == 10.0
        assert sev == f

    def test_merge_equivalence_ks(self):
        """Two-component model vs its merged single-component form, 1e5 years each."""
        model = CompoundPoissonModel(((3.0, Gamma(2.0, 1e5)), (2.0, Lognormal(11.0, 1.5))))
        lam, sev = merge(model)
        merged = CompoundPoissonModel.single(lam, sev)
        a = simulate(model, 100_000, 1).totals()
        b = simulate(merged, 100_000, 2).totals()
        assert stats.ks_2samp(a, b).pvalue > 0.001


class TestSimulate:
    def test_near_zero_rate(self):
        s = simulate(CompoundPoissonModel.single(1e-9, Gamma(1, 1)), 10, 3)
        assert s.n_years == 10
        assert s.counts.sum() == 0
        assert np.all(s.totals() == 0)

    def test_small_bank_mean(self):
        """1000 years of the small test-case bank, mean near 15 Euro million."""
        totals = simulate(small_bank(), 1000, 4).totals()
        se = totals.std(ddof=1) / math.sqrt(len(totals))
        assert abs(totals.mean() - 15.0) <= 3 * se + 0.5

    def test_deterministic_and_thread_independent(self):
        m = small_bank()
        a = simulate(m, 20_000, 99, threads=1)
        b = simulate(m, 20_000, 99, threads=3)
        c = simulate(m, 20_000, 99)
        assert np.array_equal(a.losses, b.losses) and np.array_equal(a.counts, b.counts)
        assert np.array_equal(a.losses, c.losses)

    def test_year_grouping(self):
        m = CompoundPoissonModel(((4.0, Gamma(1, 1)), (3.0, Lognormal(0, 1))))
        s = simulate(m, 50, 5, unit=1.0)
        assert np.allclose([s.year(i).sum() for i in range(50)], s.totals())
        assert np.allclose(s.exceedance_totals(0.0), s.totals())
        nz = s.counts > 0
        assert np.allclose(s.maxima()[nz], [s.year(i).max() for i in np.flatnonzero(nz)])

    def test_gamma_aggregate_shortcut_matches_individual_draws(self):
        m = CompoundPoissonModel(((50.0, Gamma(1.5, 2e4)), (2.0, Lognormal(10, 1))))
        a = simulate_totals(m, 50_000, 6)
        b = simulate(m, 50_000, 7).totals()
        assert stats.ks_2samp(a, b).pvalue > 0.001

    def test_bad_years(self):
        with pytest.raises(ValueError):
            simulate(small_bank(), 0, 1)


class TestMeans:
    def test_bank_means(self):
        tc1 = [15, 136, 769]
        for (beta, mu), expected in zip(((1e4, 10), (1e5, 12), (5e5, 14)), tc1):
            m = CompoundPoissonModel(((990.0, Gamma(1.0, beta)), (10.0, Lognormal(mu, 2.5))))
            assert round(annual_loss_mean(m)) == expected

    def test_degenerate_severity(self):
        m = CompoundPoissonModel.single(10.0, Lognormal(0.0, 1e-8))
        assert annual_loss_mean(m, unit=1.0) == pytest.approx(10.0, rel=1e-12)

    def test_infinite_mean(self):
        from opcap.distributions import InfiniteMeanError

        with pytest.raises(InfiniteMeanError):
            annual_loss_mean(CompoundPoissonModel.single(1.0, Pareto(0.9, 1.0)))


class TestSla:
    def test_split_example_values(self):
        assert sla_var(CompoundPoissonModel.poisson_lognormal(10, 14, 2)) == pytest.approx(2.13e3, rel=0.005)
        assert sla_var(CompoundPoissonModel.poisson_lognormal(5, 14, 2)) == pytest.approx(1.47e3, rel=0.005)

    def test_closed_form_equals_corrected(self):
        m = CompoundPoissonModel.poisson_lognormal(10, 12, 2.5)
        assert sla_var(m, variant="lognormal_closed_form") == pytest.approx(sla_var(m), rel=1e-12)

    @pytest.mark.parametrize(
        "model",
        [
            CompoundPoissonModel.poisson_lognormal(10, 14, 2),
            CompoundPoissonModel.single(100, Gamma(2, 5e4)),
            CompoundPoissonModel(((990.0, Gamma(1.0, 1e5)), (10.0, Lognormal(12, 2.8)))),
        ],
    )
    def test_corrected_minus_opcar_is_mean(self, model):
        _, sev = merge(model)
        diff = sla_var(model, variant="corrected", unit=1.0) - sla_var(model, variant="opcar", unit=1.0)
        assert diff == pytest.approx(sev.mean(), rel=1e-9)

    def test_closed_form_requires_lognormal(self):
        with pytest.raises(TypeError):
            sla_var(CompoundPoissonModel.single(10, Gamma(1, 1)), variant="lognormal_closed_form")

    def test_domain(self):
        with pytest.raises(ValueError):
            sla_var(CompoundPoissonModel.single(1e-4, Gamma(1, 1)))
        with pytest.raises(ValueError):
            sla_var(CompoundPoissonModel.single(1, Gamma(1, 1)), variant="second_order")


class TestMonteCarloVar:
    def test_degenerate_severity_gives_poisson_quantile(self):
        m = CompoundPoissonModel.single(1000.0, Lognormal(0.0, 1e-8))
        res = mc_var(m, 0.999, 1_000_000, 8, unit=1.0)
        assert abs(res.value - stats.poisson.ppf(0.999, 1000)) <= 2.0

    def test_lambda10_sigma1_row(self):
        """Poisson(10)-LN(3, 1) with 1e7 years: printed 1.27e3 with 0.15% error."""
        res = mc_var(CompoundPoissonModel.poisson_lognormal(10, 3, 1), 0.999, 10_000_000, 2016, unit=1.0)
        assert abs(res.value - 1.27e3) <= 3 * res.stderr + 5.0
        assert res.stderr / res.value < 0.003

    def test_too_few_years(self):
        with pytest.raises(ValueError):
            mc_var(small_bank(), 0.999, 999, 1)

    def test_order_statistic(self):
        z = np.arange(1, 1001, dtype=float)
        assert empirical_var(z[::-1].copy(), 0.999).value == 999.0
        assert empirical_var(z, 0.5).value == 500.0

    def test_stderr_brackets_the_spread_of_replicates(self):
        m = CompoundPoissonModel.single(5.0, Gamma(1.0, 1.0))
        values = [mc_var(m, 0.99, 20_000, s, unit=1.0) for s in range(30)]
        spread = np.std([v.value for v in values], ddof=1)
        mean_se = np.mean([v.stderr for v in values])
        assert 0.5 < spread / mean_se < 2.0


class TestLongTermLc:
    def test_all_below_threshold(self):
        m = CompoundPoissonModel.single(100.0, Gamma(1.0, 0.001))
        assert long_term_lc(m, unit=1.0) == pytest.approx(0.7, rel=1e-6)

    def test_lognormal_closed_form_oracle(self):
        lam, mu, sigma = 10.0, 12.0, 2.5
        m_ = mu - math.log(1e6)

        def phi(x):
            return 0.5 * math.erfc(-x / math.sqrt(2))

        expected = lam * math.exp(m_ + sigma**2 / 2) * (
            7 + 7 * phi((sigma**2 + m_ - math.log(10)) / sigma) + 5 * phi((sigma**2 + m_ - math.log(100)) / sigma)
        )
        m = CompoundPoissonModel.poisson_lognormal(lam, mu, sigma)
        assert long_term_lc(m) == pytest.approx(expected, rel=1e-12)
        assert lognormal_long_term_lc(lam, mu, sigma) == pytest.approx(expected, rel=1e-12)

    def test_linear_and_additive(self):
        a = CompoundPoissonModel.single(3.0, Lognormal(13, 2))
        b = CompoundPoissonModel.single(7.0, Gamma(1.0, 2e6))
        assert long_term_lc(a.scaled(4.0)) == pytest.approx(4 * long_term_lc(a), rel=1e-12)
        assert long_term_lc(a + b) == pytest.approx(long_term_lc(a) + long_term_lc(b), rel=1e-12)

    def test_matches_empirical_loss_component(self):
        from opcap.studies import yearly_lc_contributions

        m = CompoundPoissonModel.poisson_lognormal(10, 12, 1.5)
        contrib = yearly_lc_contributions(simulate(m, 200_000, 12))
        se = contrib.std(ddof=1) / math.sqrt(len(contrib))
        assert abs(contrib.mean() - long_term_lc(m)) <= 4 * se
