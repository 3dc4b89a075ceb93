import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opcap.sma import (
    GrossIncomeSeries,
    LossHistory,
    SmaInput,
    bic,
    bucket,
    k_bia,
    k_sma,
    k_tsa,
    loss_component,
)


class TestBuckets:
    def test_boundaries(self):
        assert bucket(1000) == 1
        assert bucket(1000.01) == 2
        assert bucket(50000) == 5
        assert bucket(0) == 1

    def test_bic_values(self):
        assert bic(2000) == 260.0
        assert bic(30000) == 6340.0
        assert bic(0) == 0.0

    @pytest.mark.parametrize("b,value", [(1000.0, 110.0), (3000.0, 410.0), (10000.0, 1740.0), (30000.0, 6340.0)])
    def test_bic_continuity(self, b, value):
        assert bic(b) == value
        right = np.nextafter(b, np.inf)
        assert bucket(right) == bucket(b) + 1
        assert abs(bic(right) - value) < 1e-9

    def test_negative_bi_rejected(self):
        with pytest.raises(ValueError):
            bic(-1)


class TestKsma:
    def test_bucket1_ignores_lc(self):
        assert k_sma(500, 0) == pytest.approx(55.0)
        assert k_sma(500, 1e6) == pytest.approx(55.0)

    def test_lc_equal_bic(self):
        assert k_sma(2000, 260) == 260.0

    def test_zero_lc(self):
        assert k_sma(2000, 0) == pytest.approx(110 + 150 * math.log(math.e - 1), rel=1e-14)
        assert k_sma(2000, 0) == pytest.approx(191.20, abs=0.005)

    def test_continuity_at_1000(self):
        for lc in (0.0, 10.0, 1e4):
            assert k_sma(np.nextafter(1000.0, np.inf), lc) == pytest.approx(110.0, abs=1e-9)

    @pytest.mark.parametrize("bi", [1500.0, 5000.0, 20000.0, 75000.0])
    def test_identity_at_lc_equal_bic(self, bi):
        assert k_sma(bi, bic(bi)) == bic(bi)

    def test_monotone_random_pairs(self):
        rng = np.random.default_rng(20160701)
        bi = rng.uniform(1000.0, 1e5, size=(10_000, 2))
        lc = rng.uniform(0.0, 2e4, size=10_000)
        for (b1, b2), l in zip(bi, lc):
            lo, hi = min(b1, b2), max(b1, b2)
            if lo < hi:
                assert k_sma(lo, l) < k_sma(hi, l)
        lcs = rng.uniform(0.0, 2e4, size=(10_000, 2))
        for b, (l1, l2) in zip(bi[:, 0], lcs):
            assert k_sma(b, min(l1, l2)) <= k_sma(b, max(l1, l2))

    @settings(max_examples=300, deadline=None)
    @given(st.floats(1000.0, 1e6, exclude_min=True), st.floats(0.0, 1e5), st.floats(1e-6, 1e4))
    def test_monotone_in_bi_property(self, bi, lc, step):
        assert k_sma(bi + step, lc) > k_sma(bi, lc)


class TestLossComponent:
    @pytest.mark.parametrize("loss,expected", [(5.0, 35.0), (50.0, 700.0), (200.0, 3800.0)])
    def test_single_loss(self, loss, expected):
        assert loss_component([[loss]]) == expected

    def test_strict_thresholds(self):
        assert loss_component([[10.0]]) == 70.0
        assert loss_component([[100.0]]) == 1400.0

    def test_averages_over_years(self):
        assert loss_component([[5.0], [15.0, 1.0]]) == pytest.approx((7 * 21 + 7 * 15) / 2)

    def test_empty_history(self):
        with pytest.raises(ValueError):
            LossHistory(())

    def test_nonpositive_loss(self):
        with pytest.raises(ValueError):
            LossHistory(([1.0, 0.0],))

    def test_adding_a_loss_never_decreases(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            years = [list(rng.lognormal(1, 2, rng.integers(0, 6))) for _ in range(10)]
            base = loss_component(years)
            i = rng.integers(10)
            years[i].append(float(rng.lognormal(1, 2)))
            assert loss_component(years) >= base

    def test_scaling_small_losses_touches_first_term_only(self):
        years = [[1.0, 2.0, 50.0], [3.0, 200.0]]
        scaled = [[0.5, 1.0, 50.0], [1.5, 200.0]]
        assert loss_component(years) - loss_component(scaled) == pytest.approx(7 * 3.0 / 2)

    def test_sma_input(self):
        inp = SmaInput.from_history(2000, [[5.0]])
        assert inp.lc == 35.0
        with pytest.raises(ValueError):
            SmaInput(-1, 0)


class TestLegacy:
    def test_bia(self):
        assert k_bia([100, 100, 100]) == pytest.approx(15.0)
        assert k_bia([100, -50, 100]) == pytest.approx(15.0)
        with pytest.raises(ValueError):
            k_bia([-1, -1, -1])

    def test_tsa(self):
        gi = GrossIncomeSeries.from_lines(np.full((8, 3), 100.0), betas=(0.12,) * 8)
        assert k_tsa(gi) == pytest.approx(96.0)

    def test_tsa_negative_year_clamped(self):
        lines = np.full((8, 3), 100.0)
        lines[:, 1] = -100.0
        gi = GrossIncomeSeries.from_lines(lines, betas=(0.12,) * 8)
        assert k_tsa(gi) == pytest.approx(2 * 96.0 / 3)

    def test_default_betas(self):
        gi = GrossIncomeSeries.from_lines(np.full((8, 3), 10.0))
        assert k_tsa(gi) == pytest.approx(10.0 * sum(gi.betas))

    def test_beta_range(self):
        with pytest.raises(ValueError):
            GrossIncomeSeries((1, 1, 1), np.ones((8, 3)), betas=(0.2,) * 8)

    def test_tsa_needs_lines(self):
        with pytest.raises(ValueError):
            k_tsa(GrossIncomeSeries((1, 2, 3)))

    def test_matrix_shape(self):
        with pytest.raises(ValueError):
            GrossIncomeSeries((1, 2, 3), np.ones((7, 3)))
