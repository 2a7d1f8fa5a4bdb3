from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from volbreak.errors import (
    BadRow,
    ConstantSeries,
    DegenerateStatistic,
    EmptySeries,
    MalformedHeader,
    SeriesTooShort,
)
from volbreak.series import (
    PriceSeries,
    ReturnSeries,
    ljung_box,
    log_returns,
    parse_price_csv,
    summary_stats,
)


class TestParse:
    def test_two_rows(self):
        p = parse_price_csv("date,close\n2020-01-01,100\n2020-01-02,110")
        np.testing.assert_array_equal(p.prices, [100.0, 110.0])
        assert p.labels == ("2020-01-01", "2020-01-02")

    def test_non_positive_price(self):
        with pytest.raises(BadRow) as exc:
            parse_price_csv("date,close\n2020-01-01,-5")
        assert exc.value.line == 2
        assert "non-positive" in exc.value.reason

    def test_single_row_is_empty(self):
        with pytest.raises(EmptySeries):
            parse_price_csv("date,close\n2020-01-01,100")

    @pytest.mark.parametrize(
        "text",
        ["", "date,price\n2020-01-01,1\n", "\n"],
    )
    def test_bad_header(self, text):
        with pytest.raises(MalformedHeader):
            parse_price_csv(text)

    @pytest.mark.parametrize(
        "body, line",
        [
            ("2020-01-01,100\n2020-01-02,abc\n", 3),
            ("2020-01-01,100\n2020-01-02,0\n", 3),
            ("2020-01-02,100\n2020-01-01,101\n", 3),
            ("2020-01-01,100\n2020-01-01,101\n", 3),
            ("2020-01-01,100,7\n", 2),
            ("2020-01-01,nan\n", 2),
            (",100\n2020-01-02,101\n", 2),
        ],
    )
    def test_bad_rows(self, body, line):
        with pytest.raises(BadRow) as exc:
            parse_price_csv("date,close\n" + body)
        assert exc.value.line == line

    def test_case_insensitive_extra_columns_and_stream(self):
        text = "Open,DATE,Close\n1,2020-01-01,10\n2,2020-01-02,20\n\n"
        p = parse_price_csv(io.StringIO(text))
        np.testing.assert_array_equal(p.prices, [10.0, 20.0])

    def test_no_date_column(self):
        p = parse_price_csv("close\n1\n2\n3\n")
        assert p.labels is None and len(p) == 3

    def test_price_series_validates(self):
        with pytest.raises(ValueError):
            PriceSeries(np.array([1.0, -1.0]))
        with pytest.raises(ValueError):
            PriceSeries(np.array([1.0, 2.0]), ("b", "a"))


class TestLogReturns:
    def test_unit_log(self):
        r = log_returns(PriceSeries(np.array([1.0, math.e])))
        assert r.values[0] == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("c", [0.01, 1.0, 3.7, 1e6])
    def test_constant_price(self, c):
        r = log_returns(PriceSeries(np.array([c, c, c])))
        np.testing.assert_array_equal(r.values, [0.0, 0.0])

    def test_ten_percent(self):
        r = log_returns(parse_price_csv("date,close\n2020-01-01,100\n2020-01-02,110"))
        assert r.values[0] == pytest.approx(0.0953102, abs=1e-7)
        assert r.labels == ("2020-01-02",)

    @given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=40), st.sampled_from([0.5, 2.0, 4.0, 0.25]))
    @settings(max_examples=60, deadline=None)
    def test_power_of_two_price_scaling_is_exact(self, prices, c):
        a = log_returns(PriceSeries(np.array(prices)))
        b = log_returns(PriceSeries(c * np.array(prices)))
        np.testing.assert_allclose(a.values, b.values, atol=1e-12)

    def test_return_series_array_protocol(self):
        r = ReturnSeries(np.array([0.1, -0.2]), ("a", "b"))
        assert np.asarray(r).sum() == pytest.approx(-0.1)
        assert r.label(1) == "b" and len(r) == 2
        with pytest.raises(ValueError):
            ReturnSeries(np.array([np.inf]))


class TestSummaryStats:
    def test_constant_series_is_degenerate(self):
        with pytest.raises(DegenerateStatistic) as exc:
            summary_stats(np.full(50, 0.3))
        assert exc.value.mean == pytest.approx(0.3)
        assert exc.value.std_dev == 0.0

    def test_alternating_signs(self):
        s = summary_stats(np.tile([-1.0, 1.0], 50))
        assert s.mean == 0.0
        assert abs(s.skewness) < 1e-12
        assert s.ljung_box_sq_p == 1.0
        assert 0 <= s.ljung_box_p <= 1

    def test_gaussian_kurtosis(self):
        x = np.random.default_rng(3).standard_normal(100_000)
        s = summary_stats(x)
        assert abs(s.excess_kurtosis) < 0.1
        assert s.std_dev == pytest.approx(np.std(x, ddof=1))

    def test_matches_scipy(self, rng):
        x = rng.standard_t(4, 500)
        s = summary_stats(x)
        assert s.skewness == pytest.approx(stats.skew(x))
        assert s.excess_kurtosis == pytest.approx(stats.kurtosis(x))
        assert set(s.to_dict()) == {
            "mean", "std_dev", "skewness", "excess_kurtosis", "ljung_box_p", "ljung_box_sq_p",
        }

    def test_too_short(self):
        with pytest.raises(SeriesTooShort):
            summary_stats(np.arange(20.0), lags=20)

    @given(st.lists(st.integers(-10_000, 10_000).map(lambda k: k / 997.0), min_size=3, max_size=30))
    @settings(max_examples=60, deadline=None)
    def test_symmetric_sample_has_zero_skew(self, half):
        x = np.concatenate([half, -np.asarray(half)])
        if np.all(x == x[0]):
            return
        s = summary_stats(x, lags=2)
        assert abs(s.skewness) < 1e-12 * max(1.0, abs(s.excess_kurtosis) + 3)


class TestLjungBox:
    def test_oracle(self, rng):
        # independent formulation: autocorrelations via np.correlate
        x = rng.standard_normal(300)
        xc = x - x.mean()
        full = np.correlate(xc, xc, mode="full")[len(x) - 1 :] / np.dot(xc, xc)
        n = len(x)
        q = n * (n + 2) * sum(full[k] ** 2 / (n - k) for k in range(1, 11))
        got_q, got_p = ljung_box(x, 10)
        assert got_q == pytest.approx(q, rel=1e-12)
        assert got_p == pytest.approx(stats.chi2.sf(q, 10), rel=1e-12)

    def test_near_unit_autocorrelation(self, rng):
        x = np.repeat(rng.standard_normal(50), 40) + 1e-9 * rng.standard_normal(2000)
        assert ljung_box(x, 1)[1] < 1e-10

    def test_constant_raises(self):
        with pytest.raises(ConstantSeries):
            ljung_box(np.ones(30), 5)

    def test_zero_autocorrelation(self):
        # every lag-1 product contains a zero
        x = np.array([1.0, 0.0, -1.0, 0.0] * 8)
        q, p = ljung_box(x, 1)
        assert q == 0.0 and p == 1.0

    @pytest.mark.parametrize("c", [1e-4, 0.3, 7.0, 1e5])
    def test_scale_invariant(self, rng, c):
        x = rng.standard_normal(400)
        assert ljung_box(c * x)[0] == pytest.approx(ljung_box(x)[0], rel=1e-10)

    @pytest.mark.slow
    def test_null_rejection_rate(self):
        rejections = 0
        for seed in range(1000):
            x = np.random.default_rng(seed).standard_normal(10_000)
            rejections += ljung_box(x, 20)[1] < 0.05
        assert abs(rejections / 1000 - 0.05) <= 0.02
