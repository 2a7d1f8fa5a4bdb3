from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import validate
from volbreak._rng import replicate_rng
from volbreak.errors import RegimeTooShort, StageError
from volbreak.garch import fit_garch, simulate_garch
from volbreak.pipeline import (
    ComparisonRow,
    ComparisonTable,
    PipelineConfig,
    compare_models,
    detect,
    regime_volatility,
    run_three_stage,
    run_two_stage,
    standardized_residuals,
)
from volbreak.segmentation import Segmentation
from volbreak.simulation import PAPER_DESIGN, draw_regimes, gen_student_t_regimes


@pytest.fixture(scope="module")
def paper_series():
    return gen_student_t_regimes(PAPER_DESIGN).values


@pytest.fixture(scope="module")
def paper_table(paper_series):
    return compare_models(paper_series)


class TestTwoStage:
    def test_null_reduces_to_plain(self):
        x = np.random.default_rng(0).standard_normal(800)
        res = run_two_stage(x, "npcpm", "omega")
        assert res.segmentation.change_points == ()
        assert res.fit.log_lik == pytest.approx(fit_garch(x).log_lik, abs=1e-6)

    def test_paper_design(self, paper_series):
        res = run_two_stage(paper_series, "npcpm", "abo", "student_t")
        assert res.segmentation.n_regimes == 3
        assert [abs(c - t) <= 20 for c, t in zip(res.segmentation.change_points, (200, 400))] == [True, True]
        assert len(res.regime_vols) == 3 and res.regime_vols[1] > res.regime_vols[0]

    def test_icss_finds_more(self):
        icss = npcpm = 0
        for i in range(50):
            x = draw_regimes(PAPER_DESIGN, replicate_rng(3, i))
            icss += len(detect(x, "icss").change_points)
            npcpm += len(detect(x, "npcpm").change_points)
        assert npcpm < icss

    def test_short_regimes_are_merged(self, rng):
        x = rng.standard_normal(300)
        res = run_two_stage(x, "icss", "abo", segmentation=Segmentation((100, 110), 300))
        assert res.merged == [100] and res.segmentation.change_points == (110,)
        assert res.detected.change_points == (100, 110)

    def test_unknown_detector(self, rng):
        with pytest.raises(ValueError):
            run_two_stage(rng.standard_normal(100), "gicss", "omega")

    def test_to_dict_validates(self, paper_series):
        d = run_two_stage(paper_series, "icss", "omega").to_dict()
        validate(d, "fit")


class TestThreeStage:
    def test_standardisation(self):
        r = simulate_garch(3000, 0.05, 0.85, 0.1, np.random.default_rng(5))
        y = standardized_residuals(r, fit_garch(r))
        assert np.var(y) == pytest.approx(1.0, rel=0.1)

    def test_garch_null(self):
        empty = 0
        for i in range(20):
            r = simulate_garch(1500, 0.05, 0.85, 0.1, replicate_rng(6, i))
            empty += run_three_stage(r, "gnpcpm", "omega").segmentation.change_points == ()
        assert empty >= 16

    def test_omega_jump_fewer_points(self):
        found = 0
        fewer = 0
        for i in range(6):
            n = 3000
            omega = np.where(np.arange(n) < n // 2, 0.02, 0.2)
            r = simulate_garch(n, omega, 0.8, 0.1, replicate_rng(7, i))
            three = run_three_stage(r, "gnpcpm", "omega")
            two = run_two_stage(r, "npcpm", "omega", segmentation=None)
            found += len(three.detected.change_points) >= 1
            fewer += len(three.detected.change_points) <= len(two.detected.change_points)
        assert found >= 4 and fewer >= 5

    def test_no_change_equals_plain(self, rng):
        x = rng.standard_normal(500)
        stage1 = fit_garch(x)
        res = run_three_stage(x, "gicss", "abo", segmentation=Segmentation((), 500), stage1=stage1)
        assert res.fit.log_lik == pytest.approx(stage1.log_lik, abs=1e-6)
        assert res.to_dict()["stage1"]["model"] == "garch"

    def test_stage_errors_are_wrapped(self):
        with pytest.raises(StageError) as exc:
            run_three_stage(np.ones(10), "gicss", "omega")
        assert exc.value.stage == "stage1"


class TestRegimeVolatility:
    def test_empty(self, rng):
        x = rng.standard_normal(100)
        assert regime_volatility(x, Segmentation((), 100)) == [pytest.approx(np.std(x, ddof=1))]

    def test_two_scales(self, rng):
        x = np.concatenate([rng.standard_normal(500), 3 * rng.standard_normal(500)])
        lo, hi = regime_volatility(x, Segmentation((500,), 1000))
        assert lo == pytest.approx(1, rel=0.1) and hi == pytest.approx(3, rel=0.1)

    def test_singleton_regime(self):
        with pytest.raises(RegimeTooShort):
            regime_volatility(np.arange(10.0), Segmentation((9,), 10))


class TestCompare:
    def test_grid(self, paper_table):
        assert len(paper_table.rows) == 18
        assert [r.model for r in paper_table.rows[:2]] == ["plain", "plain"]
        assert len({r.label for r in paper_table.rows}) == 18
        validate(paper_table.to_dict(), "compare")

    def test_best_rows(self, paper_table):
        ok = [r for r in paper_table.rows if r.ok]
        assert paper_table.rows[paper_table.best_aic].aic == min(r.aic for r in ok)
        assert paper_table.rows[paper_table.best_bic].bic == min(r.bic for r in ok)

    def test_identities(self, paper_table):
        n = paper_table.n
        for row in paper_table.rows:
            assert row.aic == 2 * row.k - 2 * row.log_lik
            assert row.bic == row.k * math.log(n) - 2 * row.log_lik
            assert row.aic - row.bic == pytest.approx(row.k * (2 - math.log(n)), rel=1e-9)

    def test_student_t_beats_gaussian(self, paper_table):
        rows = {(r.model, r.detector, r.distribution): r for r in paper_table.rows}
        wins = [
            rows[(m, d, "student_t")].aic < rows[(m, d, "gaussian")].aic
            for (m, d, dist) in rows
            if dist == "gaussian"
        ]
        assert sum(wins) > len(wins) / 2

    def test_text(self, paper_table):
        text = paper_table.to_text()
        lines = text.splitlines()
        assert len(lines) == 18 + 3
        assert sum("*" in line[-3:] for line in lines[2:-1]) == 1
        assert lines[-1].startswith("* best AIC")

    def test_null_prefers_plain_by_bic(self):
        plain_best = 0
        for i in range(3):
            x = replicate_rng(8, i).standard_normal(600)
            table = compare_models(x, detectors=("icss", "npcpm"))
            plain_best += table.rows[table.best_bic].model == "plain"
        assert plain_best >= 2

    def test_failed_rows_keep_place(self):
        table = ComparisonTable(
            [
                ComparisonRow("a", "plain", "none", "gaussian", error="boom"),
                ComparisonRow("b", "plain", "none", "student_t", 1.0, 2.0, 3.0, 2, 1, True),
            ],
            10,
        )
        assert table.best_aic == 1 and table.best_bic == 1
        assert "failed: boom" in table.to_text()

    def test_ties_go_to_first(self):
        rows = [ComparisonRow(str(i), "plain", "none", "gaussian", 0.0, 1.0, 1.0, 1, 1, True) for i in range(3)]
        table = ComparisonTable(rows, 5)
        assert table.best_aic == 0 and table.best_bic == 0

    def test_config_threads_through(self, paper_series):
        strict = PipelineConfig(min_fit_length=250)
        res = run_two_stage(paper_series, "npcpm", "omega", config=strict)
        assert res.segmentation.change_points == () or min(res.segmentation.lengths()) >= 250
