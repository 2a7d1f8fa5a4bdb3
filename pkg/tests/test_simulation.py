from __future__ import annotations

import json
import math

import numpy as np
import pytest

from conftest import validate
from volbreak._rng import replicate_rng, student_t
from volbreak.errors import InvalidSpec
from volbreak.simulation import (
    PAPER_DESIGN,
    RegimeSpec,
    draw_regimes,
    gen_student_t_regimes,
    run_experiment,
)


class TestRegimeSpec:
    def test_paper_design(self):
        assert PAPER_DESIGN.length == 600
        assert PAPER_DESIGN.true_change_points == (200, 400)
        assert PAPER_DESIGN.scales() == pytest.approx([1.0, 2.0, 1.0])

    def test_identity_scale(self):
        assert RegimeSpec(((100, 5 / 3),), nu=5).scales() == pytest.approx([1.0], abs=1e-15)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"segments": ()},
            {"segments": ((0, 1.0),)},
            {"segments": ((10, -1.0),)},
            {"segments": ((10, math.nan),)},
            {"segments": ((10, 1.0),), "nu": 2.0},
            {"segments": ((10, 1.0),), "seed": -1},
            {"segments": ((10, 1.0),), "innovations": "cauchy"},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidSpec):
            RegimeSpec(**kwargs)

    def test_dict_round_trip(self):
        spec = RegimeSpec(((50, 2.0), (70, 1.0)), nu=4, seed=9, innovations="gaussian")
        assert RegimeSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec

    @pytest.mark.parametrize("raw", [{}, {"segments": [{"length": 5}]}, {"segments": "x"}])
    def test_from_dict_malformed(self, raw):
        with pytest.raises(InvalidSpec):
            RegimeSpec.from_dict(raw)


class TestGenerate:
    def test_deterministic(self):
        a = gen_student_t_regimes(PAPER_DESIGN).values
        b = gen_student_t_regimes(PAPER_DESIGN).values
        assert a.tobytes() == b.tobytes()

    def test_segment_variances(self):
        # t(3) sample variances are noisy: check the median over realisations
        ratios = []
        for i in range(200):
            x = draw_regimes(PAPER_DESIGN, replicate_rng(1, i))
            ratios.append([np.var(x[s : s + 200]) / v for s, v in zip((0, 200, 400), (3, 12, 3))])
        med = np.median(ratios, axis=0)
        assert np.all(np.abs(med - 1) < 0.25)

    def test_ratio_construction(self):
        g1, g2 = replicate_rng(3, 0), replicate_rng(3, 0)
        z = g2.standard_normal(5)
        v = g2.chisquare(3.0, 5)
        np.testing.assert_array_equal(student_t(g1, 3.0, 5), z / np.sqrt(v / 3.0))

    def test_replicate_streams(self):
        ss = np.random.SeedSequence(5).spawn(3)[2]
        a = np.random.default_rng(ss).standard_normal(4)
        np.testing.assert_array_equal(replicate_rng(5, 2).standard_normal(4), a)
        with pytest.raises(ValueError):
            replicate_rng(-1, 0)


class TestExperiment:
    @staticmethod
    @pytest.fixture(scope="class")
    def report():
        return run_experiment(PAPER_DESIGN, 200, master_seed=7)

    def test_counts(self, report):
        icss, npcpm = report.detectors["icss"], report.detectors["npcpm"]
        assert npcpm.mean_cp_count < icss.mean_cp_count
        assert npcpm.mean_regime_count == pytest.approx(npcpm.mean_cp_count + 1)
        assert sum(npcpm.regime_count_distribution.values()) == 200
        assert sum(npcpm.cp_location_histogram.values()) == pytest.approx(200 * npcpm.mean_cp_count)

    def test_location_concentration(self, report):
        top = report.detectors["npcpm"].top_locations(2)
        nearest = {min((200, 400), key=lambda c: abs(c - t)) for t in top}
        assert nearest == {200, 400}
        assert all(min(abs(t - 200), abs(t - 400)) <= 20 for t in top)

    def test_deterministic_json(self, report):
        again = run_experiment(PAPER_DESIGN, 200, master_seed=7)
        assert again.to_json() == report.to_json()
        validate(json.loads(report.to_json()), "experiment")

    def test_histogram_csv(self, report):
        lines = report.histogram_csv().splitlines()
        assert lines[0] == "detector,index,count"
        assert {ln.split(",")[0] for ln in lines[1:]} == {"icss", "npcpm"}

    def test_null_rate(self):
        spec = RegimeSpec(((600, 1.0),), innovations="gaussian")
        rate = run_experiment(spec, 1000, ["npcpm"], master_seed=3).detectors["npcpm"].any_change_rate
        assert abs(rate - 0.05) <= 0.02

    def test_invalid(self):
        with pytest.raises(InvalidSpec):
            run_experiment(PAPER_DESIGN, 0)
        with pytest.raises(InvalidSpec):
            run_experiment(PAPER_DESIGN, 5, ["cusum"])

    def test_failures_counted(self, monkeypatch):
        from volbreak import simulation
        from volbreak.errors import SeriesTooShort

        real = simulation.detect

        def flaky(x, name, config):
            if name == "icss":
                raise SeriesTooShort("forced")
            return real(x, name, config)

        monkeypatch.setattr(simulation, "detect", flaky)
        report = run_experiment(PAPER_DESIGN, 3, ["icss", "npcpm"])
        icss = report.detectors["icss"]
        assert icss.failures == 3 and icss.mean_cp_count is None
        assert report.detectors["npcpm"].failures == 0
        validate(report.to_dict(), "experiment")
