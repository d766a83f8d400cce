import numpy as np
import pytest

import dissolvegp as dg
from dissolvegp import DataError, StudyConfig


class TestGenerators:
    def test_logistic_noise_free_values(self):
        sc = dg.scenario("logistic-52.81", noise_variance=0.0)
        ds = dg.simulate(sc, "R", seed=0)
        expected = 100.0 / (1.0 + 75.0 * np.exp(-0.19 * 60.0))
        assert ds.values[:, -1] == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(99.9161, abs=5e-4)

    def test_higuchi_noise_free_values(self):
        sc = dg.scenario("higuchi-51.07", noise_variance=0.0)
        ds = dg.simulate(sc, "R", seed=0)
        assert ds.values[0, 0] == pytest.approx(np.sqrt(1100.0), rel=1e-12)

    def test_same_seed_identical(self):
        sc = dg.scenario("logistic-52.81")
        a = dg.simulate(sc, "T", seed=5)
        b = dg.simulate(sc, "T", seed=5)
        assert np.array_equal(a.values, b.values)

    def test_default_grid_and_units(self):
        sc = dg.scenario("logistic-100")
        ds = dg.simulate(sc, "R", seed=0)
        assert ds.n_units == 12
        assert np.allclose(ds.times, np.arange(10.0, 61.0, 10.0))

    def test_values_not_clipped(self):
        sc = dg.scenario("logistic-100", noise_variance=100.0, seed=0)
        ds = dg.simulate(sc, "R", seed=123)
        assert np.any(ds.values > 100.0)  # unbounded noise near the asymptote

    def test_unknown_scenario(self):
        with pytest.raises(DataError):
            dg.scenario("logistic-999")


class TestScenarioTruths:
    @pytest.mark.parametrize(
        "name,truth",
        [
            ("logistic-36.74", 36.74),
            ("logistic-48.19", 48.19),
            ("logistic-52.81", 52.81),
            ("logistic-76.10", 76.10),
            ("logistic-100", 100.0),
            ("higuchi-45", 45.0),
            ("higuchi-49.60", 49.60),
            ("higuchi-51.07", 51.07),
            ("higuchi-67.35", 67.35),
            ("higuchi-100", 100.0),
        ],
    )
    def test_preset_pairs_hit_nominal_integral_f2(self, name, truth):
        sc = dg.SCENARIOS[name]
        val = dg.f2_integral_truth(sc.curve("R"), sc.curve("T"), 10.0, 60.0)
        assert val == pytest.approx(truth, abs=0.015)


class TestBiasSweep:
    def test_first_pair_overestimates_below_ten_points(self):
        sc_r = dg.logistic_curve(70.91, 100.0, 0.403)
        sc_t = dg.logistic_curve(70.69, 99.98, 0.292)
        ps, vals = dg.bias_sweep(sc_r, sc_t, range(5, 11), 10, 60)
        truth = dg.f2_integral_truth(sc_r, sc_t, 10, 60)
        assert truth < 50.0
        assert np.all(vals > 50.0)

    def test_second_pair_underestimates_up_to_52_points(self):
        sc_r = dg.logistic_curve(60.55, 90.0, 0.228)
        sc_t = dg.logistic_curve(75.0, 100.0, 0.19)
        ps, vals = dg.bias_sweep(sc_r, sc_t, range(5, 53), 10, 60)
        truth = dg.f2_integral_truth(sc_r, sc_t, 10, 60)
        assert truth > 49.9
        assert np.all(vals < 50.0)

    def test_identical_curves_always_100(self):
        c = dg.logistic_curve(100.0, 75.0, 0.19)
        _, vals = dg.bias_sweep(c, c, [2, 7, 33], 10, 60)
        assert np.allclose(vals, 100.0)

    def test_converges_to_integral(self):
        sc_r = dg.logistic_curve(70.91, 100.0, 0.403)
        sc_t = dg.logistic_curve(70.69, 99.98, 0.292)
        truth = dg.f2_integral_truth(sc_r, sc_t, 10, 60)
        _, vals = dg.bias_sweep(sc_r, sc_t, [1000], 10, 60)
        assert vals[0] == pytest.approx(truth, abs=0.05)

    def test_p_below_two_rejected(self):
        c = dg.logistic_curve(100.0, 75.0, 0.19)
        with pytest.raises(DataError):
            dg.bias_sweep(c, c, [1], 10, 60)


class TestStudyHarness:
    def test_noiseless_identical_groups_f2_near_100(self):
        sc = dg.scenario("logistic-100", noise_variance=0.0, mc_runs=1, seed=0)
        cfg = StudyConfig(models=("lsgp",), tests=("f2",), samples_m=200, restarts=3)
        res = dg.run_mc_study(sc, cfg)
        assert len(res.records) == 1
        assert res.f2_means("lsgp")[0] > 95.0

    def test_records_are_seed_deterministic(self):
        sc = dg.scenario("logistic-52.81", mc_runs=2, seed=7)
        cfg = StudyConfig(models=("lsgp",), tests=("f2",), samples_m=100, restarts=2)
        a = dg.run_mc_study(sc, cfg)
        b = dg.run_mc_study(sc, cfg)
        assert a.f2_means("lsgp") == pytest.approx(b.f2_means("lsgp"), abs=0.0)

    def test_aggregate_rows_structure(self):
        sc = dg.scenario("higuchi-51.07", mc_runs=2, seed=3)
        cfg = StudyConfig(models=("lsgp",), tests=("f2", "msd-lsgp", "msd-tsong"),
                          samples_m=100, restarts=2)
        res = dg.run_mc_study(sc, cfg)
        rows = res.aggregates()
        assert len(rows) == 1
        row = rows[0]
        assert row["model"] == "lsgp"
        assert {"scenario", "variance", "f2_mean", "f2_var",
                "msd_similar_percent", "msd_tsong_similar_percent"} <= set(row)
        assert 0 <= row["msd_similar_percent"] <= 100

    def test_aggregation_order_invariant(self):
        sc = dg.scenario("logistic-52.81", mc_runs=3, seed=1)
        cfg = StudyConfig(models=("lsgp",), tests=("f2",), samples_m=50, restarts=2)
        res = dg.run_mc_study(sc, cfg)
        shuffled = dg.StudyResult(sc, cfg, tuple(reversed(res.records)), ())
        assert shuffled.aggregates()[0]["f2_mean"] == pytest.approx(
            res.aggregates()[0]["f2_mean"]
        )

    def test_worker_pool_matches_serial(self):
        sc = dg.scenario("logistic-100", noise_variance=0.0, mc_runs=2, seed=0)
        cfg = StudyConfig(models=("lsgp",), tests=("f2",), samples_m=50, restarts=1)
        serial = dg.run_mc_study(sc, cfg, workers=1)
        parallel = dg.run_mc_study(sc, cfg, workers=2)
        assert np.array_equal(serial.f2_means("lsgp"), parallel.f2_means("lsgp"))

    def test_bad_config_rejected(self):
        with pytest.raises(DataError):
            StudyConfig(models=("gp",))
        with pytest.raises(DataError):
            StudyConfig(tests=("f3",))

    def test_json_roundtrip_serialisable(self):
        import json

        sc = dg.scenario("logistic-100", mc_runs=1, seed=0, noise_variance=0.0)
        cfg = StudyConfig(models=("lsgp",), tests=("f2",), samples_m=50, restarts=1)
        res = dg.run_mc_study(sc, cfg)
        json.dumps(res.to_json())
