import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import dissolvegp as dg
from dissolvegp import DataError


class TestCrpsFromSamples:
    def test_perfect_sharp_forecast(self):
        assert dg.crps_from_samples([3.0, 3.0, 3.0], 3.0) == pytest.approx(0.0, abs=1e-15)

    def test_two_sample_hand_case_near(self):
        # (|0-1| + |2-1|)/2 - (1/(2*4)) * (0+2+2+0) = 1 - 0.5
        assert dg.crps_from_samples([0.0, 2.0], 1.0) == pytest.approx(0.5, abs=1e-12)

    def test_two_sample_hand_case_far(self):
        # (10 + 8)/2 - 0.5 = 8.5? no: (|0-10|+|2-10|)/2 = 9; 9 - 0.5 = 8.5
        assert dg.crps_from_samples([0.0, 2.0], 10.0) == pytest.approx(8.5, abs=1e-12)

    def test_sharp_forecast_equals_absolute_error(self):
        for c, y in ((0.0, 1.5), (4.0, -2.0), (7.0, 7.0)):
            assert dg.crps_from_samples([c] * 5, y) == pytest.approx(abs(c - y), abs=1e-12)

    def test_matches_naive_double_sum(self, rng):
        for _ in range(20):
            x = rng.standard_normal(rng.integers(1, 40))
            y = rng.standard_normal()
            naive = np.mean(np.abs(x - y)) - 0.5 * np.mean(
                np.abs(x[:, None] - x[None, :])
            )
            assert dg.crps_from_samples(x, y) == pytest.approx(naive, abs=1e-12)

    @settings(max_examples=200, derandomize=True)
    @given(
        st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=30),
        st.floats(-1e4, 1e4),
    )
    def test_nonnegative(self, samples, y):
        assert dg.crps_from_samples(samples, y) >= -1e-9

    @settings(max_examples=100, derandomize=True)
    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=20),
        st.floats(-100, 100),
        st.floats(-50, 50),
    )
    def test_translation_equivariance(self, samples, y, shift):
        a = dg.crps_from_samples(samples, y)
        b = dg.crps_from_samples([s + shift for s in samples], y + shift)
        assert a == pytest.approx(b, abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            dg.crps_from_samples([], 0.0)


class TestLooCrps:
    def test_requires_three_points(self, make_dataset):
        ds = make_dataset(np.random.default_rng(0).uniform(1, 99, (4, 2)))
        with pytest.raises(DataError):
            dg.loo_crps(ds)

    def test_near_zero_for_noiseless_recoverable_signal(self, make_dataset, rng):
        times = np.arange(10.0, 61.0, 10.0)
        curve = dg.logistic_curve(100.0, 75.0, 0.19)(times)
        values = curve + rng.standard_normal((12, 6)) * 1e-3
        ds = make_dataset(values, times=times)
        report = dg.loo_crps(ds, "lsgp", samples_m=400, seed=0, restarts=5)
        assert report.mean < 0.05
        assert report.failed_folds == ()
        assert report.per_time.shape == (6,)

    def test_lsgp_beats_ctgp_on_logistic_data(self, make_dataset, rng):
        times = np.arange(10.0, 61.0, 10.0)
        curve = dg.logistic_curve(87.0, 80.0, 0.215)(times)
        values = curve + rng.standard_normal((12, 6))
        ds = make_dataset(values, times=times)
        lsgp = dg.loo_crps(ds, "lsgp", samples_m=400, seed=1, restarts=5)
        ctgp = dg.loo_crps(ds, "ctgp", samples_m=400, seed=1,
                           ctgp_iters=1500, ctgp_burn_in=500)
        assert lsgp.mean < ctgp.mean

    def test_per_unit_detail(self, make_dataset, rng):
        times = np.arange(10.0, 61.0, 10.0)
        values = dg.logistic_curve(100, 75, 0.19)(times) + rng.standard_normal((5, 6))
        ds = make_dataset(values, times=times)
        report = dg.loo_crps(ds, "lsgp", samples_m=100, seed=2, restarts=2,
                             keep_per_unit=True)
        assert report.per_unit.shape == (6, 5)
        assert np.allclose(np.nanmean(report.per_unit, axis=1), report.per_time)
        assert np.all(report.per_unit[~np.isnan(report.per_unit)] >= 0.0)

    def test_unknown_model(self, make_dataset):
        ds = make_dataset(np.random.default_rng(0).uniform(1, 99, (4, 4)))
        with pytest.raises(DataError):
            dg.loo_crps(ds, "gp")
