import math

import numpy as np
import pytest

import dissolvegp as dg
from dissolvegp import CovariateDesign, CovariateParams, DataError


def make_params(beta=None, gamma=None, delta=None, tau2=1e-4, noise=None, n_cov=4):
    zeros = np.zeros(n_cov + 1)
    b = zeros.copy() if beta is None else np.asarray(beta, float)
    g = zeros.copy() if gamma is None else np.asarray(gamma, float)
    d = zeros.copy() if delta is None else np.asarray(delta, float)
    return CovariateParams(b, g, d, tau2, noise or {"1": (0.0, 0.0)})


class TestCovariateLogistic:
    def test_reduces_to_base_logistic(self):
        cp = make_params(
            beta=[math.log(100.0), 0, 0, 0, 0],
            gamma=[math.log(75.0), 0, 0, 0, 0],
            delta=[math.log(0.19), 0, 0, 0, 0],
        )
        x = np.array([1.0, -0.3, 0.7, 1.0])  # coefficients are zero, x irrelevant
        ts = np.linspace(0, 60, 13)
        base = dg.logistic_curve(100.0, 75.0, 0.19)(ts)
        assert np.allclose(dg.covariate_logistic(ts, x, cp), base, rtol=1e-15)

    def test_asymptote(self):
        cp = make_params(
            beta=[math.log(90.0), 0.2, 0, 0, 0],
            gamma=[math.log(75.0), 0, 0, 0, 0],
            delta=[math.log(0.19), 0, 0, 0, 0],
        )
        x = np.array([1.0, 0.0, 0.0, 0.0])
        assert dg.covariate_logistic(1e7, x, cp) == pytest.approx(90.0 * math.exp(0.2))

    def test_medium_flip_scales_asymptote(self):
        cp = make_params(
            beta=[math.log(90.0), -0.4, 0, 0, 0],
            gamma=[math.log(75.0), 0, 0, 0, 0],
            delta=[math.log(0.19), 0, 0, 0, 0],
        )
        x0 = np.array([0.0, 0.0, 0.0, 0.0])
        x1 = np.array([1.0, 0.0, 0.0, 0.0])
        a0 = dg.covariate_logistic(1e7, x0, cp)
        a1 = dg.covariate_logistic(1e7, x1, cp)
        assert a1 / a0 == pytest.approx(math.exp(-0.4))

    def test_strictly_increasing(self):
        cp = make_params(
            beta=[math.log(100.0), 0.1, -0.1, 0.2, 0.0],
            gamma=[math.log(75.0), 0.3, 0.0, -0.2, 0.1],
            delta=[math.log(0.19), -0.1, 0.2, 0.0, 0.1],
        )
        x = np.array([1.0, 0.5, -1.2, 1.0])
        ts = np.linspace(0, 80, 200)
        vals = dg.covariate_logistic(ts, x, cp)
        assert np.all(np.diff(vals) > 0)

    def test_dimension_mismatch(self):
        cp = make_params()
        with pytest.raises(DataError):
            dg.covariate_logistic(10.0, np.zeros(3), cp)

    def test_matches_hyperparams_view(self):
        cp = make_params(
            beta=[math.log(100.0), 0.1, 0.0, -0.2, 0.3],
            gamma=[math.log(75.0), -0.1, 0.2, 0.0, 0.0],
            delta=[math.log(0.19), 0.0, 0.1, 0.1, -0.2],
        )
        x = np.array([1.0, -0.7, 0.4, 0.0])
        h = dg.hyperparams_at(cp, x, a=0.5, b=-0.01)
        ts = np.linspace(5, 50, 10)
        assert np.allclose(dg.covariate_logistic(ts, x, cp), dg.logistic_mean(ts, h))


class TestDesign:
    def test_reference_design_shape(self):
        design = CovariateDesign.reference_design()
        assert len(design.experiment_ids) == 12
        assert design.x.shape == (12, 4)
        # first six rows PB (0), last six HCl (1)
        assert np.allclose(design.x[:6, 0], 0.0)
        assert np.allclose(design.x[6:, 0], 1.0)
        # vea flags set exactly where viscosity was raised
        assert np.allclose(design.x[:, 3], np.resize([0.0, 1.0, 1.0], 12))
        # standardised columns have zero mean
        assert design.x[:, 1].mean() == pytest.approx(0.0, abs=1e-12)
        assert design.x[:, 2].mean() == pytest.approx(0.0, abs=1e-12)

    def test_encode_is_idempotent_with_stored_constants(self):
        design = CovariateDesign.reference_design()
        # encoding the raw covariates of row 4 reproduces the stored row
        row = design.encode("PB", 100, 0.7, "None")
        assert np.allclose(row, design.x[3])

    def test_csv_roundtrip(self):
        header = "experiment,substance,apparatus,medium,rpm,viscosity,vea\n"
        rows = [
            "1,Ibuprofen,Paddle,PB,50,0.7,None",
            "2,Ibuprofen,Paddle,PB,100,1.4,HPMC",
            "3,Ibuprofen,Paddle,HCl,50,5.5,HPMC",
        ]
        design = dg.read_design_csv(header + "\n".join(rows) + "\n")
        assert design.experiment_ids == ("1", "2", "3")
        assert design.x.shape == (3, 4)
        assert design.x[2, 0] == 1.0

    def test_bad_values_rejected(self):
        with pytest.raises(DataError):
            CovariateDesign.from_rows(
                [{"experiment": "1", "medium": "water", "rpm": 50,
                  "viscosity": 0.7, "vea": "None"}]
            )


def tiny_truth(n_cov=4):
    return CovariateParams(
        beta=np.array([math.log(95.0), -0.25, 0.10, -0.15, 0.0]),
        gamma=np.array([math.log(60.0), 0.3, 0.0, 0.2, -0.1]),
        delta=np.array([math.log(0.20), -0.2, 0.15, -0.1, 0.05]),
        tau2=1e-4,
        noise_ab={},
    )


class TestJointFit:
    def test_zero_covariates_collapse_to_shared_logistic(self, rng):
        # identical covariates: the fit must find one common curve
        times = np.arange(5.0, 46.0, 10.0)
        curve = dg.logistic_curve(95.0, 60.0, 0.2)(times)
        experiments = []
        for e in range(3):
            values = curve + rng.standard_normal((3, times.size)) * 0.5
            ds = dg.DissolutionDataset(f"e{e}", times, values,
                                       tuple(f"u{j}" for j in range(3)))
            experiments.append((ds, np.zeros(4)))
        params = dg.joint_fit(experiments, restarts=1, seed=0, maxiter=250)
        fitted = dg.covariate_logistic(times, np.zeros(4), params)
        assert np.max(np.abs(fitted - curve)) < 2.0
        assert len(params.noise_ab) == 3

    def test_requires_two_experiments(self, make_dataset):
        ds = make_dataset(np.random.default_rng(0).uniform(10, 90, (3, 4)))
        with pytest.raises(DataError):
            dg.joint_fit([(ds, np.zeros(4))])

    def test_extrapolation_reuses_training_design_point(self, rng):
        design = CovariateDesign.reference_design()
        truth = tiny_truth()
        times = np.arange(5.0, 46.0, 5.0)
        study = dg.simulate_covariate_study(truth, design, times, n_units=3,
                                            noise_variance=1.0, seed=4)
        params = dg.joint_fit(study, restarts=1, seed=1, maxiter=300)
        x0 = design.x[0]
        grid = np.linspace(5, 45, 30)
        post = dg.extrapolate_experiment(params, x0, grid)
        fitted_curve = dg.covariate_logistic(grid, x0, params)
        assert np.allclose(post.mean, fitted_curve)
        a_bar, b_bar = params.average_noise()
        assert np.allclose(post.noise_at_grid, np.exp(a_bar + b_bar * grid))

    def test_heteroskedastic_slopes_take_either_sign(self, rng):
        # one experiment with rising noise, one with falling noise
        times = np.arange(5.0, 46.0, 5.0)
        curve = dg.logistic_curve(95.0, 60.0, 0.2)(times)
        rising = curve + rng.standard_normal((4, times.size)) * np.exp(
            0.5 * (-2.0 + 0.08 * times)
        )
        falling = curve + rng.standard_normal((4, times.size)) * np.exp(
            0.5 * (2.0 - 0.08 * times)
        )
        ds_r = dg.DissolutionDataset("up", times, rising, tuple("abcd"))
        ds_f = dg.DissolutionDataset("down", times, falling, tuple("abcd"))
        params = dg.joint_fit([(ds_r, np.zeros(4)), (ds_f, np.zeros(4))],
                              restarts=1, seed=0, maxiter=250)
        assert params.noise_ab["up"][1] > 0
        assert params.noise_ab["down"][1] < 0


class TestExperimentPosterior:
    def test_conditions_on_own_data(self, rng):
        design = CovariateDesign.reference_design()
        truth = tiny_truth()
        times = np.arange(5.0, 46.0, 5.0)
        study = dg.simulate_covariate_study(truth, design, times, n_units=3,
                                            noise_variance=0.25, seed=9)
        params = dg.joint_fit(study[:4], restarts=1, seed=2, maxiter=200)
        ds, x = study[0]
        post = dg.experiment_posterior(params, ds, x, times)
        # posterior mean should track the data average better than the prior
        prior = dg.covariate_logistic(times, x, params)
        ybar = ds.values.mean(axis=0)
        assert np.mean((post.mean - ybar) ** 2) <= np.mean((prior - ybar) ** 2) + 1e-9
