import json

import numpy as np
import pytest

import dissolvegp as dg
from dissolvegp.cli import main


class TestCompareWorkflow:
    def test_self_comparison_certainly_similar(self, rng):
        times = np.arange(10.0, 61.0, 10.0)
        values = dg.logistic_curve(100, 75, 0.19)(times) + rng.standard_normal((12, 6))
        ds = dg.DissolutionDataset("R", times, values,
                                   tuple(f"u{i}" for i in range(12)))
        other = dg.DissolutionDataset("T", times, values, ds.unit_ids)
        report = dg.compare_datasets(ds, other, samples_m=200, restarts=3, seed=0)
        assert report.f2.probability_similar == pytest.approx(1.0)
        assert report.delta.probability_similar == pytest.approx(1.0)
        assert report.msd_tsong.d_point == pytest.approx(0.0, abs=1e-8)
        assert report.msd_lsgp.decision
        out = report.to_dict()
        json.dumps(out)
        assert out["validity"]["overall"] in (True, False)

    def test_ctgp_route(self, rng):
        times = np.arange(10.0, 61.0, 10.0)
        values = dg.logistic_curve(100, 75, 0.19)(times) + rng.standard_normal((6, 6))
        ds = dg.DissolutionDataset("R", times, values, tuple(f"u{i}" for i in range(6)))
        other = dg.DissolutionDataset("T", times, values + 0.5, ds.unit_ids)
        report = dg.compare_datasets(ds, other, model="ctgp", tests=("f2", "delta"),
                                     samples_m=100, ctgp_iters=400, ctgp_burn_in=200,
                                     seed=1)
        assert report.f2 is not None and report.delta is not None
        assert report.msd_lsgp is None

    def test_msd_lsgp_requires_lsgp(self, make_dataset):
        ds = make_dataset(np.random.default_rng(0).uniform(10, 90, (4, 4)))
        with pytest.raises(dg.DataError):
            dg.compare_datasets(ds, ds, model="ctgp", tests=("msd-lsgp",))


class TestFitSeries:
    def test_band_ordering(self, rng):
        times = np.arange(10.0, 61.0, 10.0)
        values = dg.logistic_curve(90, 60, 0.2)(times) + rng.standard_normal((6, 6))
        ds = dg.DissolutionDataset("R", times, values, tuple(f"u{i}" for i in range(6)))
        summary, series = dg.fit_series(ds, grid_r=40, seed=0, restarts=3)
        assert summary["model"] == "lsgp"
        assert len(series) == 40
        for row in series:
            assert row["lower95"] <= row["mean"] <= row["upper95"]


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCli:
    def test_validity_on_bundled_dataset(self, capsys):
        code, out, err = run_cli(["validity", "--input", "dataset1", "--seed", "1"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["report"]["overall"] is True
        assert payload["config"]["seed"] == 1

    def test_simulate_csv(self, tmp_path, capsys):
        out_file = tmp_path / "sim.csv"
        code, _, _ = run_cli(
            ["simulate", "--scenario", "logistic-52.81", "--seed", "3",
             "--format", "csv", "--out", str(out_file)], capsys)
        assert code == 0
        lines = out_file.read_text().strip().splitlines()
        assert lines[0] == "group,unit,time,value"
        assert len([l for l in lines if l.startswith("R,")]) == 12 * 6
        assert any(l.startswith("# config:") for l in lines)

    def test_simulate_reproducible_given_seed(self, capsys):
        outputs = []
        for _ in range(2):
            code, out, _ = run_cli(
                ["simulate", "--scenario", "higuchi-51.07", "--seed", "9",
                 "--format", "csv"], capsys)
            assert code == 0
            outputs.append(out)
        assert outputs[0] == outputs[1]

    def test_env_seed_override(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("DISSOLVE_GP_SEED", "77")
        code, out, _ = run_cli(["validity", "--input", "dataset2"], capsys)
        assert code == 0
        assert json.loads(out)["config"]["seed"] == 77

    def test_fit_and_series(self, tmp_path, capsys):
        sim = tmp_path / "sim.csv"
        run_cli(["simulate", "--scenario", "logistic-100", "--seed", "4",
                 "--format", "csv", "--out", str(sim)], capsys)
        # strip the trailing config comment so the file is a clean CSV
        lines = [l for l in sim.read_text().splitlines() if not l.startswith("#")]
        sim.write_text("\n".join(lines) + "\n")
        code, out, _ = run_cli(
            ["fit", "--input", str(sim), "--group", "R", "--grid-r", "30",
             "--restarts", "2", "--seed", "5"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert len(payload["rows"]) == 30
        for row in payload["rows"]:
            assert row["lower95"] <= row["mean"] <= row["upper95"]

    def test_compare_self_high_probability(self, tmp_path, capsys):
        code, out, _ = run_cli(
            ["compare", "--input", "dataset2", "--samples-m", "200",
             "--restarts", "3", "--grid-r", "100", "--seed", "2",
             "--tests", "f2,delta,msd-tsong"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["report"]["f2"]["point_estimate"] > 50.0

    def test_bias_sweep(self, capsys):
        code, out, _ = run_cli(
            ["bias-sweep", "--family", "logistic",
             "--ref-params", "70.91,100,0.403", "--test-params", "70.69,99.98,0.292",
             "--p-min", "5", "--p-max", "10", "--seed", "0"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["f2_integral"] == pytest.approx(49.45, abs=0.01)
        assert all(row["f2_metric"] > 50 for row in payload["rows"])

    def test_mc_study_small(self, capsys):
        code, out, _ = run_cli(
            ["mc-study", "--scenario", "logistic-100", "--noise-variance", "0",
             "--mc-runs", "1", "--restarts", "3", "--samples-m", "50",
             "--workers", "1", "--seed", "0"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["rows"][0]["f2_mean"] > 95.0

    def test_crps_loo_cli(self, tmp_path, capsys):
        sim = tmp_path / "sim.csv"
        run_cli(["simulate", "--scenario", "logistic-52.81", "--seed", "4",
                 "--format", "csv", "--out", str(sim)], capsys)
        lines = [l for l in sim.read_text().splitlines() if not l.startswith("#")]
        sim.write_text("\n".join(lines) + "\n")
        code, out, _ = run_cli(
            ["crps-loo", "--input", str(sim), "--group", "T", "--samples-m", "100",
             "--restarts", "1", "--seed", "5"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["report"]["mean_crps"] >= 0.0

    def test_covariate_fit_and_predict(self, tmp_path, capsys):
        design = dg.CovariateDesign.reference_design()
        truth = dg.CovariateParams(
            beta=np.array([np.log(95.0), -0.2, 0.1, -0.1, 0.0]),
            gamma=np.array([np.log(60.0), 0.2, 0.0, 0.1, -0.1]),
            delta=np.array([np.log(0.2), -0.1, 0.1, 0.0, 0.0]),
            tau2=1e-4,
            noise_ab={},
        )
        times = np.arange(5.0, 46.0, 10.0)
        study = dg.simulate_covariate_study(truth, design, times, n_units=3,
                                            noise_variance=0.5, seed=3)
        data = tmp_path / "experiments.csv"
        with open(data, "w") as fh:
            fh.write("group,unit,time,value\n")
            for ds, _ in study:
                for unit, row in zip(ds.unit_ids, ds.values):
                    for t, v in zip(ds.times, row):
                        fh.write(f"{ds.group_label},{unit},{t},{v}\n")
        design_csv = tmp_path / "design.csv"
        with open(design_csv, "w") as fh:
            fh.write("experiment,substance,apparatus,medium,rpm,viscosity,vea\n")
            k = 0
            for medium in ("PB", "HCl"):
                for rpm in (50, 100):
                    for visc in (0.7, 1.4, 5.5):
                        k += 1
                        vea = "None" if visc == 0.7 else "HPMC"
                        fh.write(f"{k},Ibuprofen,Paddle,{medium},{rpm},{visc},{vea}\n")
        params_file = tmp_path / "params.json"
        code, _, err = run_cli(
            ["covariate-fit", "--input", str(data), "--design", str(design_csv),
             "--restarts", "1", "--seed", "1", "--out", str(params_file)], capsys)
        assert code == 0, err
        code, out, _ = run_cli(
            ["covariate-predict", "--params", str(params_file), "--medium", "PB",
             "--rpm", "50", "--viscosity", "0.7", "--vea", "None",
             "--t1", "5", "--tp", "45", "--grid-r", "20", "--seed", "2"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert len(payload["rows"]) == 20
        assert payload["rows"][-1]["mean"] > payload["rows"][0]["mean"]

    def test_usage_error_exit_code(self, capsys):
        assert main(["fit"]) == 1           # missing required --input
        assert main(["no-such-command"]) == 1

    def test_data_error_exit_code_and_stderr_json(self, capsys):
        code, _, err = run_cli(["fit", "--input", "/nonexistent.csv", "--seed", "0"],
                               capsys)
        assert code == 2
        payload = json.loads(err)
        assert payload["error"] == "data"

    def test_version_flag(self, capsys):
        assert main(["--version"]) == 0
