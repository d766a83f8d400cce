"""Command-line front end.

Commands: simulate, fit, compare, validity, crps-loo, mc-study, bias-sweep,
covariate-fit, covariate-predict. Reports are JSON (default) or CSV and
always echo the fully resolved configuration, including the materialised
seed, so any run can be reproduced exactly.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .covariates import (
    CovariateDesign,
    CovariateParams,
    extrapolate_experiment,
    joint_fit,
    read_design_csv,
)
from .dataset import (
    DissolutionDataset,
    check_validity,
    load_dataset1,
    load_dataset2,
    parse_dataset,
    read_groups,
)
from .errors import DataError, DissolveGpError, NumericalError
from .scoring import loo_crps
from .similarity import f2_integral_truth
from .simulation import (
    SCENARIOS,
    StudyConfig,
    bias_sweep,
    higuchi_curve,
    logistic_curve,
    run_mc_study,
    scenario,
    simulate,
)
from .workflows import compare_datasets, curve_series, fit_series

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SEED_ENV_VAR = "DISSOLVE_GP_SEED"


def _materialize_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return int(np.random.SeedSequence().generate_state(1)[0] % 2**31)


def _config_echo(args, seed: int) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",) and v is not None}
    cfg["seed"] = seed
    cfg["version"] = __version__
    return cfg


def _emit(payload, args) -> None:
    fmt = getattr(args, "format", "json") or "json"
    out = getattr(args, "out", None)
    if fmt == "json":
        text = json.dumps(payload, indent=2, default=_json_default)
    else:
        rows = payload.get("rows") if isinstance(payload, dict) else None
        if rows is None:
            raise DataError("this command has no CSV representation")
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
        buf.write("# config: " + json.dumps(payload.get("config", {}), default=_json_default) + "\n")
        text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"cannot serialise {type(obj)!r}")


def _load_pair(args) -> tuple[DissolutionDataset, DissolutionDataset]:
    """Reference/test pair from --reference/--test files or a combined --input."""
    fmt = getattr(args, "data_format", "long")
    if getattr(args, "input", None):
        if args.input == "dataset1":
            return load_dataset1()
        if args.input == "dataset2":
            return load_dataset2()
        groups = read_groups(args.input, fmt=fmt)
        ref_key = getattr(args, "ref_group", None) or "R"
        test_key = getattr(args, "test_group", None) or "T"
        if ref_key not in groups or test_key not in groups:
            raise DataError(
                f"groups {ref_key!r}/{test_key!r} not found in {args.input} "
                f"(have {sorted(groups)})"
            )
        return groups[ref_key], groups[test_key]
    if not (getattr(args, "reference", None) and getattr(args, "test", None)):
        raise DataError("pass --input or both --reference and --test")
    ref = parse_dataset(args.reference, fmt=fmt, group=getattr(args, "ref_group", None),
                        group_label="R")
    test = parse_dataset(args.test, fmt=fmt, group=getattr(args, "test_group", None),
                         group_label="T")
    return ref, test


def _curve_from_args(family: str, params: str):
    vals = [float(v) for v in params.split(",")]
    if family == "logistic":
        if len(vals) != 3:
            raise DataError("logistic curves need alpha1,alpha2,beta")
        return logistic_curve(*vals)
    if family == "higuchi":
        if len(vals) != 1:
            raise DataError("higuchi curves need a single omega")
        return higuchi_curve(vals[0])
    raise DataError(f"unknown curve family {family!r}")


# ---------------------------------------------------------------- commands

def cmd_simulate(args, seed):
    sc = scenario(args.scenario, noise_variance=args.noise_variance, seed=seed,
                  n_units=args.units)
    rows = []
    for group in ("R", "T"):
        ds = simulate(sc, group, np.random.default_rng([seed, 0, 0 if group == "R" else 1]))
        for unit, row in zip(ds.unit_ids, ds.values):
            rows.extend(
                {"group": group, "unit": unit, "time": float(t), "value": float(v)}
                for t, v in zip(ds.times, row)
            )
    return {"config": _config_echo(args, seed), "rows": rows}


def cmd_fit(args, seed):
    ds = parse_dataset(args.input, fmt=args.data_format, group=args.group)
    summary, series = fit_series(
        ds, model=args.model, grid_r=args.grid_r, seed=seed,
        restarts=args.restarts, ctgp_iters=args.iters, ctgp_burn_in=args.burn_in,
        sample_lengthscales=args.sample_lengthscales,
    )
    return {"config": _config_echo(args, seed), "summary": summary, "rows": series}


def cmd_compare(args, seed):
    ref, test = _load_pair(args)
    tests = tuple(args.tests.split(",")) if args.tests else ("f2", "delta", "msd-tsong", "msd-lsgp")
    if args.model == "ctgp":
        tests = tuple(t for t in tests if t != "msd-lsgp")
    report = compare_datasets(
        ref, test, model=args.model, tests=tests, grid_r=args.grid_r,
        samples_m=args.samples_m, seed=seed, restarts=args.restarts,
        ctgp_iters=args.iters, ctgp_burn_in=args.burn_in,
        sample_lengthscales=args.sample_lengthscales,
    )
    return {"config": _config_echo(args, seed), "report": report.to_dict()}


def cmd_validity(args, seed):
    ref, test = _load_pair(args)
    return {"config": _config_echo(args, seed), "report": check_validity(ref, test).to_dict()}


def cmd_crps_loo(args, seed):
    ds = parse_dataset(args.input, fmt=args.data_format, group=args.group)
    report = loo_crps(
        ds, model=args.model, samples_m=args.samples_m, seed=seed,
        restarts=args.restarts, ctgp_iters=args.iters, ctgp_burn_in=args.burn_in,
    )
    return {"config": _config_echo(args, seed), "report": report.to_row()}


def cmd_mc_study(args, seed):
    sc = scenario(args.scenario, noise_variance=args.noise_variance,
                  mc_runs=args.mc_runs, seed=seed, n_units=args.units)
    cfg = StudyConfig(
        models=tuple(args.models.split(",")),
        tests=tuple(args.tests.split(",")),
        crps=args.crps,
        grid_r=args.grid_r,
        samples_m=args.samples_m,
        restarts=args.restarts,
        ctgp_iters=args.iters,
        ctgp_burn_in=args.burn_in,
    )
    result = run_mc_study(sc, cfg, workers=args.workers)
    return {
        "config": _config_echo(args, seed),
        "rows": result.aggregates(),
        "records": result.to_json()["records"],
        "failures": list(result.failures),
    }


def cmd_bias_sweep(args, seed):
    curve_r = _curve_from_args(args.family, args.ref_params)
    curve_t = _curve_from_args(args.family, args.test_params)
    ps = range(args.p_min, args.p_max + 1)
    p_vals, f2_vals = bias_sweep(curve_r, curve_t, ps, args.t1, args.tp)
    truth = f2_integral_truth(curve_r, curve_t, args.t1, args.tp)
    rows = [
        {"p": int(p), "f2_metric": float(v), "f2_integral": truth}
        for p, v in zip(p_vals, f2_vals)
    ]
    return {"config": _config_echo(args, seed), "f2_integral": truth, "rows": rows}


def cmd_covariate_fit(args, seed):
    design = read_design_csv(args.design)
    groups = read_groups(args.input, fmt="long")
    experiments = []
    for i, eid in enumerate(design.experiment_ids):
        if eid not in groups:
            raise DataError(f"experiment {eid!r} from design not present in data")
        experiments.append((groups[eid], design.x[i]))
    params = joint_fit(experiments, restarts=args.restarts, seed=seed)
    payload = {
        "beta": params.beta.tolist(),
        "gamma": params.gamma.tolist(),
        "delta": params.delta.tolist(),
        "tau2": params.tau2,
        "noise_ab": {k: list(v) for k, v in params.noise_ab.items()},
        "log_joint": params.log_joint,
        "design": {
            "rpm_center": design.rpm_center,
            "rpm_scale": design.rpm_scale,
            "visc_center": design.visc_center,
            "visc_scale": design.visc_scale,
        },
    }
    return {"config": _config_echo(args, seed), "params": payload}


def cmd_covariate_predict(args, seed):
    with open(args.params, "r", encoding="utf-8") as fh:
        stored = json.load(fh)
    stored = stored.get("params", stored)
    params = CovariateParams(
        beta=np.asarray(stored["beta"]),
        gamma=np.asarray(stored["gamma"]),
        delta=np.asarray(stored["delta"]),
        tau2=float(stored["tau2"]),
        noise_ab={k: tuple(v) for k, v in stored["noise_ab"].items()},
    )
    dz = stored["design"]
    design = CovariateDesign(
        ("new",), np.zeros((1, 4)), dz["rpm_center"], dz["rpm_scale"],
        dz["visc_center"], dz["visc_scale"],
    )
    x_new = design.encode(args.medium, args.rpm, args.viscosity, args.vea)
    grid = np.linspace(args.t1, args.tp, args.grid_r)
    post = extrapolate_experiment(params, x_new, grid)
    return {
        "config": _config_echo(args, seed),
        "covariates": x_new.tolist(),
        "rows": curve_series(post),
    }


# ---------------------------------------------------------------- parser

def _add_common(p, *, seedless=False):
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    if not seedless:
        p.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed (default: drawn, or ${SEED_ENV_VAR})")


def _add_fit_opts(p):
    p.add_argument("--model", choices=("lsgp", "ctgp"), default="lsgp")
    p.add_argument("--grid-r", dest="grid_r", type=int, default=500)
    p.add_argument("--samples-m", dest="samples_m", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--iters", type=int, default=3000, help="Gibbs iterations")
    p.add_argument("--burn-in", dest="burn_in", type=int, default=1000)
    p.add_argument("--sample-lengthscales", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dissolve-gp",
        description="GP modelling and similarity testing for dissolution profiles",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit a synthetic scenario dataset")
    p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--noise-variance", dest="noise_variance", type=float, default=1.0)
    p.add_argument("--units", type=int, default=12)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one group and emit the posterior curve")
    p.add_argument("--input", required=True)
    p.add_argument("--group", default=None)
    p.add_argument("--data-format", dest="data_format", choices=("long", "wide"), default="long")
    _add_fit_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="full reference/test comparison report")
    p.add_argument("--input", help="combined CSV, or bundled name dataset1/dataset2")
    p.add_argument("--reference", help="reference CSV (with --test)")
    p.add_argument("--test", help="test CSV (with --reference)")
    p.add_argument("--ref-group", dest="ref_group", default=None)
    p.add_argument("--test-group", dest="test_group", default=None)
    p.add_argument("--data-format", dest="data_format", choices=("long", "wide"), default="long")
    p.add_argument("--tests", default=None, help="comma list: f2,delta,msd-tsong,msd-lsgp")
    _add_fit_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validity", help="regulatory validity criteria report")
    p.add_argument("--input")
    p.add_argument("--reference")
    p.add_argument("--test")
    p.add_argument("--ref-group", dest="ref_group", default=None)
    p.add_argument("--test-group", dest="test_group", default=None)
    p.add_argument("--data-format", dest="data_format", choices=("long", "wide"), default="long")
    _add_common(p)
    p.set_defaults(func=cmd_validity)

    p = sub.add_parser("crps-loo", help="leave-one-time-point-out CRPS")
    p.add_argument("--input", required=True)
    p.add_argument("--group", default=None)
    p.add_argument("--data-format", dest="data_format", choices=("long", "wide"), default="long")
    _add_fit_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_crps_loo)

    p = sub.add_parser("mc-study", help="Monte-Carlo simulation study")
    p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--noise-variance", dest="noise_variance", type=float, default=1.0)
    p.add_argument("--mc-runs", dest="mc_runs", type=int, default=20)
    p.add_argument("--units", type=int, default=12)
    p.add_argument("--models", default="lsgp", help="comma list: lsgp,ctgp")
    p.add_argument("--tests", default="f2", help="comma list: f2,delta,msd-tsong,msd-lsgp")
    p.add_argument("--crps", action="store_true", help="include LOO CRPS per run")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    _add_fit_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_mc_study)

    p = sub.add_parser("bias-sweep", help="discrete-f2 bias versus sampling density")
    p.add_argument("--family", choices=("logistic", "higuchi"), default="logistic")
    p.add_argument("--ref-params", dest="ref_params", required=True,
                   help="comma-separated curve parameters")
    p.add_argument("--test-params", dest="test_params", required=True)
    p.add_argument("--p-min", dest="p_min", type=int, default=5)
    p.add_argument("--p-max", dest="p_max", type=int, default=100)
    p.add_argument("--t1", type=float, default=10.0)
    p.add_argument("--tp", type=float, default=60.0)
    _add_common(p)
    p.set_defaults(func=cmd_bias_sweep)

    p = sub.add_parser("covariate-fit", help="joint fit across experiments")
    p.add_argument("--input", required=True, help="long CSV; group column = experiment id")
    p.add_argument("--design", required=True, help="covariate design CSV")
    p.add_argument("--restarts", type=int, default=3)
    _add_common(p)
    p.set_defaults(func=cmd_covariate_fit)

    p = sub.add_parser("covariate-predict", help="extrapolate to new covariates")
    p.add_argument("--params", required=True, help="JSON from covariate-fit")
    p.add_argument("--medium", required=True)
    p.add_argument("--rpm", type=float, required=True)
    p.add_argument("--viscosity", type=float, required=True)
    p.add_argument("--vea", default="None")
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--tp", type=float, required=True)
    p.add_argument("--grid-r", dest="grid_r", type=int, default=500)
    _add_common(p)
    p.set_defaults(func=cmd_covariate_predict)

    return parser


def _fail(kind: str, exc: Exception, code: int) -> int:
    sys.stderr.write(
        json.dumps({"error": kind, "message": str(exc), "type": type(exc).__name__})
        + "\n"
    )
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; remap per our contract
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    seed = _materialize_seed(args)
    try:
        payload = args.func(args, seed)
        _emit(payload, args)
        return EXIT_OK
    except NumericalError as exc:
        return _fail("numerical", exc, EXIT_NUMERIC)
    except (DataError, DissolveGpError, OSError, ValueError) as exc:
        return _fail("data", exc, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
