"""Covariate-driven logistic GP shared across dissolution experiments.

The logistic parameters become log-linear functions of per-experiment
covariates (medium, agitation speed, viscosity, viscosity-enhancing agent);
experiments share those coefficients and the kernel scale while keeping their
own noise line. For a fixed covariate vector the model collapses to the base
logistic-spline GP, so fitting and prediction reuse that machinery.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .dataset import DissolutionDataset
from .errors import DataError, EstimationError, ParseError
from .estimation import (
    _half_cauchy_logpdf,
    _normal_logpdf,
    empirical_bayes_ab,
)
from .gp import (
    GpPosterior,
    fit_posterior,
    log_marginal_likelihood_from_gram,
    prior_gp,
)
from .kernels import LsgpHyperparams, build_gram

COVARIATE_NAMES = ("medium", "rpm", "log_viscosity", "vea")

# prior centres of the three intercepts (log asymptote, log shape, log rate)
INTERCEPT_LOCS = (math.log(76.56), math.log(100.0), math.log(0.196))
INTERCEPT_SCALE = 3.0
COEFFICIENT_SCALE = 2.0  # Normal(0, 2) on every non-intercept coefficient
NOISE_PRIOR_SCALE = 1.25
TAU2_PRIOR_SCALE = 5.0


@dataclass(frozen=True)
class CovariateDesign:
    """Standardised covariate vectors, one row per experiment.

    Encoding: medium PB=0 / HCl=1; rpm standardised; viscosity log-transformed
    then standardised; viscosity-enhancing agent none=0 / HPMC=1. The
    standardisation constants travel with the design so new experiments are
    encoded consistently.
    """

    experiment_ids: tuple[str, ...]
    x: np.ndarray                      # (E, 4)
    rpm_center: float
    rpm_scale: float
    visc_center: float
    visc_scale: float

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape != (len(self.experiment_ids), len(COVARIATE_NAMES)):
            raise DataError("design matrix shape mismatch")
        x.flags.writeable = False
        object.__setattr__(self, "x", x)

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]

    def encode(self, medium: str, rpm: float, viscosity: float, vea: str) -> np.ndarray:
        """Standardised covariate vector for one (possibly new) experiment."""
        return np.array(
            [
                _medium_code(medium),
                (float(rpm) - self.rpm_center) / self.rpm_scale,
                (math.log(float(viscosity)) - self.visc_center) / self.visc_scale,
                _vea_code(vea),
            ]
        )

    @classmethod
    def from_rows(cls, rows) -> "CovariateDesign":
        """Build a design from dict rows with medium/rpm/viscosity/vea fields."""
        ids, mediums, rpms, viscs, veas = [], [], [], [], []
        for row in rows:
            ids.append(str(row["experiment"]))
            mediums.append(_medium_code(row["medium"]))
            rpms.append(float(row["rpm"]))
            viscs.append(math.log(float(row["viscosity"])))
            veas.append(_vea_code(row["vea"]))
        rpms = np.asarray(rpms)
        viscs = np.asarray(viscs)
        rpm_c, rpm_s = float(rpms.mean()), float(rpms.std() or 1.0)
        visc_c, visc_s = float(viscs.mean()), float(viscs.std() or 1.0)
        x = np.column_stack(
            [mediums, (rpms - rpm_c) / rpm_s, (viscs - visc_c) / visc_s, veas]
        )
        return cls(tuple(ids), x, rpm_c, rpm_s, visc_c, visc_s)

    @classmethod
    def reference_design(cls) -> "CovariateDesign":
        """The standard 12-experiment design: 2 media x 2 speeds x 3 viscosities."""
        rows = []
        exp = 1
        for medium in ("PB", "HCl"):
            for rpm in (50, 100):
                for visc in (0.7, 1.4, 5.5):
                    rows.append(
                        {
                            "experiment": str(exp),
                            "medium": medium,
                            "rpm": rpm,
                            "viscosity": visc,
                            "vea": "None" if visc == 0.7 else "HPMC",
                        }
                    )
                    exp += 1
        return cls.from_rows(rows)


def _medium_code(medium) -> float:
    if isinstance(medium, (int, float)):
        return float(medium)
    key = str(medium).strip().lower()
    if key in ("pb", "phosphate buffer", "0"):
        return 0.0
    if key in ("hcl", "hydrochloric acid", "1"):
        return 1.0
    raise DataError(f"unknown medium {medium!r}")


def _vea_code(vea) -> float:
    if isinstance(vea, (int, float)):
        return float(vea)
    key = str(vea).strip().lower()
    if key in ("none", "", "0"):
        return 0.0
    if key in ("hpmc", "1"):
        return 1.0
    raise DataError(f"unknown viscosity-enhancing agent {vea!r}")


def read_design_csv(source) -> CovariateDesign:
    """Design from CSV with header experiment,substance,apparatus,medium,rpm,viscosity,vea."""
    if hasattr(source, "read"):
        fh = source
    elif "\n" in str(source):
        fh = io.StringIO(str(source))
    else:
        fh = open(source, "r", encoding="utf-8", newline="")
    try:
        reader = csv.DictReader(fh)
        need = {"experiment", "medium", "rpm", "viscosity", "vea"}
        if reader.fieldnames is None or not need <= {c.strip().lower() for c in reader.fieldnames}:
            raise ParseError(f"design header must contain {sorted(need)}")
        rows = [{k.strip().lower(): v for k, v in row.items()} for row in reader]
    finally:
        if fh is not source:
            fh.close()
    if not rows:
        raise ParseError("no design rows found")
    return CovariateDesign.from_rows(rows)


@dataclass(frozen=True)
class CovariateParams:
    """Fitted shared coefficients plus per-experiment noise lines.

    ``beta``/``gamma``/``delta`` hold (intercept, coefficients...) for the log
    asymptote, log shape and log rate of the logistic; ``noise_ab`` maps each
    experiment id to its fitted (a, b) noise line.
    """

    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    tau2: float
    noise_ab: dict[str, tuple[float, float]]
    log_joint: float = float("nan")

    def __post_init__(self):
        for name in ("beta", "gamma", "delta"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)):
                raise DataError(f"{name} coefficients must be finite")
            object.__setattr__(self, name, v)
        if not self.tau2 > 0:
            raise DataError("tau2 must be positive")

    @property
    def n_covariates(self) -> int:
        return self.beta.size - 1

    def average_noise(self) -> tuple[float, float]:
        ab = np.array(list(self.noise_ab.values()))
        return float(ab[:, 0].mean()), float(ab[:, 1].mean())


def covariate_logistic(t, x, cp: CovariateParams):
    """exp(b0+b.x) / (1 + exp(g0+g.x - rate*t)) with rate = exp(d0+d.x)."""
    x = np.asarray(x, dtype=float)
    if x.size != cp.n_covariates:
        raise DataError(
            f"covariate vector has {x.size} entries, expected {cp.n_covariates}"
        )
    t = np.asarray(t, dtype=float)
    num = np.exp(cp.beta[0] + cp.beta[1:] @ x)
    rate = np.exp(cp.delta[0] + cp.delta[1:] @ x)
    return num / (1.0 + np.exp(cp.gamma[0] + cp.gamma[1:] @ x - rate * t))


def hyperparams_at(cp: CovariateParams, x, a: float, b: float) -> LsgpHyperparams:
    """Base-model hyperparameters implied by the covariates at ``x``."""
    x = np.asarray(x, dtype=float)
    return LsgpHyperparams(
        alpha1=float(np.exp(cp.beta[0] + cp.beta[1:] @ x)),
        alpha2=float(np.exp(cp.gamma[0] + cp.gamma[1:] @ x)),
        beta=float(np.exp(cp.delta[0] + cp.delta[1:] @ x)),
        tau2=cp.tau2,
        a=a,
        b=b,
    )


def _pack_layout(n_cov: int, n_exp: int):
    k = n_cov + 1
    return {
        "beta": slice(0, k),
        "gamma": slice(k, 2 * k),
        "delta": slice(2 * k, 3 * k),
        "ltau2": 3 * k,
        "noise": slice(3 * k + 1, 3 * k + 1 + 2 * n_exp),
        "size": 3 * k + 1 + 2 * n_exp,
    }


def _params_from_vector(vec, layout, ids) -> CovariateParams:
    noise = vec[layout["noise"]].reshape(-1, 2)
    return CovariateParams(
        beta=vec[layout["beta"]].copy(),
        gamma=vec[layout["gamma"]].copy(),
        delta=vec[layout["delta"]].copy(),
        tau2=float(np.exp(vec[layout["ltau2"]])),
        noise_ab={eid: (float(a), float(b)) for eid, (a, b) in zip(ids, noise)},
    )


def joint_fit(
    experiments: list[tuple[DissolutionDataset, np.ndarray]],
    restarts: int = 3,
    seed: int = 0,
    q: int = 2,
    maxiter: int = 400,
) -> CovariateParams:
    """MAP fit of the shared coefficients over all experiments jointly.

    The objective sums each experiment's marginal likelihood (with its own
    noise line) plus the coefficient priors, maximised by L-BFGS-B with
    numerical gradients; restarts perturb the deterministic start, which sits
    at the prior intercepts with zero coefficients and per-experiment
    empirical-Bayes noise lines.
    """
    if len(experiments) < 2:
        raise DataError("joint fit needs at least two experiments")
    n_cov = np.asarray(experiments[0][1]).size
    for ds, x in experiments:
        if np.asarray(x).size != n_cov:
            raise DataError("all experiments must share the covariate dimension")
    ids = [ds.group_label for ds, _ in experiments]
    if len(set(ids)) != len(ids):
        ids = [f"{i}:{lab}" for i, lab in enumerate(ids)]
    layout = _pack_layout(n_cov, len(experiments))
    xs = [np.asarray(x, dtype=float) for _, x in experiments]
    stats = [
        (ds, ds.n_units, ds.values.mean(axis=0), ds.values.var(axis=0))
        for ds, _ in experiments
    ]
    eb = [empirical_bayes_ab(ds) for ds, _ in experiments]
    big = 1e300

    def neg_log_joint(vec):
        if not np.all(np.isfinite(vec)) or abs(vec[layout["ltau2"]]) > 600.0:
            return big
        try:
            cp = _params_from_vector(vec, layout, ids)
        except DataError:
            return big
        total = 0.0
        noise = vec[layout["noise"]].reshape(-1, 2)
        try:
            for (ds, n, ybar, s2), x, (a, b) in zip(stats, xs, noise):
                h = hyperparams_at(cp, x, float(a), float(b))
                gram = build_gram(ds.times, h, n, q=q)
                total += log_marginal_likelihood_from_gram(gram, ybar, s2, n)
        except Exception:
            return big
        for vec_slice, locs in (
            (cp.beta, INTERCEPT_LOCS[0]),
            (cp.gamma, INTERCEPT_LOCS[1]),
            (cp.delta, INTERCEPT_LOCS[2]),
        ):
            total += _normal_logpdf(vec_slice[0], locs, INTERCEPT_SCALE)
            for c in vec_slice[1:]:
                total += _normal_logpdf(c, 0.0, COEFFICIENT_SCALE)
        total += _half_cauchy_logpdf(cp.tau2, TAU2_PRIOR_SCALE)
        for (a, b), (a_bar, b_bar) in zip(noise, eb):
            total += _normal_logpdf(float(a), a_bar, NOISE_PRIOR_SCALE)
            total += _normal_logpdf(float(b), b_bar, NOISE_PRIOR_SCALE)
        return -total if np.isfinite(total) else big

    base = np.zeros(layout["size"])
    base[layout["beta"].start] = INTERCEPT_LOCS[0]
    base[layout["gamma"].start] = INTERCEPT_LOCS[1]
    base[layout["delta"].start] = INTERCEPT_LOCS[2]
    base[layout["ltau2"]] = 0.0
    base[layout["noise"]] = np.asarray(eb).ravel()

    rng = np.random.default_rng(seed)
    starts = [base]
    for _ in range(restarts - 1):
        jittered = base.copy()
        jittered += 0.3 * rng.standard_normal(base.size)
        starts.append(jittered)

    best = None
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        for x0 in starts:
            res = minimize(
                neg_log_joint,
                x0,
                method="L-BFGS-B",
                options={"maxiter": maxiter, "maxfun": 200000},
            )
            if res.fun < big and (best is None or res.fun < best.fun):
                best = res
    if best is None:
        raise EstimationError("no joint-fit restart reached a finite objective")
    params = _params_from_vector(best.x, layout, ids)
    object.__setattr__(params, "log_joint", float(-best.fun))
    return params


def experiment_posterior(cp: CovariateParams, ds: DissolutionDataset, x, grid,
                         q: int = 2) -> GpPosterior:
    """Posterior for a fitted experiment, conditioning on its own data."""
    key = ds.group_label if ds.group_label in cp.noise_ab else None
    if key is None:
        raise DataError(f"no fitted noise line for experiment {ds.group_label!r}")
    a, b = cp.noise_ab[key]
    return fit_posterior(ds, hyperparams_at(cp, x, a, b), grid, q=q)


def extrapolate_experiment(cp: CovariateParams, x_new, grid,
                           q: int = 2) -> GpPosterior:
    """Prior predictive GP for an unseen experiment at covariates ``x_new``.

    No data from the new experiment enters; the noise line is the average of
    the fitted per-experiment lines.
    """
    a, b = cp.average_noise()
    return prior_gp(hyperparams_at(cp, x_new, a, b), grid, q=q)


def simulate_covariate_study(
    cp: CovariateParams,
    design: CovariateDesign,
    times,
    n_units: int = 3,
    noise_variance: float = 1.0,
    seed: int = 0,
) -> list[tuple[DissolutionDataset, np.ndarray]]:
    """Synthetic multi-experiment study drawn from known covariate parameters."""
    times = np.asarray(times, dtype=float)
    out = []
    for i, eid in enumerate(design.experiment_ids):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        x = design.x[i]
        mean = covariate_logistic(times, x, cp)
        values = mean + rng.standard_normal((n_units, times.size)) * math.sqrt(
            noise_variance
        )
        ds = DissolutionDataset(
            eid, times, values, tuple(f"{eid}-u{j + 1}" for j in range(n_units))
        )
        out.append((ds, x))
    return out
