"""End-to-end pipelines tying fitting and testing together for one comparison."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ctgp import CtgpChain, ctgp_fit, ctgp_sample_f
from .dataset import DissolutionDataset, check_validity, ValidityReport
from .errors import DataError
from .estimation import map_fit
from .gp import GpPosterior, fit_posterior
from .similarity import (
    DeltaResult,
    F2Posterior,
    MsdResult,
    _paired_draws,
    comparison_grid,
    delta_from_paths,
    f2_from_paths,
    lsgp_msd,
    summarize_f2_samples,
    tsong_msd,
    union_grid,
)

ALL_TESTS = ("f2", "delta", "msd-tsong", "msd-lsgp")


@dataclass(frozen=True)
class ComparisonReport:
    """Everything one reference/test comparison produces."""

    model: str
    validity: ValidityReport
    f2: F2Posterior | None = None
    delta: DeltaResult | None = None
    msd_tsong: MsdResult | None = None
    msd_lsgp: MsdResult | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"model": self.model, "validity": self.validity.to_dict()}
        for name in ("f2", "delta", "msd_tsong", "msd_lsgp"):
            val = getattr(self, name)
            out[name] = val.to_dict() if val is not None else None
        out.update(self.details)
        return out


def compare_datasets(
    ref: DissolutionDataset,
    test: DissolutionDataset,
    model: str = "lsgp",
    tests: tuple[str, ...] = ALL_TESTS,
    grid_r: int = 500,
    samples_m: int = 1000,
    seed: int = 0,
    restarts: int = 10,
    ctgp_iters: int = 3000,
    ctgp_burn_in: int = 1000,
    sample_lengthscales: bool = False,
) -> ComparisonReport:
    """Fit both groups with the chosen model and run the requested tests."""
    bad = set(tests) - set(ALL_TESTS)
    if bad:
        raise DataError(f"unknown tests {sorted(bad)}")
    if model not in ("lsgp", "ctgp"):
        raise DataError(f"unknown model {model!r}")
    if model == "ctgp" and "msd-lsgp" in tests:
        raise DataError("the posterior MSD test requires the lsgp model")

    validity = check_validity(ref, test)
    times = ref.times
    report: dict = {}
    f2 = delta = msd_l = None
    msd_t = tsong_msd(ref, test) if "msd-tsong" in tests else None

    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(6)]

    if model == "lsgp":
        fit_r = map_fit(ref, restarts=restarts, seed=seeds[0])
        fit_t = map_fit(test, restarts=restarts, seed=seeds[1])
        report["hyperparams"] = {
            "R": list(fit_r.hyperparams.as_array()),
            "T": list(fit_t.hyperparams.as_array()),
        }
        grid = comparison_grid(times, grid_r)
        post_r = fit_posterior(ref, fit_r.hyperparams, grid)
        post_t = fit_posterior(test, fit_t.hyperparams, grid)
        if "f2" in tests or "delta" in tests:
            fr, ft = _paired_draws(post_r, post_t, samples_m, seeds[2])
            if "f2" in tests:
                f2 = summarize_f2_samples(f2_from_paths(fr, ft))
            if "delta" in tests:
                delta = delta_from_paths(fr, ft)
        if "msd-lsgp" in tests:
            obs_r = fit_posterior(ref, fit_r.hyperparams, times)
            obs_t = fit_posterior(test, fit_t.hyperparams, times)
            msd_l = lsgp_msd(obs_r, obs_t)
    else:
        chain_r = ctgp_fit(ref, iters=ctgp_iters, burn_in=ctgp_burn_in,
                           seed=seeds[0], sample_lengthscales=sample_lengthscales)
        chain_t = ctgp_fit(test, iters=ctgp_iters, burn_in=ctgp_burn_in,
                           seed=seeds[1], sample_lengthscales=sample_lengthscales)
        report["chain"] = {
            "R": chain_summary(chain_r),
            "T": chain_summary(chain_t),
        }
        grid = union_grid(times, grid_r)
        fr = ctgp_sample_f(chain_r, grid, seed=seeds[2], m=samples_m)
        ft = ctgp_sample_f(chain_t, grid, seed=seeds[3], m=samples_m)
        if "f2" in tests:
            f2 = summarize_f2_samples(f2_from_paths(fr, ft))
        if "delta" in tests:
            delta = delta_from_paths(fr, ft)

    return ComparisonReport(
        model=model,
        validity=validity,
        f2=f2,
        delta=delta,
        msd_tsong=msd_t,
        msd_lsgp=msd_l,
        details=report,
    )


def chain_summary(chain: CtgpChain) -> dict:
    out = {
        "sigma2_mean": float(chain.sigma2.mean()),
        "tau2_mean": float(chain.tau2.mean()),
        "kept": int(chain.n_kept),
        "warnings": list(chain.warnings),
    }
    if chain.phi is not None:
        out["phi_mean"] = float(chain.phi.mean())
        out["psi_mean"] = float(chain.psi.mean())
        out["accept_rate_phi"] = chain.accept_rate_phi
        out["accept_rate_psi"] = chain.accept_rate_psi
    return out


def curve_series(post: GpPosterior, include_noise: bool = False) -> list[dict]:
    """Plot-ready rows (t, mean, lower95, upper95) from a posterior."""
    lo, hi = post.credible_band(0.95, include_noise=include_noise)
    return [
        {"t": float(t), "mean": float(m), "lower95": float(a), "upper95": float(b)}
        for t, m, a, b in zip(post.grid, post.mean, lo, hi)
    ]


def fit_series(
    ds: DissolutionDataset,
    model: str = "lsgp",
    grid_r: int = 500,
    seed: int = 0,
    restarts: int = 10,
    ctgp_iters: int = 3000,
    ctgp_burn_in: int = 1000,
    sample_lengthscales: bool = False,
) -> tuple[dict, list[dict]]:
    """Fit one group and return (summary, plot series at r grid points)."""
    grid = comparison_grid(ds.times, grid_r)
    if model == "lsgp":
        fit = map_fit(ds, restarts=restarts, seed=seed)
        post = fit_posterior(ds, fit.hyperparams, grid)
        summary = {
            "model": "lsgp",
            "hyperparams": {
                "alpha1": fit.hyperparams.alpha1,
                "alpha2": fit.hyperparams.alpha2,
                "beta": fit.hyperparams.beta,
                "tau2": fit.hyperparams.tau2,
                "a": fit.hyperparams.a,
                "b": fit.hyperparams.b,
            },
            "log_joint": fit.log_joint,
            "restart_index": fit.restart_index,
            "converged": fit.converged,
        }
        return summary, curve_series(post)
    if model == "ctgp":
        chain = ctgp_fit(ds, iters=ctgp_iters, burn_in=ctgp_burn_in, seed=seed,
                         sample_lengthscales=sample_lengthscales)
        draws = ctgp_sample_f(chain, grid, seed=seed + 1, m=min(1000, chain.n_kept))
        mean = draws.mean(axis=0)
        lo, hi = np.percentile(draws, [2.5, 97.5], axis=0)
        series = [
            {"t": float(t), "mean": float(m), "lower95": float(a), "upper95": float(b)}
            for t, m, a, b in zip(grid, mean, lo, hi)
        ]
        return {"model": "ctgp", **chain_summary(chain)}, series
    raise DataError(f"unknown model {model!r}")
