"""Stationary hierarchical GP baseline with Gibbs-sampled variances.

Model: each unit curve is a GP around a shared latent mean curve, with a
Matern-3/2 kernel (scale sigma2, range phi) for the unit-level variation and
a squared-exponential kernel (scale tau2, range psi) with zero prior mean for
the latent curve. sigma2 and tau2 carry conjugate inverse-gamma priors and are
Gibbs-sampled; the ranges are either fixed or updated by random-walk
Metropolis-Hastings on the log scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import chol_lower, cho_solve_lower, chol_with_jitter, psd_sqrt
from .dataset import DissolutionDataset
from .errors import DataError
from .kernels import CtgpHyperparams, matern32_corr, sqexp_corr

# random-walk proposal step on log(phi), log(psi)
MH_STEP = 0.2
# log-normal priors on the ranges, centred at the default values
PHI_PRIOR_LOC = np.log(5.0)
PSI_PRIOR_LOC = np.log(25.0)
RANGE_PRIOR_SCALE = 1.0


@dataclass(frozen=True)
class CtgpChain:
    """Retained Gibbs draws (post burn-in, after thinning)."""

    times: np.ndarray
    ybar: np.ndarray
    n_units: int
    hyper: CtgpHyperparams
    sigma2: np.ndarray          # (kept,)
    tau2: np.ndarray            # (kept,)
    f: np.ndarray               # (kept, p) latent mean at observed times
    phi: np.ndarray | None      # (kept,) when lengthscales are sampled
    psi: np.ndarray | None
    burn_in: int
    thinning: int
    seed: int
    accept_rate_phi: float | None
    accept_rate_psi: float | None
    warnings: tuple[str, ...]

    @property
    def n_kept(self) -> int:
        return self.sigma2.size

    def lengthscales_fixed(self) -> bool:
        return self.phi is None


def _mean_cov_f(ybar, n, Ht, Ct, sigma2, tau2):
    # f | ybar, sigma2, tau2 with prior N(0, tau2 Ht), noise sigma2 Ct / n
    H = tau2 * Ht
    V = H + (sigma2 / n) * Ct
    Lv, _ = chol_with_jitter(V)
    w = cho_solve_lower(Lv, H)          # V^-1 H
    mean = w.T @ ybar
    cov = H - H @ w
    return mean, 0.5 * (cov + cov.T)


def _loglik_y_given_f(Y, f, sigma2, Lc_corr, logdet_corr):
    # sum_j log N(y_j; f, sigma2 * C)
    n, p = Y.shape
    r = Y - f
    q = float(np.sum(r * cho_solve_lower(Lc_corr, r.T).T))
    return -0.5 * (
        n * p * np.log(2.0 * np.pi * sigma2) + n * logdet_corr + q / sigma2
    )


def _logpdf_f(f, tau2, Lh_corr, logdet_corr):
    p = f.size
    q = float(f @ cho_solve_lower(Lh_corr, f))
    return -0.5 * (p * np.log(2.0 * np.pi * tau2) + logdet_corr + q / tau2)


def ctgp_fit(
    ds: DissolutionDataset,
    h0: CtgpHyperparams | None = None,
    iters: int = 3000,
    burn_in: int = 1000,
    seed: int = 0,
    sample_lengthscales: bool = False,
    thinning: int = 1,
) -> CtgpChain:
    """Run the Gibbs sampler (optionally with MH updates of the ranges)."""
    if not iters > burn_in >= 0:
        raise DataError("need iters > burn_in >= 0")
    if thinning < 1:
        raise DataError("thinning must be >= 1")
    h0 = h0 or CtgpHyperparams()
    rng = np.random.default_rng(seed)
    times = ds.times
    Y = ds.values
    n, p = Y.shape
    ybar = Y.mean(axis=0)

    phi, psi = h0.phi, h0.psi
    Ct = matern32_corr(times, phi=phi)
    Ht = sqexp_corr(times, psi=psi)
    Lc, _ = chol_with_jitter(Ct)
    Lh, _ = chol_with_jitter(Ht)
    logdet_c = 2.0 * float(np.sum(np.log(np.diag(Lc))))
    logdet_h = 2.0 * float(np.sum(np.log(np.diag(Lh))))

    sigma2, tau2 = h0.sigma2, h0.tau2
    f = ybar.copy()

    kept = range(burn_in, iters, thinning)
    n_kept = len(kept)
    out_s2 = np.empty(n_kept)
    out_t2 = np.empty(n_kept)
    out_f = np.empty((n_kept, p))
    out_phi = np.empty(n_kept) if sample_lengthscales else None
    out_psi = np.empty(n_kept) if sample_lengthscales else None
    acc_phi = acc_psi = 0
    k = 0

    for it in range(iters):
        # latent mean given variances
        mean, cov = _mean_cov_f(ybar, n, Ht, Ct, sigma2, tau2)
        Lf, _ = chol_with_jitter(cov)
        f = mean + Lf @ rng.standard_normal(p)

        # conjugate inverse-gamma updates
        r = Y - f
        q_obs = float(np.sum(r * cho_solve_lower(Lc, r.T).T))
        sigma2 = 1.0 / rng.gamma(h0.ig_alpha + n * p / 2.0, 1.0 / (h0.ig_beta + 0.5 * q_obs))
        q_lat = float(f @ cho_solve_lower(Lh, f))
        tau2 = 1.0 / rng.gamma(h0.ig_alpha + p / 2.0, 1.0 / (h0.ig_beta + 0.5 * q_lat))

        if sample_lengthscales:
            # phi moves the unit-level kernel only
            prop = float(np.exp(np.log(phi) + MH_STEP * rng.standard_normal()))
            Ct_p = matern32_corr(times, phi=prop)
            try:
                Lc_p = chol_lower(Ct_p + 1e-10 * np.eye(p))
                ld_p = 2.0 * float(np.sum(np.log(np.diag(Lc_p))))
                cur = _loglik_y_given_f(Y, f, sigma2, Lc, logdet_c)
                new = _loglik_y_given_f(Y, f, sigma2, Lc_p, ld_p)
                cur += -0.5 * ((np.log(phi) - PHI_PRIOR_LOC) / RANGE_PRIOR_SCALE) ** 2
                new += -0.5 * ((np.log(prop) - PHI_PRIOR_LOC) / RANGE_PRIOR_SCALE) ** 2
                if np.log(rng.uniform()) < new - cur:
                    phi, Ct, Lc, logdet_c = prop, Ct_p, Lc_p, ld_p
                    acc_phi += 1
            except np.linalg.LinAlgError:
                pass

            # psi moves the latent-mean kernel only
            prop = float(np.exp(np.log(psi) + MH_STEP * rng.standard_normal()))
            Ht_p = sqexp_corr(times, psi=prop)
            try:
                Lh_p = chol_lower(Ht_p + 1e-10 * np.eye(p))
                ld_p = 2.0 * float(np.sum(np.log(np.diag(Lh_p))))
                cur = _logpdf_f(f, tau2, Lh, logdet_h)
                new = _logpdf_f(f, tau2, Lh_p, ld_p)
                cur += -0.5 * ((np.log(psi) - PSI_PRIOR_LOC) / RANGE_PRIOR_SCALE) ** 2
                new += -0.5 * ((np.log(prop) - PSI_PRIOR_LOC) / RANGE_PRIOR_SCALE) ** 2
                if np.log(rng.uniform()) < new - cur:
                    psi, Ht, Lh, logdet_h = prop, Ht_p, Lh_p, ld_p
                    acc_psi += 1
            except np.linalg.LinAlgError:
                pass

        if it >= burn_in and (it - burn_in) % thinning == 0:
            out_s2[k] = sigma2
            out_t2[k] = tau2
            out_f[k] = f
            if sample_lengthscales:
                out_phi[k] = phi
                out_psi[k] = psi
            k += 1

    warn = []
    rate_phi = rate_psi = None
    if sample_lengthscales:
        rate_phi = acc_phi / iters
        rate_psi = acc_psi / iters
        for name, rate in (("phi", rate_phi), ("psi", rate_psi)):
            if not 0.05 <= rate <= 0.95:
                warn.append(f"MH acceptance rate for {name} = {rate:.3f} outside [0.05, 0.95]")

    return CtgpChain(
        times=times,
        ybar=ybar,
        n_units=n,
        hyper=h0,
        sigma2=out_s2,
        tau2=out_t2,
        f=out_f,
        phi=out_phi,
        psi=out_psi,
        burn_in=burn_in,
        thinning=thinning,
        seed=seed,
        accept_rate_phi=rate_phi,
        accept_rate_psi=rate_psi,
        warnings=tuple(warn),
    )


def _extension_operator(times, grid, psi):
    # conditional of the latent prior at grid given its values at times;
    # tau2 cancels in the mean and factors out of the covariance
    Ht = sqexp_corr(times, psi=psi)
    Hgt = sqexp_corr(grid, times, psi=psi)
    Hgg = sqexp_corr(grid, psi=psi)
    Lh, _ = chol_with_jitter(Ht)
    a = cho_solve_lower(Lh, Hgt.T).T          # grid x p
    resid = Hgg - a @ Hgt.T
    return a, psd_sqrt(resid)


def ctgp_sample_f(chain: CtgpChain, grid, seed=0, m: int | None = None) -> np.ndarray:
    """Per-iteration posterior draws of the latent curve at ``grid``.

    One row per retained iteration (or ``m`` evenly thinned rows when given),
    each drawn from the Gaussian conditional of that iteration's variances.
    The grid should include the observed times when the draws feed an
    f2-style statistic on the union grid.
    """
    if chain.n_kept == 0:
        raise DataError("chain holds no retained iterations")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    if m is None or m >= chain.n_kept:
        idx = np.arange(chain.n_kept)
    else:
        idx = np.unique(np.round(np.linspace(0, chain.n_kept - 1, m)).astype(int))

    times = chain.times
    n = chain.n_units
    draws = np.empty((idx.size, grid.size))

    if chain.lengthscales_fixed():
        psi = chain.hyper.psi
        phi = chain.hyper.phi
        a, root = _extension_operator(times, grid, psi)
        Ht = sqexp_corr(times, psi=psi)
        Ct = matern32_corr(times, phi=phi)
        for row, i in enumerate(idx):
            mean, cov = _mean_cov_f(chain.ybar, n, Ht, Ct, chain.sigma2[i], chain.tau2[i])
            Lf, _ = chol_with_jitter(cov)
            f_obs = mean + Lf @ rng.standard_normal(times.size)
            z = rng.standard_normal(grid.size)
            draws[row] = a @ f_obs + np.sqrt(chain.tau2[i]) * (root @ z)
    else:
        cache: dict[tuple[float, float], tuple] = {}
        for row, i in enumerate(idx):
            phi, psi = float(chain.phi[i]), float(chain.psi[i])
            key = (phi, psi)
            if key not in cache:
                cache[key] = (
                    _extension_operator(times, grid, psi),
                    sqexp_corr(times, psi=psi),
                    matern32_corr(times, phi=phi),
                )
            (a, root), Ht, Ct = cache[key]
            mean, cov = _mean_cov_f(chain.ybar, n, Ht, Ct, chain.sigma2[i], chain.tau2[i])
            Lf, _ = chol_with_jitter(cov)
            f_obs = mean + Lf @ rng.standard_normal(times.size)
            z = rng.standard_normal(grid.size)
            draws[row] = a @ f_obs + np.sqrt(chain.tau2[i]) * (root @ z)
    return draws
