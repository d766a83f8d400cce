"""Profile-comparison statistics: f2 variants, delta test and MSD tests.

All posterior-based statistics consume Gaussian posteriors (or raw sample
paths) produced by the model modules, so the same machinery serves both the
logistic-spline model and the stationary baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.stats import chi2 as chi2_dist
from scipy.stats import f as f_dist

from ._linalg import chol_with_jitter, cho_solve_lower
from .dataset import (
    AverageProfile,
    DissolutionDataset,
    pooled_covariance,
)
from .errors import (
    DataError,
    GridMismatchError,
    InsufficientReplicationError,
)
from .gp import GpPosterior, sample_posterior

DELTA_SIMILARITY_LIMIT = 15.0  # max percent gap allowed by the delta test
MSD_TOLERANCE_PER_POINT = 10.0  # accepted percent variation per time point


@dataclass(frozen=True)
class F2Config:
    """Settings for f2 statistics."""

    weights: np.ndarray | None = None  # defaults to all ones
    threshold: float = 50.0
    grid_r: int = 500
    samples_m: int = 1000

    def __post_init__(self):
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0):
                raise DataError("f2 weights must be positive")
            object.__setattr__(self, "weights", w)
        if self.grid_r < 2 or self.samples_m < 1:
            raise DataError("need grid_r >= 2 and samples_m >= 1")


@dataclass(frozen=True)
class F2Posterior:
    """Monte-Carlo posterior of the integral f2 statistic."""

    samples: np.ndarray
    mean: float
    interval: tuple[float, float]  # central 95%
    probability_similar: float     # fraction of samples >= threshold
    threshold: float = 50.0

    def to_dict(self) -> dict:
        return {
            "method": "f2-posterior",
            "point_estimate": self.mean,
            "interval": list(self.interval),
            "probability": self.probability_similar,
            "decision": bool(self.mean >= self.threshold),
            "config": {"threshold": self.threshold, "samples": int(self.samples.size)},
        }


@dataclass(frozen=True)
class DeltaResult:
    """Posterior of the maximum absolute gap between the two curves."""

    samples: np.ndarray
    probability_similar: float     # fraction of samples < 15
    threshold: float = DELTA_SIMILARITY_LIMIT

    def to_dict(self) -> dict:
        return {
            "method": "delta-max-gap",
            "point_estimate": float(np.mean(self.samples)),
            "interval": [float(v) for v in np.percentile(self.samples, [2.5, 97.5])],
            "probability": self.probability_similar,
            "decision": bool(self.probability_similar >= 0.5),
            "config": {"threshold": self.threshold, "samples": int(self.samples.size)},
        }


@dataclass(frozen=True)
class MsdResult:
    """Multivariate-distance similarity decision."""

    d_point: float
    d_upper: float
    d_limit: float
    quantile: float                # the F or chi-squared quantile used
    decision: bool                 # similar iff d_upper <= d_limit
    variant: str                   # "tsong" | "lsgp"
    d_lower: float | None = None   # only for the sample-based variant
    jitter: float = 0.0            # diagonal jitter added to S, if any

    def to_dict(self) -> dict:
        return {
            "method": f"msd-{self.variant}",
            "point_estimate": self.d_point,
            "interval": [self.d_lower, self.d_upper],
            "probability": None,
            "decision": bool(self.decision),
            "config": {
                "quantile": self.quantile,
                "jitter": self.jitter,
                "d_limit": self.d_limit,
            },
        }


def comparison_grid(times, r: int = 500) -> np.ndarray:
    """r equally spaced points spanning the observed interval."""
    times = np.asarray(times, dtype=float)
    return np.linspace(times[0], times[-1], r)


def union_grid(times, r: int = 500) -> np.ndarray:
    """Comparison grid joined with the observed times (stationary baseline)."""
    return np.unique(np.concatenate([comparison_grid(times, r), np.asarray(times, float)]))


def _f2_from_msq(msq):
    return 50.0 * np.log10(100.0 * (1.0 + msq) ** -0.5)


def f2_discrete(ref_profile: AverageProfile, test_profile: AverageProfile,
                cfg: F2Config = F2Config()) -> float:
    """Classic f2 on two average profiles sharing a time grid."""
    if ref_profile.times.size != test_profile.times.size or not np.array_equal(
        ref_profile.times, test_profile.times
    ):
        raise GridMismatchError("average profiles must share the time grid")
    diff2 = (ref_profile.means - test_profile.means) ** 2
    w = cfg.weights if cfg.weights is not None else np.ones_like(diff2)
    if w.size != diff2.size:
        raise DataError("weights length must equal the number of time points")
    return float(_f2_from_msq(np.mean(w * diff2)))


def f2_integral_truth(curve_r, curve_t, t1: float, tp: float) -> float:
    """f2 of two evaluable curves from the exact mean-squared integral."""
    val, _ = quad(
        lambda t: (curve_r(t) - curve_t(t)) ** 2,
        t1,
        tp,
        epsabs=1e-10,
        epsrel=1e-10,
        limit=500,
    )
    return float(_f2_from_msq(val / (tp - t1)))


def f2_from_paths(paths_r: np.ndarray, paths_t: np.ndarray) -> np.ndarray:
    """Per-sample f2 of paired sample paths (columns are grid points)."""
    paths_r = np.atleast_2d(paths_r)
    paths_t = np.atleast_2d(paths_t)
    if paths_r.shape != paths_t.shape:
        raise GridMismatchError("sample path matrices must have equal shape")
    msq = np.mean((paths_r - paths_t) ** 2, axis=1)
    return _f2_from_msq(msq)


def summarize_f2_samples(samples: np.ndarray, threshold: float = 50.0) -> F2Posterior:
    samples = np.asarray(samples, dtype=float)
    lo, hi = np.percentile(samples, [2.5, 97.5])
    return F2Posterior(
        samples=samples,
        mean=float(samples.mean()),
        interval=(float(lo), float(hi)),
        probability_similar=float(np.mean(samples >= threshold)),
        threshold=threshold,
    )


def _paired_draws(ref_post: GpPosterior, test_post: GpPosterior, m: int, seed):
    if ref_post.grid.size != test_post.grid.size or not np.allclose(
        ref_post.grid, test_post.grid
    ):
        raise GridMismatchError("posteriors must share the prediction grid")
    rng = np.random.default_rng(seed)
    fr = sample_posterior(ref_post, m, rng)
    ft = sample_posterior(test_post, m, rng)
    return fr, ft


def f2_posterior(ref_post: GpPosterior, test_post: GpPosterior,
                 cfg: F2Config = F2Config(), seed=0) -> F2Posterior:
    """Posterior f2 from paired independent draws of the two fitted curves."""
    fr, ft = _paired_draws(ref_post, test_post, cfg.samples_m, seed)
    return summarize_f2_samples(f2_from_paths(fr, ft), cfg.threshold)


def delta_from_paths(paths_r: np.ndarray, paths_t: np.ndarray) -> DeltaResult:
    """Delta test from precomputed paired sample paths."""
    paths_r = np.atleast_2d(paths_r)
    paths_t = np.atleast_2d(paths_t)
    if paths_r.shape != paths_t.shape:
        raise GridMismatchError("sample path matrices must have equal shape")
    deltas = np.max(np.abs(paths_r - paths_t), axis=1)
    return DeltaResult(
        samples=deltas,
        probability_similar=float(np.mean(deltas < DELTA_SIMILARITY_LIMIT)),
    )


def delta_test(ref_post: GpPosterior, test_post: GpPosterior, m: int = 1000,
               seed=0) -> DeltaResult:
    """Posterior of max |f_R - f_T| over the grid with the 15%-gap rule."""
    fr, ft = _paired_draws(ref_post, test_post, m, seed)
    return delta_from_paths(fr, ft)


def _inv_and_jitter(s: np.ndarray, floor: float = 0.0):
    p = s.shape[0]
    jitter = max(1e-8 * float(np.trace(s)) / p, floor)
    s_j = s + jitter * np.eye(p)
    L, extra = chol_with_jitter(s_j)
    return s_j, L, jitter + extra


def tsong_msd(ref: DissolutionDataset, test: DissolutionDataset,
              alpha: float = 0.10) -> MsdResult:
    """Sample-based multivariate distance test on raw data.

    The confidence region around the observed mean difference is the ellipsoid
    with Mahalanobis radius sqrt(F_quantile / K); its nearest and farthest
    distances from the origin give the interval compared against the limit.
    """
    if ref.n_units != test.n_units:
        raise InsufficientReplicationError("groups must have equal unit counts")
    n = ref.n_units
    p = ref.n_times
    if n < 2:
        raise InsufficientReplicationError("need at least two units per group")
    dof2 = 2 * n - p - 1
    if dof2 <= 0:
        raise InsufficientReplicationError(
            f"degrees of freedom 2n-p-1 = {dof2} must be positive"
        )
    pooled = pooled_covariance(ref, test)
    s_j, L, jitter = _inv_and_jitter(pooled.S)
    dbar = ref.values.mean(axis=0) - test.values.mean(axis=0)
    d_point = float(np.sqrt(dbar @ cho_solve_lower(L, dbar)))
    scaling = (n / 2.0) * (dof2 / ((2.0 * n - 2.0) * p))
    fq = float(f_dist.ppf(1.0 - alpha, p, dof2))
    radius = float(np.sqrt(fq / scaling))
    d_lower = max(0.0, d_point - radius)
    d_upper = d_point + radius
    v = np.full(p, MSD_TOLERANCE_PER_POINT)
    d_limit = float(np.sqrt(v @ cho_solve_lower(L, v)))
    return MsdResult(
        d_point=d_point,
        d_upper=d_upper,
        d_limit=d_limit,
        quantile=fq,
        decision=d_upper <= d_limit,
        variant="tsong",
        d_lower=d_lower,
        jitter=jitter,
    )


def lsgp_msd(ref_post: GpPosterior, test_post: GpPosterior,
             delta: float = 0.10) -> MsdResult:
    """Posterior multivariate distance test at the observed time points.

    The upper bound maximises the Mahalanobis norm over the (1-delta)
    credible ellipsoid of the posterior mean difference; in whitened
    coordinates that maximum is the norm of the centre plus the sphere radius,
    giving d_upper = ||dm||_Sinv + sqrt(chi2_p(1-delta)). The limit is the
    smallest per-time-point tolerance distance min_i sqrt(v_i' S^-1 v_i).
    """
    if ref_post.grid.size != test_post.grid.size or not np.allclose(
        ref_post.grid, test_post.grid
    ):
        raise GridMismatchError("posteriors must share the evaluation grid")
    p = ref_post.grid.size
    s = ref_post.cov + test_post.cov
    # absolute floor keeps the test defined when both posteriors degenerate
    s_j, L, jitter = _inv_and_jitter(s, floor=1e-10)
    dm = ref_post.mean - test_post.mean
    d_point = float(np.sqrt(max(dm @ cho_solve_lower(L, dm), 0.0)))
    cq = float(chi2_dist.ppf(1.0 - delta, df=p))
    d_upper = d_point + float(np.sqrt(cq))
    s_inv_diag = np.diag(cho_solve_lower(L, np.eye(p)))
    d_limit = float(np.min(MSD_TOLERANCE_PER_POINT * np.sqrt(s_inv_diag)))
    return MsdResult(
        d_point=d_point,
        d_upper=d_upper,
        d_limit=d_limit,
        quantile=cq,
        decision=d_upper <= d_limit,
        variant="lsgp",
        jitter=jitter,
    )
