"""Mean functions, warped spline kernels, stationary kernels and noise model.

The spline kernel family evaluates the integrated-Wiener covariance
``W_q`` on inputs warped through a logistic mean. With the identity warp it
reduces to the plain linear (q=1) or cubic (q=2) spline kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import ABS_JITTER_FLOOR, MAX_REL_JITTER, REL_JITTER, chol_lower
from .errors import ConditioningError, DataError


@dataclass(frozen=True)
class LsgpHyperparams:
    """Hyperparameters of the logistic-spline GP.

    ``alpha1, alpha2, beta`` parameterise the logistic mean (percent scale,
    shape, rate per minute); ``tau2`` scales the kernel; ``a, b`` are the
    intercept and slope of the log-linear noise variance.
    """

    alpha1: float
    alpha2: float
    beta: float
    tau2: float
    a: float
    b: float

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0 and self.beta > 0):
            raise DataError("alpha1, alpha2, beta must be positive")
        if not self.tau2 >= 0:
            raise DataError("tau2 must be nonnegative")
        vals = (self.alpha1, self.alpha2, self.beta, self.tau2, self.a, self.b)
        if not all(np.isfinite(v) for v in vals):
            raise DataError("hyperparameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.alpha1, self.alpha2, self.beta, self.tau2, self.a, self.b]
        )


@dataclass(frozen=True)
class CtgpHyperparams:
    """Hyperparameters of the stationary baseline GP.

    Defaults follow the usual configuration: Matern-3/2 range ``phi=5``,
    squared-exponential range ``psi=25`` and an inverse-gamma(10, 3) prior on
    both variances.
    """

    sigma2: float = 1.0
    tau2: float = 1.0
    phi: float = 5.0
    psi: float = 25.0
    ig_alpha: float = 10.0
    ig_beta: float = 3.0

    def __post_init__(self):
        vals = (self.sigma2, self.tau2, self.phi, self.psi, self.ig_alpha, self.ig_beta)
        if not all(v > 0 and np.isfinite(v) for v in vals):
            raise DataError("all stationary-GP hyperparameters must be positive")


def logistic_mean(t, h: LsgpHyperparams):
    """Logistic mean alpha1 / (1 + alpha2 * exp(-beta * t))."""
    t = np.asarray(t, dtype=float)
    return h.alpha1 / (1.0 + h.alpha2 * np.exp(-h.beta * t))


def noise_variance(t, h: LsgpHyperparams):
    """Heteroskedastic noise variance exp(a + b t)."""
    t = np.asarray(t, dtype=float)
    return np.exp(h.a + h.b * t)


def wiener_kernel(q: int, s, s2):
    """Integrated-Wiener covariance W_q at warped inputs (q = 1 or 2).

    q=1 gives min(s, s'); q=2 gives v^3/3 + v^2/2 |s - s'| with v = min(s, s').
    """
    s = np.asarray(s, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if np.any(s < 0) or np.any(s2 < 0):
        raise DataError("wiener kernel inputs must be nonnegative")
    v = np.minimum(s, s2)
    if q == 1:
        return v
    if q == 2:
        return v**3 / 3.0 + 0.5 * v**2 * np.abs(s - s2)
    raise DataError(f"q must be 1 or 2, got {q}")


def wiener_gram(q: int, s, s2=None):
    """Gram matrix of W_q over warped input vectors (no positivity check)."""
    s = np.asarray(s, dtype=float)
    s2 = s if s2 is None else np.asarray(s2, dtype=float)
    a = s[:, None]
    b = s2[None, :]
    v = np.minimum(a, b)
    if q == 1:
        return v
    return v**3 / 3.0 + 0.5 * v**2 * np.abs(a - b)


def dissolution_spline_kernel(t, t2, h: LsgpHyperparams, q: int = 2):
    """tau2-scaled W_q evaluated on logistic-warped times."""
    return h.tau2 * wiener_kernel(q, logistic_mean(t, h), logistic_mean(t2, h))


def linear_warp_kernel(t, t2, tau2: float, q: int = 2):
    """Spline kernel with the identity warp; test entry point for W_q itself."""
    return tau2 * wiener_kernel(q, t, t2)


def matern32(t, t2, sigma2: float, phi: float):
    """Matern-3/2 kernel sigma2 (1 + sqrt(3)|dt|/phi) exp(-sqrt(3)|dt|/phi)."""
    r = np.abs(np.asarray(t, dtype=float) - np.asarray(t2, dtype=float))
    z = np.sqrt(3.0) * r / phi
    return sigma2 * (1.0 + z) * np.exp(-z)


def squared_exponential(t, t2, tau2: float, psi: float):
    """Squared-exponential kernel tau2 exp(-(dt)^2 / (2 psi^2))."""
    d = np.asarray(t, dtype=float) - np.asarray(t2, dtype=float)
    return tau2 * np.exp(-(d**2) / (2.0 * psi**2))


def stationary_kernel(kind: str, t, t2, h: CtgpHyperparams):
    """Dispatch on kind: 'matern32' (sigma2, phi) or 'sqexp' (tau2, psi)."""
    if kind == "matern32":
        return matern32(t, t2, h.sigma2, h.phi)
    if kind == "sqexp":
        return squared_exponential(t, t2, h.tau2, h.psi)
    raise DataError(f"unknown stationary kernel {kind!r}")


def matern32_corr(t, t2=None, phi: float = 5.0):
    """Unit-variance Matern-3/2 correlation matrix."""
    t = np.asarray(t, dtype=float)
    t2 = t if t2 is None else np.asarray(t2, dtype=float)
    return matern32(t[:, None], t2[None, :], 1.0, phi)


def sqexp_corr(t, t2=None, psi: float = 25.0):
    """Unit-variance squared-exponential correlation matrix."""
    t = np.asarray(t, dtype=float)
    t2 = t if t2 is None else np.asarray(t2, dtype=float)
    return squared_exponential(t[:, None], t2[None, :], 1.0, psi)


@dataclass(frozen=True)
class GramMatrices:
    """Prior moments of the model at the observed grid.

    ``K`` is the (jittered) kernel matrix, ``D`` the diagonal noise matrix,
    ``V = K + D/n`` the covariance of the averaged observations, ``mu`` the
    prior mean. ``chol_v`` caches the lower Cholesky factor of ``V`` and
    ``jitter`` the diagonal amount added to ``K``.
    """

    K: np.ndarray
    D: np.ndarray
    V: np.ndarray
    mu: np.ndarray
    chol_v: np.ndarray
    jitter: float
    n_units: int

    @property
    def noise_diag(self) -> np.ndarray:
        return np.diag(self.D)


def assemble_gram(mu, warped, noise, tau2: float, n: int, q: int = 2) -> GramMatrices:
    """Build GramMatrices from precomputed mean, warped inputs and noise.

    Jitter starts at 1e-10 trace(K)/p on K's diagonal and escalates tenfold
    until V factors, failing past 1e-4 relative.
    """
    mu = np.asarray(mu, dtype=float)
    warped = np.asarray(warped, dtype=float)
    noise = np.asarray(noise, dtype=float)
    p = mu.size
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(warped))
            and np.all(np.isfinite(noise))):
        raise ConditioningError("non-finite prior moments")
    K = tau2 * wiener_gram(q, warped)
    scale = float(np.trace(K)) / p
    base = REL_JITTER * scale
    eye = np.eye(p)
    d_over_n = noise / n
    jitter = base
    tried = []
    while True:
        Kj = K + jitter * eye if jitter > 0.0 else K
        V = Kj + np.diag(d_over_n)
        try:
            L = chol_lower(V)
            return GramMatrices(Kj, np.diag(noise), V, mu, L, jitter, n)
        except np.linalg.LinAlgError:
            tried.append(jitter)
            jitter = max(jitter, ABS_JITTER_FLOOR) * 10.0
            if jitter > max(MAX_REL_JITTER * scale, ABS_JITTER_FLOOR * 1e4):
                tried.append(jitter)
                raise ConditioningError(
                    "V = K + D/n not positive definite", jitter_levels=tried
                ) from None


def build_gram(times, h: LsgpHyperparams, n: int, q: int = 2) -> GramMatrices:
    """Gram matrices of the logistic-spline GP at the observed times."""
    times = np.asarray(times, dtype=float)
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise DataError("times must be strictly increasing")
    if n < 1:
        raise DataError("n must be at least 1")
    mu = logistic_mean(times, h)
    return assemble_gram(mu, mu, noise_variance(times, h), h.tau2, n, q)
