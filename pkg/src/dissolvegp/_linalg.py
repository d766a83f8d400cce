"""Internal linear-algebra helpers (jittered factorisations, PSD square roots)."""

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import ConditioningError

# escalation: start at REL_JITTER * scale, multiply by 10, stop past MAX_REL_JITTER * scale
REL_JITTER = 1e-10
MAX_REL_JITTER = 1e-4
ABS_JITTER_FLOOR = 1e-12


def chol_lower(a):
    """Plain lower Cholesky without finite checks; raises np.linalg.LinAlgError."""
    return cholesky(a, lower=True, check_finite=False)


def chol_with_jitter(a, scale=None):
    """Lower Cholesky of ``a``, escalating diagonal jitter on failure.

    ``scale`` sets the relative-jitter unit (defaults to mean diagonal of ``a``).
    Returns ``(L, jitter)``. Raises ConditioningError with the attempted levels.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ConditioningError("matrix contains non-finite entries")
    p = a.shape[0]
    if scale is None:
        scale = np.trace(a) / p
    scale = max(float(scale), 0.0)
    tried = []
    jitter = 0.0
    eye = np.eye(p)
    while True:
        try:
            return cholesky(a + jitter * eye, lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            tried.append(jitter)
            if jitter == 0.0:
                jitter = max(REL_JITTER * scale, ABS_JITTER_FLOOR)
            else:
                jitter *= 10.0
            if jitter > max(MAX_REL_JITTER * scale, ABS_JITTER_FLOOR * 1e4):
                tried.append(jitter)
                raise ConditioningError(
                    "Cholesky factorisation failed", jitter_levels=tried
                ) from None


def cho_solve_lower(L, b):
    """Solve A x = b given the lower Cholesky factor L of A."""
    y = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L, y, lower=True, trans=1, check_finite=False)


def logdet_from_chol(L):
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def psd_sqrt(cov, clip_tol=0.0):
    """Square root of a symmetric PSD matrix via eigendecomposition.

    Negative eigenvalues below ``-clip_tol`` are tolerated but clipped to zero,
    which keeps sampling robust for the nearly rank-deficient posterior
    covariances produced by warped spline kernels.
    """
    cov = np.asarray(cov, dtype=float)
    if not np.all(np.isfinite(cov)):
        raise ConditioningError("covariance contains non-finite entries")
    sym = 0.5 * (cov + cov.T)
    w, u = np.linalg.eigh(sym)
    w = np.clip(w, 0.0, None)
    return u * np.sqrt(w)


def solve_psd(a, b, scale=None):
    """Solve A x = b for symmetric positive (semi)definite A with jitter fallback."""
    L, _ = chol_with_jitter(a, scale=scale)
    return cho_solve_lower(L, b)
