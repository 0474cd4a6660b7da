"""Kernel-weighted time-varying Gaussian model and log-det conditional MI.

The joint feature vector at time ``t`` is modelled as ``N(m_t, S_t)`` with
both moments estimated by an RBF kernel over neighbouring samples.  The
conditional mutual information between index blocks then follows from
Schur complements of ``S_t``.  All information quantities are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, ParameterError

SUPPORT_WIDTHS = 4.0
NEGATIVE_TOL = 1e-9
MODES = ("offline", "causal")
CENTERS = ("per-sample", "per-window")


@dataclass(frozen=True)
class GaussianWindow:
    t: float
    mean: np.ndarray
    cov: np.ndarray
    bandwidth: float
    ridge: float


def rbf_kernel(u, h):
    if not h > 0:
        raise ParameterError(f"bandwidth must be positive, got {h!r}")
    u = np.asarray(u, dtype=float)
    return np.exp(-(u**2) / (2.0 * h * h))


def _as_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("data matrix must be non-empty with shape (T, D)")
    return X


def _times(X, times):
    if times is None:
        return np.arange(X.shape[0], dtype=float)
    times = np.asarray(times, dtype=float)
    if times.shape != (X.shape[0],):
        raise DomainError("times must have one entry per row")
    return times


def kernel_support(times, t, h, mode="offline"):
    """Row indices inside the truncated kernel window around ``t`` and their weights."""
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    d = times - t
    keep = np.abs(d) <= SUPPORT_WIDTHS * h
    if mode == "causal":
        keep &= d <= 0
    idx = np.flatnonzero(keep)
    return idx, rbf_kernel(d[idx], h)


def kernel_mean(X, t, h, *, times=None, mode="offline"):
    """Kernel-weighted mean of the rows of ``X`` around time ``t``."""
    X = _as_matrix(X)
    idx, w = kernel_support(_times(X, times), t, h, mode)
    if idx.size == 0:
        raise DomainError(f"no samples inside the kernel window at t={t}")
    return w @ X[idx] / w.sum()


def kernel_means(X, h, *, times=None, mode="offline"):
    """``kernel_mean`` evaluated at every row's own time."""
    X = _as_matrix(X)
    tt = _times(X, times)
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if np.any(np.diff(tt) < 0):
        return np.array([kernel_mean(X, s, h, times=tt, mode=mode) for s in tt])
    reach = SUPPORT_WIDTHS * h
    lo = np.searchsorted(tt, tt - reach, side="left")
    hi = np.arange(1, len(tt) + 1) if mode == "causal" else np.searchsorted(tt, tt + reach, side="right")
    out = np.empty_like(X)
    for n in range(len(tt)):
        w = rbf_kernel(tt[lo[n]:hi[n]] - tt[n], h)
        out[n] = w @ X[lo[n]:hi[n]] / w.sum()
    return out


def kernel_cov(
    X, t, h, ridge=0.0, *, times=None, mode="offline", center="per-sample", means=None
):
    """Kernel-weighted scatter around ``t`` plus ``ridge`` on the diagonal.

    With ``center="per-sample"`` each row is centred on its own kernel mean
    ``m_i`` before the outer product; ``"per-window"`` centres every row on
    ``m_t``.  ``means`` may pass precomputed per-row means.
    """
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise DomainError("kernel_cov needs at least two samples")
    if center not in CENTERS:
        raise ParameterError(f"center must be one of {CENTERS}, got {center!r}")
    if ridge < 0:
        raise ParameterError("ridge must be non-negative")
    tt = _times(X, times)
    idx, w = kernel_support(tt, t, h, mode)
    if idx.size == 0:
        raise DomainError(f"no samples inside the kernel window at t={t}")
    if center == "per-window":
        R = X[idx] - w @ X[idx] / w.sum()
    elif means is not None:
        R = X[idx] - np.asarray(means, dtype=float)[idx]
    else:
        R = X[idx] - np.array([kernel_mean(X, tt[i], h, times=tt, mode=mode) for i in idx])
    S = (R * w[:, None]).T @ R / w.sum()
    S = 0.5 * (S + S.T)
    if ridge:
        S[np.diag_indices_from(S)] += ridge
    return S


def relative_ridge(cov, scale=1e-6, floor=0.0):
    """Diagonal loading ``scale * trace(cov) / D + floor``."""
    cov = np.asarray(cov, dtype=float)
    return scale * float(np.trace(cov)) / cov.shape[0] + floor


def gaussian_window(X, t, h, *, ridge_scale=1e-6, ridge_floor=0.0, times=None,
                    mode="offline", center="per-sample", means=None):
    X = _as_matrix(X)
    tt = _times(X, times)
    S = kernel_cov(X, t, h, times=tt, mode=mode, center=center, means=means)
    ridge = relative_ridge(S, ridge_scale, ridge_floor)
    S[np.diag_indices_from(S)] += ridge
    m = kernel_mean(X, t, h, times=tt, mode=mode)
    return GaussianWindow(t=t, mean=m, cov=S, bandwidth=h, ridge=ridge)


def _index(ix):
    return np.asarray(list(ix), dtype=np.intp).reshape(-1)


def conditional_cov(cov, Y, Z=()):
    """Schur complement ``cov[Y,Y] - cov[Y,Z] cov[Z,Z]^-1 cov[Z,Y]``."""
    cov = np.asarray(cov, dtype=float)
    Y, Z = _index(Y), _index(Z)
    if np.intersect1d(Y, Z).size:
        raise ParameterError("Y and Z index sets must be disjoint")
    Syy = cov[np.ix_(Y, Y)]
    if Z.size == 0:
        return Syy
    Szz = cov[np.ix_(Z, Z)]
    Syz = cov[np.ix_(Y, Z)]
    try:
        c = np.linalg.cholesky(Szz)
    except np.linalg.LinAlgError:
        raise NumericalError(
            "conditioning block is not positive definite", condition=np.linalg.cond(Szz)
        ) from None
    B = np.linalg.solve(c, Syz.T)
    C = Syy - B.T @ B
    return 0.5 * (C + C.T)


def _logdet(S, what):
    sign, ld = np.linalg.slogdet(S)
    if sign <= 0:
        raise NumericalError(f"{what} is not positive definite", condition=np.linalg.cond(S))
    return ld


def gaussian_cmi(cov, X, Y, Z=()):
    """I(X; Y | Z) in nats for a jointly Gaussian vector with covariance ``cov``.

    Tiny negative results from rounding are clamped to zero; anything below
    ``-NEGATIVE_TOL`` means the blocks did not come from one PD matrix.
    """
    Xi, Yi, Zi = _index(X), _index(Y), _index(Z)
    if np.intersect1d(Xi, Yi).size or np.intersect1d(Xi, Zi).size:
        raise ParameterError("X, Y and Z index sets must be pairwise disjoint")
    given_z = conditional_cov(cov, Yi, Zi)
    given_zx = conditional_cov(cov, Yi, np.concatenate([Zi, Xi]))
    value = 0.5 * (_logdet(given_z, "Sigma_Y|Z") - _logdet(given_zx, "Sigma_Y|Z,X"))
    if value < 0:
        if value < -NEGATIVE_TOL:
            raise NumericalError(f"conditional MI came out negative ({value:.3g})")
        return 0.0
    return float(value)
