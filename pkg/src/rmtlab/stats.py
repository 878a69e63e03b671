"""Two-sample Kolmogorov-Smirnov test and small estimator helpers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class KSReport:
    d: float
    n: int
    m: int
    p_value: float

    def to_dict(self) -> dict:
        return asdict(self)


def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """Survival function ``Q(lam) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2)``.

    For small ``lam`` the alternating series converges slowly, so the
    Jacobi-theta form ``1 - sqrt(2 pi)/lam sum exp(-(2k-1)^2 pi^2 / (8 lam^2))``
    is summed instead. Either series stops once a term drops below ``tol``.
    """
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        s, k = 0.0, 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * lam**2))
            s += term
            if term < tol:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * s))
    s, k = 0.0, 1
    while True:
        term = math.exp(-2 * k**2 * lam**2)
        s += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_statistic(a, b) -> float:
    """Exact ``sup_x |F_a(x) - F_b(x)|`` over the merged sample.

    Evaluating both right-continuous ECDFs at every distinct data value
    processes ties jointly, so tied atoms never create spurious gaps.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def ks_two_sample(a, b) -> KSReport:
    """Two-sample KS test with the asymptotic Kolmogorov p-value."""
    d = ks_statistic(a, b)
    n, m = np.size(a), np.size(b)
    lam = d * math.sqrt(n * m / (n + m))
    return KSReport(d=d, n=int(n), m=int(m), p_value=kolmogorov_sf(lam))


def sample_moments(a) -> tuple[float, float, float, float]:
    """``(mean, unbiased variance, skewness, excess kurtosis)``; moment-ratio estimators.

    Needs two observations; skewness and kurtosis are NaN below four.
    """
    a = np.asarray(a, dtype=float).ravel()
    if a.size < 2:
        raise ValueError("need at least 2 observations")
    mean = a.mean()
    c = a - mean
    m2 = np.mean(c**2)
    var = c @ c / (a.size - 1)
    if a.size < 4:
        return float(mean), float(var), math.nan, math.nan
    if m2 == 0:
        return float(mean), 0.0, 0.0, 0.0
    skew = np.mean(c**3) / m2**1.5
    kurt = np.mean(c**4) / m2**2 - 3.0
    return float(mean), float(var), float(skew), float(kurt)


def empirical_covariance(vectors) -> np.ndarray:
    """Unbiased sample covariance of a sequence of d-vectors (rows)."""
    X = np.asarray(vectors)
    if X.ndim != 2:
        raise ValueError("vectors must all have the same dimension")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 vectors")
    c = X - X.mean(axis=0)
    S = c.conj().T @ c / (X.shape[0] - 1)
    return (S + S.conj().T) / 2


def qq_pairs(a, b, q: int) -> np.ndarray:
    """``q`` matched quantile pairs at levels ``0, 1/(q-1), ..., 1`` (linear interpolation)."""
    if q < 2:
        raise ValueError("q must be at least 2")
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    levels = np.linspace(0.0, 1.0, q)
    return np.column_stack([np.quantile(a, levels), np.quantile(b, levels)])
