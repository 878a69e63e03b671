"""Eigenvalue extraction, outlier rescaling and resolvent functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .ensembles import SpikeSpec
from .theory import c_theta, rho_theta


class SpectralError(ValueError):
    pass


class PoleError(SpectralError):
    """The evaluation point lies inside the spectrum."""


def eigenvalues_sorted(H: np.ndarray) -> np.ndarray:
    """All eigenvalues of the Hermitian matrix ``H`` in descending order."""
    H = np.asarray(H)
    if not np.all(np.isfinite(H)):
        raise SpectralError("matrix has non-finite entries")
    return sla.eigvalsh(H, check_finite=False)[::-1]


def top_eigenvalues(H: np.ndarray, m: int) -> np.ndarray:
    """The ``m`` largest eigenvalues of ``H``, descending.

    Uses Lanczos iteration with a fixed starting vector, so the result is a
    deterministic function of ``H``. Small matrices, or cases where Lanczos
    does not converge, fall back to the dense solver.
    """
    H = np.asarray(H)
    N = H.shape[0]
    if m >= N - 1 or N < 64:
        return eigenvalues_sorted(H)[:m]
    if not np.all(np.isfinite(H)):
        raise SpectralError("matrix has non-finite entries")
    v0 = np.ones(N, dtype=H.dtype) / math.sqrt(N)
    try:
        vals = eigsh(H, k=m, which="LA", v0=v0, tol=0,
                     ncv=min(N, max(2 * m + 1, 20)), return_eigenvectors=False)
    except ArpackNoConvergence:
        return eigenvalues_sorted(H)[:m]
    return np.sort(vals)[::-1]


@dataclass
class FluctuationRecord:
    """Rescaled outliers ``c_theta sqrt(N) (lambda - rho_theta)`` of one replication.

    ``xi[j]`` and ``lam[j]`` are keyed by spike index (0-based, supercritical
    spikes only); ``ranks[j]`` are the 1-based eigenvalue ranks used.
    """

    N: int
    replication: int
    xi: dict = field(default_factory=dict)
    lam: dict = field(default_factory=dict)
    ranks: dict = field(default_factory=dict)


def rescale_fluctuations(eigs, spec: SpikeSpec, N: int, replication: int = 0) -> FluctuationRecord:
    """Pick each supercritical spike's ``k_j`` outliers by rank and rescale them.

    Spike ``j`` uses ranks ``k_1 + ... + k_{j-1} + 1`` through
    ``k_1 + ... + k_j`` (supercritical spikes only). A spec without
    supercritical spikes gives an empty record.
    """
    eigs = np.asarray(eigs, dtype=float)
    rec = FluctuationRecord(N=N, replication=replication)
    sigma = spec.sigma
    for j in spec.supercritical:
        s = spec.spikes[j]
        lo = spec.rank_offset(j)
        if lo + s.k > eigs.size:
            raise SpectralError(f"need {lo + s.k} eigenvalues, got {eigs.size}")
        lam = eigs[lo:lo + s.k]
        rho = rho_theta(s.theta, sigma)
        rec.lam[j] = lam.copy()
        rec.xi[j] = c_theta(s.theta, sigma) * math.sqrt(N) * (lam - rho)
        rec.ranks[j] = list(range(lo + 1, lo + s.k + 1))
    return rec


def default_delta(spec: SpikeSpec) -> float:
    """Outlier margin: a quarter of the gap between the smallest outlier limit and 2 sigma."""
    sup = spec.supercritical
    if not sup:
        raise SpectralError("no supercritical spike")
    theta_min = min(spec.spikes[j].theta for j in sup)
    return (rho_theta(theta_min, spec.sigma) - 2 * spec.sigma) / 4


def count_outliers(eigs, sigma: float, delta: float) -> tuple[int, int]:
    """Numbers of eigenvalues above ``2 sigma + delta`` and below ``-2 sigma - delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    eigs = np.asarray(eigs)
    edge = 2 * sigma + delta
    return int(np.count_nonzero(eigs > edge)), int(np.count_nonzero(eigs < -edge))


@dataclass(frozen=True)
class ResolventTraces:
    """Normalized traces of the resolvent ``G(rho) = (rho - M)^-1`` of a minor."""

    tr1: float
    tr2: float
    diag2: float


def resolvent_traces(M_minor: np.ndarray, rho: float) -> ResolventTraces:
    """``tr G``, ``tr G^2`` and the mean squared diagonal of ``G`` at ``rho``.

    Computed from the eigendecomposition ``M = V diag(l) V*``; the diagonal of
    ``G`` is ``sum_a |V_ia|^2 / (rho - l_a)``.
    """
    lam, V = sla.eigh(M_minor, check_finite=False)
    if not rho > lam[-1]:
        raise PoleError(f"rho={rho} does not exceed the top eigenvalue {lam[-1]}")
    g = 1.0 / (rho - lam)
    n = lam.size
    diag = (np.abs(V) ** 2) @ g
    return ResolventTraces(tr1=float(g.sum() / n), tr2=float((g**2).sum() / n),
                           diag2=float((diag**2).sum() / n))


def resolvent_solver(M_minor: np.ndarray, rho: float):
    """Cholesky factor of ``rho - M``; raises :class:`PoleError` unless ``rho > lambda_1(M)``.

    Positive definiteness of ``rho - M`` is equivalent to ``rho`` lying above
    the spectrum, so a successful factorization doubles as the pole check.
    """
    n = M_minor.shape[0]
    shifted = -M_minor
    shifted[np.diag_indices(n)] += rho
    try:
        return sla.cho_factor(shifted, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise PoleError(f"rho={rho} is not above the spectrum of the minor") from None


def resolvent_quadratic(factor, Y: np.ndarray) -> np.ndarray:
    """``Y G Y*`` for the factored resolvent ``G`` and a ``k x n`` matrix ``Y``."""
    Z = sla.cho_solve(factor, Y.conj().T, check_finite=False)
    out = Y @ Z
    return (out + out.conj().T) / 2
