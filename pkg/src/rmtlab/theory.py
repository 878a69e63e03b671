"""Closed-form limits for outliers of deformed Wigner matrices.

Conventions: ``t = 4`` for real symmetric and ``t = 2`` for complex Hermitian
matrices; ``m4`` is the fourth moment of the entry law. GU(O)E(k, tau) has
off-diagonal ``E|H_pl|^2 = tau`` and diagonal ``E H_pp^2 = (t/2) tau``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


class TheoryError(ValueError):
    """Raised when a closed form is evaluated outside its domain."""


def _check_t(t):
    if t not in (2, 4):
        raise TheoryError(f"t must be 2 (complex) or 4 (real), got {t}")


def _check_supercritical(theta, sigma):
    if sigma <= 0:
        raise TheoryError(f"sigma must be positive, got {sigma}")
    if abs(theta) <= sigma:
        raise TheoryError(f"need |theta| > sigma, got theta={theta}, sigma={sigma}")


def rho_theta(theta: float, sigma: float) -> float:
    """Almost-sure outlier location ``theta + sigma**2 / theta``."""
    if theta == 0:
        raise TheoryError("theta must be nonzero")
    return theta + sigma**2 / theta


def c_theta(theta: float, sigma: float) -> float:
    """Fluctuation scale ``theta**2 / (theta**2 - sigma**2)``."""
    _check_supercritical(theta, sigma)
    return theta**2 / (theta**2 - sigma**2)


def v_theta(theta: float, sigma: float, m4: float, t: int) -> float:
    """Variance of the Gaussian part of the rank-one limit."""
    _check_supercritical(theta, sigma)
    _check_t(t)
    s4 = sigma**4
    if m4 < s4 * (1 - 1e-12):
        raise TheoryError(f"m4={m4} violates m4 >= sigma**4")
    return t / 4 * (m4 - 3 * s4) / theta**2 + t / 2 * s4 / (theta**2 - sigma**2)


def h_variance_profile(theta: float, sigma: float, m4: float, t: int) -> tuple[float, float]:
    """Diagonal and off-diagonal variances ``(v_pp, v_pl)`` of the Gaussian matrix H."""
    v_pp = v_theta(theta, sigma, m4, t)
    v_pl = sigma**4 / (theta**2 - sigma**2)
    return v_pp, v_pl


def guoe_tau(theta: float, sigma: float) -> float:
    """GU(O)E parameter ``theta**2 sigma**2 / (theta**2 - sigma**2)`` of the spread case."""
    _check_supercritical(theta, sigma)
    return theta**2 * sigma**2 / (theta**2 - sigma**2)


def semicircle_density(x, sigma: float):
    """Semicircle density of variance ``sigma**2`` (vectorized in ``x``)."""
    if sigma <= 0:
        raise TheoryError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=float)
    inside = np.clip(4 * sigma**2 - x**2, 0.0, None)
    out = np.sqrt(inside) / (2 * math.pi * sigma**2)
    return float(out) if out.ndim == 0 else out


def semicircle_cdf(x, sigma: float):
    """Closed-form CDF of the semicircle law on ``[-2 sigma, 2 sigma]``."""
    u = np.clip(np.asarray(x, dtype=float) / (2 * sigma), -1.0, 1.0)
    out = 0.5 + (u * np.sqrt(1 - u**2) + np.arcsin(u)) / math.pi
    return float(out) if out.ndim == 0 else out


def resolvent_limits(theta: float, sigma: float) -> tuple[float, float, float]:
    """Limits of ``tr G(rho)``, ``tr G(rho)^2`` and the mean squared diagonal of G(rho)."""
    if not theta > sigma:
        raise TheoryError(f"need theta > sigma, got theta={theta}, sigma={sigma}")
    return 1.0 / theta, 1.0 / (theta**2 - sigma**2), 1.0 / theta**2


@dataclass(frozen=True)
class TheoryValues:
    theta: float
    sigma: float
    m4: float
    t: int
    rho: float
    c: float
    v: float
    tau_guoe: float
    h_vpp: float
    h_vpl: float
    stieltjes1: float
    stieltjes2: float
    diag2_limit: float

    def to_dict(self) -> dict:
        return asdict(self)


def theory_values(theta: float, sigma: float, m4: float, t: int) -> TheoryValues:
    """Every closed-form quantity for one supercritical spike."""
    vpp, vpl = h_variance_profile(theta, sigma, m4, t)
    s1, s2, d2 = resolvent_limits(theta, sigma)
    return TheoryValues(
        theta=theta, sigma=sigma, m4=m4, t=t,
        rho=rho_theta(theta, sigma), c=c_theta(theta, sigma),
        v=v_theta(theta, sigma, m4, t), tau_guoe=guoe_tau(theta, sigma),
        h_vpp=vpp, h_vpl=vpl, stieltjes1=s1, stieltjes2=s2, diag2_limit=d2,
    )


# --- CLT for random sesquilinear forms -------------------------------------

@dataclass(frozen=True)
class SesquilinearCovariance:
    """Limit covariance of ``n**-1/2 (X(l)* A Y(l) - rho(l) Tr A)``, l = 1..K.

    ``tr2n`` and ``tr2tn`` are the limits of ``Tr A^2 / n`` and
    ``Tr A A^T / n``; ``omega`` is the limit of ``sum_i a_ii^2 / n``.
    ``B`` satisfies ``E exp(c^T G) = exp(c^T B c / 2)``, so for real data it
    is the covariance matrix of the limit vector G.
    """

    omega: float
    tr2n: float
    tr2tn: float
    rho: np.ndarray
    cross_xy: np.ndarray
    xx: np.ndarray
    yy: np.ndarray
    fourth: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    B3: np.ndarray

    @property
    def B(self) -> np.ndarray:
        return self.B1 + self.B2 + self.B3


def sesquilinear_covariance(omega, tr2n, tr2tn, rho, cross_xy, xx, yy, fourth,
                            psd_tol: float = 1e-10) -> SesquilinearCovariance:
    """Assemble ``B = B1 + B2 + B3`` from the moments of one row ``(x_1, y_1)``.

    Moment arrays (K = number of forms):

    - ``rho[l] = E[conj(x_l) y_l]``
    - ``cross_xy[l, m] = E[conj(x_l) y_m]``
    - ``xx[l, m] = E[conj(x_l) conj(x_m)]``, ``yy[l, m] = E[y_l y_m]``
    - ``fourth[l, m] = E[conj(x_l) y_l conj(x_m) y_m]``
    """
    rho = np.atleast_1d(np.asarray(rho))
    K = rho.shape[0]
    arrays = [np.asarray(a).reshape(K, K) for a in (cross_xy, xx, yy, fourth)]
    cross_xy, xx, yy, fourth = arrays
    for name, a in zip(("cross_xy", "xx", "yy", "fourth"), arrays):
        if not np.all(np.isfinite(a)):
            raise TheoryError(f"non-finite moment input {name}")
    if all(np.isrealobj(a) for a in arrays):
        # real data: xx, yy diagonals are E x_l^2, E y_m^2
        bound = np.outer(np.diag(xx), np.diag(yy))
        if np.any(cross_xy**2 > bound * (1 + 1e-9) + 1e-300):
            raise TheoryError("cross moments violate Cauchy-Schwarz")
    B1 = omega * (fourth - np.outer(rho, rho))
    B2 = (tr2n - omega) * cross_xy * cross_xy.T
    B3 = (tr2tn - omega) * xx * yy
    out = SesquilinearCovariance(float(omega), float(tr2n), float(tr2tn), rho,
                                 cross_xy, xx, yy, fourth, B1, B2, B3)
    B = out.B
    if not np.allclose(B, B.T, atol=psd_tol, rtol=0):
        raise TheoryError("B is not symmetric; moment inputs are inconsistent")
    if np.isrealobj(B):
        lo = np.linalg.eigvalsh((B + B.T) / 2).min()
        if lo < -psd_tol * max(1.0, np.abs(B).max()):
            raise TheoryError(f"B is not positive semidefinite (min eigenvalue {lo:.3e})")
    return out


def mixing_moments(P, Q, m2: float, m4: float):
    """Row moments for real forms with ``x = P z`` and ``y = Q z``.

    ``z`` has i.i.d. symmetric coordinates with second moment ``m2`` and fourth
    moment ``m4``. Returns ``(rho, cross_xy, xx, yy, fourth)`` in the layout of
    :func:`sesquilinear_covariance`.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if P.shape != Q.shape:
        raise TheoryError("mixing matrices must have the same shape")
    cross = m2 * P @ Q.T
    xx = m2 * P @ P.T
    yy = m2 * Q @ Q.T
    rho = np.diag(cross).copy()
    # E[z_a z_b z_c z_d] = m2^2 (d_ab d_cd + d_ac d_bd + d_ad d_bc) + (m4 - 3 m2^2) d_abcd
    # applied to x_l y_l x_m y_m = P_la Q_lb P_mc Q_md z_a z_b z_c z_d
    pq = P * Q
    fourth = (np.outer(rho, rho) + cross * cross.T + xx * yy) \
        + (m4 - 3 * m2**2) * pq @ pq.T
    return rho, cross, xx, yy, fourth
