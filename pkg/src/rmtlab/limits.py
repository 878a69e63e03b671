"""Samplers for the limiting laws of rescaled outliers.

Three families appear:

* ``mu * N(0, v)`` for a rank-one deformation along a coordinate vector,
* eigenvalues of ``U* (W_K + H_K) U`` when the eigenvectors live on a fixed
  number ``K`` of coordinates (non-universal),
* GU(O)E(k, tau) eigenvalues when the eigenvectors spread out (universal).

All samplers accept ``size`` and return a leading batch axis when it is given.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .distributions import EntryLaw, RngStream, sample_gaussian
from .ensembles import (Field, Geometry, SpikeSpec, as_field, build_spike_frame,
                        sample_coupling_blocks, sample_wigner, split_blocks)
from .spectral import resolvent_quadratic, resolvent_solver
from .theory import guoe_tau, h_variance_profile, rho_theta, v_theta

_ORTHO_TOL = 1e-12


class DiagConvention(str, enum.Enum):
    """Which diagonal law the real rank-one limit uses.

    ``THEOREM_TWO_ONE``: ``W_11 = sqrt(2) X`` with ``X ~ mu`` (the Wigner
    normalization of the real diagonal). ``THEOREM_ONE``: ``W_11 ~ mu``.
    The complex field is unaffected.
    """

    THEOREM_ONE = "TheoremOne"
    THEOREM_TWO_ONE = "TheoremTwoOne"


def real_diag_scale(field: Field, convention=DiagConvention.THEOREM_TWO_ONE) -> float:
    field = as_field(field)
    if field is Field.COMPLEX:
        return 1.0
    return math.sqrt(2.0) if DiagConvention(convention) is DiagConvention.THEOREM_TWO_ONE else 1.0


def sample_convolution_law(law: EntryLaw, v: float, rng: RngStream, size=None):
    """``X + G`` with ``X ~ law`` and independent ``G ~ N(0, v)``."""
    if v < 0:
        raise ValueError(f"variance must be non-negative, got {v}")
    return law.sample(rng, size) + sample_gaussian(0.0, v, rng, size)


def _gaussian_hermitian(kdim, s_diag, s_off, field: Field, rng: RngStream, size=None):
    """Centered Gaussian Hermitian matrices with diagonal variance ``s_diag``
    and off-diagonal ``E|H_pl|^2 = s_off``."""
    shape = (() if size is None else (size,)) + (kdim, kdim)
    g = rng.gen
    iu = np.triu_indices(kdim, 1)
    if field is Field.REAL:
        H = np.zeros(shape)
        H[..., iu[0], iu[1]] = g.normal(0.0, math.sqrt(s_off), shape[:-2] + (iu[0].size,))
        H = H + np.swapaxes(H, -1, -2)
    else:
        H = np.zeros(shape, dtype=np.complex128)
        sd = math.sqrt(s_off / 2)
        n = shape[:-2] + (iu[0].size,)
        H[..., iu[0], iu[1]] = g.normal(0.0, sd, n) + 1j * g.normal(0.0, sd, n)
        H = H + np.conj(np.swapaxes(H, -1, -2))
    d = np.arange(kdim)
    H[..., d, d] = g.normal(0.0, math.sqrt(s_diag), shape[:-2] + (kdim,))
    return H


def sample_guoe(kdim: int, tau: float, field, rng: RngStream, size=None) -> np.ndarray:
    """GU(O)E(kdim, tau): off-diagonal ``E|H_pl|^2 = tau``, diagonal variance ``(t/2) tau``."""
    if kdim < 1 or not tau > 0:
        raise ValueError("need kdim >= 1 and tau > 0")
    field = as_field(field)
    return _gaussian_hermitian(kdim, field.t / 2 * tau, tau, field, rng, size)


def _check_frame(U):
    U = np.atleast_2d(np.asarray(U))
    k = U.shape[1]
    if not np.allclose(U.conj().T @ U, np.eye(k), atol=_ORTHO_TOL, rtol=0):
        raise ValueError("frame columns are not orthonormal")
    return U


def _wigner_batch(K, law: EntryLaw, field: Field, rng: RngStream, size, diag_scale):
    shape = (() if size is None else (size,)) + (K, K)
    iu = np.triu_indices(K, 1)
    n = shape[:-2] + (iu[0].size,)
    if field is Field.REAL:
        W = np.zeros(shape)
        W[..., iu[0], iu[1]] = law.sample(rng, n)
        W = W + np.swapaxes(W, -1, -2)
    else:
        W = np.zeros(shape, dtype=np.complex128)
        W[..., iu[0], iu[1]] = (law.sample(rng, n) + 1j * law.sample(rng, n)) / math.sqrt(2.0)
        W = W + np.conj(np.swapaxes(W, -1, -2))
    d = np.arange(K)
    W[..., d, d] = diag_scale * law.sample(rng, shape[:-2] + (K,))
    return W


def _descending_eigs(V):
    return np.linalg.eigvalsh(V)[..., ::-1]


def frame_v_matrix(U, law: EntryLaw, theta: float, sigma: float, field, rng: RngStream,
                   size=None, *, wigner: bool = True, gaussian: bool = True,
                   convention=DiagConvention.THEOREM_TWO_ONE) -> np.ndarray:
    """Draw ``V = U* (W_K + H_K) U``.

    ``W_K`` is a ``K x K`` Wigner matrix with entry law ``law``; ``H_K`` is an
    independent Gaussian Hermitian matrix with diagonal variance ``v_pp`` and
    off-diagonal variance ``v_pl``. ``wigner=False`` / ``gaussian=False`` drop
    the corresponding summand.
    """
    field = as_field(field)
    U = _check_frame(U).astype(field.dtype)
    K = U.shape[0]
    X = 0.0
    if wigner:
        X = X + _wigner_batch(K, law, field, rng, size, real_diag_scale(field, convention))
    if gaussian:
        vpp, vpl = h_variance_profile(theta, sigma, law.m4, field.t)
        X = X + _gaussian_hermitian(K, vpp, vpl, field, rng, size)
    if not (wigner or gaussian):
        shape = (() if size is None else (size,)) + (K, K)
        X = np.zeros(shape, dtype=field.dtype)
    V = np.conj(U.T) @ X @ U
    return (V + np.conj(np.swapaxes(V, -1, -2))) / 2


def sample_limit_V_case_a(U, law: EntryLaw, theta: float, sigma: float, field, rng: RngStream,
                          size=None, **kwargs) -> np.ndarray:
    """Descending eigenvalues of ``U* (W_K + H_K) U`` (see :func:`frame_v_matrix`)."""
    return _descending_eigs(frame_v_matrix(U, law, theta, sigma, field, rng, size, **kwargs))


# --- dispatch ----------------------------------------------------------------

class LimitKind(str, enum.Enum):
    CONVOLUTION = "convolution"
    GUOE = "guoe"
    FRAME_V = "frame_v"


@dataclass(frozen=True)
class LimitLaw:
    """A sampleable limiting law for the rescaled outliers of one spike."""

    kind: LimitKind
    field: Field
    law: EntryLaw | None = None
    v: float = 0.0
    kdim: int = 1
    tau: float = 0.0
    U: np.ndarray | None = None
    theta: float = 0.0
    sigma: float = 1.0
    convention: DiagConvention = DiagConvention.THEOREM_TWO_ONE

    @classmethod
    def convolution(cls, law: EntryLaw, v: float, field=Field.COMPLEX):
        return cls(LimitKind.CONVOLUTION, as_field(field), law=law, v=v)

    @classmethod
    def guoe(cls, kdim: int, tau: float, field):
        return cls(LimitKind.GUOE, as_field(field), kdim=kdim, tau=tau)

    @classmethod
    def frame_v(cls, U, law: EntryLaw, theta: float, sigma: float, field,
                convention=DiagConvention.THEOREM_TWO_ONE):
        U = np.atleast_2d(np.asarray(U))
        return cls(LimitKind.FRAME_V, as_field(field), law=law, kdim=U.shape[1], U=U,
                   theta=theta, sigma=sigma, convention=DiagConvention(convention))

    @property
    def dim(self) -> int:
        return 1 if self.kind is LimitKind.CONVOLUTION else self.kdim

    def describe(self) -> dict:
        out = {"kind": self.kind.value, "field": self.field.value, "dim": self.dim}
        if self.kind is LimitKind.CONVOLUTION:
            out.update(law=self.law.name, v=self.v)
        elif self.kind is LimitKind.GUOE:
            out.update(tau=self.tau)
        else:
            out.update(law=self.law.name, theta=self.theta, sigma=self.sigma,
                       K=int(self.U.shape[0]), convention=self.convention.value)
        return out


def sample_limit_eigs(limit: LimitLaw, rng: RngStream, size=None) -> np.ndarray:
    """Descending eigenvalue vector(s) of length ``limit.dim`` drawn from ``limit``."""
    if limit.kind is LimitKind.CONVOLUTION:
        x = sample_convolution_law(limit.law, limit.v, rng, size)
        return np.asarray(x, dtype=float)[..., None]
    if limit.kind is LimitKind.GUOE:
        return _descending_eigs(sample_guoe(limit.kdim, limit.tau, limit.field, rng, size))
    return sample_limit_V_case_a(limit.U, limit.law, limit.theta, limit.sigma, limit.field,
                                 rng, size, convention=limit.convention)


def entry_variances(U, s_diag: float, s_off: float, field) -> np.ndarray:
    """Exact ``E|V_ab|^2`` for ``V = U* X U``.

    ``X`` is a centered Hermitian matrix with independent entries (up to
    symmetry): diagonal variance ``s_diag`` and off-diagonal ``E|X_pl|^2 =
    s_off`` (circular in the complex case).
    """
    field = as_field(field)
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    K = U.shape[0]
    Uc = U.conj()
    out = s_diag * np.einsum("pa,pb->ab", np.abs(U) ** 2, np.abs(U) ** 2)
    p, l = np.triu_indices(K, 1)
    re = np.einsum("na,nb->nab", Uc[p], U[l]) + np.einsum("na,nb->nab", Uc[l], U[p])
    re_var = s_off if field is Field.REAL else s_off / 2
    out = out + re_var * (np.abs(re) ** 2).sum(axis=0)
    if field is Field.COMPLEX:
        im = 1j * (np.einsum("na,nb->nab", Uc[p], U[l]) - np.einsum("na,nb->nab", Uc[l], U[p]))
        out = out + s_off / 2 * (np.abs(im) ** 2).sum(axis=0)
    return out


def limit_entry_variances(U, law: EntryLaw, theta: float, sigma: float, field,
                          convention=DiagConvention.THEOREM_TWO_ONE) -> np.ndarray:
    """``E|V_ab|^2`` of the non-universal limit ``U* (W_K + H_K) U``."""
    field = as_field(field)
    vpp, vpl = h_variance_profile(theta, sigma, law.m4, field.t)
    w_diag = real_diag_scale(field, convention) ** 2 * law.sigma2
    return entry_variances(U, w_diag + vpp, law.sigma2 + vpl, field)


def guoe_entry_variances(kdim: int, tau: float, field) -> np.ndarray:
    field = as_field(field)
    out = np.full((kdim, kdim), tau)
    np.fill_diagonal(out, field.t / 2 * tau)
    return out


# --- finite-N intermediate -----------------------------------------------------

@dataclass
class DeformedModel:
    """Everything needed to sample ``M_N = W_N / sqrt(N) + A_N``."""

    N: int
    field: Field
    law: EntryLaw
    spec: SpikeSpec

    def __post_init__(self):
        self.field = as_field(self.field)

    @cached_property
    def built(self):
        return build_spike_frame(self.spec, self.N, self.field)

    @property
    def A(self) -> np.ndarray:
        return self.built[0]

    @property
    def frame(self):
        return self.built[1]

    @property
    def k(self) -> int:
        return self.spec.k_coords(self.N)

    def sample(self, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
        """``(W, M)`` for one replication."""
        W = sample_wigner(self.N, self.field, self.law, rng)
        return W, W / math.sqrt(self.N) + self.A


def minor_resolvent(model: DeformedModel, W_rest: np.ndarray, theta: float):
    """Cholesky factor of ``rho_theta - M_{N-k}`` for the minor built from ``W_rest``.

    Raises :class:`~rmtlab.spectral.PoleError` when ``rho_theta`` is not above
    the minor's spectrum.
    """
    k = model.k
    M_minor = W_rest / math.sqrt(model.N) + model.A[k:, k:]
    return resolvent_solver(M_minor, rho_theta(theta, model.spec.sigma))


def b_from_blocks(model: DeformedModel, W_k: np.ndarray, Y: np.ndarray, factor,
                  theta: float) -> np.ndarray:
    """``W_k + (Y G Y* - (N-k) sigma^2/theta I_k) / sqrt(N)`` for a factored resolvent ``G``."""
    N, k, sigma = model.N, model.k, model.spec.sigma
    centred = resolvent_quadratic(factor, Y) - (N - k) * sigma**2 / theta * np.eye(k)
    return W_k + centred / math.sqrt(N)


def finite_B(model: DeformedModel, W: np.ndarray, theta: float) -> np.ndarray:
    """``B_{k,N}`` from a full Wigner draw ``W`` (see :func:`b_from_blocks`)."""
    W_k, Y, W_rest = split_blocks(W, model.k)
    return b_from_blocks(model, W_k, Y, minor_resolvent(model, W_rest, theta), theta)


def project_block(model: DeformedModel, B: np.ndarray, j: int) -> np.ndarray:
    """``U_j* [B]_{K_j} U_j`` restricted to spike ``j``'s coordinate block."""
    blk = model.frame.block(j)
    U = model.frame.frames[j]
    V = U.conj().T @ B[blk, blk] @ U
    return (V + V.conj().T) / 2


def _check_target(model: DeformedModel, j: int):
    if not model.spec.spikes[j].theta > model.spec.sigma:
        raise ValueError(f"spike {j} is not supercritical")
    if model.k >= model.N:
        raise ValueError("need k < N")


def empirical_V_finite_N(model: DeformedModel, j: int, rng: RngStream) -> np.ndarray:
    """The ``k_j x k_j`` matrix ``U_j* [B_{k,N}]_{K_j} U_j`` for supercritical spike ``j``."""
    _check_target(model, j)
    W = sample_wigner(model.N, model.field, model.law, rng)
    return project_block(model, finite_B(model, W, model.spec.spikes[j].theta), j)


def empirical_V_shared_minor(model: DeformedModel, j: int, rng: RngStream,
                             draws: int) -> list[np.ndarray]:
    """``draws`` copies of ``V_{k_j,N}`` sharing one minor ``W_{N-k}``.

    Each copy gets fresh coupling blocks ``(W_k, Y)``. Averages of any
    function of one copy keep the expectation of :func:`empirical_V_finite_N`;
    only their Monte Carlo variance changes.
    """
    _check_target(model, j)
    theta = model.spec.spikes[j].theta
    k, n = model.k, model.N - model.k
    W_rest = sample_wigner(n, model.field, model.law, rng)
    factor = minor_resolvent(model, W_rest, theta)
    out = []
    for _ in range(draws):
        W_k, Y = sample_coupling_blocks(k, n, model.field, model.law, rng)
        out.append(project_block(model, b_from_blocks(model, W_k, Y, factor, theta), j))
    return out


def auto_limit(model: DeformedModel, j: int, convention=DiagConvention.THEOREM_TWO_ONE) -> LimitLaw:
    """Limit law implied by spike ``j``'s eigenvector geometry.

    A single coordinate vector gives the convolution law; a fixed frame
    (canonical with ``k_j > 1``, explicit, or spread over a fixed ``K``) gives
    ``U* (W + H) U``; a spread frame whose size grows with ``N`` gives GU(O)E.
    """
    spec, field, law = model.spec, model.field, model.law
    spike = spec.spikes[j]
    sigma = spec.sigma
    if spike.geometry is Geometry.SPREAD and spike.K_exponent is not None:
        return LimitLaw.guoe(spike.k, guoe_tau(spike.theta, sigma), field)
    U = model.frame.frames[j]
    if U.shape == (1, 1):
        diag_law = law.scaled(real_diag_scale(field, convention))
        return LimitLaw.convolution(diag_law, v_theta(spike.theta, sigma, law.m4, field.t), field)
    return LimitLaw.frame_v(U, law, spike.theta, sigma, field, convention)


def limit_entry_profile(limit: LimitLaw) -> np.ndarray:
    """``E|V_ab|^2`` of the matrix whose eigenvalues ``limit`` describes."""
    if limit.kind is LimitKind.CONVOLUTION:
        return np.array([[limit.law.sigma2 + limit.v]])
    if limit.kind is LimitKind.GUOE:
        return guoe_entry_variances(limit.kdim, limit.tau, limit.field)
    return limit_entry_variances(limit.U, limit.law, limit.theta, limit.sigma, limit.field,
                                 limit.convention)
