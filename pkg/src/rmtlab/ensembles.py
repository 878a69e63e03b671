"""Wigner matrices, finite-rank deformations and the deformed model.

Normalization follows the usual Wigner convention: in the real case the
off-diagonal entries are distributed as the entry law ``mu`` and the diagonal
entries as ``sqrt(2) * mu``; in the complex case the diagonal entries are
``mu`` and ``sqrt(2) Re W_ij``, ``sqrt(2) Im W_ij`` are independent ``mu``.

Matrices are plain ``numpy`` arrays (``float64`` for the real field,
``complex128`` for the complex field).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import EntryLaw, RngStream

_ORTHO_TOL = 1e-12


class ConstructionError(ValueError):
    """Raised when a deformation cannot be realized as requested."""


class Field(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"

    @property
    def t(self) -> int:
        return 4 if self is Field.REAL else 2

    @property
    def dtype(self):
        return np.float64 if self is Field.REAL else np.complex128


def as_field(value) -> Field:
    if isinstance(value, Field):
        return value
    aliases = {"real": Field.REAL, "realsymmetric": Field.REAL, "goe": Field.REAL,
               "complex": Field.COMPLEX, "complexhermitian": Field.COMPLEX, "gue": Field.COMPLEX}
    try:
        return aliases[str(value).lower().replace("_", "")]
    except KeyError:
        raise ValueError(f"unknown field {value!r}; expected 'real' or 'complex'") from None


def is_hermitian(H: np.ndarray) -> bool:
    """Exact (bitwise) conjugate symmetry."""
    return H.ndim == 2 and H.shape[0] == H.shape[1] and np.array_equal(H, H.conj().T)


def sample_wigner(N: int, field: Field, law: EntryLaw, rng: RngStream) -> np.ndarray:
    """Draw an ``N x N`` Wigner matrix with entry law ``law`` (unnormalized)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    field = as_field(field)
    iu = np.triu_indices(N, 1)
    n_off = iu[0].size
    if field is Field.REAL:
        W = np.zeros((N, N))
        W[iu] = law.sample(rng, n_off)
        W = W + W.T
        W[np.diag_indices(N)] = math.sqrt(2.0) * law.sample(rng, N)
    else:
        W = np.zeros((N, N), dtype=np.complex128)
        re = law.sample(rng, n_off)
        im = law.sample(rng, n_off)
        W[iu] = (re + 1j * im) / math.sqrt(2.0)
        W = W + W.conj().T
        W[np.diag_indices(N)] = law.sample(rng, N)
    return W


def sample_coupling_blocks(k: int, n: int, field: Field, law: EntryLaw, rng: RngStream):
    """Fresh ``(W_k, Y)``: a ``k x k`` Wigner block and the ``k x n`` off-diagonal block.

    Together with an independent ``n x n`` Wigner matrix these have the joint
    law of :func:`split_blocks` applied to an ``(k + n) x (k + n)`` draw.
    """
    field = as_field(field)
    W_k = sample_wigner(k, field, law, rng)
    if field is Field.REAL:
        Y = law.sample(rng, (k, n))
    else:
        Y = (law.sample(rng, (k, n)) + 1j * law.sample(rng, (k, n))) / math.sqrt(2.0)
    return W_k, Y


# --- deformations ------------------------------------------------------------

class Geometry(str, enum.Enum):
    CANONICAL = "canonical"
    SPREAD = "spread"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class Spike:
    """One eigenvalue ``theta`` of the deformation with multiplicity ``k``.

    ``geometry`` fixes the eigenvectors inside a block of ``K`` canonical
    coordinates: ``CANONICAL`` uses ``K = k`` coordinate vectors, ``SPREAD``
    uses the first ``k`` columns of the orthonormal DCT-II basis of size ``K``
    (``K`` given directly or as ``floor(N ** K_exponent)``) and ``EXPLICIT``
    takes a user supplied ``K x k`` frame.
    """

    theta: float
    k: int = 1
    geometry: Geometry = Geometry.CANONICAL
    K: int | None = None
    K_exponent: float | None = None
    frame: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "geometry", Geometry(self.geometry))
        if self.k < 1:
            raise ConstructionError("multiplicity must be positive")
        if self.geometry is Geometry.SPREAD and (self.K is None) == (self.K_exponent is None):
            raise ConstructionError("spread geometry needs exactly one of K, K_exponent")
        if self.geometry is Geometry.EXPLICIT:
            if self.frame is None:
                raise ConstructionError("explicit geometry needs a frame")
            U = np.asarray(self.frame)
            if U.ndim != 2 or U.shape[1] != self.k:
                raise ConstructionError(f"frame must be K x {self.k}, got shape {U.shape}")
            object.__setattr__(self, "frame", U)

    def block_size(self, N: int) -> int:
        if self.geometry is Geometry.CANONICAL:
            return self.k
        if self.geometry is Geometry.EXPLICIT:
            return self.frame.shape[0]
        if self.K is not None:
            return int(self.K)
        return int(math.floor(N ** self.K_exponent + 1e-9))

    def column_frame(self, N: int) -> np.ndarray:
        """The ``K x k`` orthonormal eigenvector frame."""
        K = self.block_size(N)
        if K < self.k:
            raise ConstructionError(f"block size K={K} smaller than multiplicity k={self.k}")
        if self.geometry is Geometry.CANONICAL:
            return np.eye(K)
        if self.geometry is Geometry.SPREAD:
            return dct_frame(K)[:, : self.k]
        U = self.frame
        gram = U.conj().T @ U
        if not np.allclose(gram, np.eye(self.k), atol=_ORTHO_TOL, rtol=0):
            raise ConstructionError("explicit frame columns are not orthonormal")
        return U


def dct_frame(K: int) -> np.ndarray:
    """Orthonormal DCT-II basis of size ``K`` (column 0 is the uniform vector)."""
    n = np.arange(K)[:, None]
    m = np.arange(K)[None, :]
    C = np.sqrt(2.0 / K) * np.cos(np.pi * (2 * n + 1) * m / (2 * K))
    C[:, 0] = 1.0 / np.sqrt(K)
    return C


@dataclass(frozen=True)
class SpikeSpec:
    """Ordered spikes ``theta_1 > theta_2 > ...`` and the reference ``sigma``."""

    spikes: tuple
    sigma: float = 1.0

    def __post_init__(self):
        spikes = tuple(self.spikes)
        object.__setattr__(self, "spikes", spikes)
        if not spikes:
            raise ConstructionError("at least one spike is required")
        thetas = [s.theta for s in spikes]
        if any(a <= b for a, b in zip(thetas, thetas[1:])):
            raise ConstructionError(f"spike values must be strictly decreasing, got {thetas}")
        if any(th == 0 for th in thetas):
            raise ConstructionError("spike values must be nonzero")

    @property
    def rank(self) -> int:
        return sum(s.k for s in self.spikes)

    @property
    def supercritical(self) -> list[int]:
        """Indices of spikes with ``theta > sigma``."""
        return [j for j, s in enumerate(self.spikes) if s.theta > self.sigma]

    @property
    def k_plus(self) -> int:
        return sum(self.spikes[j].k for j in self.supercritical)

    def k_coords(self, N: int) -> int:
        """Number ``k`` of canonical coordinates carrying supercritical eigenvectors."""
        return sum(self.spikes[j].block_size(N) for j in self.supercritical)

    def rank_offset(self, j: int) -> int:
        """Number of eigenvalues ranked above spike ``j``'s outliers."""
        return sum(self.spikes[i].k for i in self.supercritical if i < j)


@dataclass
class SpikeFrame:
    """Eigenvector geometry of a built deformation.

    ``U_k`` is the ``k x k`` unitary whose first ``k_plus`` columns are the
    supercritical eigenvectors (spike by spike, in order) expressed in the
    first ``k`` coordinates. ``frames[j]`` is spike ``j``'s ``K_j x k_j``
    frame and ``offsets[j]`` the first coordinate of its block.
    """

    N: int
    k: int
    U_k: np.ndarray
    frames: list
    offsets: list
    thetas: list

    def block(self, j: int) -> slice:
        return slice(self.offsets[j], self.offsets[j] + self.frames[j].shape[0])


def _complete_unitary(U: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of range(U)."""
    K, k = U.shape
    if k == K:
        return np.zeros((K, 0), dtype=U.dtype)
    q, _ = np.linalg.qr(np.hstack([U, np.eye(K, dtype=U.dtype)]), mode="complete")
    comp = q[:, k:K]
    # project out range(U) once more for round-off
    comp = comp - U @ (U.conj().T @ comp)
    comp, _ = np.linalg.qr(comp)
    return comp


def build_spike_frame(spec: SpikeSpec, N: int, field: Field = Field.REAL):
    """Realize the deformation ``A_N`` and its eigenvector frame.

    Spike coordinate blocks are laid out consecutively from index 0 in spike
    order. Returns ``(A, frame)`` where ``A`` is dense ``N x N``.
    """
    field = as_field(field)
    frames, offsets = [], []
    off = 0
    for s in spec.spikes:
        U = s.column_frame(N)
        if field is Field.REAL and np.iscomplexobj(U):
            if np.abs(U.imag).max() > 0:
                raise ConstructionError("complex frame requested for a real deformation")
            U = U.real
        frames.append(U.astype(field.dtype))
        offsets.append(off)
        off += U.shape[0]
    if off > N:
        raise ConstructionError(f"spike blocks need {off} coordinates but N={N}")

    A = np.zeros((N, N), dtype=field.dtype)
    for s, U, o in zip(spec.spikes, frames, offsets):
        K = U.shape[0]
        A[o:o + K, o:o + K] = s.theta * (U @ U.conj().T)
    A = (A + A.conj().T) / 2

    k = spec.k_coords(N)
    sup = spec.supercritical
    U_k = np.zeros((k, k), dtype=field.dtype)
    col = 0
    for j in sup:
        U, o = frames[j], offsets[j]
        U_k[o:o + U.shape[0], col:col + U.shape[1]] = U
        col += U.shape[1]
    for j in sup:
        U, o = frames[j], offsets[j]
        comp = _complete_unitary(U)
        U_k[o:o + U.shape[0], col:col + comp.shape[1]] = comp
        col += comp.shape[1]
    frame = SpikeFrame(N=N, k=k, U_k=U_k, frames=frames, offsets=offsets,
                       thetas=[s.theta for s in spec.spikes])
    return A, frame


def assemble_deformed(W: np.ndarray, A: np.ndarray, N: int | None = None) -> np.ndarray:
    """``M = W / sqrt(N) + A``, exactly Hermitian."""
    if W.shape != A.shape or W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"dimension mismatch: W {W.shape}, A {A.shape}")
    N = W.shape[0] if N is None else N
    return W / math.sqrt(N) + A


def split_blocks(W: np.ndarray, k: int):
    """Split ``W`` into ``(W_k, Y, W_{N-k})`` (upper-left, upper-right, lower-right)."""
    N = W.shape[0]
    if not 0 < k < N:
        raise ValueError(f"block size k={k} out of range for N={N}")
    return W[:k, :k].copy(), W[:k, k:].copy(), W[k:, k:].copy()
