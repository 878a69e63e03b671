"""Entry laws for Wigner matrices and seeded random streams.

Every entry law is symmetric with finite moments of all orders, parameterized
by its standard deviation ``sigma`` so that different laws can be swapped
without changing the variance of the resulting Wigner matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Raised for out-of-domain distribution parameters."""


class LawKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"
    TWOPOINT = "twopoint"


# identifiers accepted in config files and on the command line
LAW_IDS = tuple(k.value for k in LawKind)


class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Backed by the Philox counter-based generator with the two 64-bit words
    of its key set to ``seed`` and ``stream_id``. Two streams built from the
    same pair produce identical sequences; streams with distinct ids are
    independent.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
            raise ParameterError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream_id: int) -> "RngStream":
        """Fresh stream with the same seed and a new id."""
        return RngStream(self.seed, stream_id)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class EntryLaw:
    """A symmetric law of variance ``sigma**2``.

    For ``TWOPOINT`` the law puts mass ``p`` on ``±a`` and ``1 - p`` on ``±b``
    with ``a = ratio * b``; ``b`` is fixed by the variance. ``ratio = 0`` gives
    the three-point law on ``{-b, 0, b}`` whose kurtosis ``1/(1-p)`` can be
    made arbitrarily large.
    """

    kind: LawKind
    sigma: float
    p: float = 0.5
    ratio: float = 1.0
    _atoms: tuple = field(default=(), repr=False, compare=False)

    @property
    def name(self) -> str:
        if self.kind is LawKind.TWOPOINT:
            return f"twopoint(p={self.p:g},ratio={self.ratio:g},sigma={self.sigma:g})"
        return f"{self.kind.value}(sigma={self.sigma:g})"

    @property
    def sigma2(self) -> float:
        return self.sigma**2

    @property
    def m4(self) -> float:
        s4 = self.sigma**4
        if self.kind is LawKind.GAUSSIAN:
            return 3.0 * s4
        if self.kind is LawKind.RADEMACHER:
            return s4
        if self.kind is LawKind.UNIFORM:
            return 1.8 * s4
        a, b = self._atoms
        return self.p * a**4 + (1 - self.p) * b**4

    def moment(self, order: int) -> float:
        """Exact raw moment ``E[X**order]``."""
        if order % 2:
            return 0.0
        s = self.sigma
        if self.kind is LawKind.GAUSSIAN:
            return s**order * math.prod(range(order - 1, 0, -2))
        if self.kind is LawKind.RADEMACHER:
            return s**order
        if self.kind is LawKind.UNIFORM:
            half = math.sqrt(3.0) * s
            return half**order / (order + 1)
        a, b = self._atoms
        return self.p * a**order + (1 - self.p) * b**order

    def scaled(self, factor: float) -> "EntryLaw":
        """Law of ``factor * X`` (same kind, ``sigma`` multiplied by ``factor``)."""
        return make_entry_law(self.kind, self.sigma * factor, p=self.p, ratio=self.ratio)

    def sample(self, rng: RngStream, size=None) -> np.ndarray | float:
        g = rng.gen
        s = self.sigma
        if self.kind is LawKind.GAUSSIAN:
            return s * g.standard_normal(size)
        if self.kind is LawKind.RADEMACHER:
            signs = 2.0 * g.integers(0, 2, size=size) - 1.0
            return s * signs
        if self.kind is LawKind.UNIFORM:
            half = math.sqrt(3.0) * s
            return g.uniform(-half, half, size)
        a, b = self._atoms
        signs = 2.0 * g.integers(0, 2, size=size) - 1.0
        mag = np.where(g.random(size) < self.p, a, b)
        return signs * mag


def make_entry_law(kind, sigma: float, *, p: float = 0.5, ratio: float = 1.0) -> EntryLaw:
    """Build an :class:`EntryLaw` of standard deviation ``sigma``.

    ``kind`` may be a :class:`LawKind` or one of the identifiers
    ``"gaussian"``, ``"rademacher"``, ``"uniform"``, ``"twopoint"``.
    """
    try:
        kind = LawKind(kind)
    except ValueError:
        raise ParameterError(f"unknown entry law {kind!r}; expected one of {LAW_IDS}") from None
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ParameterError(f"sigma must be positive, got {sigma}")
    atoms = ()
    if kind is LawKind.TWOPOINT:
        if not (0.0 < p < 1.0):
            raise ParameterError(f"twopoint mass p must lie in (0, 1), got {p}")
        if not (0.0 <= ratio <= 1.0):
            raise ParameterError(f"twopoint ratio a/b must lie in [0, 1], got {ratio}")
        b = sigma / math.sqrt(p * ratio**2 + (1 - p))
        atoms = (ratio * b, b)
    else:
        p, ratio = 0.5, 1.0
    return EntryLaw(LawKind(kind), float(sigma), float(p), float(ratio), atoms)


def twopoint_with_kurtosis(kurtosis: float, sigma: float) -> EntryLaw:
    """Three-point law on ``{-b, 0, b}`` with ``m4 / sigma**4 == kurtosis``."""
    if kurtosis < 1.0:
        raise ParameterError("kurtosis of a symmetric law is at least 1")
    if kurtosis == 1.0:
        return make_entry_law(LawKind.RADEMACHER, sigma)
    return make_entry_law(LawKind.TWOPOINT, sigma, p=1.0 - 1.0 / kurtosis, ratio=0.0)


def sample_entry(law: EntryLaw, rng: RngStream) -> float:
    """One draw from ``law``."""
    return float(law.sample(rng))


def sample_entries(law: EntryLaw, rng: RngStream, size) -> np.ndarray:
    return np.asarray(law.sample(rng, size), dtype=float)


def sample_gaussian(mean: float, variance: float, rng: RngStream, size=None):
    """Draw from N(mean, variance); ``variance == 0`` returns ``mean`` exactly."""
    if variance < 0 or not math.isfinite(variance):
        raise ParameterError(f"variance must be non-negative, got {variance}")
    if variance == 0:
        return mean if size is None else np.full(size, float(mean))
    return rng.gen.normal(mean, math.sqrt(variance), size)


def moments(law: EntryLaw) -> dict:
    """Analytic first six raw moments of ``law``."""
    return {f"m{k}": law.moment(k) for k in range(1, 7)}
