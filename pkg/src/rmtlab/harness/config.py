"""Experiment configuration: TOML parsing, validation and serialization."""

from __future__ import annotations

import enum
import math
import sys
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..distributions import LAW_IDS, EntryLaw, ParameterError, make_entry_law
from ..ensembles import ConstructionError, Field, Geometry, Spike, SpikeSpec, as_field
from ..limits import DiagConvention, LimitKind

RANK_GROWTH_EXPONENT = 0.49


class ConfigError(ValueError):
    pass


class ExperimentKind(str, enum.Enum):
    FLUCTUATION_VS_LIMIT = "FluctuationVsLimit"
    AS_CONVERGENCE = "AsConvergence"
    RESOLVENT_LIMITS = "ResolventLimits"
    SESQUILINEAR_CLT = "SesquilinearCLT"
    EMPIRICAL_V_CONVERGENCE = "EmpiricalVConvergence"


@dataclass(frozen=True)
class LawConfig:
    kind: str = "gaussian"
    p: float = 0.5
    ratio: float = 1.0


@dataclass(frozen=True)
class SpikeConfig:
    theta: float
    k: int = 1
    geometry: str = "canonical"
    K: int | None = None
    K_exponent: float | None = None
    frame: tuple | None = None
    frame_imag: tuple | None = None

    def to_spike(self) -> Spike:
        frame = None
        if self.frame is not None:
            frame = np.array(self.frame, dtype=float)
            if self.frame_imag is not None:
                frame = frame + 1j * np.array(self.frame_imag, dtype=float)
        return Spike(theta=self.theta, k=self.k, geometry=Geometry(self.geometry),
                     K=self.K, K_exponent=self.K_exponent, frame=frame)


@dataclass(frozen=True)
class FormsConfig:
    """Mixing matrices for the sesquilinear experiment: ``x = P z``, ``y = Q z``."""

    P: tuple = ((1.0,),)
    Q: tuple = ((1.0,),)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentKind
    N: int
    replications: int
    spikes: tuple
    sigma: float = 1.0
    law: LawConfig = field(default_factory=LawConfig)
    field: str = "real"
    seed: int = 0
    limit_law: str = "auto"
    delta: float | None = None
    real_diag_convention: DiagConvention = DiagConvention.THEOREM_TWO_ONE
    target_spike: int = 0
    as_tolerance: float = 0.15
    reference_factor: int = 10
    draws_per_minor: int = 1
    forms: FormsConfig | None = None
    workers: int = 1
    allow_large_k: bool = False
    output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "experiment", ExperimentKind(self.experiment))
        object.__setattr__(self, "real_diag_convention", DiagConvention(self.real_diag_convention))
        object.__setattr__(self, "field", as_field(self.field).value)
        object.__setattr__(self, "spikes", tuple(self.spikes))

    @property
    def entry_law(self) -> EntryLaw:
        return make_entry_law(self.law.kind, self.sigma, p=self.law.p, ratio=self.law.ratio)

    @property
    def spike_spec(self) -> SpikeSpec:
        return SpikeSpec(tuple(s.to_spike() for s in self.spikes), sigma=self.sigma)

    @property
    def ensemble_field(self) -> Field:
        return as_field(self.field)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check every invariant; returns ``cfg`` unchanged or raises :class:`ConfigError`."""
    if cfg.N < 50:
        raise ConfigError(f"N must be at least 50, got {cfg.N}")
    if cfg.replications < 1:
        raise ConfigError("replications must be at least 1")
    if not cfg.sigma > 0:
        raise ConfigError("sigma must be positive")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.workers < 1 or cfg.draws_per_minor < 1 or cfg.reference_factor < 1:
        raise ConfigError("workers, draws_per_minor and reference_factor must be positive")
    if cfg.delta is not None and not cfg.delta > 0:
        raise ConfigError("delta must be positive")
    if cfg.limit_law != "auto" and cfg.limit_law not in {k.value for k in LimitKind}:
        raise ConfigError(f"unknown limit_law {cfg.limit_law!r}")
    try:
        cfg.entry_law
        spec = cfg.spike_spec
        for s in spec.spikes:
            s.column_frame(cfg.N)
    except (ParameterError, ConstructionError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not spec.supercritical:
        raise ConfigError(f"no spike exceeds sigma={cfg.sigma}; nothing to measure")
    k = spec.k_coords(cfg.N)
    cap = math.floor(cfg.N**RANK_GROWTH_EXPONENT + 1e-9)
    if k > cap and not cfg.allow_large_k:
        raise ConfigError(
            f"k={k} exceeds floor(N^{RANK_GROWTH_EXPONENT})={cap}: the outlier theory assumes "
            "the coordinate block carrying the spikes grows much slower than sqrt(N); "
            "set allow_large_k = true to explore beyond it")
    if not 0 <= cfg.target_spike < len(spec.spikes) or cfg.target_spike not in spec.supercritical:
        raise ConfigError(f"target_spike={cfg.target_spike} is not a supercritical spike")
    for j in spec.supercritical:
        if spec.spikes[j].theta <= 1.2 * cfg.sigma:
            warnings.warn(f"spike {j} (theta={spec.spikes[j].theta}) is within 1.2 sigma of the "
                          "threshold; outliers separate poorly at moderate N", stacklevel=2)
    if cfg.experiment is ExperimentKind.SESQUILINEAR_CLT:
        if cfg.ensemble_field is not Field.REAL:
            raise ConfigError("SesquilinearCLT supports the real field only")
        forms = cfg.forms or FormsConfig()
        P, Q = np.asarray(forms.P, dtype=float), np.asarray(forms.Q, dtype=float)
        if P.ndim != 2 or P.shape != Q.shape:
            raise ConfigError("forms.P and forms.Q must be matrices of equal shape")
    return cfg


# --- TOML mapping -------------------------------------------------------------

_TOP_KEYS = {f.name for f in fields(ExperimentConfig)}
_LAW_KEYS = {f.name for f in fields(LawConfig)}
_SPIKE_KEYS = {f.name for f in fields(SpikeConfig)}
_FORMS_KEYS = {f.name for f in fields(FormsConfig)}


def _reject_unknown(table: dict, allowed: set, where: str):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def _as_tuple(x):
    if isinstance(x, list):
        return tuple(_as_tuple(v) for v in x)
    return x


def config_from_dict(d: dict) -> ExperimentConfig:
    _reject_unknown(d, _TOP_KEYS, "config")
    for req in ("experiment", "N", "replications", "spikes"):
        if req not in d:
            raise ConfigError(f"missing required key {req!r}")
    d = dict(d)
    law = d.get("law", {})
    if isinstance(law, str):
        law = {"kind": law}
    _reject_unknown(law, _LAW_KEYS, "[law]")
    if law.get("kind", "gaussian") not in LAW_IDS:
        raise ConfigError(f"unknown law {law.get('kind')!r}; expected one of {sorted(LAW_IDS)}")
    d["law"] = LawConfig(**law)
    spikes = []
    for i, s in enumerate(d["spikes"]):
        _reject_unknown(s, _SPIKE_KEYS, f"[[spikes]] #{i + 1}")
        spikes.append(SpikeConfig(**{k: _as_tuple(v) for k, v in s.items()}))
    d["spikes"] = tuple(spikes)
    if "forms" in d:
        _reject_unknown(d["forms"], _FORMS_KEYS, "[forms]")
        d["forms"] = FormsConfig(**{k: _as_tuple(v) for k, v in d["forms"].items()})
    try:
        cfg = ExperimentConfig(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return validate(cfg)


def _plain(x):
    if isinstance(x, tuple):
        return [_plain(v) for v in x]
    if isinstance(x, enum.Enum):
        return x.value
    return x


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Semantic content of ``cfg`` as TOML-ready plain data (``None`` fields omitted)."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name == "law":
            v = {k.name: getattr(v, k.name) for k in fields(LawConfig)}
        elif f.name == "spikes":
            v = [{k.name: _plain(getattr(s, k.name)) for k in fields(SpikeConfig)
                  if getattr(s, k.name) is not None} for s in v]
        elif f.name == "forms":
            v = {k.name: _plain(getattr(v, k.name)) for k in fields(FormsConfig)}
        out[f.name] = _plain(v)
    return out


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return config_from_dict(data)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        return loads_config(path.read_text())
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dumps_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def write_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg))
