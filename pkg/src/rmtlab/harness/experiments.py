"""Monte Carlo experiments: parallel replication, reference sampling and comparison.

Replication ``r`` always draws from ``RngStream(seed, r)`` and reference
samples for spike ``j`` from ``RngStream(seed, REFERENCE_STREAM + j)``, so
results do not depend on how replications are spread over workers.
"""

from __future__ import annotations

import logging
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .. import __version__
from ..distributions import RngStream
from ..ensembles import Field, sample_wigner, split_blocks
from ..limits import (DeformedModel, LimitKind, LimitLaw, auto_limit, empirical_V_finite_N,
                      empirical_V_shared_minor, limit_entry_profile, real_diag_scale,
                      sample_limit_eigs)
from ..spectral import (PoleError, count_outliers, default_delta, eigenvalues_sorted,
                        rescale_fluctuations, resolvent_traces, top_eigenvalues)
from ..stats import empirical_covariance, ks_two_sample, sample_moments
from ..theory import (guoe_tau, mixing_moments, resolvent_limits, rho_theta,
                      sesquilinear_covariance, v_theta)
from .config import ConfigError, ExperimentConfig, ExperimentKind, FormsConfig, config_to_dict

log = logging.getLogger("rmtlab")

REFERENCE_STREAM = 2**63
MAX_DISCARD_FRACTION = 0.05


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentResult:
    experiment: str
    config: dict
    version: str
    replications: int
    wall_clock: float
    discards: list = field(default_factory=list)
    records: list = field(default_factory=list)
    reference: dict = field(default_factory=dict)
    ks: dict = field(default_factory=dict)
    moments: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# --- limit selection -----------------------------------------------------------

def select_limit(cfg: ExperimentConfig, model: DeformedModel, j: int) -> LimitLaw:
    """The configured limit law for spike ``j`` (auto-derived unless overridden)."""
    conv = cfg.real_diag_convention
    if cfg.limit_law == "auto":
        return auto_limit(model, j, conv)
    spike = model.spec.spikes[j]
    sigma, field_, law = model.spec.sigma, model.field, model.law
    kind = LimitKind(cfg.limit_law)
    if kind is LimitKind.GUOE:
        return LimitLaw.guoe(spike.k, guoe_tau(spike.theta, sigma), field_)
    if kind is LimitKind.CONVOLUTION:
        if spike.k != 1:
            raise ConfigError("the convolution limit needs a simple spike (k = 1)")
        diag_law = law.scaled(real_diag_scale(field_, conv))
        return LimitLaw.convolution(diag_law, v_theta(spike.theta, sigma, law.m4, field_.t), field_)
    return LimitLaw.frame_v(model.frame.frames[j], law, spike.theta, sigma, field_, conv)


# --- per-replication work --------------------------------------------------------

@lru_cache(maxsize=4)
def _model(cfg: ExperimentConfig) -> DeformedModel:
    model = DeformedModel(cfg.N, cfg.ensemble_field, cfg.entry_law, cfg.spike_spec)
    model.built  # build once per process
    return model


def _target(cfg: ExperimentConfig):
    spike = cfg.spike_spec.spikes[cfg.target_spike]
    return spike.theta, rho_theta(spike.theta, cfg.sigma)


def _rep_fluctuation(cfg, model, rng, rep):
    _, M = model.sample(rng)
    eigs = top_eigenvalues(M, model.spec.k_plus)
    rec = rescale_fluctuations(eigs, model.spec, cfg.N, rep)
    return _record_payload(rec)


def _record_payload(rec) -> dict:
    return {"lam": {j: v.tolist() for j, v in rec.lam.items()},
            "xi": {j: v.tolist() for j, v in rec.xi.items()}, "ranks": dict(rec.ranks)}


def _rep_as(cfg, model, rng, rep):
    _, M = model.sample(rng)
    eigs = eigenvalues_sorted(M)
    spec = model.spec
    delta = cfg.delta if cfg.delta is not None else default_delta(spec)
    above, below = count_outliers(eigs, cfg.sigma, delta)
    rec = rescale_fluctuations(eigs[:spec.k_plus], spec, cfg.N, rep)
    return {"above": above, "below": below, **_record_payload(rec)}


def _rep_resolvent(cfg, model, rng, rep):
    _, rho = _target(cfg)
    k = model.k
    W = sample_wigner(cfg.N, model.field, model.law, rng)
    _, _, W_rest = split_blocks(W, k)
    tr = resolvent_traces(W_rest / math.sqrt(cfg.N) + model.A[k:, k:], rho)
    return {"tr1": tr.tr1, "tr2": tr.tr2, "diag2": tr.diag2}


def _rep_sesquilinear(cfg, model, rng, rep):
    _, rho = _target(cfg)
    k, law = model.k, model.law
    n = cfg.N - k
    W_rest = sample_wigner(n, Field.REAL, law, rng)
    M = W_rest / math.sqrt(cfg.N) + model.A[k:, k:]
    lam, V = sla.eigh(M, check_finite=False)
    if not rho > lam[-1]:
        raise PoleError(f"rho={rho} does not exceed the top eigenvalue {lam[-1]}")
    g = 1.0 / (rho - lam)
    diag = (V**2) @ g
    trace = g.sum()
    forms = cfg.forms or FormsConfig()
    P, Q = np.asarray(forms.P, dtype=float), np.asarray(forms.Q, dtype=float)
    rho_l = law.sigma2 * np.einsum("ld,ld->l", P, Q)
    values = []
    for _ in range(cfg.draws_per_minor):
        z = law.sample(rng, (n, P.shape[1]))
        Xt = V.T @ (z @ P.T)
        Yt = V.T @ (z @ Q.T)
        values.append(((g @ (Xt * Yt)) - rho_l * trace) / math.sqrt(n))
    return {"forms": np.array(values).tolist(),
            "omega": float(diag @ diag / n), "tr2n": float(g @ g / n)}


def _rep_empirical_v(cfg, model, rng, rep):
    j = cfg.target_spike
    if cfg.draws_per_minor == 1:
        Vs = [empirical_V_finite_N(model, j, rng)]
    else:
        Vs = empirical_V_shared_minor(model, j, rng, cfg.draws_per_minor)
    return {"V_real": [V.real.tolist() for V in Vs],
            "V_imag": [V.imag.tolist() for V in Vs] if np.iscomplexobj(Vs[0]) else None}


_REPLICATE = {
    ExperimentKind.FLUCTUATION_VS_LIMIT: _rep_fluctuation,
    ExperimentKind.AS_CONVERGENCE: _rep_as,
    ExperimentKind.RESOLVENT_LIMITS: _rep_resolvent,
    ExperimentKind.SESQUILINEAR_CLT: _rep_sesquilinear,
    ExperimentKind.EMPIRICAL_V_CONVERGENCE: _rep_empirical_v,
}


def _run_chunk(args):
    cfg, reps = args
    model = _model(cfg)
    fn = _REPLICATE[cfg.experiment]
    out = []
    for rep in reps:
        try:
            out.append((rep, fn(cfg, model, RngStream(cfg.seed, rep), rep), None))
        except PoleError as exc:
            out.append((rep, None, str(exc)))
    return out


def replicate(cfg: ExperimentConfig, workers: int | None = None) -> tuple[list, list]:
    """Run every replication; returns ``(records, discards)`` ordered by replication."""
    workers = cfg.workers if workers is None else workers
    reps = list(range(cfg.replications))
    if workers == 1:
        results = _run_chunk((cfg, reps))
    else:
        n_chunks = min(len(reps), 4 * workers)
        chunks = [reps[i::n_chunks] for i in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(_run_chunk, [(cfg, c) for c in chunks]) for r in part]
    results.sort(key=lambda r: r[0])
    records, discards = [], []
    for rep, payload, err in results:
        if err is None:
            records.append({"replication": rep, **payload})
        else:
            log.warning("discarded replication %d (seed=%d, stream_id=%d): %s",
                        rep, cfg.seed, rep, err)
            discards.append({"replication": rep, "seed": cfg.seed, "stream_id": rep, "reason": err})
    if len(discards) > MAX_DISCARD_FRACTION * cfg.replications:
        raise ExperimentError(
            f"{len(discards)} of {cfg.replications} replications discarded (limit "
            f"{MAX_DISCARD_FRACTION:.0%}); replay with seeds "
            f"{[(d['seed'], d['stream_id']) for d in discards[:10]]}")
    return records, discards


# --- aggregation -----------------------------------------------------------------

def _moments_dict(x) -> dict:
    mean, var, skew, kurt = sample_moments(x)
    return {"mean": mean, "variance": var, "skewness": skew, "excess_kurtosis": kurt}


def pooled_xi(records: list, j: int) -> np.ndarray:
    """``(n_reps, k_j)`` array of rescaled outliers of spike ``j``."""
    return np.array([r["xi"][j] for r in records], dtype=float).reshape(len(records), -1)


def reference_sample(cfg: ExperimentConfig, limit: LimitLaw, j: int) -> np.ndarray:
    rng = RngStream(cfg.seed, REFERENCE_STREAM + j)
    return sample_limit_eigs(limit, rng, cfg.reference_factor * cfg.replications)


def _compare_eigs(sample: np.ndarray, ref: np.ndarray, tag: str, result: ExperimentResult):
    for i in range(sample.shape[1]):
        key = f"{tag}_rank{i + 1}"
        result.ks[key] = ks_two_sample(sample[:, i], ref[:, i]).to_dict()
        result.reference[key] = ref[:, i].tolist()
        if sample.shape[0] >= 4:
            result.moments[key] = _moments_dict(sample[:, i])
    if sample.shape[1] > 1:
        key = f"{tag}_gap"
        gap, ref_gap = sample[:, 0] - sample[:, -1], ref[:, 0] - ref[:, -1]
        result.ks[key] = ks_two_sample(gap, ref_gap).to_dict()
        result.reference[key] = ref_gap.tolist()


def _summarize_fluctuation(cfg, model, result):
    for j in model.spec.supercritical:
        limit = select_limit(cfg, model, j)
        ref = reference_sample(cfg, limit, j)
        _compare_eigs(pooled_xi(result.records, j), ref, f"spike{j}", result)
        result.summary[f"spike{j}_limit"] = limit.describe()


def _summarize_as(cfg, model, result):
    spec = model.spec
    k_minus = sum(s.k for s in spec.spikes if s.theta < -spec.sigma)
    recs = result.records
    n = len(recs)
    count_ok = [r["above"] == spec.k_plus and r["below"] == k_minus for r in recs]
    result.summary["delta"] = cfg.delta if cfg.delta is not None else default_delta(spec)
    result.summary["expected_counts"] = {"above": spec.k_plus, "below": k_minus}
    result.summary["count_frequency"] = sum(count_ok) / n
    for j in spec.supercritical:
        rho = rho_theta(spec.spikes[j].theta, spec.sigma)
        lam = np.array([r["lam"][j] for r in recs])
        within = np.abs(lam - rho) < cfg.as_tolerance
        result.summary[f"spike{j}_rho"] = rho
        result.summary[f"spike{j}_within_frequency"] = within.mean(axis=0).tolist()
        result.summary[f"spike{j}_max_abs_error"] = float(np.abs(lam - rho).max())


def _summarize_resolvent(cfg, model, result):
    theta, _ = _target(cfg)
    lim = dict(zip(("tr1", "tr2", "diag2"), resolvent_limits(theta, cfg.sigma)))
    for key, target in lim.items():
        vals = np.array([r[key] for r in result.records])
        result.summary[key] = {"mean": float(vals.mean()), "limit": target,
                               "abs_error": float(abs(vals.mean() - target))}
    tr1 = np.array([r["tr1"] for r in result.records])
    result.summary["sqrtN_tr1_deviation"] = float(np.mean(np.abs(math.sqrt(cfg.N) * (tr1 - lim["tr1"]))))


def _summarize_sesquilinear(cfg, model, result):
    theta, _ = _target(cfg)
    sigma, law = cfg.sigma, model.law
    forms = cfg.forms or FormsConfig()
    moms = mixing_moments(forms.P, forms.Q, law.sigma2, law.m4)
    omega, tr2n = 1.0 / theta**2, 1.0 / (theta**2 - sigma**2)
    B = sesquilinear_covariance(omega, tr2n, tr2n, *moms).B
    values = np.array([v for r in result.records for v in r["forms"]], dtype=float)
    S = empirical_covariance(values)
    omega_n = float(np.mean([r["omega"] for r in result.records]))
    tr2n_n = float(np.mean([r["tr2n"] for r in result.records]))
    B_finite = sesquilinear_covariance(omega_n, tr2n_n, tr2n_n, *moms).B
    rel = float(np.linalg.norm(S - B) / np.linalg.norm(B))
    result.summary.update(
        n_forms=int(values.shape[0]), B_limit=B.tolist(), B_finite_n=B_finite.tolist(),
        empirical_covariance=S.tolist(), frobenius_relative_error=rel,
        variance_relative_error=(np.abs(np.diag(S) - np.diag(B)) / np.diag(B)).tolist(),
        omega_finite_n=omega_n, tr2n_finite_n=tr2n_n)


def pooled_V(records: list) -> np.ndarray:
    out = []
    for r in records:
        re = np.array(r["V_real"])
        out.append(re + 1j * np.array(r["V_imag"]) if r["V_imag"] is not None else re)
    return np.concatenate(out)


def _summarize_empirical_v(cfg, model, result):
    j = cfg.target_spike
    V = pooled_V(result.records)
    limit = select_limit(cfg, model, j)
    profile = limit_entry_profile(limit)
    emp = np.mean(np.abs(V) ** 2, axis=0)
    rel = np.abs(emp - profile) / profile
    result.summary.update(
        n_draws=int(V.shape[0]), limit=limit.describe(), entry_variance_empirical=emp.tolist(),
        entry_variance_limit=profile.tolist(), entry_variance_relative_error=rel.tolist(),
        max_relative_error=float(rel.max()))
    eigs = np.linalg.eigvalsh(V)[:, ::-1]
    ref = reference_sample(cfg, limit, j)
    _compare_eigs(eigs, ref, f"spike{j}", result)


_SUMMARIZE = {
    ExperimentKind.FLUCTUATION_VS_LIMIT: _summarize_fluctuation,
    ExperimentKind.AS_CONVERGENCE: _summarize_as,
    ExperimentKind.RESOLVENT_LIMITS: _summarize_resolvent,
    ExperimentKind.SESQUILINEAR_CLT: _summarize_sesquilinear,
    ExperimentKind.EMPIRICAL_V_CONVERGENCE: _summarize_empirical_v,
}


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Replicate, draw reference samples and compare, per ``cfg.experiment``."""
    t0 = time.perf_counter()
    records, discards = replicate(cfg, workers)
    result = ExperimentResult(experiment=cfg.experiment.value, config=config_to_dict(cfg),
                              version=version_string(), replications=len(records),
                              wall_clock=0.0, discards=discards, records=records)
    _SUMMARIZE[cfg.experiment](cfg, _model(cfg), result)
    result.wall_clock = time.perf_counter() - t0
    return result
