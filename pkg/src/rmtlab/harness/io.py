"""Result persistence: JSON document plus flat CSV tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import ExperimentKind
from .experiments import ExperimentResult

FLAT_HEADER = ["experiment_id", "replication", "spike_index", "eig_rank", "lambda", "xi"]
REFERENCE_HEADER = ["sample_id", "value"]


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _jsonable(obj):
    # JSON object keys must be strings; spike indices are ints in memory
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    return obj


def flat_rows(experiment_id: str, records: list) -> list[list[str]]:
    """One row per (replication, spike, rank) for eigenvalue experiments."""
    rows = []
    for rec in records:
        for j in sorted(rec.get("xi", {})):
            for rank, lam, xi in zip(rec["ranks"][j], rec["lam"][j], rec["xi"][j]):
                rows.append([experiment_id, str(rec["replication"]), str(j), str(rank),
                             fmt(lam), fmt(xi)])
    return rows


def sample_rows(result: ExperimentResult) -> tuple[list[str], list[list[str]]]:
    """Header and rows of the per-replication samples of non-eigenvalue experiments."""
    kind = ExperimentKind(result.experiment)
    rows = []
    if kind is ExperimentKind.RESOLVENT_LIMITS:
        header = ["replication", "tr1", "tr2", "diag2"]
        for r in result.records:
            rows.append([str(r["replication"]), fmt(r["tr1"]), fmt(r["tr2"]), fmt(r["diag2"])])
    elif kind is ExperimentKind.SESQUILINEAR_CLT:
        header = ["replication", "draw", "form", "value"]
        for r in result.records:
            for d, vals in enumerate(r["forms"]):
                rows.extend([str(r["replication"]), str(d), str(l), fmt(v)]
                            for l, v in enumerate(vals))
    elif kind is ExperimentKind.EMPIRICAL_V_CONVERGENCE:
        header = ["replication", "draw", "row", "col", "re", "im"]
        for r in result.records:
            for d, re in enumerate(r["V_real"]):
                im = r["V_imag"][d] if r["V_imag"] is not None else None
                for a, row in enumerate(re):
                    for b, v in enumerate(row):
                        rows.append([str(r["replication"]), str(d), str(a), str(b), fmt(v),
                                     fmt(im[a][b] if im is not None else 0.0)])
    else:
        return FLAT_HEADER, flat_rows(result.experiment, result.records)
    return header, rows


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_flat_csv(result: ExperimentResult, path) -> None:
    write_csv(path, FLAT_HEADER, flat_rows(result.experiment, result.records))


def write_reference_csv(values, path) -> None:
    write_csv(path, REFERENCE_HEADER, ([str(i), fmt(v)] for i, v in enumerate(values)))


def output_paths(result: ExperimentResult, path) -> dict:
    """Files written by :func:`write_result` for the JSON path ``path``."""
    path = Path(path)
    stem = path.with_suffix("")
    out = {"json": path}
    kind = ExperimentKind(result.experiment)
    if kind in (ExperimentKind.FLUCTUATION_VS_LIMIT, ExperimentKind.AS_CONVERGENCE):
        out["csv"] = stem.with_suffix(".csv")
    else:
        out["samples"] = Path(f"{stem}.samples.csv")
    for key in result.reference:
        out[f"reference:{key}"] = Path(f"{stem}.ref.{key}.csv")
    return out


def write_result(result: ExperimentResult, path) -> dict:
    """Write the JSON document and its CSV companions; returns the paths written."""
    paths = output_paths(result, path)
    paths["json"].parent.mkdir(parents=True, exist_ok=True)
    with open(paths["json"], "w") as fh:
        json.dump(_jsonable(result.to_dict()), fh, indent=1, default=_json_default)
    if "csv" in paths:
        write_flat_csv(result, paths["csv"])
    if "samples" in paths:
        write_csv(paths["samples"], *sample_rows(result))
    for key, values in result.reference.items():
        write_reference_csv(values, paths[f"reference:{key}"])
    return paths


def read_result(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def read_column(path) -> np.ndarray:
    """Numbers from a one-column CSV, or the last column of a ``sample_id,value`` file.

    A non-numeric first row is treated as a header.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    try:
        float(rows[0][-1])
    except ValueError:
        rows = rows[1:]
    try:
        return np.array([float(r[-1]) for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
