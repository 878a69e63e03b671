"""Command-line entry point ``rmtlab``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .distributions import LAW_IDS, make_entry_law
from .ensembles import as_field
from .harness.config import ConfigError, ExperimentKind, load_config
from .harness.experiments import ExperimentError, replicate, run_experiment
from .harness.io import FLAT_HEADER, flat_rows, read_column, write_csv, write_result
from .stats import ks_two_sample
from .theory import TheoryError, theory_values

SEED_ENV = "RMTLAB_SEED"


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def resolve_seed(config_seed: int, cli_seed: int | None, env=os.environ) -> int:
    """CLI flag beats the environment variable, which beats the config file."""
    if cli_seed is not None:
        return cli_seed
    if env.get(SEED_ENV):
        return _u64(env[SEED_ENV])
    return config_seed


def _load(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=resolve_seed(cfg.seed, args.seed),
                              workers=getattr(args, "workers", None))


def cmd_theory(args) -> int:
    law = make_entry_law(args.law, args.sigma)
    tv = theory_values(args.theta, args.sigma, law.m4, as_field(args.field).t)
    print(json.dumps({"law": law.name, "field": as_field(args.field).value, **tv.to_dict()},
                     indent=2))
    return 0


def cmd_experiment(args) -> int:
    cfg = _load(args)
    result = run_experiment(cfg)
    out = args.out or cfg.output or f"{cfg.experiment.value}_seed{cfg.seed}.json"
    paths = write_result(result, out)
    print(json.dumps({"written": {k: str(v) for k, v in paths.items()},
                      "replications": result.replications, "discards": len(result.discards),
                      "ks": result.ks, "wall_clock": result.wall_clock}, indent=2))
    return 0


def cmd_sample(args) -> int:
    cfg = _load(args).with_overrides(experiment=ExperimentKind.FLUCTUATION_VS_LIMIT)
    records, _ = replicate(cfg)
    write_csv(args.out, FLAT_HEADER, flat_rows(cfg.experiment.value, records))
    print(f"wrote {len(records)} replications to {args.out}")
    return 0


def cmd_ks(args) -> int:
    report = ks_two_sample(read_column(args.a), read_column(args.b))
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmtlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("theory", help="print closed-form values as JSON")
    t.add_argument("--theta", type=float, required=True)
    t.add_argument("--sigma", type=float, default=1.0)
    t.add_argument("--law", choices=LAW_IDS, default="gaussian")
    t.add_argument("--field", default="real")
    t.set_defaults(func=cmd_theory)

    e = sub.add_parser("experiment", help="run a configured experiment")
    e.add_argument("--config", type=Path, required=True)
    e.add_argument("--seed", type=_u64)
    e.add_argument("--workers", type=int)
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_experiment)

    k = sub.add_parser("ks", help="two-sample KS test on single-column CSV files")
    k.add_argument("a", type=Path)
    k.add_argument("b", type=Path)
    k.set_defaults(func=cmd_ks)

    s = sub.add_parser("sample", help="dump rescaled outliers as flat CSV")
    s.add_argument("--config", type=Path, required=True)
    s.add_argument("--seed", type=_u64)
    s.add_argument("--workers", type=int)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ExperimentError, TheoryError, ValueError, OSError) as exc:
        print(f"rmtlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
