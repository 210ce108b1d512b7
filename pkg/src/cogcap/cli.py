"""Command-line entry point: ``python3 -m cogcap <command> ...``.

Failures print a one-line JSON error record on stderr and exit nonzero
(2 for invalid input, 3 for numerical failures, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (
    FIGURES,
    OUTPUT_ENV,
    ConfigError,
    SchemaMismatch,
    blocking_sweep,
    default_output_dir,
    load_config,
    parse_grid,
    reproduce_figure,
    rows_to_csv,
    run_experiment,
)
from .mc import McConfig
from .model import ParamsValidationError
from .numerics import NumericsError
from .specfun import SpecialFunctionError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cogcap", description="SU capacity under PU SINR constraints")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config (or a previous manifest)")
    run.add_argument("config")
    run.add_argument("--out", help=f"output directory (default: config, then ${OUTPUT_ENV})")

    fig = sub.add_parser("figure", help="write the data behind one figure")
    fig.add_argument("id", choices=FIGURES)
    fig.add_argument("--out", help=f"output root (default ${OUTPUT_ENV} or ./results)")
    fig.add_argument("--samples", type=int, default=1_000_000)
    fig.add_argument("--seed", type=int, default=McConfig().seed)

    blk = sub.add_parser("blocking", help="blocking probability over a c2 grid, CSV on stdout")
    blk.add_argument("--scenario", required=True)
    blk.add_argument("--c2-grid", required=True, help="start:stop:count")
    blk.add_argument("--c1", type=float, default=0.1)
    blk.add_argument("--alpha", type=float, default=0.1)
    blk.add_argument("--rho", type=float, default=0.9)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    return p


def _error(kind: str, exc: Exception, code: int) -> int:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    details = getattr(exc, "problems", None) or getattr(exc, "violations", None)
    if details:
        record["details"] = list(details)
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            files = run_experiment(cfg, Path(args.out) if args.out else None)
            print(json.dumps({"status": "ok", "files": [str(f) for f in files]}))
        elif args.command == "figure":
            out = Path(args.out) if args.out else default_output_dir()
            files = reproduce_figure(args.id, out, n_samples=args.samples, seed=args.seed)
            print(json.dumps({"status": "ok", "figure": args.id, "files": [str(f) for f in files]}))
        elif args.command == "blocking":
            rows = blocking_sweep(args.scenario, parse_grid(args.c2_grid), c1=args.c1,
                                  alpha=args.alpha, rho=args.rho)
            sys.stdout.write(rows_to_csv(rows))
        else:
            cfg = load_config(args.config)
            print(json.dumps({"status": "ok", "config": cfg.to_dict()}))
    except (ConfigError, ParamsValidationError, SchemaMismatch, FileNotFoundError) as exc:
        return _error("invalid_input", exc, 2)
    except ValueError as exc:
        return _error("invalid_input", exc, 2)
    except (NumericsError, SpecialFunctionError) as exc:
        return _error("numerical_failure", exc, 3)
    except Exception as exc:  # noqa: BLE001 - report, never traceback
        return _error("internal_error", exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
