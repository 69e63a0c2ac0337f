"""Command-line driver: ``masm-rls {simulate,replica,tune,compare,validate-config}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, default_config
from .harness import CSV_COLUMNS, TUNE_COLUMNS, emit_results, run_sweep, run_tune

log = logging.getLogger("masm_rls")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="masm-rls", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["simulate", "replica", "tune", "compare", "validate-config"])
    p.add_argument("--config", help="TOML experiment file (defaults to the K=20, N=80 scenario)")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per grid point")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--out", help="output file (stdout table if omitted)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--snr-grid", type=float, nargs="+",
                   help="tune: SNR values in dB (default: sweep grid)")
    p.add_argument("--lambda-grid", type=float, nargs="+",
                   help="tune: candidate lambdas (default: 50 points on [0.01, 1])")
    p.add_argument("--simulate", action="store_true", help="tune: also simulate at lambda*")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    over = {}
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    if args.workers is not None:
        over["workers"] = args.workers
    cfg = replace(cfg, **over)
    return cfg.validate()


def _print_table(rows, columns):
    print("  ".join(f"{c:>12}" for c in columns))
    for r in rows:
        cells = []
        for c in columns:
            v = r.get(c, math.nan)
            cells.append(f"{v:>12.6g}" if isinstance(v, (float, np.floating)) else f"{v!s:>12}")
        print("  ".join(cells))


def _output(args, rows, columns, cfg):
    if args.out:
        emit_results(rows, args.out, args.format, columns, cfg)
    else:
        _print_table(rows, columns)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "validate-config":
            for k, v in cfg.derived().items():
                print(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}")
            return 0
        if args.command == "simulate":
            rows = run_sweep(cfg, simulate=True, replica=False)
            _output(args, rows, CSV_COLUMNS, cfg)
        elif args.command == "replica":
            rows = run_sweep(cfg, simulate=False, replica=True)
            _output(args, rows, CSV_COLUMNS, cfg)
        elif args.command == "compare":
            rows = run_sweep(cfg, simulate=True, replica=True)
            _output(args, rows, CSV_COLUMNS, cfg)
            dev = max(abs(r["mse_sim"] - r["mse_replica"]) / r["mse_replica"] for r in rows)
            print(f"max relative MSE deviation: {dev:.4g}")
        else:
            snrs = args.snr_grid or (list(cfg.grid) if cfg.sweep_variable == "snr_db" else [cfg.snr_db])
            lams = args.lambda_grid or list(np.linspace(0.01, 1.0, 50))
            rows = run_tune(cfg, snrs, lams, simulate=args.simulate)
            _output(args, rows, TUNE_COLUMNS, cfg)
    except (RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
