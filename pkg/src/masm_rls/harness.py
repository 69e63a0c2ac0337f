"""Seeded Monte Carlo detection experiments and replica comparison tables.

Trial ``i`` draws its channel, bits and noise from
``SeedSequence(master_seed, spawn_key=(i,))``, so every grid point sees the
same random draws and results do not depend on how trials are spread
over worker processes. Trials are solved in fixed blocks of
:data:`BLOCK` indices; the block layout, not the worker count, fixes
the floating-point work.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .channel import sample_channel, transmit
from .codec import decode, encode
from .config import ExperimentConfig
from .detector import decide, solve_box_lasso_batch
from .replica import solve_fixed_point, tune_lambda

__all__ = [
    "BLOCK",
    "CSV_COLUMNS",
    "TrialResult",
    "trial_rng",
    "draw_instance",
    "run_trials",
    "aggregate",
    "run_sweep",
    "run_replica",
    "run_tune",
    "emit_results",
    "format_float",
]

log = logging.getLogger(__name__)

BLOCK = 50
CSV_COLUMNS = ("sweep_var", "value", "mse_sim", "mse_se", "err_sim", "err_se",
               "mse_replica", "err_replica", "trials", "seed")
TUNE_COLUMNS = ("snr_db", "lambda_star", "mse_replica", "err_replica", "mse_sim", "mse_se",
                "err_sim", "err_se", "trials", "seed")


@dataclass(frozen=True)
class TrialResult:
    index: int
    sq_err: float          # ||x* - x||^2 / M
    entry_errors: int
    bit_errors: int
    invalid_supports: int
    iters: int
    converged: bool


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def draw_instance(cfg: ExperimentConfig, index: int):
    """Channel, transmitted vector, bits and observation of trial ``index``."""
    rng = trial_rng(cfg.master_seed, index)
    cb = cfg.codebook()
    h = sample_channel(cfg.ensemble(), rng)
    bits = rng.integers(0, 2, size=(cfg.k, cb.bits_per_block))
    x = np.concatenate([encode(cb, b) for b in bits])
    obs = transmit(h, x, cfg.sigma2, rng)
    return obs, bits


def _run_block(args) -> list:
    cfg, indices = args
    cb = cfg.codebook()
    det = cfg.detector()
    inst = [draw_instance(cfg, i) for i in indices]
    h = np.stack([o.h for o, _ in inst])
    y = np.stack([o.y for o, _ in inst])
    xs, _, its, conv, _ = solve_box_lasso_batch(h, y, det.lam, det.lo, det.hi, det.solver)
    out = []
    for j, (i, (obs, bits)) in enumerate(zip(indices, inst)):
        x_true = np.real(obs.x_true)
        xhat = decide(xs[j], det.decision)
        entry_err = int(np.sum(xhat != obs.x_true))
        bit_err = invalid = 0
        for t in range(cfg.k):
            sl = slice(t * cfg.m_u, (t + 1) * cfg.m_u)
            dbits, valid = decode(cb, xhat[sl])
            bit_err += int(np.sum(np.asarray(dbits) != bits[t]))
            invalid += not valid
        out.append(TrialResult(
            index=int(i), sq_err=float(np.sum((xs[j] - x_true) ** 2) / cfg.m),
            entry_errors=entry_err, bit_errors=bit_err, invalid_supports=invalid,
            iters=int(its[j]), converged=bool(conv[j]),
        ))
    return out


def run_trials(cfg: ExperimentConfig, workers: Optional[int] = None) -> list:
    """All trials of one configuration, ordered by trial index."""
    workers = cfg.workers if workers is None else workers
    blocks = [(cfg, list(range(s, min(s + BLOCK, cfg.trials)))) for s in range(0, cfg.trials, BLOCK)]
    if workers <= 1 or len(blocks) == 1:
        parts = [_run_block(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, blocks))
    return [r for part in parts for r in part]


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(np.mean(v)), se


def aggregate(cfg: ExperimentConfig, results: list) -> dict:
    results = sorted(results, key=lambda r: r.index)
    mse, mse_se = _mean_se([r.sq_err for r in results])
    err, err_se = _mean_se([r.entry_errors / cfg.m for r in results])
    n_bits = cfg.k * cfg.codebook().bits_per_block
    return {
        "mse_sim": mse, "mse_se": mse_se, "err_sim": err, "err_se": err_se,
        "bit_error_rate": float(np.mean([r.bit_errors / n_bits for r in results])),
        "invalid_support_rate": float(np.mean([r.invalid_supports / cfg.k for r in results])),
        "mean_iters": float(np.mean([r.iters for r in results])),
        "unconverged_trials": int(sum(not r.converged for r in results)),
    }


def run_replica(cfg: ExperimentConfig) -> list:
    """Fixed-point solution at every grid point, warm-started along the sweep."""
    out = []
    init = (0.1, None)
    for value in cfg.grid:
        point = cfg.at(value)
        sol = solve_fixed_point(point.decoupled(), init=init, damping=point.damping,
                                tol=point.replica_tol, max_iters=point.replica_max_iters,
                                order=point.quadrature_order)
        if sol.converged:
            init = (sol.c_star, sol.q_star)
        out.append(sol)
    return out


def run_sweep(cfg: ExperimentConfig, simulate: bool = True, replica: Optional[bool] = None,
              workers: Optional[int] = None) -> list:
    """One row per grid value: simulated and/or predicted MSE and error rate."""
    cfg.validate()
    replica = cfg.replica if replica is None else replica
    sols = run_replica(cfg) if replica else [None] * len(cfg.grid)
    rows = []
    for value, sol in zip(cfg.grid, sols):
        row = {"sweep_var": cfg.sweep_variable, "value": float(value),
               "mse_sim": math.nan, "mse_se": math.nan, "err_sim": math.nan,
               "err_se": math.nan, "mse_replica": math.nan, "err_replica": math.nan,
               "trials": cfg.trials if simulate else 0, "seed": cfg.master_seed}
        if simulate:
            point = cfg.at(value)
            row.update(aggregate(point, run_trials(point, workers)))
        if sol is not None:
            row.update(mse_replica=sol.gamma, err_replica=sol.q_e, c_star=sol.c_star,
                       q_star=sol.q_star, replica_converged=sol.converged)
        rows.append(row)
    return rows


def run_tune(cfg: ExperimentConfig, snr_grid, lambdas, simulate: bool = False,
             workers: Optional[int] = None) -> list:
    """Predicted-MSE-optimal regularization per SNR, optionally simulated at that value."""
    rows = []
    for snr in snr_grid:
        point = replace(cfg, snr_db=float(snr), sigma2_override=None, sweep_variable="snr_db")
        lam_star, gamma, info = tune_lambda(point.decoupled(), lambdas, refine=True,
                                            damping=point.damping, tol=point.replica_tol,
                                            max_iters=point.replica_max_iters,
                                            order=point.quadrature_order)
        sol = solve_fixed_point(point.decoupled().with_lam(lam_star), damping=point.damping,
                                tol=point.replica_tol, max_iters=point.replica_max_iters,
                                order=point.quadrature_order)
        row = {"snr_db": float(snr), "lambda_star": lam_star, "mse_replica": gamma,
               "err_replica": sol.q_e, "mse_sim": math.nan, "mse_se": math.nan,
               "err_sim": math.nan, "err_se": math.nan, "trials": 0, "seed": cfg.master_seed,
               "excluded_lambdas": info["excluded"]}
        if simulate:
            at_star = replace(point, lam=lam_star)
            row.update(aggregate(at_star, run_trials(at_star, workers)), trials=cfg.trials)
        rows.append(row)
    return rows


def format_float(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (list, tuple)):
        return [_json_value(a) for a in v]
    if isinstance(v, dict):
        return {k: _json_value(a) for k, a in v.items()}
    return v


def emit_results(rows: list, path, fmt: str = "csv", columns=CSV_COLUMNS,
                 config: Optional[ExperimentConfig] = None) -> None:
    """Write a result table as CSV (fixed columns) or JSON (all fields plus config echo)."""
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(columns)
                for row in rows:
                    w.writerow([format_float(row.get(c, math.nan)) for c in columns])
        elif fmt == "json":
            doc = {"columns": list(columns), "rows": [_json_value(r) for r in rows]}
            if config is not None:
                doc["config"] = _json_value(config.echo())
            with open(path, "w") as fh:
                # repr of a Python float round-trips exactly
                json.dump(doc, fh, indent=2)
                fh.write("\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise RuntimeError(f"cannot write results to {path}: {exc}") from exc
