"""Regularized least-squares (RLS) detection.

The soft estimate minimizes ``||y - H v||^2 + lam * ||v||_1`` over real
``v`` in a box ``[lo, hi]^M`` by proximal gradient descent (optionally
accelerated with adaptive restart). For real ``v`` the data term equals
``v^T G v - 2 b^T v + ||y||^2`` with ``G = Re(H^H H)`` and ``b = Re(H^H y)``,
which is what the batched kernel works with. The scalar prox threshold is
``step * lam`` for the gradient ``2 (G v - b)``; this is the same
``tau * lam / 2`` convention as the decoupled scalar estimator.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .codec import SmCodebook

__all__ = [
    "SolverParams",
    "DecisionRule",
    "DetectorSpec",
    "SoftEstimate",
    "prox_l1_box",
    "soft_threshold",
    "objective",
    "max_eigenvalue",
    "prox_gradient_batch",
    "solve_box_lasso",
    "solve_box_lasso_batch",
    "solve_complex_lasso",
    "decide",
    "brute_force_map",
]

MAX_MAP_CANDIDATES = 2 ** 20


@dataclass(frozen=True)
class SolverParams:
    max_iters: int = 2000
    rel_tolerance: float = 1e-10
    step_tolerance: float = 1e-10
    acceleration: bool = True
    power_iters: int = 30
    power_tolerance: float = 1e-6
    step_safety: float = 0.99


@dataclass(frozen=True)
class DecisionRule:
    """Entrywise map from soft estimates to ``S_0``.

    ``kind`` is ``threshold-ssk`` (``sqrt(P) * 1{Re x >= eps}``),
    ``nearest`` (closest point of ``{0} U alphabet``) or ``identity``.
    """

    kind: str = "threshold-ssk"
    eps: float = 0.5
    power: float = 1.0
    alphabet: tuple = ()

    def __post_init__(self):
        if self.kind not in ("threshold-ssk", "nearest", "identity"):
            raise ValueError(f"unknown decision rule {self.kind!r}")


@dataclass(frozen=True)
class DetectorSpec:
    """Box-LASSO detector: penalty ``lam * ||v||_1`` over ``[lo, hi]``.

    ``lo``/``hi`` may be infinite (standard LASSO). ``lam = 0`` is the
    unregularized (box-constrained least squares) case.
    """

    lam: float = 0.13
    lo: float = 0.0
    hi: float = 1.0
    decision: DecisionRule = field(default_factory=DecisionRule)
    solver: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not self.lo <= 0.0 <= self.hi:
            raise ValueError("box must contain zero")


@dataclass
class SoftEstimate:
    x_star: np.ndarray
    objective: float
    iters_used: int
    converged: bool
    step: float = float("nan")


def soft_threshold(v, t):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def prox_l1_box(v, threshold, lo, hi):
    """Prox of ``threshold*|.|`` plus the indicator of ``[lo, hi]`` (``lo <= 0 <= hi``)."""
    if not lo <= 0.0 <= hi:
        raise ValueError("box must contain zero")
    out = np.clip(soft_threshold(v, threshold), lo, hi)
    return float(out) if np.ndim(out) == 0 else out


def objective(y, h, v, lam: float) -> float:
    r = np.asarray(y) - np.asarray(h) @ np.asarray(v)
    return float(np.real(np.vdot(r, r)) + lam * np.sum(np.abs(v)))


def max_eigenvalue(gram: np.ndarray, iters: int = 30, tol: float = 1e-6) -> np.ndarray:
    """Largest eigenvalue of each symmetric PSD matrix in a ``(B, M, M)`` stack by power iteration."""
    gram = np.asarray(gram)
    single = gram.ndim == 2
    if single:
        gram = gram[None]
    b, m, _ = gram.shape
    v = np.ones((b, m)) / math.sqrt(m)
    est = np.zeros(b)
    for _ in range(iters):
        w = np.matmul(gram, v[..., None])[..., 0]
        new = np.einsum("bi,bi->b", v, w)
        norm = np.linalg.norm(w, axis=1)
        norm[norm == 0] = 1.0
        v = w / norm[:, None]
        done = np.abs(new - est) <= tol * np.abs(new)
        est = new
        if np.all(done):
            break
    return est[0] if single else est


def prox_gradient_batch(
    gram: np.ndarray,
    hty: np.ndarray,
    yy: np.ndarray,
    prox: Callable[[np.ndarray, np.ndarray], np.ndarray],
    penalty: Callable[[np.ndarray], np.ndarray],
    params: SolverParams = SolverParams(),
    x0: Optional[np.ndarray] = None,
    trace: Optional[list] = None,
):
    """Minimize ``v^T G v - 2 b^T v + yy + penalty(v)`` for a stack of problems.

    Parameters
    ----------
    gram : (B, M, M) array
        Real symmetric PSD matrices ``G``.
    hty : (B, M) array
        Linear terms ``b``.
    yy : (B,) array
        Constants ``||y||^2`` (only shift the reported objective).
    prox : callable
        ``prox(w, t)`` with ``t`` of shape ``(B', 1)``: prox of ``t * penalty``
        applied rowwise.
    penalty : callable
        Rowwise penalty values, shape ``(B',)``.
    trace : list, optional
        If given, receives the objective of every iterate of problem 0.

    Returns
    -------
    x, obj, iters, converged, step
    """
    gram = np.asarray(gram, dtype=float)
    hty = np.asarray(hty, dtype=float)
    yy = np.asarray(yy, dtype=float)
    nb, m = hty.shape
    lmax = max_eigenvalue(gram, params.power_iters, params.power_tolerance)
    step_all = params.step_safety / (2.0 * np.maximum(lmax, 1e-300))

    x_out = np.zeros((nb, m))
    obj_out = np.zeros(nb)
    it_out = np.full(nb, params.max_iters)
    conv_out = np.zeros(nb, dtype=bool)

    act = np.arange(nb)
    G, b, c, step = gram, hty, yy, step_all
    v = np.zeros((nb, m)) if x0 is None else prox(np.asarray(x0, dtype=float), np.zeros((nb, 1)))
    gv = np.matmul(G, v[..., None])[..., 0]
    f = np.einsum("bi,bi->b", v, gv - 2 * b) + c + penalty(v)
    z, gz = v.copy(), gv.copy()
    t = np.ones(nb)
    if trace is not None:
        trace.append(f[0])

    for k in range(1, params.max_iters + 1):
        w = z - step[:, None] * 2.0 * (gz - b)
        v_new = prox(w, (step[:, None]))
        gv_new = np.matmul(G, v_new[..., None])[..., 0]
        f_new = np.einsum("bi,bi->b", v_new, gv_new - 2 * b) + c + penalty(v_new)
        if trace is not None and act.size and act[0] == 0:
            trace.append(f_new[0])
        move = np.max(np.abs(v_new - z), axis=1)
        done = (np.abs(f - f_new) <= params.rel_tolerance * (1.0 + np.abs(f_new))) & (
            move <= params.step_tolerance)

        if params.acceleration:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            # adaptive restart when the momentum points uphill
            restart = np.einsum("bi,bi->b", z - v_new, v_new - v) > 0
            beta = np.where(restart, 0.0, beta)
            t_new = np.where(restart, 1.0, t_new)
            z = v_new + beta[:, None] * (v_new - v)
            gz = gv_new + beta[:, None] * (gv_new - gv)
            t = t_new
        else:
            z, gz = v_new, gv_new
        v, gv, f = v_new, gv_new, f_new

        if np.any(done) or k == params.max_iters:
            fin = done | (k == params.max_iters)
            idx = act[fin]
            x_out[idx] = v[fin]
            obj_out[idx] = f[fin]
            it_out[idx] = k
            conv_out[idx] = done[fin]
            keep = ~fin
            if not np.any(keep):
                break
            act = act[keep]
            G, b, c, step = G[keep], b[keep], c[keep], step[keep]
            v, gv, f, z, gz, t = v[keep], gv[keep], f[keep], z[keep], gz[keep], t[keep]
    return x_out, obj_out, it_out, conv_out, step_all


def _box_prox(lam: float, lo: float, hi: float):
    def prox(w, t):
        return np.clip(np.sign(w) * np.maximum(np.abs(w) - t * lam, 0.0), lo, hi)

    def penalty(v):
        return lam * np.sum(np.abs(v), axis=1)

    return prox, penalty


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("inputs must be finite")


def solve_box_lasso_batch(h: np.ndarray, y: np.ndarray, lam: float, lo: float, hi: float,
                          params: SolverParams = SolverParams(), trace=None):
    """Box-LASSO for a stack of channels ``h`` (B, N, M) and observations ``y`` (B, N)."""
    h = np.asarray(h)
    y = np.asarray(y)
    _check_finite(h, y)
    if lam < 0 or not lo <= 0.0 <= hi:
        raise ValueError("need lam >= 0 and lo <= 0 <= hi")
    hh = np.conj(np.swapaxes(h, 1, 2))
    gram = np.real(np.matmul(hh, h))
    hty = np.real(np.matmul(hh, y[..., None])[..., 0])
    yy = np.real(np.einsum("bn,bn->b", np.conj(y), y))
    prox, penalty = _box_prox(lam, lo, hi)
    return prox_gradient_batch(gram, hty, yy, prox, penalty, params, trace=trace)


def solve_box_lasso(y, h, lam: float, lo: float = 0.0, hi: float = 1.0,
                    params: SolverParams = SolverParams(), trace=None) -> SoftEstimate:
    """Soft estimate ``argmin ||y - H v||^2 + lam ||v||_1`` over ``v in [lo, hi]^M``."""
    h = np.asarray(h)
    y = np.asarray(y)
    if h.ndim != 2 or y.shape != (h.shape[0],):
        raise ValueError(f"dimension mismatch: H {h.shape}, y {y.shape}")
    x, obj, its, conv, step = solve_box_lasso_batch(h[None], y[None], lam, lo, hi, params, trace)
    return SoftEstimate(x[0], float(obj[0]), int(its[0]), bool(conv[0]), float(step[0]))


def solve_complex_lasso(y, h, lam: float, params: SolverParams = SolverParams()) -> SoftEstimate:
    """Unconstrained complex LASSO with magnitude shrinkage (extension path)."""
    h = np.asarray(h, dtype=complex)
    y = np.asarray(y, dtype=complex)
    _check_finite(h, y)
    gram = h.conj().T @ h
    hty = h.conj().T @ y
    step = params.step_safety / (2.0 * np.linalg.eigvalsh(gram)[-1])
    v = np.zeros(h.shape[1], dtype=complex)
    z, t = v.copy(), 1.0
    f = objective(y, h, v, lam)
    converged = False
    k = 0
    for k in range(1, params.max_iters + 1):
        w = z - step * 2.0 * (gram @ z - hty)
        mag = np.abs(w)
        v_new = np.where(mag > step * lam, (1 - step * lam / np.maximum(mag, 1e-300)) * w, 0)
        f_new = objective(y, h, v_new, lam)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t)) if params.acceleration else 1.0
        z = v_new + ((t - 1) / t_new) * (v_new - v) if params.acceleration else v_new
        if abs(f - f_new) <= params.rel_tolerance * (1 + abs(f_new)):
            v, f, converged = v_new, f_new, True
            break
        v, f, t = v_new, f_new, t_new
    return SoftEstimate(v, f, k, converged, step)


def decide(x_star, rule: DecisionRule) -> np.ndarray:
    """Map soft estimates entrywise into ``S_0``."""
    x = np.asarray(x_star)
    if rule.kind == "identity":
        return x.copy()
    if rule.kind == "threshold-ssk":
        # boundary x == eps maps to active
        return math.sqrt(rule.power) * (np.real(x) >= rule.eps).astype(float)
    points = np.concatenate([[0.0], np.asarray(rule.alphabet, dtype=complex)])
    idx = np.argmin(np.abs(x[..., None] - points), axis=-1)
    return points[idx]


def brute_force_map(y, h, codebook: SmCodebook, n_terminals: int,
                    sigma2: float = 0.0) -> np.ndarray:
    """Exhaustive ML (= MAP under uniform bits) detection over all MA-SM vectors.

    ``sigma2`` does not change the minimizer under the uniform prior; it is
    accepted for interface symmetry with the soft detectors.
    """
    per = codebook.n_blocks
    total = per ** n_terminals
    if total > MAX_MAP_CANDIDATES:
        raise ValueError(f"search space of {total} vectors exceeds {MAX_MAP_CANDIDATES}")
    h = np.asarray(h)
    y = np.asarray(y)
    blocks = codebook.all_blocks()
    best, best_cost = None, np.inf
    chunk = 4096
    combos = itertools.product(range(per), repeat=n_terminals)
    while True:
        rows = list(itertools.islice(combos, chunk))
        if not rows:
            break
        cand = blocks[np.asarray(rows)].reshape(len(rows), -1)
        r = y[None, :] - cand @ h.T
        cost = np.real(np.einsum("tn,tn->t", np.conj(r), r))
        i = int(np.argmin(cost))
        if cost[i] < best_cost:
            best, best_cost = cand[i], cost[i]
    return best
