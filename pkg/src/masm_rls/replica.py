"""Large-system performance prediction of RLS detectors.

The vector problem is replaced by a scalar Gaussian channel
``y = x + theta(c, q) z`` with ``z ~ CN(0, 1)``, followed by the scalar
RLS estimator with quadratic weight ``1/tau(c)``. The pair ``(c, q)``
solves a two-equation fixed point; at that point the scalar MSE and
error probability are the asymptotic per-entry MSE and error rate.

Because the feasible sets handled here are real, the scalar estimate
depends on ``y`` only through ``Re y = x + (theta / sqrt(2)) g`` with
``g ~ N(0, 1)``, so all expectations are one-dimensional.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import brentq, minimize_scalar
from scipy.special import ndtr

from .spectral import SpectralModel

__all__ = [
    "DecoupledConfig",
    "ReplicaState",
    "ReplicaSolution",
    "decoupled_estimate_box_lasso",
    "decoupled_estimate_generic",
    "make_state",
    "expectations",
    "error_probability",
    "residuals",
    "solve_fixed_point",
    "find_fixed_points",
    "tune_lambda",
]

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DecoupledConfig:
    """Parameters of the decoupled scalar setting.

    The default estimator is box-LASSO: penalty ``lam * |v|`` on
    ``[lo, hi]`` (``lo = -ell``, ``hi = u``; either may be infinite).
    Passing ``penalty`` (a vectorized nonnegative function) and/or
    ``discrete`` (a finite real feasible set) switches to the generic
    numerical estimator and Gauss-Hermite quadrature.
    """

    eta: float
    power: float
    sigma2: float
    spectral: SpectralModel
    lam: float = 0.13
    lo: float = 0.0
    hi: float = 1.0
    eps: float = 0.5
    alphabet: Optional[tuple] = None
    penalty: Optional[Callable] = field(default=None, repr=False)
    discrete: Optional[tuple] = None

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("activity factor must lie in (0, 1]")
        if self.power <= 0 or self.sigma2 < 0 or self.lam < 0:
            raise ValueError("need power > 0, sigma2 >= 0, lam >= 0")
        if not self.lo <= 0.0 <= self.hi:
            raise ValueError("feasible interval must contain zero")

    @property
    def symbols(self) -> np.ndarray:
        if self.alphabet is None:
            return np.array([math.sqrt(self.power)])
        return np.real(np.asarray(self.alphabet, dtype=complex))

    @property
    def is_box_lasso(self) -> bool:
        return self.penalty is None and self.discrete is None

    def with_lam(self, lam: float) -> "DecoupledConfig":
        return replace(self, lam=lam)


@dataclass(frozen=True)
class ReplicaState:
    c: float
    q: float
    tau: float
    theta: float
    clamped: bool = False


@dataclass
class ReplicaSolution:
    c_star: float
    q_star: float
    gamma: float
    q_e: float
    converged: bool
    residuals: tuple
    iterations: int = 0
    tau: float = float("nan")
    theta: float = float("nan")
    flags: list = field(default_factory=list)
    alternatives: list = field(default_factory=list)


# --- scalar estimators -----------------------------------------------------


def decoupled_estimate_box_lasso(y_real, tau: float, lam: float, lo: float = 0.0, hi: float = 1.0):
    """Closed-form scalar box-LASSO estimate with threshold ``tau * lam / 2``.

    Soft-thresholding followed by clipping to ``[lo, hi]`` reproduces the
    five-branch map: ``hi`` above ``t + hi``, ``y - t`` on ``[t, t + hi]``,
    zero on ``[-t, t]``, ``y + t`` on ``[-t + lo, -t]`` and ``lo`` below.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    t = 0.5 * tau * lam
    y = np.asarray(y_real, dtype=float)
    out = np.clip(np.sign(y) * np.maximum(np.abs(y) - t, 0.0), lo, hi)
    return float(out) if out.ndim == 0 else out


def _l1(lam):
    return lambda v: lam * np.abs(v)


def decoupled_estimate_generic(y_real, tau: float, penalty: Callable, lo: float = -np.inf,
                               hi: float = np.inf, discrete: Optional[Sequence[float]] = None,
                               grid_points: int = 1024, atol: float = 1e-10):
    """Numerical minimizer of ``(1/tau)(y - v)^2 + penalty(v)`` over the feasible set.

    Interval sets use a ``grid_points`` bracketing grid refined by
    golden-section search on the objective difference to the grid
    minimizer (which keeps the comparison free of cancellation). Finite
    sets are searched exhaustively, lowest index winning ties.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    y = np.atleast_1d(np.asarray(y_real, dtype=float))
    scalar = np.ndim(y_real) == 0

    if discrete is not None:
        pts = np.asarray(discrete, dtype=float)
        cost = (y[:, None] - pts[None, :]) ** 2 / tau + penalty(pts)[None, :]
        out = pts[np.argmin(cost, axis=1)]
        return float(out[0]) if scalar else out

    p_y = penalty(np.clip(y, lo, hi))
    if np.any(~np.isfinite(p_y)) or np.any(p_y < 0):
        raise ValueError("penalty must be finite and nonnegative on the feasible set")
    # (1/tau)(y-v)^2 <= cost(clip(y)) bounds the minimizer around y
    yc = np.clip(y, lo, hi)
    radius = np.sqrt(tau * ((y - yc) ** 2 / tau + p_y)) + 1e-12
    a = np.maximum(y - radius, lo)
    b = np.minimum(y + radius, hi)

    frac = np.linspace(0.0, 1.0, grid_points)
    grid = a[:, None] + (b - a)[:, None] * frac[None, :]
    cost = (y[:, None] - grid) ** 2 / tau + penalty(grid)
    k = np.argmin(cost, axis=1)
    rows = np.arange(y.size)
    v0 = grid[rows, k]
    h = (b - a) / (grid_points - 1)
    left = np.maximum(v0 - h, a)
    right = np.minimum(v0 + h, b)

    def diff(v):
        # cost(v) - cost(v0) without catastrophic cancellation
        return (v0 - v) * (2 * y - v - v0) / tau + (penalty(v) - penalty(v0))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = right - invphi * (right - left)
    x2 = left + invphi * (right - left)
    f1, f2 = diff(x1), diff(x2)
    for _ in range(200):
        if np.max(right - left) <= atol:
            break
        go_left = f1 <= f2
        right = np.where(go_left, x2, right)
        left = np.where(go_left, left, x1)
        nx1 = right - invphi * (right - left)
        nx2 = left + invphi * (right - left)
        x2, f2, x1, f1 = (
            np.where(go_left, x1, nx2),
            np.where(go_left, f1, diff(nx2)),
            np.where(go_left, nx1, x2),
            np.where(go_left, diff(nx1), f2),
        )
    best = 0.5 * (left + right)
    # the bracket can miss an endpoint minimum by less than atol; compare explicitly
    cands = np.stack([best, v0, a, b], axis=1)
    vals = np.stack([diff(cands[:, j]) for j in range(cands.shape[1])], axis=1)
    out = cands[rows, np.argmin(vals, axis=1)]

    # Value comparisons stall near sqrt(machine eps); a parabola through three
    # feasible points 1e-5 apart lands on the minimizer wherever the objective
    # is locally quadratic. Kept only if it does not raise the objective.
    step = np.minimum(1e-5, (b - a) / 2)
    s = np.clip(out - step, a, np.maximum(b - 2 * step, a))
    f0, f1, f2 = diff(s), diff(s + step), diff(s + 2 * step)
    curv = f0 - 2 * f1 + f2
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = s + step + 0.5 * step * (f0 - f2) / curv
    ok = (curv > 0) & np.isfinite(vertex) & (np.abs(vertex - out) <= 2 * step)
    vertex = np.clip(np.where(ok, vertex, out), a, b)
    noise = 8 * np.finfo(float).eps * (np.abs(penalty(out)) + (y - out) ** 2 / tau + 1.0)
    out = np.where(ok & (diff(vertex) <= diff(out) + noise), vertex, out)
    return float(out[0]) if scalar else out


# --- decoupled channel parameters ------------------------------------------


def make_state(c: float, q: float, config: DecoupledConfig) -> ReplicaState:
    """Evaluate ``tau(c) = 1/R(-c)`` and the noise scale ``theta(c, q)``.

    ``theta^2 = (sigma^2 R(-c) - (sigma^2 c - q) R'(-c)) / R(-c)^2``; a
    negative radicand is clamped to zero and flagged.
    """
    sp = config.spectral
    r = sp.r_transform(-c)
    dr = sp.r_transform_deriv(-c)
    if not r > 0:
        raise ValueError(f"R(-c) must be positive, got {r} at c={c}")
    radicand = config.sigma2 * r - (config.sigma2 * c - q) * dr
    clamped = radicand < 0
    theta = math.sqrt(max(radicand, 0.0)) / r
    return ReplicaState(c=c, q=q, tau=1.0 / r, theta=theta, clamped=clamped)


# --- expectations ----------------------------------------------------------


def _phi(x):
    return np.where(np.isfinite(x), np.exp(-0.5 * np.square(np.where(np.isfinite(x), x, 0.0))), 0.0) * _INV_SQRT_2PI


def _xphi(x):
    return np.where(np.isfinite(x), np.where(np.isfinite(x), x, 0.0) * _phi(x), 0.0)


def _box_lasso_moments(x: float, s: float, t: float, lo: float, hi: float):
    """``E[(est - x)^2]`` and ``E[(est - x) g]`` for ``Re y = x + s g``.

    The estimator is affine (``alpha + beta * y``) on five intervals of
    ``y``, so both expectations are sums of Gaussian partial moments.
    """
    # (y_lo, y_hi, alpha, beta)
    segs = (
        (-np.inf, lo - t, lo, 0.0),
        (lo - t, -t, t, 1.0),
        (-t, t, 0.0, 0.0),
        (t, hi + t, -t, 1.0),
        (hi + t, np.inf, hi, 0.0),
    )
    mse = cross = 0.0
    for y_lo, y_hi, alpha, beta in segs:
        if not y_hi > y_lo:
            continue
        if s > 0:
            ga, gb = (y_lo - x) / s, (y_hi - x) / s
            m0 = ndtr(gb) - ndtr(ga)
            m1 = _phi(ga) - _phi(gb)
            m2 = m0 + _xphi(ga) - _xphi(gb)
        else:
            inside = y_lo <= x < y_hi
            m0, m1, m2 = float(inside), 0.0, 0.0
        a_ = alpha + (beta - 1.0) * x
        b_ = beta * s
        mse += a_ * a_ * m0 + 2 * a_ * b_ * m1 + b_ * b_ * m2
        cross += a_ * m1 + b_ * m2
    return float(mse), float(cross)


@lru_cache(maxsize=16)
def _gh_nodes(order: int):
    z, w = hermgauss(order)
    return _SQRT2 * z, w / math.sqrt(math.pi)


def _estimator(config: DecoupledConfig, tau: float):
    if config.is_box_lasso:
        return lambda y: decoupled_estimate_box_lasso(y, tau, config.lam, config.lo, config.hi)
    pen = config.penalty if config.penalty is not None else _l1(config.lam)
    return lambda y: decoupled_estimate_generic(y, tau, pen, config.lo, config.hi, config.discrete)


def _mixture(config: DecoupledConfig):
    syms = config.symbols
    xs = np.concatenate([[0.0], syms])
    ws = np.concatenate([[1.0 - config.eta], np.full(syms.size, config.eta / syms.size)])
    return xs, ws


def expectations(state: ReplicaState, config: DecoupledConfig, order: int = 96,
                 method: str = "auto") -> tuple[float, float]:
    """Right-hand sides of the fixed-point equations.

    Returns ``(e_cross, e_mse)`` with ``e_cross = E[(x* - x) Re z]`` and
    ``e_mse = E[(x* - x)^2]``, the mean taken over ``x`` (zero w.p.
    ``1 - eta``, else uniform on the alphabet) and ``z``.

    ``method`` is ``"closed-form"`` (box-LASSO only; exact Gaussian
    integrals), ``"gauss-hermite"`` (any estimator, ``order`` nodes) or
    ``"auto"`` (closed form when available).
    """
    if method == "auto":
        method = "closed-form" if config.is_box_lasso else "gauss-hermite"
    s = state.theta / _SQRT2
    xs, ws = _mixture(config)
    if method == "closed-form":
        if not config.is_box_lasso:
            raise ValueError("closed form exists only for the box-LASSO estimator")
        t = 0.5 * state.tau * config.lam
        mse = cross = 0.0
        for x, w in zip(xs, ws):
            m, cr = _box_lasso_moments(float(x), s, t, config.lo, config.hi)
            mse += w * m
            cross += w * cr
        return float(cross / _SQRT2), float(mse)
    if method != "gauss-hermite":
        raise ValueError(f"unknown method {method!r}")
    g, wg = _gh_nodes(order)
    est = _estimator(config, state.tau)
    y = (xs[:, None] + s * g[None, :]).ravel()
    err = est(y).reshape(xs.size, g.size) - xs[:, None]
    mse = float(ws @ (err ** 2 @ wg))
    cross = float(ws @ ((err * g) @ wg)) / _SQRT2
    return cross, mse


def _activation_threshold(config: DecoupledConfig, tau: float) -> float:
    """Level of ``Re y`` at and above which the box-LASSO estimate is ``>= eps``."""
    t = 0.5 * tau * config.lam
    eps = config.eps
    if eps > config.hi:
        return np.inf
    if eps <= config.lo:
        return -np.inf
    return eps + t if eps > 0 else eps - t


def error_probability(state: ReplicaState, config: DecoupledConfig, order: int = 96,
                      method: str = "auto") -> float:
    """``Pr{f_dec(x*) != x}`` in the decoupled channel under threshold-SSK decisions.

    Box-LASSO with an SSK alphabet uses normal CDFs; otherwise the
    indicator is integrated by Gauss-Hermite quadrature with decisions
    ``sqrt(P) * 1{x* >= eps}`` (single-symbol alphabets) or nearest point.
    """
    syms = config.symbols
    s = state.theta / _SQRT2
    ssk = syms.size == 1
    if method == "auto":
        method = "closed-form" if (config.is_box_lasso and ssk) else "gauss-hermite"
    if method == "closed-form":
        thr = _activation_threshold(config, state.tau)
        a = float(syms[0])

        def p_active(x):
            if np.isinf(thr):
                return 1.0 if thr < 0 else 0.0
            if s == 0:
                return float(x >= thr)
            return float(ndtr((x - thr) / s))

        return (1 - config.eta) * p_active(0.0) + config.eta * (1.0 - p_active(a))
    g, wg = _gh_nodes(order)
    xs, ws = _mixture(config)
    est = _estimator(config, state.tau)
    xhat = est((xs[:, None] + s * g[None, :]).ravel()).reshape(xs.size, g.size)
    if ssk:
        dec = np.where(xhat >= config.eps, syms[0], 0.0)
    else:
        pts = np.concatenate([[0.0], syms])
        dec = pts[np.argmin(np.abs(xhat[..., None] - pts), axis=-1)]
    wrong = (dec != xs[:, None]).astype(float)
    return float(ws @ (wrong @ wg))


# --- fixed point -----------------------------------------------------------


def residuals(c: float, q: float, config: DecoupledConfig, order: int = 96,
              method: str = "auto") -> tuple[float, float]:
    """Residuals ``(c theta - tau e_cross, q - e_mse)`` of the fixed-point equations."""
    st = make_state(c, q, config)
    e_cross, e_mse = expectations(st, config, order, method)
    return c * st.theta - st.tau * e_cross, q - e_mse


def _c_bounds(config: DecoupledConfig):
    lo = config.spectral.c_lower_bound(1e-9)
    if not np.isfinite(lo):
        lo = -1e3
    return lo, 1e3


def _solve_c(q: float, config: DecoupledConfig, order: int, method: str, c_hint: float) -> float:
    def f(c):
        return residuals(c, q, config, order, method)[0]

    lo, hi = _c_bounds(config)
    f_lo = f(lo)
    # geometric bracket growth upward from the hint keeps brentq's interval small
    a, fa = lo, f_lo
    b = max(c_hint, lo + 1e-6)
    fb = f(b)
    if np.sign(fb) == np.sign(fa):
        a, fa = b, fb
        b = max(2.0 * abs(b), 1.0)
        fb = f(b)
        while np.sign(fb) == np.sign(fa) and b < 1e12:
            a, fa = b, fb
            b *= 10.0 if b >= hi else 2.0
            fb = f(b)
    if np.sign(fb) == np.sign(fa):
        raise RuntimeError("could not bracket the c-equation root")
    return brentq(f, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_fixed_point(config: DecoupledConfig, init: tuple = (0.1, None), damping: float = 0.5,
                      tol: float = 1e-10, max_iters: int = 2000, order: int = 96,
                      method: str = "auto") -> ReplicaSolution:
    """Damped iteration of the fixed-point equations.

    ``q`` takes a damped step toward ``e_mse``; ``c`` then solves its own
    equation exactly at the new ``q`` by bracketed root search. Damping is
    halved whenever ``delta q`` flips sign twice in a row. ``init[1] = None``
    starts from ``q = eta * P`` (the all-zero estimator's MSE).
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    c = float(init[0])
    q = config.eta * config.power if init[1] is None else float(init[1])
    flags: list = []
    dq_prev = 0.0
    flips = 0
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        st = make_state(c, q, config)
        if st.clamped and "theta-clamped" not in flags:
            flags.append("theta-clamped")
        _, e_mse = expectations(st, config, order, method)
        q_new = (1.0 - damping) * q + damping * e_mse
        c_new = _solve_c(q_new, config, order, method, c)
        dq = q_new - q
        if dq * dq_prev < 0:
            flips += 1
            if flips >= 2:
                damping *= 0.5
                flips = 0
                flags.append(f"damping->{damping:g}")
        else:
            flips = 0
        dq_prev = dq
        delta = max(abs(c_new - c), abs(dq))
        c, q = c_new, q_new
        if delta < tol and abs(residuals(c, q, config, order, method)[1]) < tol:
            converged = True
            break
    st = make_state(c, q, config)
    e_cross, e_mse = expectations(st, config, order, method)
    res = (float(c * st.theta - st.tau * e_cross), float(q - e_mse))
    q_e = error_probability(st, config, order)
    if not converged:
        log.warning("fixed point not converged after %d iterations (lam=%g)", it, config.lam)
    return ReplicaSolution(c_star=float(c), q_star=float(q), gamma=float(e_mse), q_e=q_e, converged=converged,
                           residuals=res, iterations=it, tau=st.tau, theta=st.theta,
                           flags=flags)


def find_fixed_points(config: DecoupledConfig, inits: Sequence[tuple] = ((0.1, None), (1.0, 1e-4), (0.01, 1.0)),
                      **kwargs) -> ReplicaSolution:
    """Solve from several initializations and flag disagreement.

    The first solution is returned; distinct solutions (by ``gamma``, relative
    1e-6) land in ``alternatives`` and add a ``multiple-solutions`` flag.
    """
    sols = [solve_fixed_point(config, init=i, **kwargs) for i in inits]
    main = sols[0]
    for s in sols[1:]:
        if s.converged and abs(s.gamma - main.gamma) > 1e-6 * max(abs(main.gamma), 1e-12):
            main.alternatives.append(s)
    if main.alternatives:
        main.flags.append("multiple-solutions")
    return main


def tune_lambda(config: DecoupledConfig, lambdas: Sequence[float], refine: bool = True,
                **kwargs) -> tuple[float, float, dict]:
    """Regularization minimizing the predicted MSE.

    Solves the fixed point at every grid value (warm-started from the
    previous one), takes the grid minimizer and optionally refines it by
    golden-section search inside the bracketing grid interval.

    Returns ``(lam_star, gamma_min, info)``; ``info`` holds the per-grid
    solutions and the excluded (non-converged) grid values.
    """
    lambdas = [float(v) for v in lambdas]
    if not lambdas:
        raise ValueError("lambda grid is empty")
    sols, excluded = {}, []
    init = kwargs.pop("init", (0.1, None))
    for lam in lambdas:
        sol = solve_fixed_point(config.with_lam(lam), init=init, **kwargs)
        if sol.converged:
            sols[lam] = sol
            init = (sol.c_star, sol.q_star)
        else:
            excluded.append(lam)
    if not sols:
        raise RuntimeError("no grid point converged")
    grid = sorted(sols)
    gammas = [sols[v].gamma for v in grid]
    i = int(np.argmin(gammas))
    lam_star, gamma_min = grid[i], gammas[i]
    if refine and 0 < i < len(grid) - 1:
        warm = (sols[lam_star].c_star, sols[lam_star].q_star)

        def gamma_at(lam):
            return solve_fixed_point(config.with_lam(lam), init=warm, **kwargs).gamma

        res = minimize_scalar(gamma_at, bracket=(grid[i - 1], lam_star, grid[i + 1]),
                              method="golden", options={"xtol": 1e-6})
        if res.fun <= gamma_min:
            lam_star, gamma_min = float(res.x), float(res.fun)
    return lam_star, gamma_min, {"solutions": sols, "excluded": excluded}
