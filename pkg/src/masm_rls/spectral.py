"""Limiting eigenvalue laws of the Gram matrix ``J = H^H H``.

Only the R-transform and its derivative enter the decoupled scalar
channel, so a :class:`SpectralModel` is a pair of closed-form callables.
The Marcenko-Pastur helpers below (Stieltjes transform, CDF) exist to
validate sampled channel ensembles against the analytic law.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "SpectralModel",
    "ChannelLoad",
    "mp_r_transform",
    "mp_r_transform_deriv",
    "mp_stieltjes",
    "mp_cdf",
    "empirical_stieltjes",
    "ks_distance_mp",
]


def mp_r_transform(xi: float, omega: float) -> float:
    """R-transform ``xi / (1 - omega)`` of the i.i.d. Gram law with load ``xi``."""
    if omega == 1.0:
        raise ValueError("R-transform has a pole at omega = 1")
    return xi / (1.0 - omega)


def mp_r_transform_deriv(xi: float, omega: float) -> float:
    if omega == 1.0:
        raise ValueError("R-transform has a pole at omega = 1")
    return xi / (1.0 - omega) ** 2


@dataclass(frozen=True)
class SpectralModel:
    """Analytic description of the limiting spectrum of ``J``.

    Use :meth:`marcenko_pastur` for i.i.d. channels (entry variance 1/M) or
    :meth:`custom` with a closed-form R-transform and its exact derivative.
    ``pole`` is the value of ``omega`` where ``R`` blows up (if any); the
    replica solver keeps ``-c`` strictly below it.
    """

    kind: str
    r_transform: Callable[[float], float] = field(repr=False)
    r_transform_deriv: Callable[[float], float] = field(repr=False)
    xi: Optional[float] = None
    pole: Optional[float] = None

    @classmethod
    def marcenko_pastur(cls, xi: float) -> "SpectralModel":
        if not xi > 0:
            raise ValueError(f"channel load must be positive, got {xi}")
        return cls(
            kind="marcenko-pastur",
            r_transform=lambda w: mp_r_transform(xi, w),
            r_transform_deriv=lambda w: mp_r_transform_deriv(xi, w),
            xi=float(xi),
            pole=1.0,
        )

    @classmethod
    def point_mass(cls, value: float) -> "SpectralModel":
        """All eigenvalues of ``J`` equal to ``value`` (e.g. unitary channels)."""
        if not value > 0:
            raise ValueError("eigenvalue must be positive")
        return cls(
            kind="point-mass",
            r_transform=lambda w: float(value),
            r_transform_deriv=lambda w: 0.0,
        )

    @classmethod
    def custom(cls, r_transform, r_transform_deriv, pole=None) -> "SpectralModel":
        return cls(kind="custom", r_transform=r_transform,
                   r_transform_deriv=r_transform_deriv, pole=pole)

    @property
    def mean_eigenvalue(self) -> float:
        return float(self.r_transform(0.0))

    def c_lower_bound(self, margin: float = 1e-9) -> float:
        """Smallest admissible ``c`` such that ``R(-c)`` stays finite."""
        if self.pole is None:
            return -np.inf
        return -self.pole + margin


@dataclass(frozen=True)
class ChannelLoad:
    xi: float
    alpha: float

    @classmethod
    def from_dims(cls, k: int, m_u: int, n: int) -> "ChannelLoad":
        return cls(xi=n / (k * m_u), alpha=k / n)


def empirical_stieltjes(eigenvalues, z: complex) -> complex:
    """Stieltjes transform ``mean(1 / (lambda_i - z))`` of a finite spectrum."""
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("eigenvalue list is empty")
    if not np.imag(z) > 0:
        raise ValueError("z must lie in the upper half plane")
    return complex(np.mean(1.0 / (lam - z)))


def mp_stieltjes(xi: float, z: complex) -> complex:
    """Stieltjes transform of the limiting law of ``H^H H`` for i.i.d. ``H``.

    Inverting ``z = R(-g) - 1/g`` with ``R(w) = xi/(1-w)`` gives the
    quadratic ``z g^2 + (z - xi + 1) g + 1 = 0``; the root in the upper
    half plane is the transform.
    """
    z = complex(z)
    roots = np.roots([z, z - xi + 1.0, 1.0])
    g = roots[np.argmax(roots.imag)]
    return complex(g)


def mp_cdf(xi: float, x) -> np.ndarray:
    """CDF of the eigenvalue law of ``H^H H`` (N x M, entry variance 1/M, xi = N/M).

    For ``xi < 1`` there is an atom of mass ``1 - xi`` at zero; the rest is
    ``xi`` times the Marcenko-Pastur law of ratio ``min(xi, 1/xi)`` scaled
    to the nonzero eigenvalues of ``H H^H`` (if ``xi <= 1``) or of ``J``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if xi <= 1.0:
        # nonzero eigenvalues: MP with ratio xi, unit variance
        ratio, scale, weight, atom = xi, 1.0, xi, 1.0 - xi
    else:
        # J is full rank: MP with ratio 1/xi, variance xi
        ratio, scale, weight, atom = 1.0 / xi, xi, 1.0, 0.0
    lo = scale * (1 - np.sqrt(ratio)) ** 2
    hi = scale * (1 + np.sqrt(ratio)) ** 2

    def dens(t):
        t = np.asarray(t)
        return np.sqrt(np.clip((hi - t) * (t - lo), 0.0, None)) / (2 * np.pi * ratio * scale * t)

    # integrate the density on a fixed fine grid (sqrt-edge substitution keeps it smooth)
    phi = np.linspace(0.0, np.pi, 4097)
    t = 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(phi)
    g = dens(t) * 0.5 * (hi - lo) * np.sin(phi)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(phi))])
    cum /= cum[-1]
    out = np.interp(x, t, cum, left=0.0, right=1.0) * weight
    out = out + np.where(x >= 0.0, atom, 0.0)
    return out


def ks_distance_mp(eigenvalues, xi: float, n_grid: int = 2000) -> float:
    """Sup-distance between the empirical CDF and :func:`mp_cdf` on a grid."""
    lam = np.sort(np.asarray(eigenvalues, dtype=float).ravel())
    top = max(lam[-1], (1 + np.sqrt(xi)) ** 2 * max(1.0, xi)) * 1.05
    grid = np.linspace(0.0, top, n_grid)
    # numerically-zero eigenvalues belong to the atom
    lam = np.where(lam < 1e-10 * max(lam[-1], 1.0), 0.0, lam)
    emp = np.searchsorted(lam, grid, side="right") / lam.size
    return float(np.max(np.abs(emp - mp_cdf(xi, grid))))
