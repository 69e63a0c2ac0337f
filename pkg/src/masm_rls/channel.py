"""Channel ensembles and the noisy observation ``y = H x + n``.

``H`` is N x M (rows are receive antennas). Every sampler takes an
explicit :class:`numpy.random.Generator`; nothing touches global state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ChannelEnsemble",
    "Observation",
    "haar_unitary",
    "sample_channel",
    "transmit",
    "sigma2_from_snr_db",
    "complex_gaussian",
]

KINDS = ("iid-gaussian", "iid-pm1", "iid-cpm1", "iid-custom", "bi-unitary")


def sigma2_from_snr_db(snr_db: float, power: float = 1.0) -> float:
    """Noise variance for ``SNR = P / sigma^2`` given in dB."""
    return power * 10.0 ** (-snr_db / 10.0)


def complex_gaussian(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples of total variance ``variance``."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``n x n`` unitary via QR with phase-corrected R diagonal."""
    z = complex_gaussian(rng, (n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True)
class ChannelEnsemble:
    """Random channel law.

    ``kind`` is one of ``iid-gaussian``, ``iid-pm1``, ``iid-cpm1``,
    ``iid-custom`` or ``bi-unitary``. ``iid-pm1`` is real with entries
    ``+-sqrt(v)``; ``iid-cpm1`` draws independent signs for the real and
    imaginary parts, ``(+-1 +- 1j) sqrt(v/2)``, which matches the
    second-order statistics of the complex Gaussian law. For ``bi-unitary`` the matrix is ``U diag(sv) V^H``
    with ``singular_values`` of length ``min(N, M)``. ``entry_sampler``
    (``iid-custom`` only) maps ``(rng, shape)`` to zero-mean unit-variance
    entries, which are then scaled to ``entry_variance``.
    """

    kind: str
    n_rx: int
    m_tx: int
    entry_variance: Optional[float] = None
    singular_values: Optional[Sequence[float]] = None
    entry_sampler: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.n_rx < 1 or self.m_tx < 1:
            raise ValueError("channel dimensions must be positive")
        if self.kind == "bi-unitary":
            if self.singular_values is None or len(self.singular_values) != min(self.n_rx, self.m_tx):
                raise ValueError("bi-unitary ensemble needs min(N, M) singular values")
        if self.kind == "iid-custom" and self.entry_sampler is None:
            raise ValueError("iid-custom ensemble needs an entry sampler")

    @property
    def variance(self) -> float:
        return 1.0 / self.m_tx if self.entry_variance is None else self.entry_variance


def sample_channel(ensemble: ChannelEnsemble, rng: np.random.Generator) -> np.ndarray:
    n, m = ensemble.n_rx, ensemble.m_tx
    if ensemble.kind == "iid-gaussian":
        return complex_gaussian(rng, (n, m), ensemble.variance)
    if ensemble.kind == "iid-pm1":
        signs = 2.0 * rng.integers(0, 2, size=(n, m)) - 1.0
        return (np.sqrt(ensemble.variance) * signs).astype(complex)
    if ensemble.kind == "iid-cpm1":
        signs = 2.0 * rng.integers(0, 2, size=(2, n, m)) - 1.0
        return np.sqrt(ensemble.variance / 2) * (signs[0] + 1j * signs[1])
    if ensemble.kind == "iid-custom":
        entries = np.asarray(ensemble.entry_sampler(rng, (n, m)))
        return np.sqrt(ensemble.variance) * entries.astype(complex)
    u = haar_unitary(n, rng)
    v = haar_unitary(m, rng)
    k = min(n, m)
    sv = np.asarray(ensemble.singular_values, dtype=float)
    return (u[:, :k] * sv) @ v[:, :k].conj().T


@dataclass(frozen=True)
class Observation:
    y: np.ndarray
    h: np.ndarray
    x_true: np.ndarray
    sigma2: float


def transmit(h, x, sigma2: float, rng: Optional[np.random.Generator]) -> Observation:
    """Pass ``x`` through ``h`` and add CN(0, sigma2 I) noise."""
    h = np.asarray(h)
    x = np.asarray(x)
    if h.ndim != 2 or x.shape != (h.shape[1],):
        raise ValueError(f"dimension mismatch: H {h.shape}, x {x.shape}")
    if sigma2 < 0:
        raise ValueError("noise variance must be nonnegative")
    y = h @ x
    if sigma2 > 0:
        y = y + complex_gaussian(rng, h.shape[0], sigma2)
    return Observation(y=y, h=h, x_true=x, sigma2=float(sigma2))
