"""Experiment configuration (TOML) with validation of derived quantities."""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import ChannelEnsemble, sigma2_from_snr_db
from .codec import SmCodebook, build_codebook
from .detector import DecisionRule, DetectorSpec, SolverParams
from .replica import DecoupledConfig
from .spectral import SpectralModel

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "default_config"]


class ConfigError(ValueError):
    """Raised with the full list of violations found in a configuration."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


_SCHEMA = {
    "system": {"K", "Mu", "Lu", "N", "P", "S", "alphabet", "snr_db", "sigma2",
               "subset_policy", "subset_seed"},
    "channel": {"kind", "singular_values"},
    "detector": {"lambda", "ell", "u", "eps", "max_iters", "rel_tolerance",
                 "step_tolerance", "acceleration"},
    "replica": {"enabled", "spectral", "point_mass", "damping", "tol", "max_iters",
                "quadrature_order"},
    "sweep": {"variable", "grid"},
    "run": {"trials", "master_seed", "workers"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    k: int = 20
    m_u: int = 8
    l_u: int = 1
    n: int = 80
    power: float = 1.0
    alphabet: Optional[tuple] = None
    snr_db: Optional[float] = 14.0
    sigma2_override: Optional[float] = None
    subset_policy: str = "lexicographic"
    subset_seed: Optional[int] = None

    channel: str = "iid-gaussian"
    singular_values: object = None

    lam: float = 0.13
    ell: float = 0.0
    u: float = 1.0
    eps: float = 0.5
    solver: SolverParams = field(default_factory=SolverParams)

    replica: bool = True
    spectral: str = "marcenko-pastur"
    point_mass: Optional[float] = None
    damping: float = 0.5
    replica_tol: float = 1e-10
    replica_max_iters: int = 2000
    quadrature_order: int = 96

    sweep_variable: str = "lambda"
    grid: tuple = (0.13,)
    trials: int = 1000
    master_seed: int = 0
    workers: int = 1

    # derived quantities -------------------------------------------------
    @property
    def m(self) -> int:
        return self.k * self.m_u

    @property
    def eta(self) -> float:
        return self.l_u / self.m_u

    @property
    def xi(self) -> float:
        return self.n / self.m

    @property
    def alpha(self) -> float:
        return self.k / self.n

    @property
    def sigma2(self) -> float:
        if self.sigma2_override is not None:
            return float(self.sigma2_override)
        return sigma2_from_snr_db(self.snr_db, self.power)

    @property
    def symbols(self) -> tuple:
        if self.alphabet is None:
            return (complex(math.sqrt(self.power)),)
        return tuple(complex(a) for a in self.alphabet)

    def codebook(self) -> SmCodebook:
        return build_codebook(self.m_u, self.l_u, self.symbols, self.subset_policy,
                              seed=self.subset_seed)

    def ensemble(self) -> ChannelEnsemble:
        sv = None
        if self.channel == "bi-unitary":
            k = min(self.n, self.m)
            if isinstance(self.singular_values, (int, float)):
                sv = [float(self.singular_values)] * k
            else:
                sv = [float(v) for v in self.singular_values]
        return ChannelEnsemble(self.channel, self.n, self.m, singular_values=sv)

    def decision(self) -> DecisionRule:
        if len(self.symbols) == 1:
            return DecisionRule("threshold-ssk", eps=self.eps, power=self.power)
        return DecisionRule("nearest", alphabet=self.symbols)

    def detector(self) -> DetectorSpec:
        return DetectorSpec(lam=self.lam, lo=-self.ell, hi=self.u,
                            decision=self.decision(), solver=self.solver)

    def spectral_model(self) -> SpectralModel:
        if self.spectral == "marcenko-pastur":
            return SpectralModel.marcenko_pastur(self.xi)
        return SpectralModel.point_mass(self.point_mass)

    def decoupled(self) -> DecoupledConfig:
        syms = self.symbols
        return DecoupledConfig(
            eta=self.eta, power=self.power, sigma2=self.sigma2,
            spectral=self.spectral_model(), lam=self.lam, lo=-self.ell, hi=self.u,
            eps=self.eps, alphabet=None if len(syms) == 1 else tuple(np.real(syms)),
        )

    def at(self, value: float) -> "ExperimentConfig":
        """Copy with the sweep variable set to ``value``."""
        if self.sweep_variable == "lambda":
            return replace(self, lam=float(value))
        return replace(self, snr_db=float(value), sigma2_override=None)

    def derived(self) -> dict:
        cb = self.codebook()
        return {
            "M": self.m, "eta": self.eta, "xi": self.xi, "alpha": self.alpha,
            "sigma2": self.sigma2, "snr_db": 10 * math.log10(self.power / self.sigma2)
            if self.sigma2 > 0 else math.inf,
            "index_bits": cb.index_bits, "bits_per_terminal": cb.bits_per_block,
        }

    def validate(self) -> "ExperimentConfig":
        p = []
        for name in ("k", "m_u", "l_u", "n"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                p.append(f"{name} must be a positive integer")
        if not p and self.l_u > self.m_u:
            p.append("Lu must not exceed Mu")
        if self.power <= 0:
            p.append("P must be positive")
        if self.snr_db is None and self.sigma2_override is None:
            p.append("one of snr_db or sigma2 is required")
        if self.sigma2_override is not None and self.sigma2_override < 0:
            p.append("sigma2 must be nonnegative")
        n_sym = len(self.symbols)
        if n_sym & (n_sym - 1):
            p.append("alphabet size must be a power of two")
        if any(abs(np.imag(s)) > 0 for s in self.symbols):
            p.append("box-LASSO detection needs a real alphabet")
        if self.lam < 0:
            p.append("lambda must be nonnegative")
        if self.ell < 0:
            p.append("ell must be nonnegative")
        if self.u < max(np.real(self.symbols)) - 1e-12:
            p.append(f"u={self.u} is below the largest symbol {max(np.real(self.symbols)):g}")
        if -self.ell > min(np.real(self.symbols)) + 1e-12:
            p.append("-ell is above the smallest symbol")
        if self.channel not in ("iid-gaussian", "iid-pm1", "iid-cpm1", "bi-unitary"):
            p.append(f"unknown channel {self.channel!r}")
        if self.channel == "bi-unitary":
            sv = self.singular_values
            if sv is None:
                p.append("bi-unitary channel needs singular_values")
            elif not isinstance(sv, (int, float)) and len(sv) != min(self.n, self.m):
                p.append("singular_values must have min(N, M) entries")
        if self.spectral not in ("marcenko-pastur", "point-mass"):
            p.append(f"unknown spectral model {self.spectral!r}")
        if self.spectral == "point-mass" and not (self.point_mass and self.point_mass > 0):
            p.append("point-mass spectral model needs a positive point_mass")
        if self.replica and self.channel == "bi-unitary" and self.spectral == "marcenko-pastur":
            p.append("replica for a bi-unitary channel needs an explicit spectral model")
        if not 0 < self.damping <= 1:
            p.append("damping must lie in (0, 1]")
        if self.sweep_variable not in ("lambda", "snr_db"):
            p.append("sweep variable must be lambda or snr_db")
        if len(self.grid) == 0:
            p.append("sweep grid is empty")
        if self.trials < 1:
            p.append("trials must be at least 1")
        if self.workers < 1:
            p.append("workers must be at least 1")
        if not 0 <= self.master_seed < 2 ** 64:
            p.append("master_seed must be a 64-bit unsigned integer")
        if self.solver.max_iters < 1 or self.solver.rel_tolerance <= 0:
            p.append("solver budget must be positive")
        if self.subset_policy not in ("lexicographic", "seeded-random"):
            p.append("unknown subset_policy")
        if self.subset_policy == "seeded-random" and self.subset_seed is None:
            p.append("seeded-random subset policy needs subset_seed")
        if p:
            raise ConfigError(p)
        return self

    def echo(self) -> dict:
        """Plain-data view of the configuration, for JSON output."""
        return {
            "system": {"K": self.k, "Mu": self.m_u, "Lu": self.l_u, "N": self.n, "P": self.power,
                       "alphabet": [[float(np.real(a)), float(np.imag(a))] for a in self.symbols],
                       "snr_db": self.snr_db, "sigma2": self.sigma2,
                       "subset_policy": self.subset_policy, "subset_seed": self.subset_seed},
            "channel": {"kind": self.channel, "singular_values": self.singular_values},
            "detector": {"lambda": self.lam, "ell": self.ell, "u": self.u, "eps": self.eps,
                         "max_iters": self.solver.max_iters,
                         "rel_tolerance": self.solver.rel_tolerance,
                         "step_tolerance": self.solver.step_tolerance,
                         "acceleration": self.solver.acceleration},
            "replica": {"enabled": self.replica, "spectral": self.spectral,
                        "point_mass": self.point_mass, "damping": self.damping,
                        "tol": self.replica_tol, "max_iters": self.replica_max_iters,
                        "quadrature_order": self.quadrature_order},
            "sweep": {"variable": self.sweep_variable, "grid": list(self.grid)},
            "run": {"trials": self.trials, "master_seed": self.master_seed,
                    "workers": self.workers},
            "derived": self.derived(),
        }


def default_config(**overrides) -> ExperimentConfig:
    """The K=20, Mu=8, Lu=1, N=80 SSK box-LASSO scenario at 14 dB."""
    return replace(ExperimentConfig(), **overrides)


def parse_config(data: dict) -> ExperimentConfig:
    problems = []
    for section, body in data.items():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        if not isinstance(body, dict):
            problems.append(f"[{section}] must be a table")
            continue
        for key in body:
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key {section}.{key}")
    if problems:
        raise ConfigError(problems)

    sy = data.get("system", {})
    ch = data.get("channel", {})
    de = data.get("detector", {})
    rp = data.get("replica", {})
    sw = data.get("sweep", {})
    rn = data.get("run", {})
    base = ExperimentConfig()
    alphabet = None
    if "alphabet" in sy:
        alphabet = tuple(complex(*a) if isinstance(a, list) else complex(a) for a in sy["alphabet"])
    elif sy.get("S", 0):
        problems.append("S > 0 needs an explicit system.alphabet")
    snr_db = sy.get("snr_db", base.snr_db if "sigma2" not in sy else None)
    solver = SolverParams(
        max_iters=int(de.get("max_iters", base.solver.max_iters)),
        rel_tolerance=float(de.get("rel_tolerance", base.solver.rel_tolerance)),
        step_tolerance=float(de.get("step_tolerance", base.solver.step_tolerance)),
        acceleration=bool(de.get("acceleration", base.solver.acceleration)),
    )
    if problems:
        raise ConfigError(problems)
    try:
        cfg = ExperimentConfig(
            k=sy.get("K", base.k), m_u=sy.get("Mu", base.m_u), l_u=sy.get("Lu", base.l_u),
            n=sy.get("N", base.n), power=float(sy.get("P", base.power)), alphabet=alphabet,
            snr_db=None if snr_db is None else float(snr_db),
            sigma2_override=None if "sigma2" not in sy else float(sy["sigma2"]),
            subset_policy=sy.get("subset_policy", base.subset_policy),
            subset_seed=sy.get("subset_seed"),
            channel=ch.get("kind", base.channel), singular_values=ch.get("singular_values"),
            lam=float(de.get("lambda", base.lam)), ell=float(de.get("ell", base.ell)),
            u=float(de.get("u", base.u)), eps=float(de.get("eps", base.eps)), solver=solver,
            replica=bool(rp.get("enabled", base.replica)),
            spectral=rp.get("spectral", base.spectral), point_mass=rp.get("point_mass"),
            damping=float(rp.get("damping", base.damping)),
            replica_tol=float(rp.get("tol", base.replica_tol)),
            replica_max_iters=int(rp.get("max_iters", base.replica_max_iters)),
            quadrature_order=int(rp.get("quadrature_order", base.quadrature_order)),
            sweep_variable=sw.get("variable", base.sweep_variable),
            grid=tuple(float(v) for v in sw.get("grid", base.grid)),
            trials=int(rn.get("trials", base.trials)),
            master_seed=int(rn.get("master_seed", base.master_seed)),
            workers=int(rn.get("workers", base.workers)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError([str(exc)]) from exc
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"cannot parse {path}: {exc}"]) from exc
    return parse_config(data)
