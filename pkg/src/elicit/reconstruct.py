"""Fit a Gaussian to elicited samples by minimising the estimated f-divergence.

Each outer round refits the critic (generator samples in the denominator
role, target samples in the numerator role) from a warm start, then takes a
few gradient steps on the generator parameters through the reparameterised
sampler x = mean + L z.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .critic import Critic, FitConfig, fit, init_critic
from .estimator import variational_value
from .fdiv import AnalyticDensity, closed_form_divergence, gaussian_kl, get_divergence
from .samples import EmpiricalDistribution

log = logging.getLogger(__name__)

MIN_TARGET = 64
DIAG_FLOOR = 1e-4


@dataclass(frozen=True)
class ParametricFamily:
    """Full-covariance Gaussian family, parameterised by its mean and Cholesky factor."""

    mean: np.ndarray
    chol: np.ndarray
    seed: int = 0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        chol = np.tril(np.atleast_2d(np.asarray(self.chol, dtype=float)))
        if chol.shape != (mean.size, mean.size):
            raise ValueError("Cholesky factor must be d x d for a d-dimensional mean")
        if np.any(np.diag(chol) <= 0):
            raise ValueError("Cholesky factor needs a positive diagonal")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "chol", chol)

    kind = "gaussian"

    @classmethod
    def standard(cls, d: int, seed: int = 0) -> "ParametricFamily":
        return cls(np.zeros(d), np.eye(d), seed)

    @classmethod
    def from_moments(cls, samples, seed: int = 0, diagonal: bool = False) -> "ParametricFamily":
        x = np.asarray(samples, dtype=float)
        cov = np.atleast_2d(np.cov(x, rowvar=False))
        if diagonal:
            cov = np.diag(np.diag(cov))
        return cls(x.mean(axis=0), np.linalg.cholesky(cov), seed)

    @property
    def dimension(self) -> int:
        return self.mean.size

    @property
    def cov(self) -> np.ndarray:
        return self.chol @ self.chol.T

    @property
    def density(self) -> AnalyticDensity:
        return AnalyticDensity(self.mean, self.cov)

    def noise(self, m: int, round_index: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, round_index]))
        return rng.standard_normal((m, self.dimension))

    def sample(self, m: int, round_index: int) -> np.ndarray:
        return self.mean + self.noise(m, round_index) @ self.chol.T


@dataclass
class ScheduleConfig:
    rounds: int = 200
    generator_steps: int = 5
    step_size: float = 0.05
    decay: float = 0.999
    batch: Optional[int] = None  # None: min(n, 1024)
    # joint L2 cap on the (mean, L) gradient; the KL witness e^{t-1} is heavy-tailed
    max_grad_norm: float = 1.0
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.rounds < 1 or self.generator_steps < 1:
            raise ValueError("rounds and generator_steps must be positive")
        if not self.step_size > 0 or not 0 < self.decay <= 1 or not self.max_grad_norm > 0:
            raise ValueError("step_size must be positive and decay in (0, 1]")
        if isinstance(self.fit, dict):
            self.fit = FitConfig(**self.fit)


@dataclass
class ReconstructionReport:
    family: ParametricFamily
    trajectory: list[float]
    oracle_divergence: float
    rounds: int
    divergence: str
    repairs: int = 0
    kl_to_target: Optional[float] = None

    def to_json(self) -> str:
        payload = {
            "divergence": self.divergence,
            "rounds": self.rounds,
            "mean": self.family.mean.tolist(),
            "chol": self.family.chol.tolist(),
            "cov": self.family.cov.tolist(),
            "trajectory": self.trajectory,
            "oracle_divergence": self.oracle_divergence,
            "kl_to_target": self.kl_to_target,
            "repairs": self.repairs,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["round", "objective"])
        for r, v in enumerate(self.trajectory):
            writer.writerow([r, repr(v)])
        return buf.getvalue()


def _generator_grad(critic: Critic, spec, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of -mean f_conj(t(x)) with respect to (mean, L) for x = mean + L z."""
    v = critic.raw(x)
    g = spec.conj_of_squash_prime(v)[:, None] * critic.raw_grad_x(x)
    g_mean = -g.mean(axis=0)
    g_chol = -np.tril(g.T @ z) / x.shape[0]
    return g_mean, g_chol


def _repair(chol: np.ndarray) -> tuple[np.ndarray, bool]:
    diag = np.diag(chol)
    if np.all(diag >= DIAG_FLOOR):
        return chol, False
    fixed = chol.copy()
    np.fill_diagonal(fixed, np.maximum(diag, DIAG_FLOOR))
    return fixed, True


def reconstruct(
    target,
    family: ParametricFamily,
    spec,
    schedule: Optional[ScheduleConfig] = None,
    target_density: Optional[AnalyticDensity] = None,
) -> ReconstructionReport:
    """Alternate critic refits and generator steps; deterministic given the seeds."""
    spec = get_divergence(spec)
    schedule = schedule or ScheduleConfig()
    Q = target if isinstance(target, EmpiricalDistribution) else EmpiricalDistribution(target)
    if Q.n < MIN_TARGET:
        raise ValueError(f"reconstruction needs at least {MIN_TARGET} target samples (got {Q.n})")
    if Q.dimension != family.dimension:
        raise ValueError(f"family has dimension {family.dimension}, target has {Q.dimension}")
    m = schedule.batch or min(Q.n, 1024)
    mean, chol = family.mean.copy(), family.chol.copy()
    lr = schedule.step_size
    critic = None
    trajectory = []
    repairs = 0
    for r in range(schedule.rounds):
        current = replace(family, mean=mean, chol=chol)
        z = current.noise(m, r)
        P = EmpiricalDistribution(mean + z @ chol.T)
        fit_cfg = replace(schedule.fit, seed=family.seed)
        if critic is None:
            critic = init_critic(spec, P, Q, fit_cfg)
        critic, _ = fit(fit_cfg, spec, P, Q, warm_start=critic)
        trajectory.append(float(variational_value(critic, spec, P, Q)))
        for _ in range(schedule.generator_steps):
            x = mean + z @ chol.T
            g_mean, g_chol = _generator_grad(critic, spec, x, z)
            norm = float(np.sqrt(np.sum(g_mean**2) + np.sum(g_chol**2)))
            if not np.isfinite(norm):
                raise FloatingPointError(f"generator gradient is not finite in round {r}")
            if norm > schedule.max_grad_norm:
                g_mean = g_mean * (schedule.max_grad_norm / norm)
                g_chol = g_chol * (schedule.max_grad_norm / norm)
            mean = mean - lr * g_mean
            chol, repaired = _repair(chol - lr * g_chol)
            if repaired:
                repairs += 1
                log.info("round %d: Cholesky diagonal projected to >= %g", r, DIAG_FLOOR)
            lr *= schedule.decay
    final = replace(family, mean=mean, chol=chol)
    moment = AnalyticDensity(Q.samples.T @ Q.weights, np.atleast_2d(np.cov(Q.samples, rowvar=False, aweights=Q.weights)))
    oracle = closed_form_divergence(spec, final.density, moment) if final.dimension <= 2 or spec.name == "kl" else float("nan")
    kl_target = gaussian_kl(final.density, target_density) if target_density is not None else None
    return ReconstructionReport(
        family=final,
        trajectory=trajectory,
        oracle_divergence=float(oracle),
        rounds=schedule.rounds,
        divergence=spec.name,
        repairs=repairs,
        kl_to_target=kl_target,
    )
