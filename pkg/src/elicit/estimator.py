"""Divergence and f-mutual-information estimates built on critic fits."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .critic import Critic, FeatureBasisCritic, FitConfig, FitReport, fit
from .fdiv import get_divergence
from .samples import EmpiricalDistribution, PairedSamples

__all__ = [
    "DivergenceEstimate",
    "EmpiricalDistribution",
    "PairedSamples",
    "PRODUCT_CAP",
    "all_conditional_terms",
    "build_joint_and_product",
    "conditional_terms",
    "estimate_divergence",
    "estimate_mutual_information",
    "product_conj_means",
]

PRODUCT_CAP = 100_000
MIN_SAMPLES = 8
_ROW_CHUNK = 512


@dataclass
class DivergenceEstimate:
    value: float
    critic: Critic
    n_p: int
    n_q: int
    report: Optional[FitReport]
    divergence: str
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise FloatingPointError(f"divergence estimate is not finite: {self.value}")

    def to_record(self) -> dict:
        return {
            "divergence": self.divergence,
            "n": int(min(self.n_p, self.n_q)),
            "seed": int(self.seed),
            "value": float(self.value),
            "iterations": int(self.report.iterations if self.report else 0),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def variational_value(critic: Critic, spec, P: EmpiricalDistribution, Q: EmpiricalDistribution) -> float:
    """E_Q[t] - E_P[f_conj(t)] for a fixed critic."""
    spec = get_divergence(spec)
    return Q.mean(spec.squash(critic.raw(Q.samples))) - P.mean(spec.conj_of_squash(critic.raw(P.samples)))


def estimate_divergence(
    spec,
    P: EmpiricalDistribution,
    Q: EmpiricalDistribution,
    config: Optional[FitConfig] = None,
) -> DivergenceEstimate:
    """Estimate D_f(q || p) from samples of P (denominator) and Q (numerator)."""
    spec = get_divergence(spec)
    config = config or FitConfig()
    if P.n < MIN_SAMPLES or Q.n < MIN_SAMPLES:
        raise ValueError(f"n below minimum {MIN_SAMPLES} (got {P.n} and {Q.n})")
    critic, report = fit(config, spec, P, Q)
    value = variational_value(critic, spec, P, Q)
    return DivergenceEstimate(value, critic, P.n, Q.n, report, spec.name, config.seed)


def _cross_pair_indices(n: int, cap: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if n * n <= cap:
        i, j = np.divmod(np.arange(n * n), n)
        return i, j
    rng = np.random.default_rng(seed)
    k = np.sort(rng.choice(n * (n - 1), size=cap, replace=False))
    i, r = np.divmod(k, n - 1)
    # skip the diagonal: the r-th off-diagonal column of row i
    j = r + (r >= i)
    return i, j


def build_joint_and_product(
    pairs: PairedSamples, cap: int = PRODUCT_CAP, seed: int = 0
) -> tuple[EmpiricalDistribution, EmpiricalDistribution]:
    """Joint sample (x_i, y_i) and product-of-marginals sample (x_i, y_j).

    The product holds all n^2 cross pairs when n^2 <= cap, otherwise a seeded
    subsample of ``cap`` distinct off-diagonal pairs.
    """
    if pairs.n < MIN_SAMPLES:
        raise ValueError(f"n below minimum {MIN_SAMPLES} (got {pairs.n})")
    joint = EmpiricalDistribution(pairs.stacked())
    i, j = _cross_pair_indices(pairs.n, cap, seed)
    product = EmpiricalDistribution(np.hstack([pairs.x[i], pairs.y[j]]))
    return joint, product


def _cross_raw_rows(critic: Critic, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if isinstance(critic, FeatureBasisCritic):
        return critic.cross_raw(x, y)
    grid = np.hstack([np.repeat(x, y.shape[0], axis=0), np.tile(y, (x.shape[0], 1))])
    return critic.raw(grid).reshape(x.shape[0], y.shape[0])


def product_conj_means(critic: Critic, spec, pairs: PairedSamples) -> tuple[np.ndarray, np.ndarray]:
    """Row and column means of f_conj(t(x_i, y_j)) over the full n x n cross grid."""
    spec = get_divergence(spec)
    n = pairs.n
    rows = np.empty(n)
    cols = np.zeros(n)
    for start in range(0, n, _ROW_CHUNK):
        block = spec.conj_of_squash(_cross_raw_rows(critic, pairs.x[start : start + _ROW_CHUNK], pairs.y))
        rows[start : start + block.shape[0]] = block.mean(axis=1)
        cols += block.sum(axis=0)
    return rows, cols / n


def all_conditional_terms(critic: Critic, spec, pairs: PairedSamples) -> dict[str, np.ndarray]:
    """Per-report terms of the peer-prediction payment for both groups.

    ``joint`` holds t(x_i, y_i); ``product_x`` fixes the first coordinate at x_i
    and averages f_conj over every y_j; ``product_y`` fixes the second
    coordinate at y_j and averages over every x_i.
    """
    spec = get_divergence(spec)
    joint = spec.squash(critic.raw(pairs.stacked()))
    rows, cols = product_conj_means(critic, spec, pairs)
    return {"joint": joint, "product_x": rows, "product_y": cols}


def conditional_terms(critic: Critic, spec, pairs: PairedSamples, i: int) -> tuple[float, float]:
    """(t(r_i, y_i), mean_j f_conj(t(r_i, y_j))) for report index i."""
    spec = get_divergence(spec)
    if not 0 <= i < pairs.n:
        raise IndexError(f"report index {i} out of range for {pairs.n} pairs")
    x_i = pairs.x[i : i + 1]
    joint_term = float(spec.squash(critic.raw(np.hstack([x_i, pairs.y[i : i + 1]])))[0])
    product_term = float(np.mean(spec.conj_of_squash(_cross_raw_rows(critic, x_i, pairs.y))))
    return joint_term, product_term


def estimate_mutual_information(
    spec,
    pairs: PairedSamples,
    config: Optional[FitConfig] = None,
    cap: int = PRODUCT_CAP,
) -> DivergenceEstimate:
    """Estimate I_f = D_f(joint || product of marginals).

    The critic is fitted with the product sample in the denominator role and
    the joint sample in the numerator role. The reported value averages
    f_conj over the full n x n cross grid, so it equals the mean of the
    per-report conditional terms exactly.
    """
    spec = get_divergence(spec)
    config = config or FitConfig()
    joint, product = build_joint_and_product(pairs, cap=cap, seed=config.seed)
    critic, report = fit(config, spec, product, joint)
    terms = all_conditional_terms(critic, spec, pairs)
    value = float(np.mean(terms["joint"]) - np.mean(terms["product_x"]))
    return DivergenceEstimate(value, critic, product.n, joint.n, report, spec.name, config.seed)
