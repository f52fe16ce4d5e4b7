"""The two f-scoring mechanisms.

``score_with_ground_truth`` pays each report against a verified sample;
``score_peer_prediction`` pays each report in a two-group split using only
peer reports, through the f-mutual information between the groups.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .critic import Critic, FitConfig
from .estimator import (
    PRODUCT_CAP,
    DivergenceEstimate,
    all_conditional_terms,
    estimate_divergence,
    estimate_mutual_information,
    variational_value,
)
from .fdiv import get_divergence
from .samples import EmpiricalDistribution, PairedSamples

MIN_REPORTS = 8
SHEET_COLUMNS = ("report_id", "group", "score", "mechanism", "divergence", "seed")


@dataclass
class MechanismConfig:
    a: float = 0.0
    b: float = 1.0
    divergence: str = "kl"
    fit: FitConfig = field(default_factory=FitConfig)
    seed: int = 0
    product_cap: int = PRODUCT_CAP

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("payment scale b must be positive")
        get_divergence(self.divergence)
        if isinstance(self.fit, dict):
            self.fit = FitConfig(**self.fit)

    def fit_config(self) -> FitConfig:
        from dataclasses import replace

        return replace(self.fit, seed=self.seed)


@dataclass
class PaymentSheet:
    scores: np.ndarray
    groups: list[str]
    report_ids: list[int]
    mechanism: str
    divergence: str
    seed: int
    a: float
    b: float
    estimate: Optional[DivergenceEstimate] = None
    # divergence / MI value the payments were computed from (fitted or fixed critic)
    value: float = float("nan")

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if len(self.scores) != len(self.groups) or len(self.scores) != len(self.report_ids):
            raise ValueError("scores, groups and report ids must have equal length")
        if not np.all(np.isfinite(self.scores)):
            raise FloatingPointError("payment sheet contains non-finite scores")

    def group_scores(self, group: str) -> np.ndarray:
        mask = np.array([g == group for g in self.groups])
        return self.scores[mask]

    def mean_score(self, group: Optional[str] = None) -> float:
        return float(np.mean(self.scores if group is None else self.group_scores(group)))

    def rows(self) -> list[dict]:
        return [
            {
                "report_id": rid,
                "group": g,
                "score": repr(float(s)),
                "mechanism": self.mechanism,
                "divergence": self.divergence,
                "seed": self.seed,
            }
            for rid, g, s in zip(self.report_ids, self.groups, self.scores)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=SHEET_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()


def _as_distribution(points) -> EmpiricalDistribution:
    return points if isinstance(points, EmpiricalDistribution) else EmpiricalDistribution(points)


def score_with_ground_truth(
    reports,
    truth,
    cfg: MechanismConfig,
    critic: Optional[Critic] = None,
) -> PaymentSheet:
    """Pay report i ``a - b * (E_truth[t] - f_conj(t(r_i)))``.

    The critic is fitted with reports in the denominator role and the ground
    truth in the numerator role, unless a fixed ``critic`` is supplied.
    """
    spec = get_divergence(cfg.divergence)
    P = _as_distribution(reports)
    Q = _as_distribution(truth)
    if P.n < MIN_REPORTS or Q.n < MIN_REPORTS:
        raise ValueError(f"need at least {MIN_REPORTS} reports and truth samples (got {P.n} and {Q.n})")
    if P.dimension != Q.dimension:
        raise ValueError(f"reports have dimension {P.dimension} but truth has {Q.dimension}")
    estimate = None
    if critic is None:
        estimate = estimate_divergence(spec, P, Q, cfg.fit_config())
        critic = estimate.critic
    truth_mean = Q.mean(spec.squash(critic.raw(Q.samples)))
    conj = spec.conj_of_squash(critic.raw(P.samples))
    scores = cfg.a - cfg.b * (truth_mean - conj)
    value = estimate.value if estimate is not None else variational_value(critic, spec, P, Q)
    return PaymentSheet(
        scores=scores,
        groups=["reports"] * P.n,
        report_ids=list(range(P.n)),
        mechanism="alg1",
        divergence=spec.name,
        seed=cfg.seed,
        a=cfg.a,
        b=cfg.b,
        estimate=estimate,
        value=float(value),
    )


def score_peer_prediction(
    group_p_reports: Sequence,
    group_q_reports: Sequence,
    cfg: MechanismConfig,
    critic: Optional[Critic] = None,
) -> PaymentSheet:
    """Pay each report ``a + b * (joint term - product term)`` conditioned on that report.

    Reports are paired by index. Group p reports condition on the first
    coordinate and group q reports on the second.
    """
    spec = get_divergence(cfg.divergence)
    p = np.asarray(group_p_reports, dtype=float)
    q = np.asarray(group_q_reports, dtype=float)
    if p.shape[0] != q.shape[0]:
        raise ValueError(f"group sizes differ: {p.shape[0]} vs {q.shape[0]}")
    pairs = PairedSamples(p, q)
    if pairs.n < MIN_REPORTS:
        raise ValueError(f"need at least {MIN_REPORTS} reports per group (got {pairs.n})")
    estimate = None
    if critic is None:
        estimate = estimate_mutual_information(spec, pairs, cfg.fit_config(), cap=cfg.product_cap)
        critic = estimate.critic
    terms = all_conditional_terms(critic, spec, pairs)
    scores_p = cfg.a + cfg.b * (terms["joint"] - terms["product_x"])
    scores_q = cfg.a + cfg.b * (terms["joint"] - terms["product_y"])
    value = float(np.mean(terms["joint"]) - np.mean(terms["product_x"]))
    n = pairs.n
    return PaymentSheet(
        scores=np.concatenate([scores_p, scores_q]),
        groups=["p"] * n + ["q"] * n,
        report_ids=list(range(n)) * 2,
        mechanism="alg2",
        divergence=spec.name,
        seed=cfg.seed,
        a=cfg.a,
        b=cfg.b,
        estimate=estimate,
        value=value,
    )
