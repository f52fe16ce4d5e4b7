"""Paying forecasters against verified samples.

An agent submits a batch of samples. The mechanism holds verified samples of
the true law and pays each report through a fitted critic. A truthful batch
earns about ``a``; distorted batches earn less.

Jensen-Shannon keeps payments bounded. Under KL a batch with no mass where
the truth has mass faces an unbounded divergence, and its payment is limited
only by the critic's regularisation.
"""

import numpy as np

from elicit import MechanismConfig, get_world, score_with_ground_truth
from elicit.simlab import ReportStrategy, apply_strategy, sample_world

world = get_world("exp1")
truth = sample_world(world, 800, seed=10).stacked()
honest = sample_world(world, 800, seed=11).stacked()
cfg = MechanismConfig(a=1.0, b=1.0, divergence="jensen_shannon", seed=0)

batches = {
    "truthful": honest,
    "random_shift": apply_strategy(ReportStrategy("random_shift", seed=1), honest),
    "random_report": apply_strategy(ReportStrategy("random_report", seed=2), honest),
    "overconfident": honest.mean(axis=0) + 0.5 * (honest - honest.mean(axis=0)),
}
for name, reports in batches.items():
    sheet = score_with_ground_truth(reports, truth, cfg)
    print(f"{name:14s} mean payment {sheet.mean_score():7.4f}   (estimated divergence {sheet.value:.4f})")

print("\nfirst rows of the truthful payment sheet:")
print("\n".join(score_with_ground_truth(honest, truth, cfg).to_csv().splitlines()[:4]))
