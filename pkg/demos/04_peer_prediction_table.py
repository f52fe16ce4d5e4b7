"""Scoring without ground truth: the peer-prediction score table.

Two groups report paired observations of correlated quantities. Each report
is paid by how much information it carries about its peer's report. Honest
reporting earns roughly the mutual information; noise earns less.
"""

from elicit import MechanismConfig, get_world, run_score_table

results = run_score_table([get_world("exp1")], MechanismConfig(), repeats=3, n=500, master_seed=42)
oracle = results[0].oracle
print(f"population mutual information: {oracle:.4f}\n")
for r in results:
    print(f"{r.strategy:14s} {r.mean_score:7.4f} +/- {r.std_score:.4f}")
