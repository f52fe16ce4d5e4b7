"""How the mutual-information estimate tightens as n grows."""

from elicit import MechanismConfig, get_world, run_convergence_sweep
from elicit.simlab import median_abs_error

rows = run_convergence_sweep(get_world("exp1"), MechanismConfig(), [128, 512, 2048], repeats=5, master_seed=0)
for n, err in median_abs_error(rows).items():
    print(f"n = {n:5d}   median absolute error {err:.4f}")
