"""f-mutual information of a correlated Gaussian pair.

Mutual information is the divergence between the joint law and the product
of its marginals. Paired draws give the joint; shuffling the pairing gives
the product.
"""

from elicit import FitConfig, estimate_mutual_information, get_world
from elicit.simlab import sample_world

for name in ["exp1", "exp2", "exp3", "independent"]:
    world = get_world(name)
    pairs = sample_world(world, 1000, seed=1)
    est = estimate_mutual_information("kl", pairs, FitConfig(seed=1))
    print(f"{name:12s} estimate {est.value:7.4f}   population {world.mutual_information():7.4f}")
