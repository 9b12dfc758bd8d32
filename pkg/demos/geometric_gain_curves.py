"""
Gain curves for the geometric target
====================================

For a Geometric(beta) target with a one-step random walk the leaving
probability is constant, so the variance reduction has a closed form. The
absolute gain peaks at an interior ``beta``; the relative gain decreases
steadily as ``beta`` grows.
"""

import numpy as np

from rbmh import models

beta = np.linspace(0.05, 0.95, 19)
absolute = models.geometric_gain_absolute(beta)
relative = models.geometric_gain_relative(beta)
for b, a, r in zip(beta, absolute, relative):
    print(f"beta={b:.2f}  absolute {a:.4f}  relative {r:.4f}")

b_star, g_star = models.maximize_geometric_gain()
print(f"maximum absolute gain {g_star:.4f} at beta = {b_star:.4f}")

###############################################################################
# The same numbers from simulation: weights at a fixed state.

from rbmh.weights import WeightSpec, xi_hat_k_batch

target, proposal, _ = models.make_geometric_rw(0.5)
z = np.full((200_000, 1), 3, dtype=np.int64)
v0 = xi_hat_k_batch(z, WeightSpec(0), target, proposal, np.random.default_rng(0)).xi.var()
vinf = xi_hat_k_batch(z, WeightSpec(np.inf), target, proposal, np.random.default_rng(1)).xi.var()
print(f"beta=0.5: simulated gain {v0 - vinf:.4f}, formula {float(models.geometric_gain_absolute(0.5)):.4f}")
