"""
Weights that replace occupation counts
======================================

A Metropolis-Hastings chain sits at an accepted state ``z`` for a geometric
number of steps with mean ``1/p(z)``. The weights below have the same mean
but smaller variance. We check both facts at one state of the exponential
independence sampler, where ``p`` and ``r`` are known in closed form.
"""

import math

import numpy as np

from rbmh import models
from rbmh.weights import WeightSpec, var_xi_k_closed, xi_hat_k_batch

target, proposal, oracle = models.make_exp_independence(1.0, 0.5)
z = 1.0
pr = oracle.pr(z)
print(f"p(z) = {pr.p:.4f}, r(z) = {pr.r:.4f}, 1/p = {1 / pr.p:.4f}")

###############################################################################
# Draw 100 000 weights for several truncation levels ``k``.

zz = np.full((100_000, 1), z)
for k in (0, 1, 3, math.inf):
    out = xi_hat_k_batch(zz, WeightSpec(k), target, proposal, np.random.default_rng(1))
    print(f"k={k!s:>4}: mean {out.xi.mean():.4f}  var {out.xi.var():.4f} "
          f"(closed form {var_xi_k_closed(pr, k):.4f})  draws/weight {out.proposals_used.mean():.2f}")
