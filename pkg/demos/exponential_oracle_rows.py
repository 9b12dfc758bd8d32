"""
Estimated weights against exact importance weights
==================================================

With an Exp(1) target and an Exp(mu) independence proposal, ``p(z)`` is known,
so ``1/p(z_i)`` can be used as an exact weight. That oracle row bounds what any
unbiased weight can achieve; the estimated weights close part of the gap.
"""

from rbmh.bench import preset, run_experiment
from rbmh.bench.output import render_table

report = run_experiment(preset("table4", seed=3, R=300))
print(render_table(report))

###############################################################################
# The proposal ledger: every extra simulation is accounted for.

for block in report.scales:
    acc = block["accounting"]
    print(f"mu={block['scale']:g}: path {acc['path_proposals']}, weights {acc['weight_proposals']}, "
          f"per block {acc['weight_proposals_per_block']}")
