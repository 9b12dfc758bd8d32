"""
Variance ratios for a Gaussian random walk
==========================================

Target N(0, 1), random-walk proposals of scale ``tau``. For each scale we
run 300 chains of 100 iterations and compare the per-block terms
``xi_i h(z_i)`` with ``n_i h(z_i)``. Ratios below one mean the weights help;
the gain grows as the rejection rate rises.
"""

from rbmh.bench import preset, run_experiment
from rbmh.bench.output import render_table

report = run_experiment(preset("table1", seed=1, R=300))
print(render_table(report))

for block in report.scales:
    print(f"tau={block['scale']:g}: acceptance {block['acceptance_rate']:.2f}")
