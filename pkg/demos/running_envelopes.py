"""
Running estimates across replications
=====================================

250 chains of 1000 iterations with a wide random walk (``tau = 10``). For
every iteration we keep the minimum, 5%, 95% and maximum of the running
average and of its weighted counterpart, and write them to CSV files ready
for any plotting tool.
"""

import tempfile

from rbmh.bench import preset, run_experiment
from rbmh.bench.output import emit_figure_data

report = run_experiment(preset("figure1", seed=7))
env = report.scales[0]["envelopes"]
for name in ("delta", "delta_k"):
    e = env[name]
    print(f"{name:>8}: final 90% band [{e['q05'][-1]:+.4f}, {e['q95'][-1]:+.4f}], "
          f"range [{e['min'][-1]:+.4f}, {e['max'][-1]:+.4f}]")

with tempfile.TemporaryDirectory() as out:
    for path in emit_figure_data(report, out):
        print("wrote", path.name)
