"""
Probit posterior with a control variate
=======================================

A flat-prior probit regression on one standardised predictor. The chain
starts at the maximum-likelihood estimate. One extra proposal per accepted
state gives ``alpha(z_i, y0)``, and ``xi_i alpha(z_i, y0)`` has mean one, so
it can be regressed out of the weighted estimator.
"""

from rbmh import probit
from rbmh.bench import preset, run_experiment
from rbmh.bench.experiment import default_probit_data_path
from rbmh.bench.output import render_table

data = probit.load_pima(default_probit_data_path())
print(f"{data.n_obs} observations, MLE {probit.fit_mle(data).round(3)}")

report = run_experiment(preset("table5", seed=5, N=2000, R=5, scales=(0.1, 0.5)))
print(render_table(report))
