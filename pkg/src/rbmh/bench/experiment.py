"""Replicated experiments comparing occupation counts with Rao-Blackwellised weights.

Each replication is an independent task whose random streams derive only from
``(seed, replication index)``, so results do not depend on the number of
workers or on scheduling order.
"""
from __future__ import annotations

import functools
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np
from scipy import stats

from .. import models, probit
from ..core import ChainStreams, run_chain
from ..estimators import cv_components, cv_slope, delta_cv, delta_k, delta_oracle, delta_plain
from ..streams import replication_seed
from ..weights import WeightSpec, attach_control_variates, attach_weights
from .config import ExperimentConfig, k_label

JACKKNIFE_GROUPS = 20


# ---------------------------------------------------------------------------
# model construction
# ---------------------------------------------------------------------------

PIMA_ENV = "RBMH_PIMA_FILE"


def default_probit_data_path() -> str:
    """The file named by ``RBMH_PIMA_FILE`` if set, else the bundled synthetic stand-in."""
    return os.environ.get(PIMA_ENV) or str(resources.files("rbmh").joinpath("data/pima_synthetic.csv"))


@functools.lru_cache(maxsize=8)
def _probit_data(path: str, predictor: str, outcome: str):
    data = probit.load_pima(path, predictor=predictor, outcome=outcome)
    return data, probit.fit_mle(data)


def build_model(config: ExperimentConfig, scale: float):
    """Return ``(target, proposal, oracle, probit_mle)`` for one proposal scale."""
    m = config.model
    try:
        if m == "gaussian_rw":
            t, q = models.make_gaussian_rw(scale)
            return t, q, None, None
        if m == "cauchy_independence":
            t, q = models.make_cauchy_independence(scale)
            return t, q, None, None
        if m == "exp_independence":
            t, q, o = models.make_exp_independence(config.lam, scale)
            return t, q, o, None
        if m == "geometric_rw":
            t, q, o = models.make_geometric_rw(scale)
            return t, q, o, None
        if m == "probit":
            data, mle = _probit_data(config.data or default_probit_data_path(),
                                     config.data_predictor, config.data_outcome)
            t, q = probit.make_probit_rw(data, scale)
            return t, q, None, mle
    except ValueError as exc:
        raise ValueError(f"model {m!r} with scale {scale!r}: {exc}") from None
    raise ValueError(f"unknown model {m!r}")


def h_function(name: str):
    """Named test functions on states of shape ``(m, d)``."""
    table = {
        "x": lambda z: z[:, 0].astype(float),
        "x^2": lambda z: z[:, 0].astype(float) ** 2,
        "1{x>0}": lambda z: (z[:, 0] > 0).astype(float),
        "1{x>1}": lambda z: (z[:, 0] > 1).astype(float),
        "beta1": lambda z: z[:, 0].astype(float),
        "beta2": lambda z: z[:, 1].astype(float),
        "1{beta2>0.5}": lambda z: (z[:, 1] > 0.5).astype(float),
    }
    return table[name]


def _initial_state(config: ExperimentConfig, target, mle, streams: ChainStreams):
    init = config.init
    if init == "mle":
        if mle is None:
            raise ValueError("init='mle' is only available for the probit model")
        return np.asarray(mle, dtype=float)
    if init == "target":
        if target.sample_exact is None:
            raise ValueError(f"no exact sampler for the {config.model!r} target; give a numeric init")
        return target.sample_exact(streams.generator("init"), 1)[0]
    return target.as_state(init)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Moments:
    """Count, mean and centred sum of squares; merged with Chan's formula."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, x) -> "Moments":
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return cls()
        m = float(x.mean())
        return cls(int(x.size), m, float(np.sum((x - m) ** 2)))

    def __add__(self, other: "Moments") -> "Moments":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        d = other.mean - self.mean
        return Moments(n, self.mean + d * other.n / n, self.m2 + other.m2 + d * d * self.n * other.n / n)

    @property
    def var(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else math.nan


def _sum_moments(items) -> Moments:
    out = Moments()
    for m in items:
        out = out + m
    return out


# ---------------------------------------------------------------------------
# one replication
# ---------------------------------------------------------------------------

def _nan_to_none(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)


def run_replication(config: ExperimentConfig, scale: float, index: int) -> dict:
    """Run chain ``index`` at one scale and summarise it (pure function of its arguments)."""
    t0 = time.perf_counter()
    target, proposal, oracle, mle = build_model(config, scale)
    seed = replication_seed(config.seed, index)
    streams = ChainStreams(seed)
    x0 = _initial_state(config, target, mle, streams)
    chain = run_chain(target, proposal, x0, config.N, seed)
    specs = [WeightSpec(k, config.max_proposals, config.product_floor) for k in config.k]
    chain = attach_weights(chain, specs, target, proposal)
    if config.needs_cv_draws:
        chain = attach_control_variates(chain, target, proposal)

    zc, nc = chain.complete_z, chain.complete_n
    have = zc.shape[0] > 0
    p_exact = oracle.p_exact(zc) if (oracle is not None and config.oracle and have) else None
    cv_key = config.cv_key

    moments, estimates = {}, {}
    for hname in config.h:
        if hname == "p":
            hv = chain.cv if have else np.empty(0)
            path_delta = None
        else:
            f = h_function(hname)
            hv = f(zc) if have else np.empty(0)
            path_delta = delta_plain(chain, f)
        mom = {"n": Moments.of(nc * hv)}
        est = {"delta": _nan_to_none(path_delta) if path_delta is not None
               else (delta_k(zc, nc, hv) if have else None)}
        est["delta_k"] = {}
        for k in config.k:
            w = chain.weights[k]
            mom[f"xi_{k_label(k)}"] = Moments.of(w * hv)
            est["delta_k"][k_label(k)] = delta_k(zc, w, hv) if have else None
        if p_exact is not None:
            mom["oracle"] = Moments.of(hv / p_exact)
            est["oracle"] = delta_oracle(zc, p_exact, hv)
        if config.control_variate:
            w = chain.weights[cv_key]
            if have:
                slope = cv_slope(zc, w, chain.cv, hv)
                mom["cv"] = Moments.of(cv_components(zc, w, chain.cv, hv, slope or 0.0))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    est["cv"] = delta_cv(zc, w, chain.cv, hv).estimate
            else:
                mom["cv"] = Moments()
                est["cv"] = None
        moments[hname] = mom
        estimates[hname] = est

    trace = None
    if config.trace:
        trace = _running_traces(chain, config, cv_key)

    return {
        "scale": scale,
        "index": index,
        "N": chain.N,
        "M": chain.M,
        "M_N": chain.M_N,
        "acceptance_rate": chain.acceptance_rate,
        "weight_proposals": {k_label(k): chain.weight_proposals[k] for k in config.k},
        "weight_truncated": {k_label(k): chain.weight_truncated[k] for k in config.k},
        "cv_proposals": int(zc.shape[0]) if config.needs_cv_draws else 0,
        "moments": moments,
        "estimates": estimates,
        "trace": trace,
        "seconds": time.perf_counter() - t0,
    }


def _running_traces(chain, config: ExperimentConfig, key: float) -> dict:
    """Running estimates at every iteration for the first (non-random) h.

    The weighted trace at iteration ``t`` uses the complete blocks opened at or
    before ``t``; it is NaN until the first block is available.
    """
    hname = next((h for h in config.h if h != "p"), None)
    if hname is None:
        return None
    f = h_function(hname)
    hp = f(chain.path)
    t = np.arange(1, chain.N + 1)
    plain = np.cumsum(hp) / t
    w = chain.weights[key]
    M_N = chain.M_N
    starts = chain.block_starts[:M_N]
    num = np.zeros(chain.N)
    den = np.zeros(chain.N)
    if M_N:
        np.add.at(num, starts, w * f(chain.complete_z))
        np.add.at(den, starts, w)
    num, den = np.cumsum(num), np.cumsum(den)
    with np.errstate(invalid="ignore", divide="ignore"):
        weighted = np.where(den > 0, num / den, np.nan)
    return {"h": hname, "delta": plain, "delta_k": weighted}


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def _ratio_cell(reps, hname, num_key, den_key) -> dict:
    """Pooled variance ratio with a grouped-jackknife standard error and a
    one-sided sign test over replications (H1: ratio < 1)."""
    num = [r["moments"][hname].get(num_key, Moments()) for r in reps]
    den = [r["moments"][hname].get(den_key, Moments()) for r in reps]
    tn, td = _sum_moments(num), _sum_moments(den)
    ratio = tn.var / td.var if (td.n > 1 and td.var > 0) else math.nan

    se = math.nan
    G = min(JACKKNIFE_GROUPS, len(reps))
    if G >= 2 and not math.isnan(ratio):
        bounds = [len(reps) * g // G for g in range(G + 1)]
        gn = [_sum_moments(num[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
        gd = [_sum_moments(den[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
        thetas = []
        for g in range(G):
            n_ = _sum_moments(m for i, m in enumerate(gn) if i != g)
            d_ = _sum_moments(m for i, m in enumerate(gd) if i != g)
            if d_.n > 1 and d_.var > 0:
                thetas.append(n_.var / d_.var)
        if len(thetas) == G:
            th = np.array(thetas)
            se = float(math.sqrt((G - 1) / G * np.sum((th - th.mean()) ** 2)))

    # each replication's share of the pooled sums of squares; under H0 the
    # baseline and estimator shares are equally likely to be the larger
    wins = trials = 0
    for a, b in zip(num, den):
        if a.n and b.n:
            sa = a.m2 + a.n * (a.mean - tn.mean) ** 2
            sb = b.m2 + b.n * (b.mean - td.mean) ** 2
            if sa != sb:
                trials += 1
                wins += sa < sb
    pval = float(stats.binomtest(wins, trials, 0.5, alternative="greater").pvalue) if trials else None
    return {
        "h": hname,
        "estimator": num_key,
        "baseline": den_key,
        "ratio": _nan_to_none(ratio),
        "se": _nan_to_none(se),
        "terms": tn.n,
        "sign_test": {"wins": int(wins), "trials": int(trials), "p_value": pval},
    }


def _envelope(traces: np.ndarray) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q = np.nanquantile(traces, [0.0, 0.05, 0.95, 1.0], axis=0)
    return {name: [_nan_to_none(v) for v in row] for name, row in zip(("min", "q05", "q95", "max"), q)}


@dataclass
class ExperimentReport:
    config: dict
    seed: int
    scales: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    traces: Optional[dict] = None  # scale label -> {"delta": (R, N), "delta_k": (R, N)}; not serialised

    def to_dict(self) -> dict:
        return {"config": self.config, "seed": self.seed, "scales": self.scales}

    def cell(self, scale, h, estimator="xi_inf", baseline="n") -> dict:
        for block in self.scales:
            if math.isclose(block["scale"], scale):
                for c in block["cells"]:
                    if c["h"] == h and c["estimator"] == estimator and c["baseline"] == baseline:
                        return c
        raise KeyError((scale, h, estimator, baseline))


def _summarise_scale(config: ExperimentConfig, scale: float, reps: list) -> dict:
    cells = []
    for hname in config.h:
        for k in config.k:
            cells.append(_ratio_cell(reps, hname, f"xi_{k_label(k)}", "n"))
        if any("oracle" in r["moments"][hname] for r in reps):
            cells.append(_ratio_cell(reps, hname, "oracle", "n"))
        if config.control_variate:
            cells.append(_ratio_cell(reps, hname, "cv", f"xi_{k_label(config.cv_key)}"))
            cells.append(_ratio_cell(reps, hname, "cv", "n"))

    path = sum(r["N"] for r in reps)
    wprop = {k_label(k): sum(r["weight_proposals"][k_label(k)] for r in reps) for k in config.k}
    wtrunc = {k_label(k): sum(r["weight_truncated"][k_label(k)] for r in reps) for k in config.k}
    cvp = sum(r["cv_proposals"] for r in reps)
    blocks = sum(r["M_N"] for r in reps)
    accounting = {
        "path_proposals": path,
        "weight_proposals": wprop,
        "cv_proposals": cvp,
        "total_proposals": path + sum(wprop.values()) + cvp,
        "complete_blocks": blocks,
        "weight_proposals_per_block": {k: (v / blocks if blocks else None) for k, v in wprop.items()},
        "truncated_weights": wtrunc,
    }
    out = {
        "scale": scale,
        "acceptance_rate": sum(r["M_N"] for r in reps) / path,
        "cells": cells,
        "accounting": accounting,
        "replications": [
            {"index": r["index"], "M": r["M"], "M_N": r["M_N"], "acceptance_rate": r["acceptance_rate"],
             "estimates": r["estimates"]}
            for r in reps
        ],
    }
    if config.trace and reps[0]["trace"] is not None:
        plain = np.vstack([r["trace"]["delta"] for r in reps])
        weighted = np.vstack([r["trace"]["delta_k"] for r in reps])
        out["envelopes"] = {
            "h": reps[0]["trace"]["h"],
            "k": k_label(config.cv_key),
            "delta": _envelope(plain),
            "delta_k": _envelope(weighted),
        }
    return out


def _task(args):
    config, scale, index = args
    return run_replication(config, scale, index)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run ``R`` replications for every proposal scale and aggregate them."""
    config.validate()
    for s in config.scales:
        build_model(config, s)  # fail early with the offending parameter
    tasks = [(config, s, i) for s in config.scales for i in range(config.R)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    else:
        results = [_task(t) for t in tasks]

    report = ExperimentReport(config=config.to_dict(), seed=int(config.seed))
    traces = {}
    for j, s in enumerate(config.scales):
        reps = results[j * config.R:(j + 1) * config.R]
        report.scales.append(_summarise_scale(config, s, reps))
        secs = np.array([r["seconds"] for r in reps])
        report.timings[f"{s:g}"] = {"median_seconds": float(np.median(secs)),
                                   "mean_seconds": float(secs.mean()),
                                   "total_seconds": float(secs.sum())}
        if config.trace and reps[0]["trace"] is not None:
            traces[f"{s:g}"] = {"delta": np.vstack([r["trace"]["delta"] for r in reps]),
                                "delta_k": np.vstack([r["trace"]["delta_k"] for r in reps])}
    report.traces = traces or None
    return report
