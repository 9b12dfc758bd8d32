"""Probit regression posterior with a flat prior.

Covariates are an intercept and one standardised predictor (body mass index
in the Pima data), so the parameter is two-dimensional and a random walk with
a single scale is a reasonable proposal.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from .core import ProposalKernel, TargetModel
from .models import make_gaussian_rw

_POSITIVE = {"1", "yes", "true", "pos", "positive"}
_NEGATIVE = {"0", "no", "false", "neg", "negative"}


class ConvergenceError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class ProbitData:
    covariates: np.ndarray  # (n_obs, 2): ones, standardised predictor
    outcomes: np.ndarray    # (n_obs,) in {0, 1}
    predictor_mean: float = 0.0
    predictor_sd: float = 1.0

    def __post_init__(self):
        X, y = self.covariates, self.outcomes
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
            raise ValueError("covariates must be (n_obs, p) with one outcome per row")
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates contain missing or non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("outcomes must be binary")
        if y.min() == y.max():
            raise ValueError("single-class outcome: both 0 and 1 must be present")

    @property
    def n_obs(self) -> int:
        return self.outcomes.shape[0]


def make_probit_data(predictor, outcomes) -> ProbitData:
    """Standardise ``predictor`` (mean 0, sd 1) and prepend an intercept column."""
    x = np.asarray(predictor, dtype=float).reshape(-1)
    y = np.asarray(outcomes).reshape(-1)
    if x.shape != y.shape:
        raise ValueError("predictor and outcomes must have the same length")
    if not np.all(np.isfinite(x)):
        raise ValueError("predictor has missing values")
    m = float(x.mean())
    sd = float(x.std())
    if sd == 0.0:
        sd = 1.0
    X = np.column_stack([np.ones_like(x), (x - m) / sd])
    return ProbitData(X, y.astype(np.int64), m, sd)


def _parse_outcome(v: str, row: int) -> int:
    s = v.strip().strip('"').lower()
    if s in _POSITIVE:
        return 1
    if s in _NEGATIVE:
        return 0
    raise ValueError(f"row {row}: cannot read outcome {v!r} as binary")


def load_pima(path, predictor: str = "bmi", outcome: str = "type") -> ProbitData:
    """Read a delimited file with a header row (comma- or whitespace-separated).

    Columns are matched by name, case-insensitively. Outcomes may be 0/1 or
    Yes/No. Rows with missing values are rejected rather than dropped.
    """
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    if "," in lines[0]:
        rows = list(csv.reader(io.StringIO("\n".join(lines))))
    else:
        rows = [ln.split() for ln in lines]
    header = [h.strip().strip('"').lower() for h in rows[0]]
    body = rows[1:]
    # R's write.table omits the row-name column from the header
    shift = 1 if body and len(body[0]) == len(header) + 1 else 0
    try:
        ip = header.index(predictor.lower()) + shift
        io_ = header.index(outcome.lower()) + shift
    except ValueError:
        raise ValueError(f"{path}: need columns {predictor!r} and {outcome!r}, found {header}") from None
    xs, ys = [], []
    for r, fields in enumerate(body, start=2):
        try:
            xs.append(float(fields[ip]))
        except (IndexError, ValueError):
            raise ValueError(f"{path}: row {r}: unparseable {predictor!r} value") from None
        if len(fields) <= io_:
            raise ValueError(f"{path}: row {r}: missing {outcome!r} value")
        ys.append(_parse_outcome(fields[io_], r))
    return make_probit_data(xs, ys)


def synthetic_probit_data(beta, n_obs: int, rng: np.random.Generator) -> ProbitData:
    """Data drawn from the probit model itself with a standard-normal predictor."""
    beta = np.asarray(beta, dtype=float)
    x = rng.standard_normal(n_obs)
    X = np.column_stack([np.ones(n_obs), x])
    y = (X @ beta + rng.standard_normal(n_obs) > 0).astype(np.int64)
    return ProbitData(X, y)


def _signed_eta(beta, data: ProbitData):
    eta = np.asarray(beta, dtype=float) @ data.covariates.T
    s = 2.0 * data.outcomes - 1.0
    return s * eta, s


def log_posterior(beta, data: ProbitData):
    """Flat-prior log posterior ``sum_i log Phi(s_i x_i' beta)``, ``s_i = 2 y_i - 1``.

    Vectorised over leading dimensions of ``beta``.
    """
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta must be finite")
    t, _ = _signed_eta(beta, data)
    return np.sum(special.log_ndtr(t), axis=-1)


def _mills(t):
    # phi(t) / Phi(t), stable for very negative t
    return np.exp(-0.5 * t * t - 0.5 * math.log(2 * math.pi) - special.log_ndtr(t))


def grad_log_posterior(beta, data: ProbitData) -> np.ndarray:
    t, s = _signed_eta(beta, data)
    return (s * _mills(t)) @ data.covariates


def hess_log_posterior(beta, data: ProbitData) -> np.ndarray:
    t, _ = _signed_eta(beta, data)
    lam = _mills(t)
    w = -lam * (t + lam)
    X = data.covariates
    return (X * w[:, None]).T @ X


def fit_mle(data: ProbitData, tol: float = 1e-8, max_iter: int = 100) -> np.ndarray:
    """Newton-Raphson with step halving, from ``beta = 0``."""
    beta = np.zeros(data.covariates.shape[1])
    ll = float(log_posterior(beta, data))
    trace = []
    for it in range(max_iter):
        g = grad_log_posterior(beta, data)
        gn = float(np.linalg.norm(g))
        trace.append((it, beta.copy(), ll, gn))
        if gn < tol:
            return beta
        step = np.linalg.solve(hess_log_posterior(beta, data), -g)
        t = 1.0
        while True:
            cand = beta + t * step
            ll_c = float(log_posterior(cand, data))
            if ll_c >= ll or t < 1e-10:
                break
            t *= 0.5
        beta, ll = cand, ll_c
    raise ConvergenceError(f"Newton-Raphson did not reach |grad| < {tol} in {max_iter} iterations", trace)


def make_probit_target(data: ProbitData) -> TargetModel:
    return TargetModel(log_density=lambda b: log_posterior(b, data),
                       dimension=data.covariates.shape[1], name="probit-posterior")


def make_probit_rw(data: ProbitData, tau: float):
    """Posterior target and an isotropic Gaussian random walk of scale ``tau``."""
    _, rw = make_gaussian_rw(tau)
    return make_probit_target(data), ProposalKernel(rw.sample, rw.log_density, rw.kind,
                                                    name=f"probit-rw(tau={tau:g})")
