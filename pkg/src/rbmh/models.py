"""Toy targets with known acceptance structure.

Four samplers: a Gaussian random walk and a Cauchy independence sampler on a
standard normal target, an exponential independence sampler and a geometric
target with a one-step random walk. The last two come with exact ``p`` and
``r`` functions and act as oracles for the weight estimators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .core import ProposalKernel, ProposalKind, TargetModel, log_acceptance
from .weights import PRPair

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class AnalyticOracle:
    """Exact leaving probability ``p(x)``, second moment ``r(x)`` of the
    acceptance probability, and the stationary log-density (up to a constant)
    of the accepted-state chain, ``log pi(x) + log p(x)``."""

    p_exact: Callable[[np.ndarray], np.ndarray]
    r_exact: Callable[[np.ndarray], np.ndarray]
    pi_tilde_logdensity: Optional[Callable[[np.ndarray], np.ndarray]] = None
    description: str = ""

    def pr(self, x) -> PRPair:
        x = np.asarray(x, dtype=float).reshape(-1)
        return PRPair(float(self.p_exact(x)), float(self.r_exact(x))).validate()


def _first(x):
    x = np.asarray(x)
    return x[..., 0]


def _coord(x):
    # oracle arguments: scalars, states of shape (..., 1), or arrays of scalar positions
    x = np.asarray(x, dtype=float)
    if x.ndim and x.shape[-1] == 1:
        return x[..., 0]
    return x


def _std_normal_target(name: str) -> TargetModel:
    return TargetModel(
        log_density=lambda x: -0.5 * np.sum(np.square(x), axis=-1),
        dimension=1,
        sample_exact=lambda rng, size: rng.standard_normal((size, 1)),
        name=name,
    )


def make_gaussian_rw(tau: float):
    """Standard normal target, Gaussian random-walk proposal of scale ``tau``."""
    tau = float(tau)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    log_norm = -math.log(tau) - 0.5 * _LOG_2PI

    def sample(x, rng):
        return x + tau * rng.standard_normal(np.shape(x))

    def log_q(y, x):
        d = (np.asarray(y) - np.asarray(x)) / tau
        return np.sum(-0.5 * d * d + log_norm, axis=-1)

    target = _std_normal_target("normal")
    proposal = ProposalKernel(sample, log_q, ProposalKind.SYMMETRIC, name=f"gaussian-rw(tau={tau:g})")
    return target, proposal


def make_cauchy_independence(tau: float):
    """Standard normal target, independent Cauchy(0, ``tau``) proposal."""
    tau = float(tau)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    log_tau_over_pi = math.log(tau / math.pi)

    def sample(x, rng):
        return tau * rng.standard_cauchy(np.shape(x))

    def log_q(y, x):
        y = np.asarray(y, dtype=float)
        return np.sum(log_tau_over_pi - np.log(tau * tau + y * y), axis=-1)

    target = _std_normal_target("normal")
    proposal = ProposalKernel(sample, log_q, ProposalKind.INDEPENDENCE,
                              name=f"cauchy-independence(tau={tau:g})")
    return target, proposal


def make_exp_independence(lam: float, mu: float):
    """Exp(``lam``) target with an independent Exp(``mu``) proposal, ``0 < mu <= lam``.

    Returns ``(target, proposal, oracle)`` with

        p(x) = 1 - (lam - mu) / lam * exp(-mu x)
        r(x) = 1 - 2 (lam - mu) / (2 lam - mu) * exp(-mu x)
    """
    lam, mu = float(lam), float(mu)
    if not (lam > 0 and mu > 0):
        raise ValueError(f"rates must be positive, got lambda={lam}, mu={mu}")
    if mu > lam:
        raise ValueError(
            f"mu={mu} exceeds lambda={lam}: the closed forms for p and r assume a proposal "
            "with heavier tails than the target (mu <= lambda)")
    log_lam, log_mu = math.log(lam), math.log(mu)

    def log_pi(x):
        x = _first(x)
        with np.errstate(invalid="ignore"):
            return np.where(x >= 0, log_lam - lam * x, -np.inf)

    def sample(x, rng):
        return rng.exponential(1.0 / mu, size=np.shape(x))

    def log_q(y, x):
        y = _first(y)
        with np.errstate(invalid="ignore"):
            return np.where(y >= 0, log_mu - mu * y, -np.inf)

    cp = (lam - mu) / lam
    cr = 2.0 * (lam - mu) / (2.0 * lam - mu)

    def p_exact(x):
        return 1.0 - cp * np.exp(-mu * _coord(x))

    def r_exact(x):
        return 1.0 - cr * np.exp(-mu * _coord(x))

    oracle = AnalyticOracle(
        p_exact=p_exact,
        r_exact=r_exact,
        pi_tilde_logdensity=lambda x: log_pi(_coord(x)[..., None]) + np.log(p_exact(x)),
        description=f"exponential independence sampler, lambda={lam:g}, mu={mu:g}",
    )
    target = TargetModel(
        log_density=log_pi,
        dimension=1,
        oracle=oracle,
        sample_exact=lambda rng, size: rng.exponential(1.0 / lam, size=(size, 1)),
        name=f"exp({lam:g})",
    )
    proposal = ProposalKernel(sample, log_q, ProposalKind.INDEPENDENCE, name=f"exp-independence(mu={mu:g})")
    return target, proposal, oracle


def make_geometric_rw(beta: float):
    """Geometric target ``pi(x) = beta (1 - beta)**x`` on ``{0, 1, ...}``.

    From ``x > 0`` the proposal moves to ``x - 1`` or ``x + 1`` with
    probability 1/2 each; from 0 it proposes 0 or 1. Proposing 0 from 0 is
    an accepted move that leaves the state unchanged, which keeps the leaving
    probability constant: ``p = 1 - beta/2``, ``r = 1 - beta + beta**2/2``.
    """
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    log_beta, log_1mb = math.log(beta), math.log1p(-beta)
    log_half = math.log(0.5)
    p_const = 1.0 - beta / 2.0
    r_const = 1.0 - beta + beta * beta / 2.0

    def log_pi(x):
        x = _first(x)
        return np.where(x >= 0, log_beta + x * log_1mb, -np.inf)

    def sample(x, rng):
        x = np.asarray(x)
        step = 2 * rng.integers(0, 2, size=x.shape, dtype=x.dtype) - 1
        return np.maximum(x + step, 0)

    def log_q(y, x):
        y, x = _first(y), _first(x)
        ok = np.where(x > 0, np.abs(y - x) == 1, (y == 0) | (y == 1))
        return np.where(ok, log_half, -np.inf)

    def p_exact(x):
        return np.full(np.shape(_coord(x)), p_const)

    def r_exact(x):
        return np.full(np.shape(_coord(x)), r_const)

    oracle = AnalyticOracle(
        p_exact=p_exact,
        r_exact=r_exact,
        pi_tilde_logdensity=lambda x: log_pi(_coord(x)[..., None]),
        description=f"geometric target with one-step random walk, beta={beta:g}",
    )
    target = TargetModel(
        log_density=log_pi,
        dimension=1,
        oracle=oracle,
        sample_exact=lambda rng, size: (rng.geometric(beta, size=(size, 1)) - 1).astype(np.int64),
        dtype=np.int64,
        name=f"geometric({beta:g})",
    )
    proposal = ProposalKernel(sample, log_q, ProposalKind.SYMMETRIC, name="one-step-rw")
    return target, proposal, oracle


def geometric_gain_absolute(beta):
    """``Var(n | z) - Var(xi^inf | z)`` for the geometric model:
    ``2 beta (1 - beta)(2 + beta) / ((2 - beta**2)(2 - beta)**2)``."""
    beta = np.asarray(beta, dtype=float)
    _check_beta(beta)
    return 2.0 * beta * (1.0 - beta) * (2.0 + beta) / ((2.0 - beta**2) * (2.0 - beta) ** 2)


def geometric_gain_relative(beta):
    """Variance reduction as a fraction of ``Var(n | z)``:
    ``(1 - beta)(2 + beta) / (2 - beta**2)``."""
    beta = np.asarray(beta, dtype=float)
    _check_beta(beta)
    return (1.0 - beta) * (2.0 + beta) / (2.0 - beta**2)


def _check_beta(beta):
    if np.any((beta <= 0.0) | (beta >= 1.0)):
        raise ValueError("beta must lie in (0, 1)")


def maximize_geometric_gain(xatol: float = 1e-10):
    """Return ``(beta*, gain*)`` maximising the absolute gain over (0, 1)."""
    res = optimize.minimize_scalar(lambda b: -float(geometric_gain_absolute(b)),
                                   bounds=(1e-9, 1 - 1e-9), method="bounded",
                                   options={"xatol": xatol})
    return float(res.x), float(-res.fun)


# ---------------------------------------------------------------------------
# independent oracles: numerical integration / enumeration of p and r
# ---------------------------------------------------------------------------

def quadrature_pr(z: float, target: TargetModel, proposal: ProposalKernel,
                  lower: float = -math.inf, upper: float = math.inf,
                  breakpoints=(), epsabs: float = 1e-10) -> PRPair:
    """``p(z)`` and ``r(z)`` of a one-dimensional continuous model by adaptive quadrature.

    ``alpha(z, .)`` has a kink where it reaches 1; pass such points (and ``z``
    itself) as ``breakpoints`` to keep the integration accurate.
    """
    zs = np.array([float(z)])
    lpz = target.log_density(zs)

    def integrand(y, power):
        ys = np.array([y])
        lq = float(proposal.log_density(ys, zs))
        if lq == -math.inf:
            return 0.0
        la = float(log_acceptance(zs, ys, target, proposal, lpz))
        return math.exp(power * la + lq)

    pts = sorted({lower, upper, float(z), *map(float, breakpoints)})
    pts = [t for t in pts if lower <= t <= upper]
    out = []
    for power in (1, 2):
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(integrand, a, b, args=(power,), epsabs=epsabs, epsrel=1e-12, limit=500)
            total += val
        out.append(total)
    return PRPair(out[0], out[1])


def enumerate_pr(z: int, target: TargetModel, proposal: ProposalKernel, support) -> PRPair:
    """``p(z)`` and ``r(z)`` of a discrete model by summing over ``support``."""
    zs = np.array([int(z)])
    ys = np.asarray(list(support), dtype=np.int64)[:, None]
    zb = np.broadcast_to(zs, ys.shape)
    q = np.exp(proposal.log_density(ys, zb))
    a = np.exp(log_acceptance(zb, ys, target, proposal))
    return PRPair(float(np.sum(q * a)), float(np.sum(q * a * a)))


def geometric_mh_matrix(target: TargetModel, proposal: ProposalKernel, K: int) -> np.ndarray:
    """Exact MH transition matrix on ``{0, ..., K}``; proposals leaving the
    box are folded into the diagonal (rejections)."""
    states = np.arange(K + 1, dtype=np.int64)
    x = np.repeat(states, K + 1)[:, None]
    y = np.tile(states, K + 1)[:, None]
    qa = np.exp(proposal.log_density(y, x) + log_acceptance(x, y, target, proposal)).reshape(K + 1, K + 1)
    P = qa.copy()
    np.fill_diagonal(P, 0.0)
    P[np.diag_indices(K + 1)] = 1.0 - P.sum(axis=1)
    return P


def geometric_z_kernel(target: TargetModel, proposal: ProposalKernel, K: int):
    """Transition matrix ``q~(y|x) = alpha(x, y) q(y|x) / p(x)`` of the accepted
    states and its stationary weights ``pi~ ∝ pi p``, on ``{0, ..., K}``.

    Rows near ``K`` are sub-stochastic; detailed balance is pairwise and
    unaffected by the cut.
    """
    states = np.arange(K + 1, dtype=np.int64)
    x = np.repeat(states, K + 1)[:, None]
    y = np.tile(states, K + 1)[:, None]
    qa = np.exp(proposal.log_density(y, x) + log_acceptance(x, y, target, proposal)).reshape(K + 1, K + 1)
    # p(x) needs the full proposal support, including the move to K + 1
    p = np.array([enumerate_pr(s, target, proposal, range(max(s - 1, 0), s + 2)).p for s in states])
    Q = qa / p[:, None]
    pi_tilde = np.exp(target.log_density(states[:, None])) * p
    return Q, pi_tilde / pi_tilde.sum()
