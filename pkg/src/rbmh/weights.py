"""Rao-Blackwellised estimators of the inverse leaving probability.

For an accepted state ``z`` with leaving probability
``p(z) = E[alpha(z, Y)]``, ``Y ~ q(.|z)``, the occupation count ``n`` is
Geometric(p(z)). The estimators here replace it by

    xi^k = 1 + sum_j prod_{l <= min(k, j)} (1 - alpha(z, y_l))
                     prod_{k < l <= j} 1{u_l >= alpha(z, y_l)}

built from fresh iid proposals ``y_l ~ q(.|z)`` and uniforms ``u_l``. All of
them are unbiased for ``1/p(z)``; ``k = 0`` is a geometric draw and
``k = inf`` integrates out every uniform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .core import ChainRecord, ProposalKernel, TargetModel, _check_support, log_acceptance

INF = math.inf


@dataclass(frozen=True)
class WeightSpec:
    """Which estimator to compute and how far to let it run.

    ``k`` is a non-negative integer or ``math.inf``. ``max_proposals`` caps the
    number of fresh proposals per block. For ``k = inf`` the product of
    ``1 - alpha`` is abandoned once it drops below ``product_floor``.
    Either cap marks the result as truncated.
    """

    k: float = INF
    max_proposals: int = 10**6
    product_floor: float = 1e-12

    def __post_init__(self):
        k = self.k
        if k != INF:
            if not float(k).is_integer() or k < 0:
                raise ValueError(f"k must be a non-negative integer or inf, got {k!r}")
            object.__setattr__(self, "k", int(k))
            if self.max_proposals < k:
                raise ValueError(f"max_proposals={self.max_proposals} is smaller than k={k}")
        if self.max_proposals < 1:
            raise ValueError("max_proposals must be positive")
        if not 0.0 <= self.product_floor < 1.0:
            raise ValueError(f"product_floor must lie in [0, 1), got {self.product_floor}")


class WeightResult(NamedTuple):
    xi: float
    proposals_used: int
    truncated: bool


class WeightBatch(NamedTuple):
    xi: np.ndarray
    proposals_used: np.ndarray
    truncated: np.ndarray


def xi_hat_k_batch(z, spec: WeightSpec, target: TargetModel, proposal: ProposalKernel,
                   rng: np.random.Generator) -> WeightBatch:
    """Independent draws of ``xi^k``, one per row of ``z``.

    Rows are processed in lock-step rounds; a row leaves the computation as
    soon as its running product is exactly zero (an ``alpha = 1`` proposal in
    the integrated part, or an accepted uniform beyond it).
    """
    z = target.as_state(z)
    if z.ndim == 1:
        z = z[None, :]
    m = z.shape[0]
    log_pi_z = np.asarray(target.log_density(z), dtype=float)
    _check_support(log_pi_z, "weighted state")

    xi = np.ones(m)
    prod = np.ones(m)
    used = np.zeros(m, dtype=np.int64)
    truncated = np.zeros(m, dtype=bool)
    active = np.arange(m)
    k, cap, floor = spec.k, spec.max_proposals, spec.product_floor
    j = 0
    while active.size:
        j += 1
        za = z[active]
        y = proposal.sample(za, rng)
        a = np.exp(log_acceptance(za, y, target, proposal, log_pi_z[active]))
        if j <= k:
            pa = prod[active] * (1.0 - a)
        else:
            u = rng.random(active.size)
            pa = prod[active] * (u >= a)
        prod[active] = pa
        xi[active] += pa
        used[active] = j
        done = pa == 0.0
        if k == INF and floor > 0.0:
            small = pa < floor
            truncated[active[small & ~done]] = True
            done |= small
        if j >= cap:
            truncated[active[~done]] = True
            break
        active = active[~done]
    return WeightBatch(xi, used, truncated)


def xi_hat_k(z, spec: WeightSpec, target: TargetModel, proposal: ProposalKernel,
             rng: np.random.Generator) -> WeightResult:
    """Single draw of the weight estimator at state ``z``."""
    out = xi_hat_k_batch(target.as_state(z)[None, :], spec, target, proposal, rng)
    return WeightResult(float(out.xi[0]), int(out.proposals_used[0]), bool(out.truncated[0]))


def control_variate_draws(z, target: TargetModel, proposal: ProposalKernel,
                          rng: np.random.Generator) -> np.ndarray:
    """``alpha(z_i, y0_i)`` with one fresh ``y0_i ~ q(.|z_i)`` per row: unbiased for ``p(z_i)``."""
    z = target.as_state(z)
    if z.ndim == 1:
        z = z[None, :]
    log_pi_z = np.asarray(target.log_density(z), dtype=float)
    _check_support(log_pi_z, "weighted state")
    y0 = proposal.sample(z, rng)
    return np.exp(log_acceptance(z, y0, target, proposal, log_pi_z))


def control_variate_draw(z, target: TargetModel, proposal: ProposalKernel,
                         rng: np.random.Generator) -> float:
    return float(control_variate_draws(target.as_state(z)[None, :], target, proposal, rng)[0])


class PRPair(NamedTuple):
    """``p(z) = E[alpha(z, Y)]`` and ``r(z) = E[alpha(z, Y)^2]``."""

    p: float
    r: float

    def validate(self, tol: float = 1e-12) -> "PRPair":
        p, r = self
        if not (0.0 < p <= 1.0 + tol):
            raise ValueError(f"p must lie in (0, 1], got {p}")
        if not (0.0 < r <= p + tol):
            raise ValueError(f"need 0 < r <= p, got p={p}, r={r}")
        if 1.0 - 2.0 * p + r < -tol:
            raise ValueError(f"1 - 2p + r = {1 - 2 * p + r} is negative; (p, r) cannot come from one alpha")
        return self


def var_xi_k_closed(pr: PRPair, k: float) -> float:
    """Conditional variance of ``xi^k`` given ``z`` as a function of ``(p, r)``.

    ``k = 0`` gives the geometric variance ``(1 - p) / p**2``; the reduction
    grows with ``k`` towards the ``k = inf`` limit.
    """
    p, r = PRPair(*pr).validate()
    base = (1.0 - p) / p**2
    if k == 0:
        return base
    if k != INF and (k < 0 or not float(k).is_integer()):
        raise ValueError(f"k must be a non-negative integer or inf, got {k!r}")
    c = 1.0 - 2.0 * p + r
    if k == INF or c <= 0.0:
        frac = 1.0
    else:
        # 1 - c**k without cancellation when c is close to 1
        frac = -math.expm1(k * math.log1p(r - 2.0 * p))
    reduction = frac / (2.0 * p - r) * (2.0 - p) / p**2 * (p - r)
    return max(base - reduction, 0.0)


def var_xi_inf_closed(pr: PRPair) -> float:
    return var_xi_k_closed(pr, INF)


def expected_proposals(p: float, a1: float, k: float) -> float:
    """Mean number of fresh proposals consumed by ``xi^k`` at a state where
    ``P(alpha = 1) = a1`` and the leaving probability is ``p`` (finite ``k``)."""
    if k == INF:
        raise ValueError("no closed form for k = inf")
    stay = 1.0 - a1
    return sum(stay**j for j in range(int(k))) + stay ** int(k) / p


def attach_weights(chain: ChainRecord, specs: Iterable[WeightSpec], target: TargetModel,
                   proposal: ProposalKernel) -> ChainRecord:
    """Compute ``xi^k`` on the complete blocks of ``chain`` for every spec.

    Each ``k`` draws from its own stream of the chain seed, so the result for
    a given ``k`` does not depend on the other specs.
    """
    weights = dict(chain.weights)
    used = dict(chain.weight_proposals)
    trunc = dict(chain.weight_truncated)
    z = chain.complete_z
    streams = chain.streams
    for spec in specs:
        if z.shape[0] == 0:
            weights[spec.k] = np.empty(0)
            used[spec.k] = 0
            trunc[spec.k] = 0
            continue
        out = xi_hat_k_batch(z, spec, target, proposal, streams.weights(spec.k))
        weights[spec.k] = out.xi
        used[spec.k] = int(out.proposals_used.sum())
        trunc[spec.k] = int(out.truncated.sum())
    return chain.with_updates(weights=weights, weight_proposals=used, weight_truncated=trunc)


def attach_control_variates(chain: ChainRecord, target: TargetModel,
                            proposal: ProposalKernel) -> ChainRecord:
    z = chain.complete_z
    if z.shape[0] == 0:
        return chain.with_updates(cv=np.empty(0))
    cv = control_variate_draws(z, target, proposal, chain.streams.generator("control"))
    return chain.with_updates(cv=cv)
