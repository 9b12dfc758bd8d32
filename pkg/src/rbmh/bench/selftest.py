"""Fast oracle checks run by ``rbmh selftest``.

Each check compares a simulation or numerical routine against an exact
answer; Monte-Carlo checks use fixed seeds and 4-SE tolerances so a correct
build always passes.
"""
from __future__ import annotations

import math
from typing import Callable, List, NamedTuple

import numpy as np

from .. import models, probit
from ..core import run_chain
from ..estimators import delta_plain, delta_plain_blocks
from ..weights import PRPair, WeightSpec, control_variate_draws, var_xi_k_closed, xi_hat_k_batch


class Check(NamedTuple):
    name: str
    ok: bool
    detail: str


def _mean_check(name, x, target, z=4.0) -> Check:
    x = np.asarray(x, dtype=float)
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(x.size))
    return Check(name, abs(m - target) <= z * se + 1e-12, f"mean {m:.5f} vs {target:.5f} (se {se:.2e})")


def check_unbiased_exp() -> Check:
    t, q, o = models.make_exp_independence(1.0, 0.5)
    z = np.full((20_000, 1), 1.0)
    xi = xi_hat_k_batch(z, WeightSpec(math.inf), t, q, np.random.default_rng(11)).xi
    return _mean_check("xi_inf unbiased for 1/p (exponential)", xi, 1.0 / float(o.p_exact(1.0)))


def check_unbiased_geometric() -> Check:
    t, q, o = models.make_geometric_rw(0.5)
    z = np.full((20_000, 1), 3, dtype=np.int64)
    xi = xi_hat_k_batch(z, WeightSpec(2), t, q, np.random.default_rng(12)).xi
    return _mean_check("xi_2 unbiased for 1/p (geometric)", xi, 1.0 / float(o.p_exact(3)))


def check_variance_closed_form() -> Check:
    pr = PRPair(0.5, 1.0 / 3.0)
    v0 = var_xi_k_closed(pr, 0)
    ok = v0 == (1 - pr.p) / pr.p ** 2
    vs = [var_xi_k_closed(pr, k) for k in (0, 1, 2, 5, math.inf)]
    ok = ok and all(a >= b for a, b in zip(vs, vs[1:]))
    return Check("closed-form variance: k=0 value and monotone in k", ok, ", ".join(f"{v:.5f}" for v in vs))


def check_quadrature() -> Check:
    t, q, o = models.make_exp_independence(1.0, 0.3)
    worst = 0.0
    for z in (0.0, 0.7, 2.5):
        pr = models.quadrature_pr(z, t, q, lower=0.0)
        ex = o.pr(z)
        worst = max(worst, abs(pr.p - ex.p), abs(pr.r - ex.r))
    return Check("quadrature p, r match closed form", worst < 1e-8, f"max error {worst:.1e}")


def check_control_variate() -> Check:
    t, q, _ = models.make_exp_independence(1.0, 0.5)
    z = np.full((20_000, 1), 0.5)
    xi = xi_hat_k_batch(z, WeightSpec(math.inf), t, q, np.random.default_rng(13)).xi
    a = control_variate_draws(z, t, q, np.random.default_rng(14))
    return _mean_check("control variate has mean 1", xi * a, 1.0)


def check_block_identity() -> Check:
    t, q = models.make_gaussian_rw(2.0)
    ch = run_chain(t, q, 0.0, 500, 5)
    f = lambda s: s[:, 0] ** 2
    a, b = delta_plain(ch, f), delta_plain_blocks(ch.z, ch.n, f)
    return Check("path and block averages agree exactly", a == b, f"{a!r} vs {b!r}")


def check_probit_gradient() -> Check:
    data = probit.synthetic_probit_data((0.3, 0.8), 500, np.random.default_rng(15))
    b = np.array([0.2, 0.5])
    g = probit.grad_log_posterior(b, data)
    eps = 1e-6
    fd = np.array([(probit.log_posterior(b + eps * e, data) - probit.log_posterior(b - eps * e, data)) / (2 * eps)
                   for e in np.eye(2)])
    err = float(np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(g))))
    return Check("probit gradient matches finite differences", err < 1e-5, f"relative error {err:.1e}")


CHECKS: List[Callable[[], Check]] = [
    check_unbiased_exp,
    check_unbiased_geometric,
    check_variance_closed_form,
    check_quadrature,
    check_control_variate,
    check_block_identity,
    check_probit_gradient,
]


def run_selftest(out=print) -> bool:
    ok = True
    for fn in CHECKS:
        try:
            c = fn()
        except Exception as exc:  # report, keep going
            c = Check(fn.__name__, False, f"{type(exc).__name__}: {exc}")
        out(f"{'ok  ' if c.ok else 'FAIL'}  {c.name}: {c.detail}")
        ok = ok and c.ok
    return ok
