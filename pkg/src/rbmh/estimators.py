"""Point estimators of ``E_pi[h]`` built from a chain and its block weights.

``h`` may be a callable on states of shape ``(m, d)`` or a precomputed array
of ``h(z_i)`` values (useful when ``h`` involves extra randomness, such as the
control-variate draws).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Optional, Union

import numpy as np

from .core import ChainRecord

HLike = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


class DegenerateControlWarning(UserWarning):
    """The control variate has no spread; the regression adjustment is skipped."""


def _h_values(h: HLike, z: np.ndarray) -> np.ndarray:
    if callable(h):
        vals = np.asarray(h(z), dtype=float)
    else:
        vals = np.asarray(h, dtype=float)
    vals = vals.reshape(-1)
    if vals.shape[0] != z.shape[0]:
        raise ValueError(f"h has {vals.shape[0]} values for {z.shape[0]} states")
    if np.any(np.isnan(vals)):
        raise ValueError("h returned NaN")
    return vals


_SPLIT = 134217729.0  # 2**27 + 1


def _two_product(a: np.ndarray, b: np.ndarray):
    # Dekker: a*b == p + e exactly (barring overflow)
    p = a * b
    t = _SPLIT * a
    a_hi = t - (t - a)
    a_lo = a - a_hi
    t = _SPLIT * b
    b_hi = t - (t - b)
    b_lo = b - b_hi
    e = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, e


def exact_dot(w, v) -> float:
    """Correctly rounded ``sum(w * v)``.

    Products are split into exact pairs and summed with :func:`math.fsum`, so
    the result does not depend on summation order or on whether a weight
    ``n`` multiplies a value or the value is repeated ``n`` times.
    """
    p, e = _two_product(np.asarray(w, dtype=float), np.asarray(v, dtype=float))
    return math.fsum(np.concatenate((p, e)).tolist())


def delta_plain(chain_or_path, h: HLike) -> float:
    """Ergodic average of ``h`` over the path."""
    path = chain_or_path.path if isinstance(chain_or_path, ChainRecord) else np.asarray(chain_or_path)
    vals = _h_values(h, path)
    return math.fsum(vals.tolist()) / vals.shape[0]


def delta_plain_blocks(z, n, h: HLike) -> float:
    """The same average computed from the accepted blocks, ``sum n_i h(z_i) / sum n_i``."""
    z = np.asarray(z)
    n = np.asarray(n)
    return exact_dot(n, _h_values(h, z)) / math.fsum(n.astype(float).tolist())


def delta_k(z, weights, h: HLike) -> float:
    """Self-normalised estimate ``sum xi_i h(z_i) / sum xi_i``."""
    z = np.asarray(z)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] == 0:
        raise ValueError("no blocks to average over")
    if w.shape[0] != z.shape[0]:
        raise ValueError(f"{w.shape[0]} weights for {z.shape[0]} blocks")
    if np.any(w < 1.0):
        raise ValueError("weights must be >= 1")
    return exact_dot(w, _h_values(h, z)) / math.fsum(w.tolist())


def delta_oracle(z, p_values, h: HLike) -> float:
    """Importance-sampling estimate with the exact weights ``1/p(z_i)``.

    ``p_values`` is either an array of ``p(z_i)`` or an object exposing
    ``p_exact`` (an :class:`~rbmh.models.AnalyticOracle`).
    """
    z = np.asarray(z)
    if p_values is None:
        raise ValueError("the oracle estimator needs exact p(z) values")
    p = p_values.p_exact(z) if hasattr(p_values, "p_exact") else p_values
    w = 1.0 / np.asarray(p, dtype=float).reshape(-1)
    return exact_dot(w, _h_values(h, z)) / math.fsum(w.tolist())


class CVResult(NamedTuple):
    estimate: float
    slope: float
    fallback: bool


def cv_slope(z, weights, cv_draws, h: HLike) -> Optional[float]:
    """Least-squares slope of ``xi_i h(z_i)`` on ``xi_i alpha(z_i, y0_i)``; ``None`` if the control is constant."""
    w = np.asarray(weights, dtype=float)
    y = w * _h_values(h, np.asarray(z))
    c = w * np.asarray(cv_draws, dtype=float)
    cc = c - c.mean()
    sxx = float(cc @ cc)
    if y.shape[0] < 2 or sxx <= 1e-14 * max(1.0, float(c @ c)):
        return None
    return float(cc @ (y - y.mean())) / sxx


def delta_cv(z, weights, cv_draws, h: HLike) -> CVResult:
    """Control-variate adjusted version of :func:`delta_k`.

    The control ``c_i = xi_i alpha(z_i, y0_i)`` has conditional mean 1; the
    numerator ``sum xi_i h(z_i)`` is replaced by ``sum [xi_i h(z_i) - b (c_i - 1)]``
    with ``b`` the in-sample least-squares slope.
    """
    z = np.asarray(z)
    w = np.asarray(weights, dtype=float).reshape(-1)
    cv = np.asarray(cv_draws, dtype=float).reshape(-1)
    if cv.shape != w.shape:
        raise ValueError("need one control-variate draw per block")
    base = delta_k(z, w, h)
    b = cv_slope(z, w, cv, h)
    if b is None:
        warnings.warn("control variate is constant; returning the uncorrected estimate",
                      DegenerateControlWarning, stacklevel=2)
        return CVResult(base, 0.0, True)
    adj = b * math.fsum((w * cv - 1.0).tolist())
    return CVResult(base - adj / math.fsum(w.tolist()), b, False)


def cv_components(z, weights, cv_draws, h: HLike, slope: Optional[float] = None) -> np.ndarray:
    """Per-block terms ``xi_i h(z_i) - b (xi_i alpha_i - 1)`` of the adjusted estimator."""
    w = np.asarray(weights, dtype=float)
    cv = np.asarray(cv_draws, dtype=float)
    if slope is None:
        slope = cv_slope(z, w, cv, h) or 0.0
    return w * _h_values(h, np.asarray(z)) - slope * (w * cv - 1.0)


def component_variance_ratio(chain: ChainRecord, h: HLike, k: float) -> float:
    """Empirical variance of ``xi_i^k h(z_i)`` over that of ``n_i h(z_i)``, complete blocks only.

    ``k = 0`` refers to the chain's own counts, so its ratio is exactly 1.
    """
    z, n = chain.complete_z, chain.complete_n
    if z.shape[0] < 2:
        raise ValueError("need at least two complete blocks")
    hv = _h_values(h, z)
    den = np.var(n * hv, ddof=1)
    if den == 0.0:
        raise ZeroDivisionError("occupation-count terms have zero variance")
    xi = n if k == 0 else chain.weights[k]
    return float(np.var(xi * hv, ddof=1) / den)


@dataclass
class EstimateSet:
    """All estimates of one ``h`` on one chain.

    ``delta_k[0]`` uses the chain's own occupation counts on every block and
    therefore equals ``delta_plain``; other keys use the fresh weights on the
    complete blocks. Fresh ``k = 0`` draws only enter ``component_variances``.
    """

    delta_plain: float
    delta_k: Mapping[float, float] = field(default_factory=dict)
    delta_oracle: Optional[float] = None
    delta_cv: Optional[float] = None
    component_variances: Mapping[str, float] = field(default_factory=dict)


def estimate_all(chain: ChainRecord, h: HLike, oracle=None, cv_key: float = math.inf) -> EstimateSet:
    """Every estimator available on ``chain`` for one ``h``.

    If ``h`` is an array it must hold ``h(z_i)`` for the complete blocks.
    """
    out = EstimateSet(delta_plain=math.nan)
    zc, nc = chain.complete_z, chain.complete_n
    if callable(h):
        out.delta_plain = delta_plain(chain, h)
        out.delta_k[0] = delta_k(chain.z, chain.n, h)
        hv = _h_values(h, zc) if zc.shape[0] else np.empty(0)
    else:
        hv = np.asarray(h, dtype=float)
    if zc.shape[0] == 0:
        return out
    if not callable(h):
        out.delta_plain = delta_k(zc, nc, hv)
    var = out.component_variances
    ddof = 1 if zc.shape[0] > 1 else 0
    var["n"] = float(np.var(nc * hv, ddof=ddof))
    for k, w in chain.weights.items():
        if k != 0:
            out.delta_k[k] = delta_k(zc, w, hv)
        var[f"xi_{k}"] = float(np.var(w * hv, ddof=ddof))
    if oracle is not None:
        p = oracle.p_exact(zc)
        out.delta_oracle = delta_oracle(zc, p, hv)
        var["oracle"] = float(np.var(hv / p, ddof=ddof))
    if chain.cv is not None and cv_key in chain.weights:
        w = chain.weights[cv_key]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateControlWarning)
            res = delta_cv(zc, w, chain.cv, hv)
        out.delta_cv = res.estimate
        var["cv"] = float(np.var(cv_components(zc, w, chain.cv, hv, res.slope), ddof=ddof))
    return out
