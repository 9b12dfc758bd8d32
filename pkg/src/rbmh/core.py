"""Metropolis-Hastings engine.

A chain is kept in two equivalent forms: the path ``x(1), ..., x(N)`` and the
accepted-block form ``(z_i, n_i)``, where ``z_i`` are the accepted states and
``n_i`` the number of consecutive steps the chain stayed at each of them.

States are 1-d arrays of fixed length ``d`` (integer dtype for discrete
models). Batched functions take arrays of shape ``(..., d)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, NamedTuple, Optional

import numpy as np

from .streams import ChainStreams, SeedLike


class OffSupportError(ValueError):
    """Raised when the current state of a chain has zero target density."""


class ProposalKind(str, enum.Enum):
    SYMMETRIC = "symmetric-random-walk"
    INDEPENDENCE = "independence"
    GENERAL = "general"


@dataclass(frozen=True)
class TargetModel:
    """Unnormalised target density.

    Attributes
    ----------
    log_density : callable
        Maps states of shape ``(..., d)`` to ``log pi`` of shape ``(...)``;
        ``-inf`` outside the support.
    dimension : int
        Length ``d`` of a state vector.
    oracle : AnalyticOracle, optional
        Exact acceptance functions, when known in closed form.
    sample_exact : callable, optional
        ``sample_exact(rng, size)`` draws ``size`` exact samples from the
        target; used to start chains at stationarity.
    """

    log_density: Callable[[np.ndarray], np.ndarray]
    dimension: int
    oracle: Optional[object] = None
    sample_exact: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    dtype: type = float
    name: str = "target"

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ValueError(f"dimension must be positive, got {self.dimension}")

    def as_state(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape[-1] != self.dimension:
            raise ValueError(f"state has length {x.shape[-1]}, model dimension is {self.dimension}")
        return x


@dataclass(frozen=True)
class ProposalKernel:
    """Proposal ``q(y|x)``.

    ``sample(x, rng)`` returns one proposal per leading index of ``x``;
    ``log_density(y, x)`` evaluates ``log q(y|x)`` elementwise.
    """

    sample: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    log_density: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kind: ProposalKind = ProposalKind.GENERAL
    name: str = "proposal"


def log_acceptance(x, y, target: TargetModel, proposal: ProposalKernel,
                   log_pi_x=None) -> np.ndarray:
    """Vectorised ``log alpha(x, y)``.

    ``log_pi_x`` may be passed to avoid re-evaluating the target at ``x``;
    it is assumed finite (callers check the support).
    """
    if log_pi_x is None:
        log_pi_x = target.log_density(x)
    log_pi_y = np.asarray(target.log_density(y), dtype=float)
    with np.errstate(invalid="ignore"):
        log_ratio = log_pi_y - log_pi_x
        if proposal.kind is not ProposalKind.SYMMETRIC:
            log_ratio = log_ratio + proposal.log_density(x, y) - proposal.log_density(y, x)
        log_alpha = np.minimum(log_ratio, 0.0)
    log_alpha = np.where(log_pi_y == -np.inf, -np.inf, log_alpha)
    if np.any(np.isnan(log_alpha)):
        raise FloatingPointError("acceptance probability evaluated to NaN")
    return log_alpha


def _check_support(log_pi_x, what="current state") -> None:
    if not np.all(np.isfinite(log_pi_x)):
        raise OffSupportError(
            f"{what} has log target density {np.asarray(log_pi_x).min()}; "
            "the chain must start and stay on the support of the target")


def acceptance_prob(x, y, target: TargetModel, proposal: ProposalKernel) -> float:
    """``alpha(x, y) = min{1, pi(y) q(x|y) / (pi(x) q(y|x))}``, computed in log space."""
    x = target.as_state(x)
    y = target.as_state(y)
    log_pi_x = target.log_density(x)
    _check_support(log_pi_x)
    return float(np.exp(log_acceptance(x, y, target, proposal, log_pi_x)))


class Step(NamedTuple):
    next: np.ndarray
    accepted: bool
    proposed: np.ndarray
    u: float


def mh_step(x, target: TargetModel, proposal: ProposalKernel,
            rng: np.random.Generator, u: Optional[float] = None) -> Step:
    """One Metropolis-Hastings transition from ``x``.

    The move is accepted iff ``u < alpha`` (strict), so a proposal with zero
    target density is never accepted. ``u`` is drawn from ``rng`` after the
    proposal unless supplied.
    """
    x = target.as_state(x)
    y = target.as_state(proposal.sample(x, rng))
    a = acceptance_prob(x, y, target, proposal)
    if u is None:
        u = float(rng.random())
    accepted = u < a
    return Step(y if accepted else x, bool(accepted), y, float(u))


@dataclass(frozen=True)
class AcceptedBlock:
    """One accepted state with its occupation count and weight estimates."""

    z: np.ndarray
    n_occupation: int
    weights: Mapping[float, float] = field(default_factory=dict)
    cv_draw: Optional[float] = None
    complete: bool = True


class Blocks(NamedTuple):
    z: np.ndarray
    n: np.ndarray
    M: int
    M_N: int


def decompose_chain(path, accepted=None, trailing_complete: bool = False) -> Blocks:
    """Run-length encode a path into accepted blocks.

    Parameters
    ----------
    path : array of shape (N, d) or (N,)
    accepted : bool array of shape (N,), optional
        ``accepted[t]`` tells whether ``path[t]`` was reached by an accepted
        move (``accepted[0]`` is ignored: the first state always opens a
        block). Without it, blocks break where consecutive states differ,
        which misses accepted moves onto the current state.
    trailing_complete : bool
        Whether the chain is known to leave the last state at step ``N + 1``.
        The last block is otherwise treated as censored and ``M_N = M - 1``.
    """
    path = np.asarray(path)
    if path.shape[0] == 0:
        raise ValueError("path must be non-empty")
    flat = path.reshape(path.shape[0], -1)
    if accepted is None:
        starts = np.ones(flat.shape[0], dtype=bool)
        starts[1:] = np.any(flat[1:] != flat[:-1], axis=1)
    else:
        starts = np.array(accepted, dtype=bool, copy=True)
        if starts.shape != (flat.shape[0],):
            raise ValueError("accepted must have one flag per path state")
        starts[0] = True
    idx = np.flatnonzero(starts)
    n = np.diff(np.append(idx, flat.shape[0]))
    M = idx.size
    return Blocks(path[idx], n.astype(np.int64), M, M if trailing_complete else M - 1)


def expand_blocks(z, n, N: Optional[int] = None) -> np.ndarray:
    """Inverse of :func:`decompose_chain`: repeat each ``z_i`` ``n_i`` times."""
    out = np.repeat(np.asarray(z), np.asarray(n), axis=0)
    return out if N is None else out[:N]


@dataclass(frozen=True, eq=False)
class ChainRecord:
    """Immutable record of one chain.

    ``path`` holds ``x(1) = x0, ..., x(N)``. The chain performs ``N`` proposals:
    ``N - 1`` of them produce the path and the last one only decides whether
    the final block is complete. Blocks ``0 .. M_N - 1`` are complete; if
    ``M_N < M`` the last block's count is censored at ``N``.

    ``weights[k]`` and ``cv`` are aligned with the complete blocks.
    """

    path: np.ndarray
    accepted: np.ndarray
    z: np.ndarray
    n: np.ndarray
    N: int
    M: int
    M_N: int
    seed: np.random.SeedSequence
    weights: Mapping[float, np.ndarray] = field(default_factory=dict)
    weight_proposals: Mapping[float, int] = field(default_factory=dict)
    weight_truncated: Mapping[float, int] = field(default_factory=dict)
    cv: Optional[np.ndarray] = None

    @property
    def acceptance_rate(self) -> float:
        """Accepted moves per proposal (the final look-ahead proposal included)."""
        return self.M_N / self.N

    @property
    def trailing_complete(self) -> bool:
        return self.M_N == self.M

    @property
    def complete_z(self) -> np.ndarray:
        return self.z[: self.M_N]

    @property
    def complete_n(self) -> np.ndarray:
        return self.n[: self.M_N]

    @property
    def block_starts(self) -> np.ndarray:
        """Path index (0-based) at which each block begins."""
        return np.concatenate(([0], np.cumsum(self.n)[:-1]))

    @property
    def streams(self) -> ChainStreams:
        return ChainStreams(self.seed)

    @property
    def blocks(self) -> list:
        out = []
        for i in range(self.M):
            complete = i < self.M_N
            w = {k: float(v[i]) for k, v in self.weights.items()} if complete else {}
            cv = float(self.cv[i]) if (complete and self.cv is not None) else None
            out.append(AcceptedBlock(self.z[i], int(self.n[i]), w, cv, complete))
        return out

    def with_updates(self, **changes) -> "ChainRecord":
        return replace(self, **changes)


def run_chain(target: TargetModel, proposal: ProposalKernel, x0, N: int,
              seed: SeedLike) -> ChainRecord:
    """Run ``N`` Metropolis-Hastings proposals from ``x0``.

    Acceptance uniforms come from the ``path`` stream and proposals from the
    ``proposal`` stream of ``seed``; no burn-in is applied and ``x0`` opens the
    first block.
    """
    N = int(N)
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    streams = ChainStreams(seed)
    x = target.as_state(x0).copy()
    if x.ndim != 1:
        raise ValueError("x0 must be a single state")
    log_pi = float(target.log_density(x))
    _check_support(log_pi, "initial state x0")

    log_u = np.log(streams.generator("path").random(N))
    prop_rng = streams.generator("proposal")
    symmetric = proposal.kind is ProposalKind.SYMMETRIC
    independence = proposal.kind is ProposalKind.INDEPENDENCE
    if independence:
        log_q_x = float(proposal.log_density(x, x))

    path = np.empty((N, x.shape[0]), dtype=x.dtype)
    accepted = np.zeros(N, dtype=bool)
    path[0] = x
    last_accepted = False
    for t in range(N):
        y = proposal.sample(x, prop_rng)
        log_pi_y = float(target.log_density(y))
        if log_pi_y == -math.inf:
            log_alpha = -math.inf
        elif symmetric:
            log_alpha = log_pi_y - log_pi
        elif independence:
            log_q_y = float(proposal.log_density(y, x))
            log_alpha = log_pi_y - log_pi + log_q_x - log_q_y
        else:
            log_alpha = (log_pi_y - log_pi + float(proposal.log_density(x, y))
                         - float(proposal.log_density(y, x)))
        if math.isnan(log_alpha):
            raise FloatingPointError(f"acceptance probability is NaN at step {t}")
        move = log_u[t] < min(log_alpha, 0.0)
        if move:
            x = y
            log_pi = log_pi_y
            if independence:
                log_q_x = log_q_y
        if t + 1 < N:
            path[t + 1] = x
            accepted[t + 1] = move
        else:
            last_accepted = bool(move)

    z, n, M, M_N = decompose_chain(path, accepted, trailing_complete=last_accepted)
    return ChainRecord(path=path, accepted=accepted, z=z, n=n, N=N, M=M, M_N=M_N,
                       seed=streams.root)
