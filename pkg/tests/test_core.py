import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbmh import models
from rbmh.core import (
    OffSupportError, ProposalKernel, ProposalKind, TargetModel, acceptance_prob,
    decompose_chain, expand_blocks, log_acceptance, mh_step, run_chain,
)


def test_gaussian_acceptance_value():
    t, q = models.make_gaussian_rw(1.0)
    assert acceptance_prob(0.0, 1.0, t, q) == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert acceptance_prob(1.0, 0.0, t, q) == 1.0


def test_exp_independence_acceptance_value():
    t, q, _ = models.make_exp_independence(1.0, 0.5)
    # pi(y) q(x) / (pi(x) q(y)) = exp(-(1 - 0.5)(y - x))
    assert acceptance_prob(1.0, 2.0, t, q) == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_off_support_proposal_is_rejected():
    t, q, _ = models.make_exp_independence(1.0, 0.5)
    assert acceptance_prob(1.0, -0.5, t, q) == 0.0
    with pytest.raises(OffSupportError):
        acceptance_prob(-1.0, 1.0, t, q)


def test_nan_density_raises():
    t = TargetModel(lambda x: np.where(np.asarray(x)[..., 0] > 5, np.nan, 0.0), 1)
    _, q = models.make_gaussian_rw(1.0)
    with pytest.raises(FloatingPointError):
        log_acceptance(np.array([0.0]), np.array([6.0]), t, q)


def test_general_kernel_matches_independence_kernel():
    t, q, _ = models.make_exp_independence(1.0, 0.3)
    g = ProposalKernel(q.sample, q.log_density, ProposalKind.GENERAL)
    xs = np.linspace(0.1, 4, 7)[:, None]
    ys = np.linspace(0.0, 6, 7)[::-1, None]
    np.testing.assert_allclose(log_acceptance(xs, ys, t, q), log_acceptance(xs, ys, t, g), atol=1e-14)


def test_mh_step_strict_acceptance():
    t, q = models.make_gaussian_rw(1.0)
    rng = np.random.default_rng(0)
    s = mh_step(0.0, t, q, rng, u=0.0)
    a = acceptance_prob(0.0, s.proposed, t, q)
    assert s.accepted == (0.0 < a)
    # u equal to alpha is a rejection
    rng = np.random.default_rng(0)
    y = t.as_state(q.sample(t.as_state(0.0), rng))
    a = acceptance_prob(0.0, y, t, q)
    s = mh_step(0.0, t, q, np.random.default_rng(0), u=a)
    assert not s.accepted and np.array_equal(s.next, [0.0])


def test_run_chain_shapes_and_bookkeeping():
    t, q = models.make_gaussian_rw(2.0)
    ch = run_chain(t, q, 0.3, 200, 1)
    assert ch.path.shape == (200, 1)
    assert ch.path[0, 0] == 0.3
    assert ch.n.sum() == 200
    assert ch.M == ch.z.shape[0]
    assert ch.M_N in (ch.M - 1, ch.M)
    assert ch.acceptance_rate == ch.M_N / 200
    # accepted moves along the path plus the look-ahead give M_N
    assert ch.accepted[1:].sum() == ch.M - 1
    np.testing.assert_array_equal(expand_blocks(ch.z, ch.n), ch.path)


def test_run_chain_deterministic_and_seed_sensitive():
    t, q = models.make_gaussian_rw(2.0)
    a = run_chain(t, q, 0.0, 300, 42)
    b = run_chain(t, q, 0.0, 300, 42)
    c = run_chain(t, q, 0.0, 300, 43)
    assert np.array_equal(a.path, b.path)
    assert not np.array_equal(a.path, c.path)


def test_run_chain_rejects_bad_input():
    t, q, _ = models.make_exp_independence(1.0, 0.5)
    with pytest.raises(OffSupportError):
        run_chain(t, q, -1.0, 10, 0)
    with pytest.raises(ValueError):
        run_chain(t, q, 1.0, 0, 0)


def test_single_step_chain():
    t, q = models.make_gaussian_rw(1.0)
    ch = run_chain(t, q, 0.0, 1, 3)
    assert ch.M == 1 and ch.n.tolist() == [1]
    assert ch.M_N in (0, 1)


def test_geometric_blocks_use_acceptance_flags():
    # accepted 0 -> 0 moves open a new block even though the state repeats
    t, q, _ = models.make_geometric_rw(0.5)
    ch = run_chain(t, q, 0, 2000, 9)
    by_eq = decompose_chain(ch.path)
    assert ch.M >= by_eq.M
    repeats = np.flatnonzero(ch.accepted[1:] & np.all(ch.path[1:] == ch.path[:-1], axis=1))
    assert repeats.size > 0
    assert ch.M - by_eq.M == repeats.size


def test_decompose_chain_without_flags():
    path = np.array([1.0, 1.0, 2.0, 2.0, 2.0, 0.5])
    b = decompose_chain(path)
    assert b.z.tolist() == [1.0, 2.0, 0.5]
    assert b.n.tolist() == [2, 3, 1]
    assert (b.M, b.M_N) == (3, 2)
    assert decompose_chain(path, trailing_complete=True).M_N == 3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=60))
def test_decompose_expand_round_trip(seq):
    path = np.asarray(seq, dtype=float)[:, None]
    b = decompose_chain(path)
    np.testing.assert_array_equal(expand_blocks(b.z, b.n), path)
    assert b.n.sum() == len(seq)
    assert np.all(b.n >= 1)
    if b.M > 1:
        assert np.all(b.z[1:, 0] != b.z[:-1, 0])


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.2, 5.0))
def test_detailed_balance_gaussian(x, y, tau):
    t, q = models.make_gaussian_rw(tau)
    xs, ys = np.array([x]), np.array([y])
    lhs = t.log_density(xs) + q.log_density(ys, xs) + log_acceptance(xs, ys, t, q)
    rhs = t.log_density(ys) + q.log_density(xs, ys) + log_acceptance(ys, xs, t, q)
    assert abs(math.exp(lhs) - math.exp(rhs)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 8), st.floats(0, 8), st.floats(0.05, 0.95))
def test_detailed_balance_exp_independence(x, y, mu):
    t, q, _ = models.make_exp_independence(1.0, mu)
    xs, ys = np.array([x]), np.array([y])
    lhs = t.log_density(xs) + q.log_density(ys, xs) + log_acceptance(xs, ys, t, q)
    rhs = t.log_density(ys) + q.log_density(xs, ys) + log_acceptance(ys, xs, t, q)
    assert abs(math.exp(lhs) - math.exp(rhs)) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3.0), st.floats(0.5, 3.0))
def test_acceptance_shift_scale_equivariance(x, y, shift, scale):
    # N(0,1) with RW(tau) at (x, y) equals N(shift, scale^2) with RW(scale tau) at the mapped points
    t, q = models.make_gaussian_rw(1.0)
    t2 = TargetModel(lambda s: -0.5 * np.sum(((s - shift) / scale) ** 2, axis=-1), 1)
    _, q2 = models.make_gaussian_rw(scale)
    a = acceptance_prob(x, y, t, q)
    b = acceptance_prob(shift + scale * x, shift + scale * y, t2, q2)
    assert a == pytest.approx(b, abs=1e-12)


def test_gaussian_chain_is_stationary():
    t, q = models.make_gaussian_rw(2.5)
    ch = run_chain(t, q, 0.0, 60_000, 5)
    x = ch.path[:, 0]
    assert abs(x.mean()) < 0.05
    assert abs(x.var() - 1.0) < 0.06
