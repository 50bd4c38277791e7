import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hintbid.core import AuctionRound, QNorm, Stream
from hintbid.experts import ExpertSet, ConstantBids, make_alg1_experts
from hintbid.hedge import (Hedge, HedgeState, RateSchedule, hedge_step, learning_rate, run_policy,
                           sample_distribution, single_hint_rate)


def test_learning_rate_examples():
    assert learning_rate(101, 20) == 0.25
    assert learning_rate(101, 100) == pytest.approx(math.sqrt(math.log(101) / 100), abs=1e-12)
    assert round(learning_rate(101, 100), 4) == 0.2148
    assert learning_rate(101, 0) == 0.25
    with pytest.raises(ValueError):
        learning_rate(1, 5)


def test_softmax_examples():
    assert np.allclose(sample_distribution(np.array([3.0, 3.0, 3.0]), 0.7), 1 / 3)
    p = sample_distribution(np.array([0.0, 1.0]), 0.25)
    assert p == pytest.approx([1 / (1 + math.exp(0.25)), 1 / (1 + math.exp(-0.25))])
    assert np.array_equal(p, sample_distribution(np.array([10.0, 11.0]), 0.25))
    with pytest.raises(ValueError):
        sample_distribution(np.array([]), 0.1)


@settings(max_examples=200)
@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=30), st.integers(-10**6, 10**6),
       st.sampled_from([0.25, 0.125, 0.5, 1.0]))
def test_softmax_shift_invariance_bit_exact(rewards, shift, eta):
    r = np.array(rewards, dtype=float) / 8.0
    assert np.array_equal(sample_distribution(r, eta), sample_distribution(r + shift, eta))


@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=50), st.floats(1e-4, 0.25))
def test_softmax_normalised(rewards, eta):
    p = sample_distribution(np.array(rewards), eta)
    assert np.all(p > 0) and abs(p.sum() - 1) < 1e-12


def test_state_size_mismatch():
    st_ = HedgeState.fresh(3)
    with pytest.raises(ValueError):
        hedge_step(st_, make_alg1_experts(4, 1), AuctionRound(1, 1, 0.5, 0.1, 0.4))


def test_single_expert_always_chosen():
    ex = ExpertSet([ConstantBids([0.6])])
    h = Hedge(ex)
    res = h.step(AuctionRound(1, 1.0, 0.5, 0.0, 0.5))
    assert res.bid == 0.6 and res.reward == pytest.approx(0.4)
    assert h.state.cum_rewards[0] == pytest.approx(0.4)


def test_two_equal_experts_sampled_evenly():
    ex = ExpertSet([ConstantBids([0.4, 0.6])])
    rng = np.random.default_rng(0)
    from hintbid.hedge import sample_index
    p = sample_distribution(np.zeros(2), 0.25)
    picks = [sample_index(p, rng) for _ in range(10_000)]
    assert abs(np.mean(picks) - 0.5) < 0.02


def test_perfect_hint_expert_wins():
    rng = np.random.default_rng(1)
    h = rng.uniform(0.1, 0.8, 1000)
    s = Stream(np.ones(1000), h, h, np.zeros(1000))
    tr = run_policy(make_alg1_experts(50, 1), s, QNorm(1), seed=0)
    er = tr.info["expert_rewards"]
    assert er.argmax() == len(er) - 1


def test_constant_stream_reward_and_determinism():
    T = 2000
    s = Stream(np.ones(T), np.full(T, 0.5), np.full(T, 0.5), np.zeros(T))
    a = run_policy(make_alg1_experts(100, 1), s, QNorm(1), seed=3)
    b = run_policy(make_alg1_experts(100, 1), s, QNorm(1), seed=3)
    assert a.cum_reward >= 0.5 * T - 50
    assert np.array_equal(a.bids, b.bids) and np.array_equal(a.rewards, b.rewards)


def test_eta_nonincreasing_and_empty_stream():
    rng = np.random.default_rng(2)
    T = 300
    s = Stream(np.ones(T), rng.random(T) * 0.5, rng.random(T) * 0.5, rng.random(T) * 0.2)
    tr = run_policy(make_alg1_experts(20, 2), s, QNorm(2), seed=0)
    assert np.all(np.diff(tr.info["eta"]) <= 0)
    with pytest.raises(ValueError):
        run_policy(make_alg1_experts(20, 2), s.slice(0, 0), QNorm(2))


def test_hidden_sigma_guards():
    T = 5
    s = Stream(np.ones(T), np.full(T, 0.5), np.full(T, 0.5), np.zeros(T), sigma_hidden=True)
    with pytest.raises(ValueError):
        run_policy(make_alg1_experts(4, 1), s)
    with pytest.raises(ValueError):
        Hedge(ExpertSet([ConstantBids([0.5, 0.6])]), schedule=RateSchedule("interval"), sigma_visible=False).step(s[0])


def test_schedules():
    assert RateSchedule("anytime").rate(101, 100, 0.0) == pytest.approx(math.sqrt(math.log(101) / 100))
    assert RateSchedule("fixed", eta=0.1).rate(5, 1, 0) == 0.1
    assert single_hint_rate(10**4, 16) == pytest.approx(math.sqrt(math.log(10**4) / math.sqrt(16 * 10**4)))
    with pytest.raises(ValueError):
        RateSchedule("bogus")
