"""Exponential weights over a finite expert set with hint-driven learning rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import AuctionRound, QNorm, Stream, Trajectory, reward
from .experts import ExpertSet

ETA_CAP = 0.25
_TINY = np.finfo(float).tiny
_FLUSH_BELOW = 1e-300


def capped_rate(log_size: float, denom: float, cap: float = ETA_CAP) -> float:
    """min(cap, sqrt(log_size / denom)), with the cap returned when denom is 0."""
    if denom <= 0.0:
        return cap
    return min(cap, math.sqrt(log_size / denom))


def learning_rate(n_experts: int, sigma_power_sum: float) -> float:
    """min(1/4, sqrt(log K / S)); 1/4 when S = 0."""
    if n_experts < 2:
        raise ValueError("learning_rate needs at least two experts (log K > 0)")
    if sigma_power_sum < 0:
        raise ValueError("sigma_power_sum must be nonnegative")
    return capped_rate(math.log(n_experts), sigma_power_sum)


def sample_distribution(cum_rewards: np.ndarray, eta: float) -> np.ndarray:
    """Softmax of ``eta * cum_rewards``.

    The maximum is subtracted before scaling, so adding a constant to every
    entry leaves the result unchanged bit for bit whenever that addition is
    itself exact.
    """
    r = np.asarray(cum_rewards, dtype=float)
    if r.size == 0:
        raise ValueError("empty expert set")
    if not eta > 0:
        raise ValueError("eta must be positive")
    w = np.exp(eta * (r - r.max()))
    p = w / w.sum()
    # the largest weight is exactly 1, so flushing cannot change the argmax
    p[p < _FLUSH_BELOW] = _TINY
    return p


def sample_index(p: np.ndarray, rng: np.random.Generator) -> int:
    c = np.cumsum(p)
    i = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(i, len(p) - 1)


def single_hint_rate(horizon: int, total_error: float) -> float:
    """Fixed rate min{1/4, sqrt(log T / sqrt(T L))} used when L is known."""
    return capped_rate(math.log(horizon), math.sqrt(horizon * max(total_error, 1e-12)))


@dataclass(frozen=True)
class RateSchedule:
    """How the learning rate evolves.

    ``interval``: sqrt(log K / S_t) with S_t the running sigma-power sum;
    ``anytime``: sqrt(log K / t); ``fixed``: a constant ``eta``.
    ``log_size`` overrides log K (e.g. for implicitly represented classes).
    """

    kind: str = "interval"
    eta: Optional[float] = None
    log_size: Optional[float] = None
    cap: float = ETA_CAP

    def __post_init__(self):
        if self.kind not in ("interval", "anytime", "fixed"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.kind == "fixed" and not (self.eta and self.eta > 0):
            raise ValueError("fixed schedule needs a positive eta")

    def rate(self, n_experts: int, t: int, sigma_power_sum: float) -> float:
        if self.kind == "fixed":
            return self.eta
        log_size = self.log_size if self.log_size is not None else math.log(max(n_experts, 2))
        denom = sigma_power_sum if self.kind == "interval" else float(t)
        return capped_rate(log_size, denom, self.cap)


@dataclass
class HedgeState:
    cum_rewards: np.ndarray
    q: QNorm = field(default_factory=QNorm)
    sigma_power_sum: float = 0.0
    t: int = 0
    eta: float = ETA_CAP
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    @classmethod
    def fresh(cls, n_experts: int, q: QNorm = QNorm(), seed=0) -> "HedgeState":
        return cls(np.zeros(n_experts), QNorm.parse(q), rng=np.random.default_rng(seed))


@dataclass
class StepResult:
    bid: float
    reward: float
    expected_reward: float
    expert: int


def hedge_step(state: HedgeState, experts: ExpertSet, rnd: AuctionRound,
               schedule: RateSchedule = RateSchedule(), optimism: Optional[np.ndarray] = None,
               sigma_visible: bool = True):
    """Play one round; returns ``(bid, realized reward, state)``.

    The state is updated in place (and returned for chaining). ``optimism``
    is an optional per-expert estimate of this round's reward added inside
    the softmax only.
    """
    res = _step(state, experts, rnd, schedule, optimism, sigma_visible)
    return res.bid, res.reward, state


def _step(state: HedgeState, experts: ExpertSet, rnd: AuctionRound, schedule: RateSchedule,
          optimism: Optional[np.ndarray], sigma_visible: bool) -> StepResult:
    n = len(experts)
    if state.cum_rewards.shape != (n,):
        raise ValueError(f"state tracks {state.cum_rewards.size} experts, expert set has {n}")
    sigma = rnd.sigma if sigma_visible else math.nan
    state.t += 1
    if schedule.kind == "interval":
        if not sigma_visible:
            raise ValueError("interval schedule needs visible sigma")
        state.sigma_power_sum += state.q.sigma_power(rnd.sigma)
    state.eta = schedule.rate(n, state.t, state.sigma_power_sum)
    bids = experts.bids(rnd.v, rnd.h, sigma)
    scores = state.cum_rewards if optimism is None else state.cum_rewards + optimism
    p = sample_distribution(scores, state.eta) if n > 1 else np.ones(1)
    a = sample_index(p, state.rng) if n > 1 else 0
    # m_t is revealed only from here on
    r = reward(bids, rnd.v, rnd.m)
    state.cum_rewards += r
    return StepResult(float(bids[a]), float(r[a]), float(p @ r), a)


class Hedge:
    """Stateful wrapper: an expert set, its schedule and a ``HedgeState``."""

    def __init__(self, experts: ExpertSet, q: QNorm = QNorm(), schedule: RateSchedule = RateSchedule(),
                 seed=0, sigma_visible: bool = True):
        if not sigma_visible and any(b.kind == "hint_sigma" for b in experts.blocks):
            raise ValueError("sigma-based hint experts need visible sigma")
        self.experts = experts
        self.schedule = schedule
        self.sigma_visible = sigma_visible
        self.state = HedgeState.fresh(len(experts), q, seed)

    def step(self, rnd: AuctionRound, optimism: Optional[np.ndarray] = None) -> StepResult:
        return _step(self.state, self.experts, rnd, self.schedule, optimism, self.sigma_visible)

    def distribution(self, optimism: Optional[np.ndarray] = None) -> np.ndarray:
        s = self.state.cum_rewards if optimism is None else self.state.cum_rewards + optimism
        return sample_distribution(s, self.state.eta)


def default_schedule(stream: Stream) -> RateSchedule:
    return RateSchedule("anytime") if stream.sigma_hidden else RateSchedule("interval")


def run_policy(experts: ExpertSet, stream: Stream, q: QNorm = QNorm(), seed=0,
               schedule: Optional[RateSchedule] = None) -> Trajectory:
    """Run hedge over ``experts`` on every round of ``stream``; deterministic given ``seed``."""
    if len(stream) == 0:
        raise ValueError("empty stream")
    schedule = schedule or default_schedule(stream)
    learner = Hedge(experts, QNorm.parse(q), schedule, seed, sigma_visible=not stream.sigma_hidden)
    n = len(stream)
    bids, rewards, expected = np.empty(n), np.empty(n), np.empty(n)
    etas = np.empty(n)
    for i, rnd in enumerate(stream):
        res = learner.step(rnd)
        bids[i], rewards[i], expected[i] = res.bid, res.reward, res.expected_reward
        etas[i] = learner.state.eta
    return Trajectory(bids, rewards, expected,
                      info={"eta": etas, "expert_rewards": learner.state.cum_rewards.copy(),
                            "sigma_power_sum": learner.state.sigma_power_sum})
