"""Two-layer learner adaptive to unknown hint error, and the support-count doubling wrapper.

The top layer runs exponential weights over three nodes:

* ``f``: the step-function class together with the hint expert;
* ``g``: the same class without any hint (a hint-free stand-in for a
  generic O(sqrt(T)) full-information bidder);
* ``h``: always bid ``h + sigma^(q/(q+1))``.

Every node proposes a bid each round and, once m is revealed, every node's
reward is credited (full information).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .core import AuctionRound, QNorm, Stream, Trajectory, clamp_bid, reward
from .experts import (ExpertSet, enumerate_sparse_experts, make_interval_hint_expert,
                      make_single_hint_experts)
from .hedge import ETA_CAP, Hedge, RateSchedule, StepResult, capped_rate, sample_distribution, sample_index
from .sparse_dp import SparseDpPolicy

NODES = ("f", "g", "h")
K_START = 8


def top_layer_rate(sigma_power_sum: float) -> float:
    """min{1/4, sqrt(log 3 / (floor(S) + 1))}; finite at S = 0."""
    return capped_rate(math.log(3), math.floor(sigma_power_sum) + 1.0)


@dataclass
class MetaConfig:
    """Parameters of the two-layer learner.

    ``hint_mode="single"`` hides sigma: the f-node then uses hint-offset
    experts ``h + i/n_hint_offsets`` and the h-node bids ``h``. When
    ``total_error`` (L) and ``horizon`` (T) are given in that mode, both layers
    use fixed rates built from sqrt(T L); otherwise they fall back to 1/sqrt(t).
    """

    n_bins: int = 20
    n_grid: int = 20
    n_levels: int = 2
    q: object = math.inf
    backend: str = "dp"
    supports: Optional[Sequence[float]] = None
    hint_mode: str = "interval"
    total_error: Optional[float] = None
    horizon: Optional[int] = None
    n_hint_offsets: int = 20

    def __post_init__(self):
        self.q = QNorm.parse(self.q)
        if self.backend not in ("dp", "enumerated"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "enumerated" and self.supports is None:
            raise ValueError("the enumerated backend needs explicit supports")
        if self.hint_mode not in ("interval", "single"):
            raise ValueError(f"unknown hint mode {self.hint_mode!r}")
        if self.n_grid < 2 or self.n_bins < 1 or self.n_levels < 1:
            raise ValueError("need n_grid >= 2, n_bins >= 1, n_levels >= 1")

    @property
    def known_error(self) -> bool:
        return self.total_error is not None and self.horizon is not None


class _HintNode:
    def __init__(self, q: QNorm, single: bool):
        self.q, self.single = q, single

    def step(self, rnd: AuctionRound) -> StepResult:
        raw = rnd.h if self.single else rnd.h + self.q.sigma_power(rnd.sigma)
        b = clamp_bid(raw, rnd.v)
        r = reward(b, rnd.v, rnd.m)
        return StepResult(b, r, r, 0)


class _EnumeratedNode:
    """Hedge over the explicitly enumerated step functions on known supports."""

    def __init__(self, cfg: MetaConfig, hints: Optional[ExpertSet], schedule: RateSchedule, seed, sigma_visible):
        experts = enumerate_sparse_experts(cfg.supports, cfg.n_bins).as_expert_set()
        if hints is not None:
            experts = experts + hints
        self.hedge = Hedge(experts, cfg.q, schedule, seed, sigma_visible)

    def step(self, rnd: AuctionRound) -> StepResult:
        return self.hedge.step(rnd)

    @property
    def eta(self) -> float:
        return self.hedge.state.eta


def _lower_schedule(cfg: MetaConfig, with_hint: bool) -> RateSchedule:
    log_size = cfg.n_levels * math.log(cfg.n_grid)
    if cfg.backend == "enumerated":
        log_size = None
    if not with_hint:
        return RateSchedule("anytime", log_size=log_size)
    if cfg.hint_mode == "interval":
        return RateSchedule("interval", log_size=log_size)
    if cfg.known_error:
        ls = log_size if log_size is not None else cfg.n_levels * math.log(cfg.n_grid)
        return RateSchedule("fixed", eta=capped_rate(ls, math.sqrt(cfg.horizon * max(cfg.total_error, 1e-12))))
    return RateSchedule("anytime", log_size=log_size)


def _make_node(cfg: MetaConfig, with_hint: bool, seed) -> object:
    sigma_visible = cfg.hint_mode == "interval"
    hints = None
    if with_hint:
        hints = make_interval_hint_expert(cfg.q) if sigma_visible else make_single_hint_experts(cfg.n_hint_offsets)
    schedule = _lower_schedule(cfg, with_hint)
    if cfg.backend == "enumerated":
        return _EnumeratedNode(cfg, hints, schedule, seed, sigma_visible)
    return SparseDpPolicy(cfg.n_bins, cfg.n_levels, cfg.n_grid, cfg.q, hints, schedule, seed,
                          sigma_visible=sigma_visible)


@dataclass
class MetaState:
    cum_rewards: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sigma_power_sum: float = 0.0
    t: int = 0
    eta: float = ETA_CAP
    probs: np.ndarray = field(default_factory=lambda: np.full(3, 1.0 / 3.0))
    node_expected: np.ndarray = field(default_factory=lambda: np.zeros(3))


class MetaLearner:
    def __init__(self, cfg: MetaConfig, seed=0):
        self.cfg = cfg
        ss = np.random.SeedSequence(seed)
        s_top, s_f, s_g = ss.spawn(3)
        self.rng = np.random.default_rng(s_top)
        self.f_node = _make_node(cfg, True, s_f)
        self.g_node = _make_node(cfg, False, s_g)
        self.h_node = _HintNode(cfg.q, cfg.hint_mode == "single")
        self.state = MetaState()

    def top_rate(self) -> float:
        cfg, st = self.cfg, self.state
        if cfg.hint_mode == "interval":
            return top_layer_rate(st.sigma_power_sum)
        if cfg.known_error:
            return capped_rate(math.log(cfg.horizon + 2), math.sqrt(cfg.horizon * max(cfg.total_error, 1e-12)))
        return capped_rate(math.log(3), float(st.t))

    def step(self, rnd: AuctionRound) -> StepResult:
        st = self.state
        st.t += 1
        # the top layer's rate uses the sigma-power sum of past rounds only
        st.eta = self.top_rate()
        p = sample_distribution(st.cum_rewards, st.eta)
        st.probs = p
        results = [self.f_node.step(rnd), self.g_node.step(rnd), self.h_node.step(rnd)]
        i = sample_index(p, self.rng)
        realized = np.array([r.reward for r in results])
        expected = np.array([r.expected_reward for r in results])
        st.cum_rewards += realized
        st.node_expected += expected
        if self.cfg.hint_mode == "interval":
            st.sigma_power_sum += self.cfg.q.sigma_power(rnd.sigma)
        return StepResult(results[i].bid, results[i].reward, float(p @ expected), i)

    def run(self, stream: Stream) -> Trajectory:
        if len(stream) == 0:
            raise ValueError("empty stream")
        n = len(stream)
        bids, rewards, expected = np.empty(n), np.empty(n), np.empty(n)
        nodes, etas = np.empty(n, dtype=np.int64), np.empty(n)
        for k, rnd in enumerate(stream):
            res = self.step(rnd)
            bids[k], rewards[k], expected[k], nodes[k], etas[k] = (
                res.bid, res.reward, res.expected_reward, res.expert, self.state.eta)
        return Trajectory(bids, rewards, expected,
                          info={"node": nodes, "eta_top": etas, "node_rewards": self.state.cum_rewards.copy(),
                                "node_expected_rewards": self.state.node_expected.copy()})


def meta_step(learner: MetaLearner, rnd: AuctionRound):
    """One round of the meta learner: ``(bid, realised reward, learner)``."""
    res = learner.step(rnd)
    return res.bid, res.reward, learner


# -- doubling over the support count -------------------------------------------

@dataclass
class DoublingState:
    cap: int = K_START
    observed: set = field(default_factory=set)
    caps: List[int] = field(default_factory=lambda: [K_START])
    boundaries: List[int] = field(default_factory=lambda: [0])

    def observe(self, cell: int) -> bool:
        """Record a grid cell; return True when the cap must double."""
        self.observed.add(cell)
        return len(self.observed) > self.cap


def grid_cell(m: float, n_grid: int) -> int:
    """Smallest grid index j with j / n_grid >= m (0 when m = 0)."""
    return min(max(math.ceil(m * n_grid - 1e-9), 0), n_grid)


def doubling_k_run(stream: Stream, cfg: MetaConfig, seed=0, k_start: int = K_START) -> Trajectory:
    """Run the meta learner with a support cap that doubles (and restarts) when exceeded.

    The cap starts at ``k_start``; when the number of distinct grid-snapped
    m values seen so far exceeds it, the cap doubles and a fresh learner
    takes over from the next round.
    """
    if len(stream) == 0:
        raise ValueError("empty stream")
    ds = DoublingState(k_start, set(), [k_start], [0])
    parts = []
    start, epoch = 0, 0
    learner = MetaLearner(_with_levels(cfg, ds.cap), seed=(seed, epoch))
    n = len(stream)
    bids, rewards, expected = [], [], []
    for k, rnd in enumerate(stream):
        res = learner.step(rnd)
        bids.append(res.bid)
        rewards.append(res.reward)
        expected.append(res.expected_reward)
        if ds.observe(grid_cell(rnd.m, cfg.n_grid)):
            while len(ds.observed) > ds.cap:
                ds.cap *= 2
            ds.caps.append(ds.cap)
            if k + 1 == n:
                break
            ds.boundaries.append(k + 1)
            parts.append(Trajectory(bids, rewards, expected))
            bids, rewards, expected = [], [], []
            epoch += 1
            learner = MetaLearner(_with_levels(cfg, ds.cap), seed=(seed, epoch))
    parts.append(Trajectory(bids, rewards, expected))
    return Trajectory.concatenate(parts, info={"caps": list(ds.caps), "boundaries": list(ds.boundaries),
                                               "distinct_supports": len(ds.observed)})


def _with_levels(cfg: MetaConfig, k: int) -> MetaConfig:
    return replace(cfg, n_levels=k)
