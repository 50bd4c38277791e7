"""Exponential weights over monotone step functions, sampled by dynamic programming.

The implicit expert class holds every nondecreasing map from ``D`` value bins
to the bid grid ``{1/B, ..., B/B}`` that uses at most ``K`` distinct bid
levels. A map is a path through states (rank k, grid index j): the first
bin starts at rank 1, and each later bin either keeps the state or moves to
(k + 1, j') with j' > j. The weight of a path factorises over bins,
``prod_i exp(eta * R[i, j_i])``, so forward/backward sums give the total
weight of all maps passing through any (bin, bid) cell in O(D K B).

All passes run in log scale: every bin's slice is divided by its maximum and
the logarithm of the divisor is carried separately.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .core import AuctionRound, QNorm, Stream, Trajectory, reward, value_bin
from .experts import ExpertSet
from .hedge import RateSchedule, StepResult, sample_index

ENUMERATION_BUDGET = 100_000


# -- numba kernels (0-based bins, ranks and grid cells) -------------------------

@njit(cache=True)
def _forward(lw, K, stop):
    """Scaled forward sums for bins 0..stop-1.

    ``F[i, k, j] * exp(logs[i])`` is the total weight of prefixes over bins
    0..i that end in state (k, j), including bin i's own factor.
    """
    D, B = lw.shape
    F = np.zeros((max(stop, 1), K, B))
    logs = np.zeros(max(stop, 1))
    acc = 0.0
    for i in range(stop):
        c = lw[i].max()
        top = 0.0
        for k in range(K):
            pre = 0.0
            for j in range(B):
                if i == 0:
                    inc = 1.0 if k == 0 else 0.0
                else:
                    inc = F[i - 1, k, j] + pre
                    if k > 0:
                        pre += F[i - 1, k - 1, j]
                val = math.exp(lw[i, j] - c) * inc
                F[i, k, j] = val
                if val > top:
                    top = val
        F[i] /= top
        acc += c + math.log(top)
        logs[i] = acc
    return F, logs


@njit(cache=True)
def _backward(lw, K, start):
    """Scaled backward sums for bins start..D-1 (rows below ``start`` unused).

    ``G[i, k, j] * exp(logs[i])`` is the total weight of suffixes over bins
    i..D-1 given state (k, j) at bin i, including bin i's own factor.
    """
    D, B = lw.shape
    G = np.zeros((D, K, B))
    logs = np.zeros(D)
    acc = 0.0
    for i in range(D - 1, start - 1, -1):
        c = lw[i].max()
        top = 0.0
        for k in range(K):
            suf = 0.0
            for j in range(B - 1, -1, -1):
                if i == D - 1:
                    out = 1.0
                else:
                    out = G[i + 1, k, j] + suf
                    if k + 1 < K:
                        suf += G[i + 1, k + 1, j]
                val = math.exp(lw[i, j] - c) * out
                G[i, k, j] = val
                if val > top:
                    top = val
        G[i] /= top
        acc += c + math.log(top)
        logs[i] = acc
    return G, logs


@njit(cache=True)
def _cell_mass(lw, K, d, F, logF, G, logG):
    """Scaled mass of all maps through (d, j) for every j, and its log scale."""
    D, B = lw.shape
    c = lw[d].max()
    mass = np.zeros(B)
    for k in range(K):
        pre = 0.0
        suf_row = np.zeros(B)
        if d < D - 1 and k + 1 < K:
            s = 0.0
            for j in range(B - 1, -1, -1):
                suf_row[j] = s
                s += G[d + 1, k + 1, j]
        for j in range(B):
            if d == 0:
                inc = 1.0 if k == 0 else 0.0
            else:
                inc = F[d - 1, k, j] + pre
                if k > 0:
                    pre += F[d - 1, k - 1, j]
            if d == D - 1:
                out = 1.0
            else:
                out = G[d + 1, k, j] + suf_row[j]
            mass[j] += inc * math.exp(lw[d, j] - c) * out
    scale = c
    if d > 0:
        scale += logF[d - 1]
    if d < D - 1:
        scale += logG[d + 1]
    return mass, scale


# -- tables ------------------------------------------------------------------

@dataclass
class DpTables:
    """Cumulative rewards of every (bin, rank, grid bid) cell plus the hint experts.

    Rewards do not depend on the rank, but the full array is kept so that
    each cell of the recurrence has its own entry.
    """

    n_bins: int
    n_levels: int
    n_grid: int
    n_hints: int = 0
    reward: np.ndarray = field(init=False)
    rh: np.ndarray = field(init=False)
    t: int = 0

    def __post_init__(self):
        if self.n_bins < 1 or self.n_levels < 1 or self.n_grid < 1:
            raise ValueError("n_bins, n_levels and n_grid must all be >= 1")
        self.reward = np.zeros((self.n_bins, self.n_levels, self.n_grid))
        self.rh = np.zeros(self.n_hints)

    @property
    def prices(self) -> np.ndarray:
        return np.arange(1, self.n_grid + 1) / self.n_grid

    def log_weights(self, eta: float) -> np.ndarray:
        return eta * self.reward[:, 0, :]

    def hint_cell(self, bid: float) -> int:
        """1-based grid cell of a hint bid: min(ceil(b B), B), at least 1."""
        return min(max(math.ceil(bid * self.n_grid - 1e-9), 1), self.n_grid)


@dataclass
class CutWeights:
    """Scaled forward and backward sums; entry times exp(log scale) is the true sum."""

    sum_forward: np.ndarray
    log_forward: np.ndarray
    sum_backward: np.ndarray
    log_backward: np.ndarray


def dp_update_round(tables: DpTables, rnd: AuctionRound, hint_bids: Optional[np.ndarray] = None) -> DpTables:
    """Credit every grid bid at the current value bin with its (unclamped) reward.

    Grid bids above v that still win earn v - j/B < 0; the realised bid of a
    policy is clamped, but the bookkeeping follows the raw step function.
    """
    if not (0.0 <= rnd.v <= 1.0):
        raise ValueError(f"value {rnd.v} outside [0, 1]")
    i = value_bin(rnd.v, tables.n_bins) - 1
    p = tables.prices
    tables.reward[i] += np.where(p >= rnd.m, rnd.v - p, 0.0)
    if tables.n_hints:
        if hint_bids is None or len(hint_bids) != tables.n_hints:
            raise ValueError(f"need {tables.n_hints} hint bids")
        tables.rh += reward(np.asarray(hint_bids, dtype=float), rnd.v, rnd.m)
    tables.t += 1
    return tables


def cut_weights(tables: DpTables, eta: float) -> CutWeights:
    lw = tables.log_weights(eta)
    F, lf = _forward(lw, tables.n_levels, tables.n_bins)
    G, lg = _backward(lw, tables.n_levels, 0)
    return CutWeights(F, lf, G, lg)


def log_partition(tables: DpTables, eta: float, cut: int, weights: Optional[CutWeights] = None) -> float:
    """log of the total class weight, assembled around the 1-based bin ``cut``."""
    w = weights or cut_weights(tables, eta)
    mass, scale = _cell_mass(tables.log_weights(eta), tables.n_levels, cut - 1,
                             w.sum_forward, w.log_forward, w.sum_backward, w.log_backward)
    return float(math.log(mass.sum()) + scale)


def _split_distribution(tables: DpTables, d: int, eta: float, hint_bids=None):
    """(grid probabilities of the class, probabilities of each hint expert)."""
    if not 1 <= d <= tables.n_bins:
        raise ValueError(f"value bin {d} outside 1..{tables.n_bins}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    lw = tables.log_weights(eta)
    K = tables.n_levels
    F, lf = _forward(lw, K, d - 1)
    G, lg = _backward(lw, K, d)
    mass, scale = _cell_mass(lw, K, d - 1, F, lf, G, lg)
    total = mass.sum()
    if not (total > 0 and math.isfinite(total)):
        raise FloatingPointError("degenerate class weight")
    log_class = math.log(total) + scale
    log_hint = eta * tables.rh
    top = max(log_class, float(log_hint.max(initial=-math.inf)))
    class_share = math.exp(log_class - top)
    hint_w = np.exp(log_hint - top)
    norm = class_share + hint_w.sum()
    return mass / total * (class_share / norm), hint_w / norm


def dp_action_distribution(tables: DpTables, d: int, eta: float,
                           hint_bids: Optional[Sequence[float]] = None) -> np.ndarray:
    """Probability of each grid bid at value bin ``d``, hint mass folded into its cell."""
    p, ph = _split_distribution(tables, d, eta, hint_bids)
    p = p.copy()
    if tables.n_hints:
        if hint_bids is None:
            raise ValueError("hint bids are needed to place the hint mass")
        for b, w in zip(hint_bids, ph):
            p[tables.hint_cell(b) - 1] += w
    return p


# -- brute-force oracle -------------------------------------------------------

def step_class_size(n_bins: int, n_levels: int, n_grid: int) -> int:
    """Number of nondecreasing bin-to-grid maps with at most ``n_levels`` levels."""
    return sum(math.comb(n_grid, k) * math.comb(n_bins - 1, k - 1)
               for k in range(1, min(n_levels, n_bins, n_grid) + 1))


def enumerate_step_class(n_bins: int, n_levels: int, n_grid: int) -> np.ndarray:
    """All maps as an array of 1-based grid indices, shape (size, n_bins)."""
    size = step_class_size(n_bins, n_levels, n_grid)
    if size > ENUMERATION_BUDGET:
        raise ValueError(f"class of {size} experts exceeds the enumeration budget {ENUMERATION_BUDGET}")
    rows = [c for c in itertools.combinations_with_replacement(range(1, n_grid + 1), n_bins)
            if len(set(c)) <= n_levels]
    return np.array(rows, dtype=np.int64).reshape(-1, n_bins)


def brute_force_distribution(n_bins: int, n_levels: int, n_grid: int, history: Sequence[AuctionRound],
                             eta: float, d: int, hint_experts: Optional[ExpertSet] = None,
                             current: Optional[AuctionRound] = None) -> np.ndarray:
    """Exact softmax over the enumerated class (and hint experts), projected on grid bids at bin ``d``."""
    maps = enumerate_step_class(n_bins, n_levels, n_grid)
    prices = maps / n_grid
    cum = np.zeros(len(maps))
    n_h = len(hint_experts) if hint_experts is not None else 0
    cum_h = np.zeros(n_h)
    for rnd in history:
        b = prices[:, value_bin(rnd.v, n_bins) - 1]
        cum += np.where(b >= rnd.m, rnd.v - b, 0.0)
        if n_h:
            cum_h += reward(hint_experts.bids(rnd.v, rnd.h, rnd.sigma), rnd.v, rnd.m)
    scores = eta * np.concatenate([cum, cum_h])
    w = np.exp(scores - scores.max())
    w /= w.sum()
    out = np.zeros(n_grid)
    np.add.at(out, maps[:, d - 1] - 1, w[:len(maps)])
    if n_h:
        if current is None:
            raise ValueError("the current round is needed to place hint mass")
        tab = DpTables(n_bins, n_levels, n_grid)
        for b, wh in zip(hint_experts.bids(current.v, current.h, current.sigma), w[len(maps):]):
            out[tab.hint_cell(b) - 1] += wh
    return out


# -- policy -------------------------------------------------------------------

def dp_rate_schedule(n_levels: int, n_grid: int, kind: str = "interval") -> RateSchedule:
    """Rate with log term K log B, the log of the class-size bound B^K."""
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    return RateSchedule(kind, log_size=n_levels * math.log(n_grid))


class SparseDpPolicy:
    """Samples bids from the step-function class (plus optional hint experts) each round.

    With ``hint_experts=None`` and an ``anytime`` schedule the policy never
    reads h or sigma.
    """

    def __init__(self, n_bins: int = 100, n_levels: int = 2, n_grid: int = 100, q=math.inf,
                 hint_experts: Optional[ExpertSet] = None, schedule: Optional[RateSchedule] = None,
                 seed=0, sigma_visible: bool = True):
        self.q = QNorm.parse(q)
        self.hint_experts = hint_experts
        n_h = len(hint_experts) if hint_experts is not None else 0
        self.tables = DpTables(n_bins, n_levels, n_grid, n_h)
        self.schedule = schedule or dp_rate_schedule(n_levels, n_grid)
        if self.schedule.kind == "interval" and not sigma_visible:
            raise ValueError("interval schedule needs visible sigma")
        self.sigma_visible = sigma_visible
        self.rng = np.random.default_rng(seed)
        self.sigma_power_sum = 0.0
        self.t = 0
        self.eta = self.schedule.cap

    def hint_bids(self, rnd: AuctionRound) -> Optional[np.ndarray]:
        if self.hint_experts is None:
            return None
        sigma = rnd.sigma if self.sigma_visible else math.nan
        return self.hint_experts.bids(rnd.v, rnd.h, sigma)

    def advance_rate(self, rnd: AuctionRound) -> float:
        self.t += 1
        if self.schedule.kind == "interval":
            self.sigma_power_sum += self.q.sigma_power(rnd.sigma)
        self.eta = self.schedule.rate(2, self.t, self.sigma_power_sum)
        return self.eta

    def propose(self, rnd: AuctionRound):
        """Advance the rate, then return (grid probs, hint probs, hint bids) for this round."""
        self.advance_rate(rnd)
        hb = self.hint_bids(rnd)
        d = value_bin(rnd.v, self.tables.n_bins)
        p, ph = _split_distribution(self.tables, d, self.eta, hb)
        return p, ph, hb

    def candidate_bids(self, rnd: AuctionRound, hb) -> np.ndarray:
        grid = np.minimum(self.tables.prices, rnd.v)
        return grid if hb is None else np.concatenate([grid, hb])

    def step(self, rnd: AuctionRound) -> StepResult:
        p, ph, hb = self.propose(rnd)
        probs = np.concatenate([p, ph])
        bids = self.candidate_bids(rnd, hb)
        a = sample_index(probs, self.rng)
        r = reward(bids, rnd.v, rnd.m)
        dp_update_round(self.tables, rnd, hb)
        return StepResult(float(bids[a]), float(r[a]), float(probs @ r), a)

    def run(self, stream: Stream) -> Trajectory:
        if len(stream) == 0:
            raise ValueError("empty stream")
        n = len(stream)
        bids, rewards, expected, etas = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
        for i, rnd in enumerate(stream):
            res = self.step(rnd)
            bids[i], rewards[i], expected[i], etas[i] = res.bid, res.reward, res.expected_reward, self.eta
        return Trajectory(bids, rewards, expected, info={"eta": etas})


def dp_step(policy: SparseDpPolicy, rnd: AuctionRound):
    """One round of the DP policy: ``(bid, realised reward, policy)``."""
    res = policy.step(rnd)
    return res.bid, res.reward, policy
