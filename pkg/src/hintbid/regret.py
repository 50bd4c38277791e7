"""Hindsight-optimal comparators and regret reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import AuctionRound, Stream, Trajectory, value_bins

Rounds = Union[Stream, Sequence[AuctionRound]]


def _columns(rounds: Rounds):
    if isinstance(rounds, Stream):
        v, m = rounds.v, rounds.m
    else:
        v = np.array([r.v for r in rounds], dtype=float)
        m = np.array([r.m for r in rounds], dtype=float)
    if len(v) == 0:
        raise ValueError("no rounds")
    return v, m


@dataclass
class OracleResult:
    """Best comparator in hindsight.

    ``function`` is the comparator's parameter (a bid, or a bid per value
    bin); ``bids`` and ``rewards`` are its per-round bids and rewards.
    Unpacks as ``(function, total)``.
    """

    name: str
    function: Union[float, np.ndarray]
    total: float
    bids: np.ndarray
    rewards: np.ndarray
    discretization_error: float = 0.0
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.function
        yield self.total


def _rewards(b, v, m) -> np.ndarray:
    return np.where(b >= m, v - b, 0.0)


def _bin_totals(v: np.ndarray, m: np.ndarray, bins: np.ndarray, n_bins: int, bids: np.ndarray) -> np.ndarray:
    """agg[i, j] = sum over rounds in bin i+1 of reward(bids[j]; v, m).

    Uses sum_{m_t <= b} v_t - b * #{m_t <= b} per bin after sorting by m.
    """
    agg = np.zeros((n_bins, len(bids)))
    for i in range(n_bins):
        sel = bins == i + 1
        if not sel.any():
            continue
        order = np.argsort(m[sel], kind="stable")
        ms, vs = m[sel][order], v[sel][order]
        cv = np.concatenate([[0.0], np.cumsum(vs)])
        cnt = np.searchsorted(ms, bids, side="right")
        agg[i] = cv[cnt] - bids * cnt
    return agg


def best_constant_bid(rounds: Rounds, allow_varying_values: bool = False) -> OracleResult:
    """Best single bid in hindsight; the optimum sits at one of the observed m values."""
    v, m = _columns(rounds)
    if not allow_varying_values and np.any(v != v[0]):
        raise ValueError("values vary across rounds; pass allow_varying_values=True to use a constant comparator")
    cands = np.unique(m)
    totals = _bin_totals(v, m, np.ones(len(v), dtype=np.int64), 1, cands)[0]
    a = int(np.argmax(totals))  # first maximiser = smallest bid
    b = float(cands[a])
    r = _rewards(b, v, m)
    return OracleResult("constant", b, float(totals[a]), np.full(len(v), b), r)


def best_lipschitz_dp(rounds: Rounds, n_bins: int, n_grid: int) -> OracleResult:
    """Best monotone 1-Lipschitz grid function.

    Bids are j / n_grid (j = 0..n_grid), one per value bin, with
    0 <= j_{i+1} - j_i <= floor(n_grid / n_bins).
    """
    if n_bins < 1 or n_grid < 1:
        raise ValueError("n_bins and n_grid must be >= 1")
    v, m = _columns(rounds)
    bins = value_bins(v, n_bins)
    prices = np.arange(n_grid + 1) / n_grid
    agg = _bin_totals(v, m, bins, n_bins, prices)
    width = n_grid // n_bins
    B1 = n_grid + 1
    value = agg[0].copy()
    choice = np.zeros((n_bins, B1), dtype=np.int64)
    for i in range(1, n_bins):
        best = value.copy()
        arg = np.arange(B1)
        for s in range(1, width + 1):
            shifted = np.full(B1, -np.inf)
            shifted[s:] = value[:-s]
            # >= keeps the larger predecessor; ties resolved to the smaller one below
            better = shifted >= best
            best = np.where(better, shifted, best)
            arg = np.where(better, np.arange(B1) - s, arg)
        choice[i] = arg
        value = agg[i] + best
    j = int(np.argmax(value))
    total = float(value[j])
    path = np.empty(n_bins, dtype=np.int64)
    path[-1] = j
    for i in range(n_bins - 1, 0, -1):
        path[i - 1] = choice[i, path[i]]
    f = prices[path]
    b = f[bins - 1]
    return OracleResult("lipschitz", f, total, b, _rewards(b, v, m),
                        discretization_error=len(v) / n_grid)


def best_sparse_oracle(rounds: Rounds, supports: Sequence[float], n_bins: int) -> OracleResult:
    """Best nondecreasing map from value bins to the given support levels."""
    s = np.asarray(supports, dtype=float)
    if s.size == 0:
        raise ValueError("empty supports")
    if np.any(np.diff(s) < 0):
        raise ValueError("supports must be sorted")
    v, m = _columns(rounds)
    bins = value_bins(v, n_bins)
    agg = _bin_totals(v, m, bins, n_bins, s)
    K = len(s)
    value = agg[0].copy()
    choice = np.zeros((n_bins, K), dtype=np.int64)
    for i in range(1, n_bins):
        arg = np.zeros(K, dtype=np.int64)
        best = np.empty(K)
        run, run_arg = -np.inf, 0
        for k in range(K):
            if value[k] > run:
                run, run_arg = value[k], k
            best[k], arg[k] = run, run_arg
        choice[i] = arg
        value = agg[i] + best
    k = int(np.argmax(value))
    total = float(value[k])
    path = np.empty(n_bins, dtype=np.int64)
    path[-1] = k
    for i in range(n_bins - 1, 0, -1):
        path[i - 1] = choice[i, path[i]]
    b = s[path][bins - 1]
    return OracleResult("sparse", path, total, b, _rewards(b, v, m), extra={"supports": s})


def best_grid_step_oracle(rounds: Rounds, n_bins: int, n_levels: int, n_grid: int) -> OracleResult:
    """Best nondecreasing map from value bins to bids {1/B, ..., 1} with at most K levels.

    This is exactly the class sampled by the step-function DP policy, scored
    with the same raw (unclamped) rewards.
    """
    if min(n_bins, n_levels, n_grid) < 1:
        raise ValueError("n_bins, n_levels and n_grid must be >= 1")
    v, m = _columns(rounds)
    bins = value_bins(v, n_bins)
    prices = np.arange(1, n_grid + 1) / n_grid
    agg = _bin_totals(v, m, bins, n_bins, prices)
    K, B = n_levels, n_grid
    value = np.full((K, B), -np.inf)
    value[0] = agg[0]
    # back[i, k, j] = (rank, cell) held at bin i-1
    back = np.zeros((n_bins, K, B, 2), dtype=np.int64)
    for i in range(1, n_bins):
        new = np.full((K, B), -np.inf)
        for k in range(K):
            stay = value[k]
            cand = stay.copy()
            src_k = np.full(B, k)
            src_j = np.arange(B)
            if k > 0:
                # best strictly smaller cell at rank k-1 (exclusive prefix max, first maximiser)
                prev = value[k - 1]
                pm = np.full(B, -np.inf)
                pa = np.zeros(B, dtype=np.int64)
                run, run_arg = -np.inf, 0
                for j in range(B):
                    pm[j], pa[j] = run, run_arg
                    if prev[j] > run:
                        run, run_arg = prev[j], j
                up = pm > cand
                cand = np.where(up, pm, cand)
                src_k = np.where(up, k - 1, src_k)
                src_j = np.where(up, pa, src_j)
            new[k] = agg[i] + cand
            back[i, k, :, 0] = src_k
            back[i, k, :, 1] = src_j
        value = new
    flat = int(np.argmax(value))
    k, j = divmod(flat, B)
    total = float(value[k, j])
    path = np.empty(n_bins, dtype=np.int64)
    for i in range(n_bins - 1, -1, -1):
        path[i] = j
        if i > 0:
            k, j = back[i, k, j]
    f = prices[path]
    b = f[bins - 1]
    return OracleResult("grid_step", f, total, b, _rewards(b, v, m), discretization_error=len(v) / n_grid)


@dataclass
class RegretReport:
    oracle: str
    oracle_cum_rewards: np.ndarray
    policy_cum_rewards: np.ndarray

    @property
    def curve(self) -> np.ndarray:
        return self.oracle_cum_rewards - self.policy_cum_rewards

    @property
    def oracle_reward(self) -> float:
        return float(self.oracle_cum_rewards[-1])

    @property
    def policy_reward(self) -> float:
        return float(self.policy_cum_rewards[-1])

    @property
    def final(self) -> float:
        return self.oracle_reward - self.policy_reward


def regret_curve(trajectory: Union[Trajectory, np.ndarray], oracle_rewards: np.ndarray,
                 oracle: str = "oracle", expected: bool = False) -> RegretReport:
    """Per-round cumulative regret of a trajectory against an oracle's per-round rewards."""
    if isinstance(trajectory, Trajectory):
        pol = trajectory.policy_rewards(expected)
    else:
        pol = np.asarray(trajectory, dtype=float)
    orc = np.asarray(oracle_rewards, dtype=float)
    if len(pol) != len(orc):
        raise ValueError(f"length mismatch: policy {len(pol)} vs oracle {len(orc)}")
    if len(pol) == 0:
        raise ValueError("empty trajectory")
    return RegretReport(oracle, np.cumsum(orc), np.cumsum(pol))
