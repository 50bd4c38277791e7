"""Binned replay: independent hedge learners per (value, hint) cell with an optimism term."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .core import QNorm, Stream, Trajectory, reward, value_bin
from .experts import ExpertSet, HintOffsets, make_grid_experts, make_sigma_power_experts
from .hedge import Hedge, RateSchedule


@dataclass(frozen=True)
class BinnedConfig:
    value_bins: int = 10
    hint_bins: int = 4
    optimism_scale: float = 1.0
    deltas: Tuple[float, ...] = (0.5, 1.0)
    n_grid: int = 100
    q: object = math.inf

    def __post_init__(self):
        if self.value_bins < 1 or self.hint_bins < 1:
            raise ValueError("value_bins and hint_bins must be >= 1")
        if self.n_grid < 1:
            raise ValueError("n_grid must be >= 1")


def binned_experts(cfg: BinnedConfig, sigma_visible: bool) -> ExpertSet:
    """Grid bids plus sigma-power hint experts, or plus a plain ``h`` expert when sigma is hidden."""
    grid = make_grid_experts(cfg.n_grid)
    if sigma_visible:
        return grid + make_sigma_power_experts(cfg.deltas)
    return grid + ExpertSet([HintOffsets([0.0])])


def binned_replay(stream: Stream, cfg: BinnedConfig = BinnedConfig(), seed=0) -> Trajectory:
    """Each (value bin, hint bin) cell runs its own hedge learner; only the active cell updates.

    Sampling scores are cumulative rewards plus this round's estimate
    ``reward(b; v, h + c1 * sigma)`` (``reward(b; v, h)`` when sigma is
    hidden). All cells draw from one shared generator, so a single cell
    reproduces a plain hedge run with the same seed.
    """
    if len(stream) == 0:
        raise ValueError("empty stream")
    visible = not stream.sigma_hidden
    experts = binned_experts(cfg, visible)
    schedule = RateSchedule("interval") if visible else RateSchedule("anytime")
    rng = np.random.default_rng(seed)
    q = QNorm.parse(cfg.q)
    cells: Dict[Tuple[int, int], Hedge] = {}
    n = len(stream)
    bids, rewards, expected = np.empty(n), np.empty(n), np.empty(n)
    cell_ids = np.empty(n, dtype=np.int64)
    for i, rnd in enumerate(stream):
        key = (value_bin(rnd.v, cfg.value_bins), value_bin(rnd.h, cfg.hint_bins))
        learner = cells.get(key)
        if learner is None:
            learner = Hedge(experts, q, schedule, sigma_visible=visible)
            learner.state.rng = rng
            cells[key] = learner
        sigma = rnd.sigma if visible else math.nan
        b = experts.bids(rnd.v, rnd.h, sigma)
        target = rnd.h + cfg.optimism_scale * rnd.sigma if visible else rnd.h
        res = learner.step(rnd, optimism=reward(b, rnd.v, target))
        bids[i], rewards[i], expected[i] = res.bid, res.reward, res.expected_reward
        cell_ids[i] = (key[0] - 1) * cfg.hint_bins + key[1] - 1
    return Trajectory(bids, rewards, expected, info={"cell": cell_ids, "n_cells_used": len(cells)})
