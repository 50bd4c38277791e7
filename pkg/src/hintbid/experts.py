"""Expert sets: constant grid bids, hint experts and monotone step functions.

Every set is evaluated in one vectorised call, ``bids(v, h, sigma)``,
which returns the clamped bid of each member for the current round.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from .core import QNorm, clamp_bid, value_bin


@dataclass(frozen=True)
class Expert:
    """A named deterministic bid rule ``(v, h, sigma) -> raw bid``."""

    name: str
    rule: Callable[[float, float, float], float]

    def bid(self, v: float, h: float, sigma: float) -> float:
        return clamp_bid(self.rule(v, h, sigma), v)


class ExpertBlock:
    """A homogeneous group of experts sharing one vectorised bid rule."""

    kind = "block"

    def __len__(self) -> int:
        raise NotImplementedError

    def raw_bids(self, v: float, h: float, sigma: float) -> np.ndarray:
        raise NotImplementedError

    def names(self) -> List[str]:
        raise NotImplementedError

    @property
    def uses_hint(self) -> bool:
        return False


class ConstantBids(ExpertBlock):
    kind = "grid"

    def __init__(self, levels: Sequence[float]):
        self.levels = np.asarray(levels, dtype=float)

    def __len__(self):
        return len(self.levels)

    def raw_bids(self, v, h, sigma):
        return self.levels

    def names(self):
        return [f"const[{b:.6g}]" for b in self.levels]


class HintOffsets(ExpertBlock):
    """Experts bidding ``h + c`` for fixed offsets ``c``."""

    kind = "hint_offset"

    def __init__(self, offsets: Sequence[float]):
        self.offsets = np.asarray(offsets, dtype=float)

    def __len__(self):
        return len(self.offsets)

    def raw_bids(self, v, h, sigma):
        return h + self.offsets

    def names(self):
        return [f"hint+{c:.6g}" for c in self.offsets]

    @property
    def uses_hint(self):
        return True


class SigmaPowers(ExpertBlock):
    """Experts bidding ``h + sigma ** delta`` for each exponent ``delta``."""

    kind = "hint_sigma"

    def __init__(self, exponents: Sequence[float]):
        self.exponents = np.asarray(exponents, dtype=float)

    def __len__(self):
        return len(self.exponents)

    def raw_bids(self, v, h, sigma):
        return h + np.power(sigma, self.exponents)

    def names(self):
        return [f"hint+sigma^{d:.6g}" for d in self.exponents]

    @property
    def uses_hint(self):
        return True


class StepFunctions(ExpertBlock):
    """Experts whose bid depends only on the value bin: ``table[a, bin(v) - 1]``."""

    kind = "step"

    def __init__(self, table: np.ndarray):
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim != 2:
            raise ValueError("step table must be 2-D (experts x bins)")
        self.n_bins = self.table.shape[1]

    def __len__(self):
        return self.table.shape[0]

    def raw_bids(self, v, h, sigma):
        return self.table[:, value_bin(v, self.n_bins) - 1]

    def names(self):
        return ["step(" + ",".join(f"{b:.4g}" for b in row) + ")" for row in self.table]


class ExpertSet:
    """Ordered concatenation of expert blocks; immutable after construction."""

    def __init__(self, blocks: Sequence[ExpertBlock]):
        self.blocks = tuple(blocks)
        if not self.blocks or sum(len(b) for b in self.blocks) == 0:
            raise ValueError("an expert set needs at least one expert")
        self._sizes = [len(b) for b in self.blocks]

    def __len__(self) -> int:
        return sum(self._sizes)

    def __add__(self, other: "ExpertSet") -> "ExpertSet":
        return ExpertSet(self.blocks + other.blocks)

    def raw_bids(self, v: float, h: float, sigma: float) -> np.ndarray:
        if len(self.blocks) == 1:
            return np.broadcast_to(self.blocks[0].raw_bids(v, h, sigma), (len(self),)).astype(float)
        return np.concatenate([np.broadcast_to(b.raw_bids(v, h, sigma), (n,))
                               for b, n in zip(self.blocks, self._sizes)])

    def bids(self, v: float, h: float, sigma: float) -> np.ndarray:
        return clamp_bid(self.raw_bids(v, h, sigma), v)

    def names(self) -> List[str]:
        return [n for b in self.blocks for n in b.names()]

    def block_slices(self) -> List[slice]:
        edges = np.cumsum([0] + self._sizes)
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    def index_of(self, kind: str) -> np.ndarray:
        """Indices of all experts belonging to blocks of the given kind."""
        return np.concatenate([np.arange(s.start, s.stop) for s, b in zip(self.block_slices(), self.blocks)
                               if b.kind == kind] or [np.empty(0, dtype=int)]).astype(int)

    def experts(self) -> List[Expert]:
        out = []
        for block in self.blocks:
            n = len(block)
            for i, name in enumerate(block.names()):
                def rule(v, h, s, _b=block, _i=i, _n=n):
                    return float(np.broadcast_to(_b.raw_bids(v, h, s), (_n,))[_i])
                out.append(Expert(name, rule))
        return out

    @property
    def uses_hint(self) -> bool:
        return any(b.uses_hint for b in self.blocks)


def grid_levels(n_grid: int) -> np.ndarray:
    """Bid levels i / n_grid for i = 1..n_grid."""
    if n_grid < 1:
        raise ValueError("n_grid must be >= 1")
    return np.arange(1, n_grid + 1) / n_grid


def make_grid_experts(n_grid: int) -> ExpertSet:
    return ExpertSet([ConstantBids(grid_levels(n_grid))])


def make_interval_hint_expert(q: QNorm) -> ExpertSet:
    """Single expert bidding ``h + sigma ** (q / (q + 1))``."""
    return ExpertSet([SigmaPowers([QNorm.parse(q).exponent()])])


def make_alg1_experts(n_grid: int, q: QNorm) -> ExpertSet:
    """``n_grid`` constant experts i / n_grid plus one interval-aware hint expert (last)."""
    return make_grid_experts(n_grid) + make_interval_hint_expert(q)


def make_single_hint_experts(n: int) -> ExpertSet:
    """Experts bidding ``h + i / n`` for i = 0..n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return ExpertSet([HintOffsets(np.arange(n) / n)])


def make_sigma_power_experts(deltas: Sequence[float]) -> ExpertSet:
    deltas = list(deltas)
    if not deltas:
        raise ValueError("deltas must be non-empty")
    if any(d <= 0 for d in deltas):
        raise ValueError("every exponent must be positive")
    return ExpertSet([SigmaPowers(deltas)])


@dataclass(frozen=True)
class SparseExpertSet:
    """All nondecreasing maps from ``value_bins`` bins to the sorted ``supports``.

    ``maps[a, d]`` is the support rank (0-based) expert ``a`` bids in bin d+1.
    """

    supports: np.ndarray
    value_bins: int
    maps: np.ndarray

    def __len__(self) -> int:
        return self.maps.shape[0]

    @property
    def table(self) -> np.ndarray:
        return self.supports[self.maps]

    def as_expert_set(self) -> ExpertSet:
        return ExpertSet([StepFunctions(self.table)])


def sparse_class_size(n_supports: int, n_bins: int) -> int:
    """C(D + K - 1, K - 1)."""
    return math.comb(n_bins + n_supports - 1, n_supports - 1)


def enumerate_sparse_experts(supports: Sequence[float], value_bins: int) -> SparseExpertSet:
    s = np.asarray(supports, dtype=float)
    if s.ndim != 1 or len(s) < 1:
        raise ValueError("need at least one support level")
    if value_bins < 1:
        raise ValueError("value_bins must be >= 1")
    if np.any(np.diff(s) <= 0):
        raise ValueError("supports must be strictly increasing")
    maps = np.array(list(itertools.combinations_with_replacement(range(len(s)), value_bins)), dtype=np.int64)
    return SparseExpertSet(s, value_bins, maps.reshape(-1, value_bins))
