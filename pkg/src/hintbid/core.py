"""Auction primitives: round records, the first-price reward, trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, slots=True)
class AuctionRound:
    """Observables of a single auction.

    ``m`` (the minimum bid to win) is only revealed to a learner after it
    has bid; learners must not read it before calling their update.
    """

    t: int
    v: float
    h: float
    sigma: float
    m: float

    def validate(self) -> None:
        for name in ("v", "h", "sigma", "m"):
            x = getattr(self, name)
            if not (0.0 <= x <= 1.0):
                raise ValueError(f"round {self.t}: {name}={x} outside [0, 1]")
        if self.t < 1:
            raise ValueError(f"round index must be 1-based, got {self.t}")


@dataclass(frozen=True)
class QNorm:
    """Accuracy order ``q`` of the hint interval; ``math.inf`` is allowed."""

    q: float = 1.0

    def __post_init__(self):
        if not (self.q >= 1.0):
            raise ValueError(f"q must be >= 1, got {self.q}")

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.q)

    def exponent(self) -> float:
        """q / (q + 1), equal to 1 at q = inf."""
        if self.is_inf:
            return 1.0
        return self.q / (self.q + 1.0)

    def sigma_power(self, sigma: ArrayLike) -> ArrayLike:
        return sigma ** self.exponent()

    @classmethod
    def parse(cls, value) -> "QNorm":
        if isinstance(value, QNorm):
            return value
        if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞"):
            return cls(math.inf)
        return cls(float(value))

    def __str__(self) -> str:
        return "inf" if self.is_inf else f"{self.q:g}"


def reward(b: ArrayLike, v: ArrayLike, m: ArrayLike) -> ArrayLike:
    """First-price payoff ``(v - b) * 1{b >= m}``; a tie wins.

    Broadcasts over numpy arrays.
    """
    if isinstance(b, np.ndarray) or isinstance(v, np.ndarray) or isinstance(m, np.ndarray):
        b = np.asarray(b, dtype=float)
        return np.where(b >= m, v - b, 0.0)
    return (v - b) if b >= m else 0.0


def value_bin(v: float, n_bins: int) -> int:
    """1-based index of the bin ((i-1)/n, i/n] holding ``v``; v = 0 maps to bin 1."""
    return min(max(math.ceil(v * n_bins - 1e-9), 1), n_bins)


def value_bins(v: np.ndarray, n_bins: int) -> np.ndarray:
    return np.clip(np.ceil(np.asarray(v) * n_bins - 1e-9), 1, n_bins).astype(np.int64)


def clamp_bid(raw: ArrayLike, v: ArrayLike) -> ArrayLike:
    """Project a raw bid onto the feasible interval [0, v]."""
    if isinstance(raw, np.ndarray) or isinstance(v, np.ndarray):
        return np.minimum(np.maximum(raw, 0.0), v)
    return min(max(raw, 0.0), v)


@dataclass(frozen=True)
class Bid:
    b: float
    v: float

    def __post_init__(self):
        if not (0.0 <= self.b <= self.v):
            raise ValueError(f"bid {self.b} outside [0, {self.v}]")


@dataclass
class Stream:
    """An immutable-by-convention sequence of auction rounds stored column-wise.

    ``sigma_hidden`` marks single-hint mode: learners see ``h`` only, while
    evaluators can still read ``sigma``.
    """

    v: np.ndarray
    m: np.ndarray
    h: np.ndarray
    sigma: np.ndarray
    sigma_hidden: bool = False
    name: str = "stream"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.v, self.m, self.h, self.sigma)]
        n = len(arrays[0])
        if any(len(a) != n for a in arrays):
            raise ValueError("stream columns have different lengths")
        for a in arrays:
            a.setflags(write=False)
        self.v, self.m, self.h, self.sigma = arrays

    def __len__(self) -> int:
        return len(self.v)

    def __getitem__(self, i: int) -> AuctionRound:
        if i < 0:
            i += len(self)
        return AuctionRound(i + 1, float(self.v[i]), float(self.h[i]), float(self.sigma[i]), float(self.m[i]))

    def __iter__(self) -> Iterator[AuctionRound]:
        v, h, s, m = self.v.tolist(), self.h.tolist(), self.sigma.tolist(), self.m.tolist()
        for i in range(len(v)):
            yield AuctionRound(i + 1, v[i], h[i], s[i], m[i])

    def slice(self, start: int, stop: Optional[int] = None) -> "Stream":
        sl = slice(start, stop)
        return Stream(self.v[sl], self.m[sl], self.h[sl], self.sigma[sl],
                      sigma_hidden=self.sigma_hidden, name=self.name, meta=dict(self.meta))

    def validate(self) -> None:
        for name in ("v", "m", "h", "sigma"):
            a = getattr(self, name)
            if np.any((a < 0.0) | (a > 1.0)) or np.any(~np.isfinite(a)):
                raise ValueError(f"stream {self.name}: column {name} has values outside [0, 1]")

    def with_hints(self, h: np.ndarray) -> "Stream":
        return Stream(self.v, self.m, h, self.sigma, self.sigma_hidden, self.name, dict(self.meta))

    @classmethod
    def from_rounds(cls, rounds: Sequence[AuctionRound], **kwargs) -> "Stream":
        ts = [r.t for r in rounds]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("round indices must be strictly increasing")
        return cls(np.array([r.v for r in rounds]), np.array([r.m for r in rounds]),
                   np.array([r.h for r in rounds]), np.array([r.sigma for r in rounds]), **kwargs)

    def total_error(self) -> float:
        """L = sum of sigma_t."""
        return float(self.sigma.sum())

    def sigma_power_sum(self, q: QNorm) -> float:
        """S_T = sum of sigma_t ** (q / (q + 1))."""
        return float(np.power(self.sigma, q.exponent()).sum())


@dataclass
class Trajectory:
    """Per-round outcome of running a policy on a stream.

    ``expected_rewards`` holds the policy's reward averaged over its own
    sampling distribution at each round, when the policy can compute it.
    """

    bids: np.ndarray
    rewards: np.ndarray
    expected_rewards: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bids = np.asarray(self.bids, dtype=float)
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.expected_rewards is not None:
            self.expected_rewards = np.asarray(self.expected_rewards, dtype=float)
        if len(self.bids) != len(self.rewards):
            raise ValueError("bids and rewards differ in length")

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def rounds(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    @property
    def cum_reward(self) -> float:
        return float(self.rewards.sum())

    @property
    def cum_rewards(self) -> np.ndarray:
        return np.cumsum(self.rewards)

    def policy_rewards(self, expected: bool = True) -> np.ndarray:
        if expected and self.expected_rewards is not None:
            return self.expected_rewards
        return self.rewards

    @classmethod
    def concatenate(cls, parts: Sequence["Trajectory"], info: Optional[dict] = None) -> "Trajectory":
        exp = None
        if all(p.expected_rewards is not None for p in parts):
            exp = np.concatenate([p.expected_rewards for p in parts])
        return cls(np.concatenate([p.bids for p in parts]), np.concatenate([p.rewards for p in parts]),
                   exp, info or {})
