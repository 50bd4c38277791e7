"""Stream generators (lower-bound constructions, sparse supports), CSV I/O and
hint-accuracy checks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import QNorm, Stream

FAMILIES = ("two-point", "single-hint-lb", "blocks", "sparse", "csv")


def _branch_sign(branch) -> int:
    b = str(branch).upper().lstrip("G")
    if b not in ("1", "2"):
        raise ValueError(f"branch must be G1/G2 (or 1/2), got {branch!r}")
    return 1 if b == "1" else -1


def _floor(x: float) -> int:
    # guards against 124.99999999 style float noise in closed-form sizes
    return int(math.floor(x + 1e-9))


def two_point_delta(T: int, q, sigma: float) -> float:
    """Separation min{s/2, s^(1/2) T^(-1/2) / 8} with s = sigma^(q/(q+1))."""
    s = sigma ** QNorm.parse(q).exponent()
    return min(s / 2.0, math.sqrt(s) / (8.0 * math.sqrt(T)))


def gen_two_point(T: int, q, sigma: float, delta: float, branch="G1", seed=0) -> Stream:
    """Two nearly indistinguishable laws for m_t on {1/2, x_bar}, v = 1, h = 1/2."""
    q = QNorm.parse(q)
    s = sigma ** q.exponent()
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 <= sigma <= 1.0) or s > 0.25:
        raise ValueError(f"need sigma^(q/(q+1)) <= 1/4, got {s:.4g}")
    if not (0.0 <= delta <= s / 2.0):
        raise ValueError(f"need 0 <= delta <= sigma^(q/(q+1))/2 = {s / 2:.4g}, got {delta}")
    sign = _branch_sign(branch)
    x_bar = 0.5 + s / 2.0
    p_half = 2.0 * (1.0 - x_bar + sign * delta)
    rng = np.random.default_rng(seed)
    m = np.where(rng.random(T) < p_half, 0.5, x_bar)
    return Stream(np.ones(T), m, np.full(T, 0.5), np.full(T, float(sigma)), name="two-point",
                  meta={"family": "two-point", "q": str(q), "sigma": sigma, "delta": delta,
                        "branch": f"G{1 if sign > 0 else 2}", "x_bar": x_bar, "p_half": p_half, "seed": seed})


def single_hint_delta(T: int, epsilon: float) -> float:
    """min{eps, sqrt(eps / (2T)) / 4}."""
    return min(epsilon, 0.25 * math.sqrt(epsilon / (2.0 * T)))


def gen_single_hint_lb(T: int, epsilon: float, delta: float, branch=1, seed=0) -> Stream:
    """sigma_t is 0 (m = h) or eps (m = h + eps); sigma is hidden from learners."""
    if not (0.0 < epsilon <= 0.125):
        raise ValueError(f"epsilon must lie in (0, 1/8], got {epsilon}")
    if not (0.0 <= delta <= epsilon):
        raise ValueError("need 0 <= delta <= epsilon")
    sign = _branch_sign(branch)
    p_zero = 1.0 - 2.0 * (epsilon - sign * delta)
    rng = np.random.default_rng(seed)
    sigma = np.where(rng.random(T) < p_zero, 0.0, epsilon)
    h = np.full(T, 0.5)
    return Stream(np.ones(T), h + sigma, h, sigma, sigma_hidden=True, name="single-hint-lb",
                  meta={"family": "single-hint-lb", "epsilon": epsilon, "delta": delta,
                        "branch": 1 if sign > 0 else 2, "p_zero": p_zero, "seed": seed})


def blocks_layout(T: int, L: float, q) -> tuple:
    """(number of blocks, block length) for the block construction."""
    q = QNorm.parse(q)
    if q.is_inf:
        return _floor(L), _floor(T / L)
    return _floor(T ** (1.0 / (q.q + 1.0)) * L ** q.exponent()), _floor((T / L) ** q.exponent())


def gen_blocks(T: int, L: float, q, seed=0, delta: float = 0.0, branch=1) -> Stream:
    """Independent fixed-value subproblems, each a two-point instance.

    Block i has v = 1/2 + i/(2N), h = 1/4 + (i/4) s and m in {h, h + s/4}
    with s = sigma^(q/(q+1)), sigma = L / T.
    """
    q = QNorm.parse(q)
    if not (1.0 <= L <= T):
        raise ValueError("need 1 <= L <= T")
    limit = T ** 0.5 if q.is_inf else T ** ((q.q - 1.0) / (2.0 * q.q))
    if L > limit + 1e-9:
        raise ValueError(f"L = {L} outside the block regime L <= {limit:.4g}")
    sigma = L / T
    s = sigma ** q.exponent()
    if not (0.0 <= delta <= s):
        raise ValueError("need 0 <= delta <= sigma^(q/(q+1))")
    n_blocks, length = blocks_layout(T, L, q)
    if n_blocks < 1 or length < 1:
        raise ValueError("degenerate block layout")
    if 1.0 / n_blocks < s - 1e-12:
        raise ValueError("blocks would overlap: 1/N < sigma^(q/(q+1))")
    sign = _branch_sign(branch)
    i = np.repeat(np.arange(n_blocks), length)
    n = len(i)
    v = 0.5 + i / (2.0 * n_blocks)
    h = 0.25 + i * s / 4.0
    p_up = 0.25 * (s + sign * delta)
    rng = np.random.default_rng(seed)
    m = np.where(rng.random(n) < p_up, 0.25 + (i + 1) * s / 4.0, h)
    return Stream(v, m, h, np.full(n, sigma), name="blocks",
                  meta={"family": "blocks", "q": str(q), "L": L, "n_blocks": n_blocks,
                        "block_length": length, "delta": delta, "seed": seed})


def gen_sparse(T: int, supports: Sequence[float], hint_noise: float, q=math.inf, seed=0,
               switch_prob: Optional[float] = None, cover_first: bool = False) -> Stream:
    """m_t on K support points, h_t = m_t + Uniform[-s, s] noise, sigma_t = s.

    ``switch_prob`` turns the iid draw into a sticky Markov chain that
    resamples its state with that probability each round. ``cover_first``
    lists every support (in random order) before the iid/Markov draws.
    The uniform noise has q-th moment s^q / (q + 1) <= sigma^q and
    |h - m| <= sigma surely, so the stream is valid for every q.
    """
    sup = np.asarray(sorted(supports), dtype=float)
    if sup.size == 0:
        raise ValueError("supports must be non-empty")
    if sup[0] < 0 or sup[-1] >= 1.0:
        raise ValueError("supports must lie in [0, 1)")
    if not (0.0 <= hint_noise <= 1.0):
        raise ValueError("hint_noise must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    K = len(sup)
    if switch_prob is None:
        idx = rng.integers(0, K, size=T)
    else:
        jumps = rng.random(T) < switch_prob
        draws = rng.integers(0, K, size=T)
        idx = np.empty(T, dtype=np.int64)
        cur = draws[0]
        for t in range(T):
            if jumps[t]:
                cur = draws[t]
            idx[t] = cur
    if cover_first:
        k = min(K, T)
        idx[:k] = rng.permutation(K)[:k]
    m = sup[idx]
    noise = rng.uniform(-hint_noise, hint_noise, size=T) if hint_noise > 0 else np.zeros(T)
    h = np.clip(m + noise, 0.0, 1.0)
    v = sup[-1] + (1.0 - sup[-1]) * (1.0 - rng.random(T))
    return Stream(v, m, h, np.full(T, float(hint_noise)), name="sparse",
                  meta={"family": "sparse", "supports": sup.tolist(), "hint_noise": hint_noise,
                        "q": str(QNorm.parse(q)), "seed": seed})


# -- CSV -----------------------------------------------------------------

CSV_COLUMNS = ("v", "m", "h", "sigma")


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_csv(path: Union[str, Path], sigma_hidden: bool = False) -> Stream:
    """Read ``v,m,h,sigma`` rows; drop out-of-range rows and rows with v <= m.

    The number of dropped rows is stored in ``stream.meta["dropped"]``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no rows")
    order = list(range(4))
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip().lower() for c in rows[0]]
        try:
            order = [header.index(c) for c in CSV_COLUMNS]
        except ValueError:
            raise ValueError(f"{path}: header must name columns {','.join(CSV_COLUMNS)}") from None
        rows = rows[1:]
    data, dropped = [], 0
    for lineno, row in enumerate(rows, start=1):
        try:
            v, m, h, s = (float(row[j]) for j in order)
        except (ValueError, IndexError):
            raise ValueError(f"{path}: malformed row {lineno}: {row!r}") from None
        vals = (v, m, h, s)
        if any(not (0.0 <= x <= 1.0) for x in vals) or v <= m:
            dropped += 1
            continue
        data.append(vals)
    if not data:
        raise ValueError(f"{path}: no valid rows ({dropped} dropped)")
    arr = np.array(data)
    return Stream(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], sigma_hidden=sigma_hidden,
                  name=path.stem, meta={"family": "csv", "path": str(path), "dropped": dropped})


def write_csv(stream: Stream, path: Union[str, Path], header: bool = True) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        for row in zip(stream.v, stream.m, stream.h, stream.sigma):
            w.writerow([repr(float(x)) for x in row])


# -- hint accuracy ----------------------------------------------------------

@dataclass
class MomentReport:
    q: QNorm
    per_round_error: np.ndarray
    per_round_bound: np.ndarray
    moment: float
    bound: float
    passed: bool

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}: E|h-m|^q = {self.moment:.6g} vs bound {self.bound:.6g} (q={self.q})"


def check_moment(stream: Stream, q, tol: float = 0.05) -> MomentReport:
    """Check E|h - m|^q <= sigma^q on a stream.

    For q = inf the check is pointwise (|h - m| <= sigma); otherwise the
    sample mean of |h - m|^q is compared with the mean of sigma^q, allowing
    a relative slack ``tol`` for Monte-Carlo error.
    """
    q = QNorm.parse(q)
    err = np.abs(stream.h - stream.m)
    if q.is_inf:
        ok = err <= stream.sigma + 1e-12
        return MomentReport(q, err, stream.sigma.copy(), float(err.max(initial=0.0)),
                            float(stream.sigma.max(initial=0.0)), bool(ok.all()))
    e = err ** q.q
    b = stream.sigma ** q.q
    moment, bound = float(e.mean()), float(b.mean())
    return MomentReport(q, e, b, moment, bound, moment <= bound * (1.0 + tol) + 1e-15)


# -- specs -------------------------------------------------------------------

@dataclass
class StreamSpec:
    """Declarative description of a stream; ``build(seed)`` materialises it."""

    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    name: Optional[str] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown stream family {self.family!r}; expected one of {FAMILIES}")

    @property
    def stream_id(self) -> str:
        return self.name or self.family

    def build(self, seed: Optional[int] = None, **overrides) -> Stream:
        p = {**self.params, **overrides}
        seed = self.seed if seed is None else seed
        f = self.family
        try:
            if f == "two-point":
                q = QNorm.parse(p.get("q", 1))
                delta = p.get("delta", "preset")
                if delta == "preset":
                    delta = two_point_delta(int(p["T"]), q, float(p["sigma"]))
                s = gen_two_point(int(p["T"]), q, float(p["sigma"]), float(delta), p.get("branch", "G1"), seed)
            elif f == "single-hint-lb":
                eps = float(p["epsilon"])
                delta = p.get("delta", "preset")
                if delta == "preset":
                    delta = single_hint_delta(int(p["T"]), eps)
                s = gen_single_hint_lb(int(p["T"]), eps, float(delta), p.get("branch", 1), seed)
            elif f == "blocks":
                s = gen_blocks(int(p["T"]), float(p["L"]), p.get("q", 1), seed,
                               float(p.get("delta", 0.0)), p.get("branch", 1))
            elif f == "sparse":
                s = gen_sparse(int(p["T"]), p["supports"], float(p.get("hint_noise", 0.0)),
                               p.get("q", "inf"), seed, p.get("switch_prob"), bool(p.get("cover_first", False)))
            else:
                s = load_csv(p["path"], sigma_hidden=bool(p.get("sigma_hidden", False)))
        except KeyError as exc:
            raise ValueError(f"stream {self.stream_id}: missing parameter {exc.args[0]!r}") from None
        if p.get("sigma_hidden") is not None and f != "csv":
            s.sigma_hidden = bool(p["sigma_hidden"])
        s.name = self.stream_id
        return s

    def declared_q(self) -> QNorm:
        if self.family == "single-hint-lb":
            return QNorm(math.inf)
        return QNorm.parse(self.params.get("q", "inf" if self.family == "sparse" else 1))
