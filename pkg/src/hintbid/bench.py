"""Config-driven experiment runner: streams x algorithms x seeds -> CSV results."""

from __future__ import annotations

import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .binned import BinnedConfig, binned_replay
from .core import QNorm, Stream, Trajectory, clamp_bid, reward
from .environments import FAMILIES, StreamSpec
from .experts import make_alg1_experts, make_grid_experts, make_interval_hint_expert, make_single_hint_experts
from .hedge import RateSchedule, run_policy, single_hint_rate
from .meta import MetaConfig, MetaLearner, doubling_k_run
from .regret import (OracleResult, best_constant_bid, best_grid_step_oracle, best_lipschitz_dp,
                     best_sparse_oracle, regret_curve)
from .sparse_dp import SparseDpPolicy, dp_rate_schedule

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("hintbid")

ALGORITHMS = ("alg1", "single_hint", "sparse_dp", "meta", "doubling_meta", "no_hint", "bid_hint_only", "binned")
ORACLES = ("auto", "constant", "lipschitz", "sparse", "grid_step")
SWEEP_AXES = ("T", "L", "q", "K")
RESULT_COLUMNS = ("stream_id", "algorithm", "seed", "t", "bid", "reward", "cum_reward",
                  "oracle_cum_reward", "cum_regret")
AGGREGATE_COLUMNS = ("stream_id", "algorithm", "param_axis", "param_value", "mean_final_regret",
                     "std_final_regret", "n_seeds")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


@dataclass
class AlgorithmSpec:
    kind: str
    params: dict = field(default_factory=dict)
    name: Optional[str] = None

    @property
    def label(self) -> str:
        return self.name or self.kind


@dataclass
class OracleSpec:
    kind: str = "auto"
    value_bins: int = 20
    n_grid: Optional[int] = None
    n_levels: int = 2
    supports: Optional[List[float]] = None


@dataclass
class SweepSpec:
    axis: str
    values: List[float]


@dataclass
class ExperimentConfig:
    streams: List[StreamSpec]
    algorithms: List[AlgorithmSpec]
    seeds: List[int]
    out: str = "results"
    oracle: OracleSpec = field(default_factory=OracleSpec)
    sweep: Optional[SweepSpec] = None

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("experiment.seeds: must be non-empty")
        if not self.streams:
            raise ConfigError("streams: at least one stream is required")
        if not self.algorithms:
            raise ConfigError("algorithms: at least one algorithm is required")
        for i, a in enumerate(self.algorithms):
            if a.kind not in ALGORITHMS:
                raise ConfigError(f"algorithms[{i}].kind: unknown algorithm {a.kind!r}; expected one of {ALGORITHMS}")
        if self.oracle.kind not in ORACLES:
            raise ConfigError(f"oracle.kind: unknown oracle {self.oracle.kind!r}; expected one of {ORACLES}")
        if self.sweep is not None:
            if self.sweep.axis not in SWEEP_AXES:
                raise ConfigError(f"sweep.axis: unknown axis {self.sweep.axis!r}; expected one of {SWEEP_AXES}")
            if not self.sweep.values:
                raise ConfigError("sweep.values: must be non-empty")


def _require(table: dict, key: str, path: str, kind=None):
    if key not in table:
        raise ConfigError(f"{path}.{key}: missing")
    val = table[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__ if isinstance(kind, type) else kind}")
    return val


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a config from parsed TOML; every error message carries a field path."""
    exp = data.get("experiment", {})
    if not isinstance(exp, dict):
        raise ConfigError("experiment: expected a table")
    seeds = exp.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError("experiment.seeds: expected a list of nonnegative integers")
    streams = []
    for i, s in enumerate(data.get("streams", [])):
        fam = _require(s, "family", f"streams[{i}]", str)
        if fam not in FAMILIES:
            raise ConfigError(f"streams[{i}].family: unknown family {fam!r}; expected one of {FAMILIES}")
        params = s.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"streams[{i}].params: expected a table")
        streams.append(StreamSpec(fam, dict(params), int(s.get("seed", 0)), s.get("id")))
    algos = []
    for i, a in enumerate(data.get("algorithms", [])):
        kind = _require(a, "kind", f"algorithms[{i}]", str)
        params = a.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"algorithms[{i}].params: expected a table")
        algos.append(AlgorithmSpec(kind, dict(params), a.get("name")))
    o = data.get("oracle", {})
    if not isinstance(o, dict):
        raise ConfigError("oracle: expected a table")
    try:
        oracle = OracleSpec(**o)
    except TypeError as exc:
        raise ConfigError(f"oracle: {exc}") from None
    sweep = None
    if "sweep" in data:
        sw = data["sweep"]
        axis = _require(sw, "axis", "sweep", str)
        vals = _require(sw, "values", "sweep", list)
        sweep = SweepSpec(axis, list(vals))
    cfg = ExperimentConfig(streams, algos, list(seeds), str(exp.get("out", "results")), oracle, sweep)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: invalid TOML: {exc}") from None
    return config_from_dict(data)


# -- algorithms --------------------------------------------------------------

def _q_for(spec: AlgorithmSpec, stream_spec: Optional[StreamSpec]) -> QNorm:
    if "q" in spec.params:
        return QNorm.parse(spec.params["q"])
    return stream_spec.declared_q() if stream_spec is not None else QNorm(math.inf)


def run_algorithm(spec: AlgorithmSpec, stream: Stream, seed: int,
                  stream_spec: Optional[StreamSpec] = None) -> Trajectory:
    p = spec.params
    q = _q_for(spec, stream_spec)
    k = spec.kind
    if k == "alg1":
        return run_policy(make_alg1_experts(int(p.get("n_grid", 100)), q), stream, q, seed,
                          RateSchedule("interval") if not stream.sigma_hidden else None)
    if k == "single_hint":
        n = int(p.get("n", 100))
        experts = make_grid_experts(int(p.get("n_grid", n))) + make_single_hint_experts(n)
        if p.get("known_error", False):
            schedule = RateSchedule("fixed", eta=single_hint_rate(len(stream), stream.total_error()))
        else:
            schedule = RateSchedule("anytime")
        hidden = replace(stream, sigma_hidden=True)
        return run_policy(experts, hidden, q, seed, schedule)
    if k in ("sparse_dp", "no_hint"):
        D, K, B = int(p.get("n_bins", 20)), int(p.get("n_levels", 2)), int(p.get("n_grid", 20))
        if k == "no_hint" or not p.get("hint", True):
            pol = SparseDpPolicy(D, K, B, q, None, dp_rate_schedule(K, B, "anytime"), seed)
        else:
            pol = SparseDpPolicy(D, K, B, q, make_interval_hint_expert(q), dp_rate_schedule(K, B), seed,
                                 sigma_visible=not stream.sigma_hidden)
        return pol.run(stream)
    if k in ("meta", "doubling_meta"):
        allowed = {f for f in MetaConfig.__dataclass_fields__}
        extra = set(p) - allowed
        if extra:
            raise ConfigError(f"algorithms.{spec.label}.params: unknown keys {sorted(extra)}")
        cfg = MetaConfig(**{**p, "q": q})
        if k == "meta":
            return MetaLearner(cfg, seed).run(stream)
        return doubling_k_run(stream, cfg, seed)
    if k == "bid_hint_only":
        b = clamp_bid(stream.h, stream.v)
        r = reward(b, stream.v, stream.m)
        return Trajectory(b, r, r.copy())
    if k == "binned":
        cfg = BinnedConfig(int(p.get("value_bins", 10)), int(p.get("hint_bins", 4)),
                           float(p.get("optimism_scale", 1.0)), tuple(p.get("deltas", (0.5, 1.0))),
                           int(p.get("n_grid", 100)), q)
        return binned_replay(stream, cfg, seed)
    raise ConfigError(f"unknown algorithm {k!r}")


# -- oracles ------------------------------------------------------------------

def evaluate_oracle(spec: OracleSpec, stream: Stream) -> OracleResult:
    kind = spec.kind
    if kind == "auto":
        kind = "constant" if np.all(stream.v == stream.v[0]) else "lipschitz"
    n_grid = spec.n_grid or max(1000, len(stream))
    if kind == "constant":
        return best_constant_bid(stream, allow_varying_values=True)
    if kind == "lipschitz":
        return best_lipschitz_dp(stream, spec.value_bins, n_grid)
    if kind == "sparse":
        sup = spec.supports if spec.supports is not None else np.unique(stream.m)
        return best_sparse_oracle(stream, sup, spec.value_bins)
    return best_grid_step_oracle(stream, spec.value_bins, spec.n_levels, spec.n_grid or 20)


# -- sweeps -------------------------------------------------------------------

def apply_axis(stream: StreamSpec, algos: Sequence[AlgorithmSpec], axis: str, value):
    """Return copies of the stream and algorithm specs with one sweep axis set."""
    p = dict(stream.params)
    new_algos = [AlgorithmSpec(a.kind, dict(a.params), a.name) for a in algos]
    T = int(p.get("T", 0))
    if axis == "T":
        p["T"] = int(value)
    elif axis == "q":
        p["q"] = value
        for a in new_algos:
            a.params.pop("q", None)
    elif axis == "K":
        K = int(value)
        lo, hi = p.pop("support_range", (0.1, 0.7))
        p["supports"] = np.round(np.linspace(lo, hi, K), 12).tolist()
        for a in new_algos:
            if a.kind in ("sparse_dp", "no_hint", "meta"):
                a.params["n_levels"] = K
    elif axis == "L":
        L = float(value)
        fam = stream.family
        if fam == "two-point":
            p["sigma"] = L / T
        elif fam == "single-hint-lb":
            p["epsilon"] = math.sqrt(L / (2.0 * T))
        elif fam == "blocks":
            p["L"] = L
        elif fam == "sparse":
            p["hint_noise"] = L / T
        else:
            raise ConfigError(f"sweep.axis: L cannot be swept on a {fam} stream")
    return StreamSpec(stream.family, p, stream.seed, stream.name), new_algos


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y on log x; NaN unless all values are positive."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# -- runner -------------------------------------------------------------------

def fmt_number(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class RunRow:
    stream_id: str
    algorithm: str
    seed: int
    param_axis: str
    param_value: str
    final_regret: float


def run_cells(cfg: ExperimentConfig, results_fh=None) -> List[RunRow]:
    """Run every (sweep point, stream, algorithm, seed) cell in a fixed order."""
    points = [(None, None)] if cfg.sweep is None else [(cfg.sweep.axis, v) for v in cfg.sweep.values]
    writer = csv.writer(results_fh, lineterminator="\n") if results_fh is not None else None
    if writer:
        writer.writerow(RESULT_COLUMNS)
    rows = []
    for axis, value in points:
        for sspec in cfg.streams:
            algos = cfg.algorithms
            if axis is not None:
                sspec, algos = apply_axis(sspec, algos, axis, value)
            for seed in cfg.seeds:
                stream = sspec.build(seed)
                oracle = evaluate_oracle(cfg.oracle, stream)
                for a in algos:
                    traj = run_algorithm(a, stream, seed, sspec)
                    rep = regret_curve(traj, oracle.rewards, oracle.name, expected=False)
                    sid = sspec.stream_id
                    log.info("%s %s seed=%d%s: final regret %.3f", sid, a.label, seed,
                             "" if axis is None else f" {axis}={value}", rep.final)
                    if writer:
                        for t in range(len(traj)):
                            writer.writerow([sid, a.label, seed, t + 1, fmt_number(traj.bids[t]), fmt_number(traj.rewards[t]),
                                             fmt_number(rep.policy_cum_rewards[t]), fmt_number(rep.oracle_cum_rewards[t]),
                                             fmt_number(rep.curve[t])])
                    rows.append(RunRow(sid, a.label, seed, axis or "none",
                                       "" if value is None else str(value), rep.final))
    return rows


def aggregate(rows: Sequence[RunRow]) -> List[tuple]:
    groups: Dict[tuple, List[float]] = {}
    for r in rows:
        groups.setdefault((r.stream_id, r.algorithm, r.param_axis, r.param_value), []).append(r.final_regret)
    out = []
    for key, vals in groups.items():
        a = np.array(vals)
        out.append((*key, float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0, len(a)))
    return out


def run_experiment(cfg: ExperimentConfig, out_dir=None, write_trajectories: bool = True) -> Dict[str, Path]:
    """Write results.csv, aggregate.csv (and slopes.csv for sweeps) into the output directory."""
    cfg.validate()
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"results": out / "results.csv", "aggregate": out / "aggregate.csv"}
    buf = io.StringIO() if write_trajectories else None
    rows = run_cells(cfg, buf)
    if buf is not None:
        paths["results"].write_text(buf.getvalue(), encoding="utf-8")
    agg = aggregate(rows)
    with paths["aggregate"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for r in agg:
            w.writerow([r[0], r[1], r[2], r[3], fmt_number(r[4]), fmt_number(r[5]), r[6]])
    if cfg.sweep is not None:
        paths["slopes"] = out / "slopes.csv"
        with paths["slopes"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("stream_id", "algorithm", "param_axis", "slope", "n_points"))
            by: Dict[tuple, List[tuple]] = {}
            for r in agg:
                by.setdefault((r[0], r[1], r[2]), []).append((float(r[3]), r[4]))
            for key, pts in by.items():
                xs, ys = zip(*pts)
                w.writerow([*key, fmt_number(loglog_slope(xs, ys)), len(pts)])
    return paths
