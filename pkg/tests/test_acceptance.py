"""Acceptance criteria 1-11.

Each test prints one ``CRITERION <n> PASS|FAIL: ...`` line (also collected
into a block at the end of the pytest run) and then asserts the verdict.
Budgets (seeds, grid sizes) are chosen to keep the whole file within a few
tens of minutes on one CPU; see the decisions ledger for the reasoning.
"""

import itertools
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from hintbid.core import AuctionRound, QNorm, Stream, reward, value_bin
from hintbid.environments import (StreamSpec, check_moment, gen_single_hint_lb, gen_sparse, gen_two_point,
                                  two_point_delta)
from hintbid.experts import (enumerate_sparse_experts, make_alg1_experts, make_grid_experts,
                             make_interval_hint_expert, make_single_hint_experts)
from hintbid.hedge import RateSchedule, run_policy, sample_distribution, single_hint_rate
from hintbid.meta import MetaConfig, MetaLearner, doubling_k_run
from hintbid.regret import best_constant_bid, best_grid_step_oracle, best_lipschitz_dp, best_sparse_oracle
from hintbid.sparse_dp import (DpTables, SparseDpPolicy, brute_force_distribution, cut_weights,
                               dp_action_distribution, dp_update_round, log_partition)
from hintbid.bench import loglog_slope

ROOT = Path(__file__).resolve().parents[1]


def verdict(n, ok, detail):
    line = f"CRITERION {n:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


def hint_total(stream, q=QNorm(math.inf)):
    b = np.minimum(stream.h + stream.sigma ** q.exponent(), stream.v)
    return float(reward(b, stream.v, stream.m).sum())


# -- 1 ------------------------------------------------------------------------

def test_criterion_01_dp_matches_brute_force():
    rng = np.random.default_rng(2024)
    dp_action_distribution(DpTables(2, 2, 2), 1, 0.25)  # compile outside the timed region
    hints = make_interval_hint_expert(1)
    worst, cases = 0.0, 0
    t0 = time.perf_counter()
    for D, K, B in itertools.product(range(1, 5), range(1, 4), range(2, 5)):
        for rep in range(50):
            he = hints if rep % 2 else None
            tab = DpTables(D, K, B, len(he) if he is not None else 0)
            hist = []
            for t in range(6):
                v = float(rng.random())
                r = AuctionRound(t + 1, v, float(rng.random()), float(rng.random() * 0.1), float(rng.random()))
                hist.append(r)
                dp_update_round(tab, r, he.bids(r.v, r.h, r.sigma) if he is not None else None)
            cur = AuctionRound(7, float(rng.random()), float(rng.random()), 0.05, 0.3)
            eta = float(rng.choice([0.1, 0.25, 2.0]))
            hb = he.bids(cur.v, cur.h, cur.sigma) if he is not None else None
            for d in range(1, D + 1):
                p = dp_action_distribution(tab, d, eta, hb)
                q = brute_force_distribution(D, K, B, hist, eta, d, he, cur)
                worst = max(worst, float(np.abs(p - q).max()))
                cases += 1
    elapsed = time.perf_counter() - t0
    verdict(1, worst <= 1e-9 and elapsed < 10,
            f"{cases} bin queries, max |dp - brute| = {worst:.2e} (<= 1e-9), {elapsed:.1f}s (< 10s)")


# -- 2 ------------------------------------------------------------------------

def _score(rounds, f, D):
    return sum((r.v - f[value_bin(r.v, D) - 1]) if f[value_bin(r.v, D) - 1] >= r.m else 0.0 for r in rounds)


def test_criterion_02_hindsight_oracles_match_enumeration():
    rng = np.random.default_rng(7)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(100):
        D, B, K, T = (int(rng.integers(1, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 4)),
                      int(rng.integers(1, 9)))
        rounds = [AuctionRound(t + 1, float(rng.random()), 0.0, 0.0, float(rng.random())) for t in range(T)]
        w = B // D
        lip = max(_score(rounds, np.array(js) / B, D) for js in itertools.product(range(B + 1), repeat=D)
                  if all(0 <= b - a <= w for a, b in zip(js, js[1:])))
        sup = np.sort(rng.choice(np.arange(1, 20) / 20, K, replace=False))
        sp = max(_score(rounds, row, D) for row in enumerate_sparse_experts(sup, D).table)
        worst = max(worst, abs(lip - best_lipschitz_dp(rounds, D, B).total),
                    abs(sp - best_sparse_oracle(rounds, sup, D).total))
    elapsed = time.perf_counter() - t0
    verdict(2, worst <= 1e-12 and elapsed < 10,
            f"100 instances, max |dp - enumeration| = {worst:.1e} (float summation-order tolerance 1e-12), "
            f"{elapsed:.1f}s")


# -- 3 ------------------------------------------------------------------------

def test_criterion_03_regret_within_bound():
    T, n_grid, seeds = 10**4, 100, 50
    experts = make_alg1_experts(n_grid, 1)
    log_k = math.log(len(experts))
    parts, ok = [], True
    for sigma in (0.01, 0.04):
        regs = []
        for seed in range(seeds):
            s = gen_two_point(T, 1, sigma, two_point_delta(T, 1, sigma), "G1" if seed % 2 == 0 else "G2", seed)
            tr = run_policy(experts, s, QNorm(1), seed)
            regs.append(best_constant_bid(s).total - tr.expected_rewards.sum())
        S = T * math.sqrt(sigma)
        bound = 2 * (4 * log_k + 7 * math.sqrt(S * log_k)) + 1
        ok &= float(np.mean(regs)) <= bound
        parts.append(f"sigma={sigma}: mean regret {np.mean(regs):.1f} <= bound {bound:.1f}")
    verdict(3, ok, "; ".join(parts))


# -- 4 ------------------------------------------------------------------------

def test_criterion_04_regret_scaling_in_L():
    T, seeds, n_grid = 10**4, 30, 200
    experts = make_alg1_experts(n_grid, 1)
    Ls = [1, 4, 16, 64, 256]
    means = []
    for L in Ls:
        sigma = L / T
        regs = []
        for seed in range(seeds):
            s = gen_two_point(T, 1, sigma, two_point_delta(T, 1, sigma), "G1" if seed % 2 == 0 else "G2", seed)
            tr = run_policy(experts, s, QNorm(1), seed)
            regs.append(best_constant_bid(s).total - tr.expected_rewards.sum())
        means.append(float(np.mean(regs)))
    slope = loglog_slope(Ls, means)
    verdict(4, abs(slope - 0.25) <= 0.10,
            f"log-log slope {slope:.3f} (target 0.25 +- 0.10); mean regrets "
            + ", ".join(f"L={L}: {m:.1f}" for L, m in zip(Ls, means)))


# -- 5 ------------------------------------------------------------------------

def _single_hint_regret(T, L, seeds, n=1000):
    experts = make_grid_experts(n) + make_single_hint_experts(n)
    eps = math.sqrt(L / (2 * T))
    eta = single_hint_rate(T, L)
    regs = []
    for seed in range(seeds):
        s = StreamSpec("single-hint-lb", {"T": T, "epsilon": eps, "branch": 1 + seed % 2}).build(seed)
        tr = run_policy(experts, s, QNorm(math.inf), seed, RateSchedule("fixed", eta=eta))
        regs.append(best_constant_bid(s).total - tr.expected_rewards.sum())
    return float(np.mean(regs))


def test_criterion_05_single_hint_scaling():
    seeds = 4
    Ls = [4, 16, 64, 256]
    by_L = {L: _single_hint_regret(10**5, L, seeds) for L in Ls}
    Ts = [10**4, 3 * 10**4, 10**5]
    by_T = {T: (by_L[16] if T == 10**5 else _single_hint_regret(T, 16, seeds)) for T in Ts}
    sL = loglog_slope(Ls, [by_L[L] for L in Ls])
    sT = loglog_slope(Ts, [by_T[T] for T in Ts])
    verdict(5, abs(sL - 0.25) <= 0.10 and abs(sT - 0.25) <= 0.10,
            f"slope vs L {sL:.3f}, slope vs T {sT:.3f} (targets 0.25 +- 0.10); "
            + ", ".join(f"L={L}: {v:.1f}" for L, v in by_L.items()))


# -- 6 ------------------------------------------------------------------------

def test_criterion_06_interval_beats_single_hint():
    T, eps, seeds = 2 * 10**4, 0.05, 30
    interval_experts = make_alg1_experts(100, math.inf)
    single_experts = make_grid_experts(100) + make_single_hint_experts(100)
    ri, rs = [], []
    for seed in range(seeds):
        hidden = gen_single_hint_lb(T, eps, eps, 1 + seed % 2, seed)
        shown = Stream(hidden.v, hidden.m, hidden.h, hidden.sigma, sigma_hidden=False)
        best = best_constant_bid(hidden).total
        ri.append(best - run_policy(interval_experts, shown, QNorm(math.inf), seed).expected_rewards.sum())
        rs.append(best - run_policy(single_experts, hidden, QNorm(math.inf), seed,
                                    RateSchedule("anytime")).expected_rewards.sum())
    mi, ms = float(np.mean(ri)), float(np.mean(rs))
    verdict(6, ms > 0 and mi <= 0.2 * ms,
            f"interval mean regret {mi:.1f} <= 0.2 x single-hint mean regret {ms:.1f}")


# -- 7 ------------------------------------------------------------------------

def _sparse_dp_regret(K, seeds, T=10**4, D=40, B=40, sigma=0.01):
    sup = np.array([0.3, 0.5]) if K == 2 else np.round(0.1 + np.arange(K) / B, 12)
    regs = []
    for seed in range(seeds):
        s = gen_sparse(T, sup, sigma, "inf", seed)
        tr = SparseDpPolicy(D, K, B, "inf", make_interval_hint_expert("inf"), seed=seed).run(s)
        comp = max(best_grid_step_oracle(s, D, K, B).total, hint_total(s))
        regs.append(comp - tr.expected_rewards.sum())
    return float(np.mean(regs))


def test_criterion_07_sparsity_benefit():
    T, sigma, seeds = 10**4, 0.01, 30
    r2, r32 = _sparse_dp_regret(2, seeds), _sparse_dp_regret(32, seeds)
    formula = math.sqrt(2 * math.log(T) * T * sigma)
    verdict(7, r2 <= 0.5 * r32 and r2 <= 1.5 * formula,
            f"K=2 regret {r2:.1f} <= 0.5 x K=32 regret {r32:.1f}; K=2 regret <= 1.5 x {formula:.1f}")


# -- 8 ------------------------------------------------------------------------

def test_criterion_08_meta_adaptivity():
    T, seeds, D, B, K = 3000, 30, 10, 20, 4
    sup = [0.2, 0.35, 0.5, 0.65]
    families = {"sigma=0": 0.0, "sparse K=4, sigma=0.05": 0.05, "sigma=1": 1.0}
    parts, ok = [], True
    for name, noise in families.items():
        meta, nodes = [], []
        for seed in range(seeds):
            s = gen_sparse(T, sup, noise, "inf", seed)
            tr = MetaLearner(MetaConfig(n_bins=D, n_grid=B, n_levels=K), seed).run(s)
            comp = max(best_grid_step_oracle(s, D, K, B).total, hint_total(s))
            meta.append(comp - tr.expected_rewards.sum())
            nodes.append(comp - tr.info["node_expected_rewards"])
        best_node = float(np.min(np.mean(nodes, axis=0)))
        S = T * noise
        allowed = 3 * best_node + 20 * math.sqrt(math.log(3) * S)
        good = float(np.mean(meta)) <= allowed
        ok &= good
        parts.append(f"{name}: meta {np.mean(meta):.2f} vs allowed {allowed:.2f} [{'ok' if good else 'violated'}]")
    verdict(8, ok, "; ".join(parts))


# -- 9 ------------------------------------------------------------------------

def test_criterion_09_doubling():
    T, seeds, D, B = 1500, 30, 10, 40
    expected_caps = {5: [8], 9: [8, 16], 20: [8, 16, 32]}
    parts, ok = [], True
    for K, caps in expected_caps.items():
        sup = (np.arange(K) + 3) / 40
        dbl, known, caps_ok = [], [], True
        for seed in range(seeds):
            s = gen_sparse(T, sup, 0.02, "inf", seed, cover_first=True)
            cfg = MetaConfig(n_bins=D, n_grid=B, n_levels=K)
            comp = max(best_grid_step_oracle(s, D, K, B).total, hint_total(s))
            tr = doubling_k_run(s, cfg, seed)
            caps_ok &= tr.info["caps"] == caps
            dbl.append(comp - tr.expected_rewards.sum())
            known.append(comp - MetaLearner(cfg, seed).run(s).expected_rewards.sum())
        ratio = float(np.mean(dbl) / np.mean(known))
        ok &= caps_ok and np.mean(known) > 0 and ratio <= 2.0
        parts.append(f"K={K}: caps {'exact' if caps_ok else 'WRONG'} {caps}, inflation {ratio:.2f}")
    verdict(9, ok, "; ".join(parts))


# -- 10 -----------------------------------------------------------------------

def test_criterion_10_invariants():
    rng = np.random.default_rng(10)
    checks = {}
    shift_ok = norm_ok = True
    for _ in range(2000):
        r = rng.integers(-4000, 4000, size=int(rng.integers(1, 50))) / 16.0
        eta = float(rng.choice([0.25, 0.125, 0.5]))
        p = sample_distribution(r, eta)
        shift_ok &= np.array_equal(p, sample_distribution(r + float(rng.integers(-10**6, 10**6)), eta))
        norm_ok &= abs(p.sum() - 1) <= 1e-12 and bool(np.all(p > 0))
    checks["shift"] = shift_ok
    checks["normalization"] = norm_ok

    s = gen_sparse(2000, [0.2, 0.5], 0.05, 2, seed=1)
    eta_ok = bool(np.all(np.diff(run_policy(make_alg1_experts(20, 2), s, QNorm(2)).info["eta"]) <= 0))
    meta_tr = MetaLearner(MetaConfig(n_bins=5, n_grid=10), 0).run(s.slice(0, 500))
    eta_ok &= bool(np.all(np.diff(meta_tr.info["eta_top"]) <= 0))
    dp_tr = SparseDpPolicy(5, 2, 10, 2, make_interval_hint_expert(2), seed=0).run(s.slice(0, 500))
    eta_ok &= bool(np.all(np.diff(dp_tr.info["eta"]) <= 0))
    checks["eta monotone"] = eta_ok

    specs = [StreamSpec("two-point", {"T": 10**6, "q": 1, "sigma": 0.04}),
             StreamSpec("two-point", {"T": 10**6, "q": 3, "sigma": 0.01}),
             StreamSpec("single-hint-lb", {"T": 10**6, "epsilon": 0.05}),
             StreamSpec("blocks", {"T": 10**6, "L": 8, "q": 3}),
             StreamSpec("sparse", {"T": 10**6, "supports": [0.2, 0.4, 0.6], "hint_noise": 0.02, "q": 2}),
             StreamSpec("sparse", {"T": 10**6, "supports": [0.2, 0.4, 0.6], "hint_noise": 0.02, "q": "inf"})]
    checks["moments"] = all(check_moment(sp.build(seed=0), sp.declared_q(), tol=0.05).passed for sp in specs)

    cut_ok = True
    for D, K, B in [(5, 2, 8), (8, 3, 12), (12, 4, 20)]:
        tab = DpTables(D, K, B)
        for t in range(300):
            v = float(rng.random())
            dp_update_round(tab, AuctionRound(t + 1, v, 0.0, 0.0, float(rng.random() * v)))
        for eta in (0.05, 0.25, 2.0):
            w = cut_weights(tab, eta)
            z = np.array([log_partition(tab, eta, c, w) for c in range(1, D + 1)])
            # relative error of the partition function itself
            cut_ok &= float(np.max(np.abs(np.expm1(z - z[0])))) <= 1e-9
    checks["cut invariance"] = cut_ok
    verdict(10, all(checks.values()), ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))


# -- 11 -----------------------------------------------------------------------

CONFIG_SMALL = """
[experiment]
seeds = [0, 1]
[oracle]
kind = "auto"
[[streams]]
id = "tp"
family = "two-point"
[streams.params]
T = 400
q = 1
sigma = 0.01
[[streams]]
id = "sp"
family = "sparse"
[streams.params]
T = 400
supports = [0.2, 0.5]
hint_noise = 0.03
[[algorithms]]
kind = "alg1"
[[algorithms]]
kind = "meta"
[algorithms.params]
n_bins = 5
n_grid = 10
[[algorithms]]
kind = "doubling_meta"
[algorithms.params]
n_bins = 5
n_grid = 10
[[algorithms]]
kind = "binned"
[[algorithms]]
kind = "bid_hint_only"
[sweep]
axis = "T"
values = [200, 400]
"""


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "hintbid.cli", *args], capture_output=True, text=True)


def test_criterion_11_determinism(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(CONFIG_SMALL)
    stream_csv = tmp_path / "s.csv"
    from hintbid.environments import write_csv
    write_csv(gen_sparse(300, [0.25, 0.5], 0.02, seed=3), stream_csv)
    commands = [("simulate", "--config", str(cfg)), ("sweep", "--config", str(cfg)),
                ("simulate", "--config", str(cfg), "--seed", "11"),
                ("replay", "--config", str(cfg), "--stream", str(stream_csv)),
                ("oracle", "--stream", str(stream_csv))]
    same, n_files = True, 0
    for i, cmd in enumerate(commands):
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / f"{i}{rep}"
            res = _cli(*cmd, "--out", str(d))
            assert res.returncode == 0, res.stderr
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        same &= outs[0] == outs[1] and len(outs[0]) > 0
        n_files += len(outs[0])
    verdict(11, same, f"{len(commands)} CLI invocations run twice, {n_files} result files byte-identical")
