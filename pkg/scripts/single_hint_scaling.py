"""Regret of the single-hint learner (sigma hidden) as L and T vary.

Writes one row per (T, L, seed) and prints the fitted log-log slopes.
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from hintbid.bench import loglog_slope
from hintbid.core import QNorm
from hintbid.environments import StreamSpec
from hintbid.experts import make_grid_experts, make_single_hint_experts
from hintbid.hedge import RateSchedule, run_policy, single_hint_rate
from hintbid.regret import best_constant_bid


def regret(T, L, seed, n):
    experts = make_grid_experts(n) + make_single_hint_experts(n)
    eps = math.sqrt(L / (2 * T))
    s = StreamSpec("single-hint-lb", {"T": T, "epsilon": eps, "branch": 1 + seed % 2}).build(seed)
    tr = run_policy(experts, s, QNorm(math.inf), seed, RateSchedule("fixed", eta=single_hint_rate(T, L)))
    return best_constant_bid(s).total - tr.expected_rewards.sum()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=4)
    ap.add_argument("--n", type=int, default=1000, help="grid size and number of hint offsets")
    ap.add_argument("--out", type=Path, default=Path("results/single_hint_scaling.csv"))
    args = ap.parse_args()
    cells = [(10**5, L) for L in (4, 16, 64, 256)] + [(T, 16) for T in (10**4, 3 * 10**4)]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    means = {}
    with args.out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "L", "seed", "regret"])
        for T, L in cells:
            regs = [regret(T, L, seed, args.n) for seed in range(args.seeds)]
            means[T, L] = float(np.mean(regs))
            for seed, r in enumerate(regs):
                w.writerow([T, L, seed, repr(float(r))])
            print(f"T={T} L={L}: mean regret {means[T, L]:.2f}")
    Ls = [4, 16, 64, 256]
    Ts = [10**4, 3 * 10**4, 10**5]
    print(f"slope vs L: {loglog_slope(Ls, [means[10**5, L] for L in Ls]):.3f}")
    print(f"slope vs T: {loglog_slope(Ts, [means[T, 16] for T in Ts]):.3f}")


if __name__ == "__main__":
    main()
