"""Command-line entry point: ``hintbid {simulate,replay,oracle,sweep,validate}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .bench import ConfigError, ExperimentConfig, evaluate_oracle, load_config, run_experiment, fmt_number
from .environments import StreamSpec, check_moment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("hintbid")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hintbid", description="Hint-aware bidding experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [("simulate", "generate streams and run algorithms"),
                        ("replay", "run algorithms on a CSV stream"),
                        ("oracle", "hindsight oracle values only"),
                        ("sweep", "run a parameter sweep and fit log-log slopes"),
                        ("validate", "check the hint-accuracy condition on streams")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="TOML experiment config")
        p.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
        p.add_argument("--out", type=Path, help="output directory (overrides experiment.out)")
        p.add_argument("--stream", type=Path, help="CSV stream with columns v,m,h,sigma")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _resolve(args) -> ExperimentConfig:
    if args.config is None:
        if args.stream is None:
            raise ConfigError("config: --config is required (or --stream for oracle/validate)")
        if args.command not in ("oracle", "validate"):
            raise ConfigError("config: --config is required for this command")
        cfg = ExperimentConfig([], [], [0])
    else:
        cfg = load_config(args.config)
    if args.stream is not None:
        cfg.streams = [StreamSpec("csv", {"path": str(args.stream)}, name=args.stream.stem)]
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed: must be nonnegative")
        cfg.seeds = [args.seed]
    if args.out is not None:
        cfg.out = str(args.out)
    if args.command == "replay" and any(s.family != "csv" for s in cfg.streams):
        raise ConfigError("streams: replay needs CSV streams (family = \"csv\" or --stream)")
    if args.command == "simulate" and any(s.family == "csv" for s in cfg.streams):
        raise ConfigError("streams: simulate generates streams; use replay for CSV input")
    if args.command == "sweep" and cfg.sweep is None:
        raise ConfigError("sweep: section missing")
    if args.command in ("simulate", "replay") and cfg.sweep is not None:
        cfg.sweep = None
    if not cfg.streams:
        raise ConfigError("streams: at least one stream is required")
    return cfg


def _oracle(cfg: ExperimentConfig) -> None:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "oracle.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("stream_id", "seed", "oracle", "oracle_reward", "discretization_error"))
        for spec in cfg.streams:
            for seed in cfg.seeds:
                res = evaluate_oracle(cfg.oracle, spec.build(seed))
                w.writerow([spec.stream_id, seed, res.name, fmt_number(res.total), fmt_number(res.discretization_error)])
    print(out / "oracle.csv")


def _validate(cfg: ExperimentConfig) -> bool:
    ok = True
    for spec in cfg.streams:
        q = spec.declared_q()
        for seed in cfg.seeds:
            rep = check_moment(spec.build(seed), q)
            print(f"{spec.stream_id} seed={seed}: {rep}")
            ok &= rep.passed
    return ok


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _resolve(args)
        if args.command == "oracle":
            _oracle(cfg)
            return EXIT_OK
        if args.command == "validate":
            return EXIT_OK if _validate(cfg) else EXIT_RUNTIME
        if args.command != "sweep":
            cfg.validate()
        paths = run_experiment(cfg)
        for p in paths.values():
            print(p)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure inside a run is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
