"""
evidential-nav command line.

    evidential-nav gen-maps      --n 6 --scale 1.0
    evidential-nav collect
    evidential-nav train         [--methods PIETRA EVORA] [--kappa 0.1 0.5 1.0]
    evidential-nav eval-learning
    evidential-nav bench-nav     [--save-maps]
    evidential-nav report
    evidential-nav run           every stage in order

Every subcommand takes --config, --out, --seed and repeatable --set overrides.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import yaml

from evidential_nav.stages import bench_nav, collect, eval_learning, gen_maps, report, train
from evidential_nav.utils.config_manager import configure_logging, load_experiment_config, resolve_output_dir
from evidential_nav.utils.constants import GREEN, RED, RESET
from evidential_nav.utils.errors import EvidentialNavError


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, default=None,
                        help="experiment YAML (default: $EVIDENTIAL_NAV_CONFIG or the packaged experiment.yaml)")
    parser.add_argument("--out", type=Path, default=None,
                        help="artifact directory (default: $EVIDENTIAL_NAV_OUTPUT_DIR or outputs/<date>)")
    parser.add_argument("--seed", type=int, default=None, help="top-level seed (overrides the config's seed)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; the value is parsed as YAML; repeatable")
    parser.add_argument("--log-level", default=None, help="logging level (default: $EVIDENTIAL_NAV_LOG_LEVEL or INFO)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evidential-nav",
        description="Physics-informed evidential traversability learning and CVaR-MPPI navigation benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-maps", help="generate train/val/test terrain maps and map_summary.csv")
    _common(p)
    p.add_argument("--n", type=int, default=None, help="number of maps (default: benchmark.n_maps)")
    p.add_argument("--scale", type=float, default=None,
                   help="unevenness scale of train/val maps; test maps get scale * test_scale_factor")

    p = sub.add_parser("collect", help="drive self-supervised episodes on every map into dataset.jsonl")
    _common(p)

    p = sub.add_parser("train", help="train one network per learned method and seed")
    _common(p)
    p.add_argument("--methods", nargs="+", default=None, help="methods to train (default: all benchmarked)")
    p.add_argument("--kappa", nargs="+", type=float, default=None, help="kappa values to sweep")
    p.add_argument("--entropy-weight", nargs="+", type=float, default=None, help="entropy weights to sweep")
    p.add_argument("--learning-rate", nargs="+", type=float, default=None, help="learning rates to sweep")

    p = sub.add_parser("eval-learning", help="EMD2 per method, overall / ID / OOD, mean ± std over seeds")
    _common(p)

    p = sub.add_parser("bench-nav", help="navigation success rate and time to goal per method and alpha")
    _common(p)
    p.add_argument("--save-maps", action="store_true", help="also write every CVaR map stack as a grid file")

    p = sub.add_parser("report", help="render report.md and report.html from the benchmark CSVs")
    _common(p)

    p = sub.add_parser("run", help="every stage in order")
    _common(p)
    return parser


def _sweep_overrides(args) -> list[str]:
    overrides = []
    for flag, key in (("kappa", "kappa"), ("entropy_weight", "entropy_weight"), ("learning_rate", "learning_rate")):
        values = getattr(args, flag, None)
        if values:
            overrides.append(f"benchmark.sweep.{key}=[{', '.join(repr(v) for v in values)}]")
    return overrides


def _stage(label: str, fn, *args, **kwargs):
    print(f"▶️  {label}")
    started = time.perf_counter()
    result = fn(*args, **kwargs)
    print(f"{GREEN}✓ {label} done in {time.perf_counter() - started:.1f}s{RESET}")
    return result


def dispatch(args) -> None:
    configure_logging(args.log_level)
    cfg = load_experiment_config(args.config, [*args.overrides, *_sweep_overrides(args)])
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    out_dir = resolve_output_dir(args.out)

    command = args.command
    if command in ("gen-maps", "run"):
        _stage("gen-maps", gen_maps.run, cfg, out_dir, n=getattr(args, "n", None), scale=getattr(args, "scale", None))
    if command in ("collect", "run"):
        _stage("collect", collect.run, cfg, out_dir)
    if command in ("train", "run"):
        _stage("train", train.run, cfg, out_dir, methods=getattr(args, "methods", None))
    if command in ("eval-learning", "run"):
        _stage("eval-learning", eval_learning.run, cfg, out_dir)
    if command in ("bench-nav", "run"):
        _stage("bench-nav", bench_nav.run, cfg, out_dir, save_maps=getattr(args, "save_maps", False))
    if command in ("report", "run"):
        md_path, _ = _stage("report", report.run, out_dir)
        print(f"Report saved to {md_path}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        dispatch(args)
    except (EvidentialNavError, FileNotFoundError, yaml.YAMLError) as e:
        print(f"{RED}Error: {e}{RESET}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
