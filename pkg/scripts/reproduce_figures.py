#!/usr/bin/env python3
"""Run every shipped experiment config and render a combined report.

Each config reproduces one figure or table analog on the synthetic task
families; see configs/ for the frozen geometries. Re-running with the
same configs produces byte-identical CSV/JSON artifacts (timings go to
a separate timing.log).

    python3 scripts/reproduce_figures.py             # everything
    python3 scripts/reproduce_figures.py --only curve similarity
    python3 scripts/reproduce_figures.py --list
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from bsl.harness.cli import main as cli_main

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

# name -> (config file, what it reproduces)
EXPERIMENTS = {
    "curve": ("curve.json", "convergence vs random-subspace baselines"),
    "similarity": ("similarity.json", "source-task similarity ordering"),
    "source-count": ("source_count.json", "score vs number of source tasks"),
    "ablation-mode": ("ablation_mode.json", "meta-variant ablation"),
    "ablation-dfo": ("ablation_dfo.json", "CMA-ES vs sNES robustness"),
    "selection": ("selection_success.json", "zero-shot selection success"),
    "sweep-length": ("sweep_length.json", "prompt-length robustness"),
    "sweep-dim": ("sweep_dim.json", "subspace-dimension robustness"),
}


def parse_args(argv):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--only", nargs="+", choices=sorted(EXPERIMENTS),
                        help="run just these experiments")
    parser.add_argument("--out", default=None,
                        help="base output directory (default: runs/ next to configs/)")
    parser.add_argument("--seed-override", default=None,
                        help="comma-separated seeds for every experiment")
    parser.add_argument("--list", action="store_true",
                        help="list experiments and exit")
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    if args.list:
        for name, (cfg, desc) in EXPERIMENTS.items():
            print(f"{name:<14} {cfg:<24} {desc}")
        return 0
    names = args.only or list(EXPERIMENTS)
    summaries = []
    for name in names:
        cfg_file, desc = EXPERIMENTS[name]
        cfg_path = os.path.join(CONFIG_DIR, cfg_file)
        cli_args = ["experiment", "--config", cfg_path]
        if args.out:
            out_dir = os.path.join(args.out, name)
            cli_args += ["--out", out_dir]
        else:
            out_dir = os.path.join(CONFIG_DIR, "..", "runs",
                                   os.path.splitext(cfg_file)[0])
        if args.seed_override:
            cli_args += ["--seed-override", args.seed_override]
        print(f"\n=== {name}: {desc}")
        started = time.perf_counter()
        code = cli_main(cli_args)
        print(f"    ({time.perf_counter() - started:.1f}s)")
        if code != 0:
            print(f"experiment {name!r} failed with exit code {code}",
                  file=sys.stderr)
            return code
        summaries.append(os.path.join(out_dir, "summary.json"))
    report_dir = args.out or os.path.join(CONFIG_DIR, "..", "runs")
    print("\n=== combined report")
    return cli_main(["report", *summaries, "--out", report_dir])


if __name__ == "__main__":
    raise SystemExit(main())
