"""Command-line entry point.

Subcommands mirror the workflow: meta-train a subspace, tune inside
one, select from a catalog, run any configured experiment, and render
reports from summaries. Every run-like subcommand takes the same flags:

    --config PATH        experiment config (JSON)
    --seed-override LIST comma-separated seeds replacing the config's
    --out DIR            output directory replacing the config's
    --threads N          concurrent seeds (BSL_DETERMINISTIC=1 forces 1)
"""

from __future__ import annotations

import argparse
import os
import sys

from ..errors import BslError, ConfigError
from .config import load_config
from .io import write_csv
from .runner import load_summary, run_experiment

__all__ = ["main", "build_parser"]


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to JSON config")
    parser.add_argument(
        "--seed-override",
        default=None,
        help="comma-separated seeds overriding the config's list",
    )
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument(
        "--threads", type=int, default=1, help="concurrent seeds (default 1)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsl",
        description="subspace meta-learning and black-box prompt tuning experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("meta-train", "learn a subspace from source tasks"),
        ("tune", "black-box tune inside a subspace"),
        ("select", "choose a subspace from a catalog"),
        ("experiment", "run any configured experiment kind"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        _add_run_flags(cmd)
    report = sub.add_parser("report", help="render tables from run summaries")
    report.add_argument("summaries", nargs="+", help="summary.json paths")
    report.add_argument(
        "--out", default=None, help="also write a plot-ready CSV to this directory"
    )
    report.add_argument(
        "--no-check",
        action="store_true",
        help="skip artifact reconciliation when loading summaries",
    )
    return parser


def _parse_seeds(text):
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise ConfigError([f"--seed-override: {exc}"]) from exc


def _run(args, expected_kind=None) -> int:
    config = load_config(args.config)
    if expected_kind is not None and config.kind != expected_kind:
        raise ConfigError(
            [f"kind: config declares {config.kind!r}, subcommand expects "
             f"{expected_kind!r}"]
        )
    summary = run_experiment(
        config,
        seed_override=_parse_seeds(args.seed_override),
        out_override=args.out,
        threads=args.threads,
    )
    print(f"{summary.kind} '{summary.name}': {len(summary.per_seed)} seed(s) done")
    for key in sorted(summary.aggregate):
        agg = summary.aggregate[key]
        if agg["mean"] is None:
            continue
        print(f"  {key}: mean={agg['mean']:.6g} std={agg['std']:.6g} n={agg['n']}")
    if summary.errors:
        for err in summary.errors:
            print(f"  seed {err['seed']} failed: {err['error']}", file=sys.stderr)
        return 1
    print(f"  summary: {os.path.join(summary.output_dir, 'summary.json')}")
    return 0


def _report(args) -> int:
    rows = [("summary", "kind", "metric", "mean", "std", "n")]
    for path in args.summaries:
        summary = load_summary(path, check_artifacts=not args.no_check)
        name = summary.get("name", path)
        print(f"{name} [{summary.get('kind', '?')}] "
              f"(config {summary.get('config_hash', '')[:12]})")
        header = f"  {'metric':<34} {'mean':>12} {'std':>12} {'n':>3}"
        print(header)
        for key in sorted(summary.get("aggregate", {})):
            agg = summary["aggregate"][key]
            mean = "-" if agg["mean"] is None else f"{agg['mean']:.6g}"
            std = "-" if agg["std"] is None else f"{agg['std']:.6g}"
            print(f"  {key:<34} {mean:>12} {std:>12} {agg['n']:>3}")
            rows.append(
                (name, summary.get("kind", ""), key,
                 "" if agg["mean"] is None else repr(agg["mean"]),
                 "" if agg["std"] is None else repr(agg["std"]),
                 str(agg["n"]))
            )
        for err in summary.get("errors", []):
            print(f"  seed {err['seed']} failed: {err['error']}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, "report.csv")
        write_csv(out_path, rows)
        print(f"wrote {out_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return _report(args)
        expected = args.command if args.command != "experiment" else None
        return _run(args, expected_kind=expected)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for violation in exc.violations:
            print(f"  - {violation}", file=sys.stderr)
        return 2
    except BslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
