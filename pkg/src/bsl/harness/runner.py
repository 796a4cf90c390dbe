"""Experiment orchestration: seeds, aggregation, artifacts, summaries.

run_experiment dispatches a validated config to its pipeline once per
seed, aggregates the per-seed metrics, and writes a deterministic
summary.json next to the artifacts. Wall-clock timings go to a separate
timing.log text file so the CSV/JSON outputs are byte-identical across
re-runs of the same config.
"""

from __future__ import annotations

import concurrent.futures
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import BslError, ConfigError
from .config import ExperimentConfig, config_hash, load_config
from .io import read_csv, read_json, write_json
from .pipelines import run_pipeline

__all__ = ["RunSummary", "run_experiment", "load_summary"]

SUMMARY_NAME = "summary.json"
TIMING_NAME = "timing.log"


@dataclass
class RunSummary:
    """Aggregated result of one experiment run."""

    config_hash: str
    kind: str
    name: str
    seeds: tuple
    per_seed: list
    aggregate: dict
    errors: list = field(default_factory=list)
    output_dir: str = ""
    wall_clock_seconds: float | None = None

    def to_json_dict(self) -> dict:
        # wall-clock deliberately omitted: summaries must be byte-identical
        # across re-runs with the same config
        return {
            "config_hash": self.config_hash,
            "kind": self.kind,
            "name": self.name,
            "seeds": list(self.seeds),
            "per_seed": self.per_seed,
            "aggregate": self.aggregate,
            "errors": self.errors,
        }


def _aggregate(per_seed: list) -> dict:
    """Mean and sample (n-1) std per metric over seeds where defined."""
    keys = sorted({k for entry in per_seed for k in entry["metrics"]})
    out = {}
    for key in keys:
        values = [
            entry["metrics"][key]
            for entry in per_seed
            if entry["metrics"].get(key) is not None
        ]
        if not values:
            out[key] = {"mean": None, "std": None, "n": 0}
            continue
        arr = np.asarray(values, dtype=float)
        std = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
        out[key] = {"mean": float(np.mean(arr)), "std": std, "n": len(arr)}
    return out


def _resolve_threads(threads: int) -> int:
    if os.environ.get("BSL_DETERMINISTIC") == "1":
        return 1
    return max(1, threads)


def run_experiment(
    config, seed_override=None, out_override=None, threads: int = 1
) -> RunSummary:
    """Run every seed of an experiment and write summary artifacts.

    ``config`` is an ExperimentConfig or a path to a JSON config file.
    Per-seed pipeline failures become error records; the summary is
    still written with the surviving seeds aggregated.
    """
    if not isinstance(config, ExperimentConfig):
        config = load_config(config)
    config = config.with_overrides(seeds=seed_override, output_dir=out_override)
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)

    started = time.perf_counter()
    seed_timings = {}
    results = {}
    errors = []

    def one_seed(seed: int):
        t0 = time.perf_counter()
        result = run_pipeline(config, seed, out_dir)
        return seed, result, time.perf_counter() - t0

    workers = _resolve_threads(threads)
    if workers == 1:
        for seed in config.seeds:
            try:
                _, result, elapsed = one_seed(seed)
                results[seed] = result
                seed_timings[seed] = elapsed
            except BslError as exc:
                errors.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(one_seed, seed): seed for seed in config.seeds}
            for future in concurrent.futures.as_completed(futures):
                seed = futures[future]
                try:
                    _, result, elapsed = future.result()
                    results[seed] = result
                    seed_timings[seed] = elapsed
                except BslError as exc:
                    errors.append(
                        {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}
                    )

    # reduce in seed order regardless of completion order
    per_seed = [
        {"seed": seed, "metrics": results[seed]["metrics"],
         "artifacts": results[seed]["artifacts"]}
        for seed in config.seeds
        if seed in results
    ]
    errors.sort(key=lambda e: e["seed"])
    summary = RunSummary(
        config_hash=config_hash(config),
        kind=config.kind,
        name=config.name,
        seeds=config.seeds,
        per_seed=per_seed,
        aggregate=_aggregate(per_seed),
        errors=errors,
        output_dir=out_dir,
        wall_clock_seconds=time.perf_counter() - started,
    )
    write_json(os.path.join(out_dir, SUMMARY_NAME), summary.to_json_dict())
    timing_lines = [f"total_seconds {summary.wall_clock_seconds:.3f}"]
    for seed in config.seeds:
        if seed in seed_timings:
            timing_lines.append(f"seed{seed}_seconds {seed_timings[seed]:.3f}")
    with open(os.path.join(out_dir, TIMING_NAME), "w", encoding="utf-8") as fh:
        fh.write("\n".join(timing_lines) + "\n")
    return summary


def _check_curve_artifact(path: str, metrics: dict, prefix: str) -> list:
    """Re-derive final/zero-shot from a curve CSV and compare exactly."""
    problems = []
    rows = read_csv(path)
    if not rows or rows[0][:4] != list(("generation", "api_calls", "train_loss", "dev_score")):
        return [f"{path}: missing or malformed header"]
    dev_scores = [float(r[3]) for r in rows[1:] if len(r) >= 4 and r[3] != ""]
    if not dev_scores:
        return [f"{path}: no dev scores recorded"]
    final_key = f"{prefix}final"
    zero_key = f"{prefix}zero_shot"
    if final_key in metrics and metrics[final_key] is not None:
        if max(dev_scores) != metrics[final_key]:
            problems.append(
                f"{path}: final {metrics[final_key]!r} does not match curve max "
                f"{max(dev_scores)!r}"
            )
    if zero_key in metrics and metrics[zero_key] is not None:
        if dev_scores[0] != metrics[zero_key]:
            problems.append(
                f"{path}: zero-shot {metrics[zero_key]!r} does not match first "
                f"curve point {dev_scores[0]!r}"
            )
    return problems


def load_summary(path: str, check_artifacts: bool = True) -> dict:
    """Load a summary.json, optionally reconciling per-seed artifacts.

    Cross-checks: every artifact file exists, and every *_curve.csv
    reproduces the exact final / zero-shot metric recorded for its seed.
    Raises ConfigError listing all discrepancies.
    """
    summary = read_json(path)
    if not check_artifacts:
        return summary
    base = os.path.dirname(os.path.abspath(path))
    problems = []
    for entry in summary.get("per_seed", []):
        for name, rel in entry.get("artifacts", {}).items():
            full = os.path.join(base, rel)
            if not os.path.exists(full):
                problems.append(f"seed {entry['seed']}: missing artifact {rel}")
                continue
            if name.endswith("_curve") or name == "curve":
                prefix = name[: -len("curve")]
                problems.extend(
                    _check_curve_artifact(full, entry["metrics"], prefix)
                )
    if problems:
        raise ConfigError(problems)
    return summary
