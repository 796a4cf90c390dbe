"""Per-kind experiment pipelines.

Every pipeline runs one (config, seed) pair and returns a dict with
"metrics" (flat name -> number or None) and "artifacts" (name ->
path relative to the output directory). The runner aggregates metrics
across seeds.

Randomness layout per seed: RngStream(seed) with fixed substream
indices: 1 meta-training, 2 pretraining, 3 uniform baseline, 4 normal
baseline, 5 tuning, 6 per-kind extras. Variant runs (modes, counts,
algorithms, sweep values) reuse the same substreams so they differ only
in the quantity under study (common random numbers). Few-shot target
data comes from the family seed, not the run seed: the data split is
part of the problem, the seed varies the algorithms.
"""

from __future__ import annotations

import dataclasses
import os

import numpy as np

from ..dfo import TuneConfig, black_box_tune
from ..errors import BslError, ConfigError
from ..meta import MetaConfig, meta_train, pretrain_prompt
from ..numerics import RngStream
from ..selection import (
    CatalogEntry,
    SubspaceCatalog,
    select_by_type,
    select_by_zero_shot,
    selection_success_experiment,
    success_csv_rows,
)
from ..subspace import (
    Subspace,
    load_subspace,
    random_subspace_normal,
    random_subspace_uniform,
    save_subspace,
    subspace_alignment,
)
from .io import write_csv
from ..errors import SelectionError

__all__ = ["PIPELINES", "compare_methods", "run_pipeline"]

CURVE_HEADER = ("generation", "api_calls", "train_loss", "dev_score")


def compare_methods(curves: dict, threshold: float) -> dict:
    """Calls-to-threshold and area under the dev-score curve per method.

    ``curves`` maps method name to a list of (api_calls, dev_score)
    pairs in call order. A method that never crosses gets None (JSON
    null); the area uses the trapezoid rule over recorded points.
    """
    calls_to_threshold = {}
    auc = {}
    for name, pts in curves.items():
        if not pts:
            raise BslError(f"method {name!r} has an empty curve")
        crossed = None
        for calls, score in pts:
            if score >= threshold:
                crossed = calls
                break
        calls_to_threshold[name] = crossed
        area = 0.0
        for (c0, s0), (c1, s1) in zip(pts, pts[1:]):
            area += 0.5 * (s0 + s1) * (c1 - c0)
        auc[name] = area
    return {"calls_to_threshold": calls_to_threshold, "auc": auc}


def _dev_points(result) -> list:
    return [
        (pt.api_calls, pt.dev_score)
        for pt in result.curve
        if pt.dev_score is not None
    ]


def _curve_rows(result) -> list:
    rows = [list(CURVE_HEADER)]
    for pt in result.curve:
        rows.append([pt.generation, pt.api_calls, pt.train_loss, pt.dev_score])
    return rows


def _split_family(family, source_count: int):
    sources = list(family.tasks[:source_count])
    eval_task = family.tasks[source_count]
    target = family.tasks[source_count + 1]
    return sources, eval_task, target


def _family_parts(config, family_cfg=None):
    fc = family_cfg if family_cfg is not None else config.family
    family = fc.build()
    sources, eval_task, target = _split_family(family, fc.source_tasks)
    data_rng = RngStream(fc.family_seed)
    train = target.sample_dataset(config.options.train_size, data_rng.substream(3))
    dev = target.sample_dataset(config.options.dev_size, data_rng.substream(4))
    return family, sources, eval_task, target, train, dev


def _multi_target_data(config, family, family_cfg=None):
    """Held-out targets with family-seeded few-shot splits.

    Targets follow the eval task; data streams are offset so target j
    always sees the same split regardless of how many targets a config
    uses.
    """
    fc = family_cfg if family_cfg is not None else config.family
    count = config.options.target_count
    first = fc.source_tasks + 1
    if first + count > len(family.tasks):
        raise ConfigError(
            [f"options.target_count: family has {len(family.tasks)} tasks, "
             f"needs {first + count}"]
        )
    data_rng = RngStream(fc.family_seed)
    out = []
    for j in range(count):
        task = family.tasks[first + j]
        train = task.sample_dataset(config.options.train_size, data_rng.substream(30 + j))
        dev = task.sample_dataset(config.options.dev_size, data_rng.substream(40 + j))
        out.append((task, train, dev))
    return out


def _tune_targets(config, sub, target_data, tune_rng, out_dir, label, seed):
    """Tune one subspace on every held-out target; mean final score."""
    finals = []
    artifacts = {}
    for j, (task, train, dev) in enumerate(target_data):
        result = black_box_tune(
            sub, task, train, dev, config.tune, tune_rng.substream(j)
        )
        path = f"seed{seed}_{label}_t{j}_curve.csv"
        write_csv(os.path.join(out_dir, path), _curve_rows(result))
        artifacts[f"{label}_t{j}_curve"] = path
        finals.append(result.best_dev_score)
    return float(np.mean(finals)), artifacts


def _pretrained(config, sources, dim, rng):
    opt = config.options
    return pretrain_prompt(
        sources,
        dim,
        lr=opt.pretrain_lr,
        steps=opt.pretrain_steps,
        rng=rng,
        dataset_size=opt.pretrain_dataset_size,
    )


def _baseline_scales(config):
    d = config.meta.subspace_dim
    default = 1.0 / np.sqrt(d)
    opt = config.options
    half_width = opt.baseline_half_width if opt.baseline_half_width is not None else default
    std = opt.baseline_std if opt.baseline_std is not None else default
    return half_width, std


def run_meta_train(config, seed, out_dir):
    rng = RngStream(seed)
    family, sources, eval_task, target, train, dev = _family_parts(config)
    source_family = dataclasses.replace(family, tasks=tuple(sources))
    sub, trace = meta_train(source_family, eval_task, config.meta, rng.substream(1))
    sub_path = f"seed{seed}_subspace.bsl"
    trace_path = f"seed{seed}_meta_trace.csv"
    save_subspace(sub, os.path.join(out_dir, sub_path))
    write_csv(os.path.join(out_dir, trace_path), trace.csv_rows())
    return {
        "metrics": {
            "best_eval_score": trace.best_eval_score,
            "best_iteration": trace.best_iteration,
            "zero_shot": float(target.score(dev, sub.offset)),
        },
        "artifacts": {"subspace": sub_path, "meta_trace": trace_path},
    }


def _tune_once(config, sub, target, train, dev, rng, out_dir, label, seed,
               tune_cfg=None):
    result = black_box_tune(
        sub, target, train, dev, tune_cfg or config.tune, rng
    )
    path = f"seed{seed}_{label}_curve.csv"
    write_csv(os.path.join(out_dir, path), _curve_rows(result))
    return result, path


def run_tune(config, seed, out_dir):
    rng = RngStream(seed)
    family, sources, eval_task, target, train, dev = _family_parts(config)
    artifacts = {}
    if config.options.subspace_path is not None:
        sub = load_subspace(config.options.subspace_path)
    else:
        source_family = dataclasses.replace(family, tasks=tuple(sources))
        sub, trace = meta_train(source_family, eval_task, config.meta, rng.substream(1))
        sub_path = f"seed{seed}_subspace.bsl"
        save_subspace(sub, os.path.join(out_dir, sub_path))
        artifacts["subspace"] = sub_path
    result, curve_path = _tune_once(
        config, sub, target, train, dev, rng.substream(5), out_dir, "tune", seed
    )
    artifacts["curve"] = curve_path
    return {
        "metrics": {
            "final": result.best_dev_score,
            "best_train_loss": result.best_train_loss,
            "zero_shot": float(target.score(dev, sub.offset)),
            "objective_calls": result.objective_calls,
        },
        "artifacts": artifacts,
    }


def run_select(config, seed, out_dir):
    opt = config.options
    family, sources, eval_task, target, train, dev_fixed = _family_parts(config)
    entries = []
    for i, path in enumerate(opt.catalog_paths):
        sub = load_subspace(path)
        if opt.catalog_tags:
            tag = opt.catalog_tags[i]
        else:
            tag = str(sub.metadata.get("task_type_tag", "untagged"))
        entries.append(CatalogEntry(subspace=sub, task_type_tag=tag,
                                    source_description=path))
    catalog = SubspaceCatalog(tuple(entries))
    rng = RngStream(seed)
    dev = target.sample_dataset(opt.dev_size, rng.substream(6))
    picked = select_by_zero_shot(catalog, target, dev)
    metrics = {
        "selected_index": picked.index,
        "selected_score": picked.scores[picked.index],
    }
    if opt.target_type_tag is not None:
        try:
            by_type = select_by_type(catalog, opt.target_type_tag)
            type_index = next(
                i for i, e in enumerate(catalog.entries) if e.subspace is by_type
            )
        except SelectionError:
            type_index = None
        metrics["type_selected_index"] = type_index
    rows = [("index", "tag", "zero_shot_score", "selected")]
    for i, entry in enumerate(catalog.entries):
        rows.append((str(i), entry.task_type_tag, repr(picked.scores[i]),
                     "1" if i == picked.index else "0"))
    path = f"seed{seed}_selection.csv"
    write_csv(os.path.join(out_dir, path), rows)
    return {"metrics": metrics, "artifacts": {"selection": path}}


def run_curve(config, seed, out_dir):
    """Convergence comparison: meta subspace vs random baselines.

    Both baselines share the pooled-pretrained offset; the meta run uses
    its learned offset, so the zero-shot gap and the calls-to-threshold
    gap measure what meta-learning adds.
    """
    rng = RngStream(seed)
    family, sources, eval_task, target, train, dev = _family_parts(config)
    d = config.meta.subspace_dim
    source_family = dataclasses.replace(family, tasks=tuple(sources))
    sub, trace = meta_train(source_family, eval_task, config.meta, rng.substream(1))
    pre = _pretrained(config, sources, family.prompt_dim, rng.substream(2))
    half_width, std = _baseline_scales(config)
    methods = {
        "bsl": sub,
        "uniform": random_subspace_uniform(
            family.prompt_dim, d, half_width, rng.substream(3), offset=pre
        ),
        "normal": random_subspace_normal(
            family.prompt_dim, d, std, rng.substream(4), offset=pre
        ),
    }
    sub_path = f"seed{seed}_subspace.bsl"
    save_subspace(sub, os.path.join(out_dir, sub_path))
    artifacts = {"subspace": sub_path}
    metrics = {}
    curves = {}
    for name, subspace in methods.items():
        result, path = _tune_once(
            config, subspace, target, train, dev, rng.substream(5), out_dir,
            name, seed
        )
        artifacts[f"{name}_curve"] = path
        curves[name] = _dev_points(result)
        metrics[f"{name}_final"] = result.best_dev_score
        metrics[f"{name}_zero_shot"] = curves[name][0][1]
    cmp = compare_methods(curves, config.options.threshold)
    for name in methods:
        metrics[f"{name}_calls_to_threshold"] = cmp["calls_to_threshold"][name]
        metrics[f"{name}_auc"] = cmp["auc"][name]
    return {"metrics": metrics, "artifacts": artifacts}


def run_similarity(config, seed, out_dir):
    """Source-similarity comparison on a shared target task.

    similar: sources from the target's family; dissimilar: sources from
    an unrelated family; diverse: half and half. The meta-eval task
    always comes from the family of the first source so no variant sees
    the target family unless its sources do.
    """
    rng = RngStream(seed)
    family, sources_a, eval_a, _t, _tr, _dv = _family_parts(config)
    fam_b, sources_b, eval_b, _tb, _trb, _dvb = _family_parts(
        config, config.dissimilar_family
    )
    if fam_b.prompt_dim != family.prompt_dim:
        raise ConfigError(["dissimilar_family: prompt dimension must match family"])
    target_data = _multi_target_data(config, family)
    m = len(sources_a)
    half = (m + 1) // 2
    variants = {
        "similar": (sources_a, eval_a),
        "diverse": (sources_a[:half] + sources_b[half:m], eval_a),
        "dissimilar": (sources_b, eval_b),
    }
    metrics = {}
    artifacts = {}
    for name, (sources, eval_task) in variants.items():
        source_family = dataclasses.replace(family, tasks=tuple(sources))
        sub, trace = meta_train(
            source_family, eval_task, config.meta, rng.substream(1)
        )
        final, arts = _tune_targets(
            config, sub, target_data, rng.substream(5), out_dir, name, seed
        )
        artifacts.update(arts)
        metrics[f"{name}_final"] = final
    metrics["similar_minus_dissimilar"] = (
        metrics["similar_final"] - metrics["dissimilar_final"]
    )
    return {"metrics": metrics, "artifacts": artifacts}


def run_source_count(config, seed, out_dir):
    rng = RngStream(seed)
    family, sources, eval_task, _t, _tr, _dv = _family_parts(config)
    counts = config.options.counts
    if max(counts) > len(sources):
        raise ConfigError(
            [f"options.counts: max {max(counts)} exceeds available sources "
             f"{len(sources)}"]
        )
    target_data = _multi_target_data(config, family)
    metrics = {}
    artifacts = {}
    for count in counts:
        source_family = dataclasses.replace(family, tasks=tuple(sources[:count]))
        sub, trace = meta_train(
            source_family, eval_task, config.meta, rng.substream(1)
        )
        final, arts = _tune_targets(
            config, sub, target_data, rng.substream(5), out_dir,
            f"count{count}", seed
        )
        artifacts.update(arts)
        metrics[f"count{count}_final"] = final
    return {"metrics": metrics, "artifacts": artifacts}


def run_selection_success(config, seed, out_dir):
    """Zero-shot selection reliability over development-set sizes.

    The catalog holds subspaces whose offsets are scaled copies of the
    pooled-pretrained prompt, so their true zero-shot quality is ordered
    by the scale; small dev sets confuse adjacent entries.
    """
    opt = config.options
    rng = RngStream(seed)
    family, sources, eval_task, target, train, dev = _family_parts(config)
    d = config.meta.subspace_dim
    pre = _pretrained(config, sources, family.prompt_dim, rng.substream(2))
    half_width, _std = _baseline_scales(config)
    entries = []
    for i, gamma in enumerate(opt.offset_gammas):
        sub = random_subspace_uniform(
            family.prompt_dim, d, half_width, rng.substream(3).substream(i),
            offset=gamma * pre,
        )
        entries.append(
            CatalogEntry(
                subspace=sub,
                task_type_tag=family.task_type_tag,
                source_description=f"offset_gamma={gamma}",
            )
        )
    catalog = SubspaceCatalog(tuple(entries))
    target_family = dataclasses.replace(
        family, tasks=(target,), family_id=family.family_id + "-target"
    )
    results = selection_success_experiment(
        catalog,
        target_family,
        list(opt.dev_sizes),
        opt.trials,
        rng.substream(6),
        best_index=opt.best_entry,
    )
    path = f"seed{seed}_success.csv"
    write_csv(os.path.join(out_dir, path), success_csv_rows(results))
    metrics = {f"rate_at_{r.dev_size}": r.rate for r in results}
    return {"metrics": metrics, "artifacts": {"success": path}}


def run_ablation_mode(config, seed, out_dir):
    rng = RngStream(seed)
    family, sources, eval_task, _t, _tr, _dv = _family_parts(config)
    target_data = _multi_target_data(config, family)
    metrics = {}
    artifacts = {}
    for mode in config.options.modes:
        meta_cfg = dataclasses.replace(config.meta, mode=mode)
        source_family = dataclasses.replace(family, tasks=tuple(sources))
        sub, trace = meta_train(source_family, eval_task, meta_cfg, rng.substream(1))
        final, arts = _tune_targets(
            config, sub, target_data, rng.substream(5), out_dir, mode.lower(), seed
        )
        artifacts.update(arts)
        metrics[f"{mode}_final"] = final
    return {"metrics": metrics, "artifacts": artifacts}


def run_ablation_dfo(config, seed, out_dir):
    """Optimizer robustness on a workload whose optimum lies in-subspace.

    The tuned subspace is the family's planted one, so both optimizers
    can reach the target exactly; the comparison isolates the algorithm.
    """
    rng = RngStream(seed)
    family, sources, eval_task, target, train, dev = _family_parts(config)
    diag = family.diagnostics()
    if "planted_basis" not in diag:
        raise ConfigError(["ablation-dfo requires a quadratic family"])
    sub = Subspace(
        projection=np.ascontiguousarray(diag["planted_basis"]),
        offset=np.asarray(diag["center"], dtype=float),
        metadata={"source_family_id": family.family_id, "planted": True},
    )
    metrics = {}
    artifacts = {}
    for algorithm in config.options.algorithms:
        tune_cfg = dataclasses.replace(config.tune, algorithm=algorithm)
        result, path = _tune_once(
            config, sub, target, train, dev, rng.substream(5), out_dir,
            algorithm, seed, tune_cfg=tune_cfg
        )
        artifacts[f"{algorithm}_curve"] = path
        metrics[f"{algorithm}_final"] = result.best_dev_score
        metrics[f"{algorithm}_best_loss"] = result.best_train_loss
        metrics[f"{algorithm}_reached"] = (
            1 if result.best_dev_score >= config.options.threshold else 0
        )
    return {"metrics": metrics, "artifacts": artifacts}


def _sweep(config, seed, out_dir, label, make_variant):
    rng = RngStream(seed)
    metrics = {}
    artifacts = {}
    for value in config.options.values:
        cfg_v = make_variant(config, value)
        family, sources, eval_task, target, train, dev = _family_parts(cfg_v)
        source_family = dataclasses.replace(family, tasks=tuple(sources))
        sub, trace = meta_train(
            source_family, eval_task, cfg_v.meta, rng.substream(1)
        )
        result, path = _tune_once(
            cfg_v, sub, target, train, dev, rng.substream(5), out_dir,
            f"{label}{value}", seed
        )
        artifacts[f"{label}{value}_curve"] = path
        metrics[f"{label}{value}_final"] = result.best_dev_score
    values = list(config.options.values)
    finals = [metrics[f"{label}{v}_final"] for v in values]
    metrics["spread"] = max(finals) - min(finals)
    return {"metrics": metrics, "artifacts": artifacts}


def run_sweep_length(config, seed, out_dir):
    def make_variant(cfg, value):
        if not hasattr(cfg.family, "prompt_len"):
            raise ConfigError(["sweep-length requires a frozen_net family"])
        return dataclasses.replace(
            cfg, family=dataclasses.replace(cfg.family, prompt_len=int(value))
        )

    return _sweep(config, seed, out_dir, "len", make_variant)


def run_sweep_dim(config, seed, out_dir):
    def make_variant(cfg, value):
        return dataclasses.replace(
            cfg, meta=dataclasses.replace(cfg.meta, subspace_dim=int(value))
        )

    return _sweep(config, seed, out_dir, "dim", make_variant)


PIPELINES = {
    "meta-train": run_meta_train,
    "tune": run_tune,
    "select": run_select,
    "curve": run_curve,
    "similarity": run_similarity,
    "source-count": run_source_count,
    "selection-success": run_selection_success,
    "ablation-mode": run_ablation_mode,
    "ablation-dfo": run_ablation_dfo,
    "sweep-length": run_sweep_length,
    "sweep-dim": run_sweep_dim,
}


def run_pipeline(config, seed, out_dir):
    if config.kind not in PIPELINES:
        raise ConfigError([f"kind: no pipeline for {config.kind!r}"])
    return PIPELINES[config.kind](config, seed, out_dir)
