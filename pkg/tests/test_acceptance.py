"""Acceptance suite: one test per headline claim, run on the shipped
frozen configs. Each test pins its tolerances and asserts its wall-clock
budget, so `pytest -v tests/test_acceptance.py` prints one pass/fail
line per criterion.

 1. analytic prompt gradients match central finite differences
 2. closed-form inner/outer updates match autograd-free oracles exactly
 3. CMA-ES / sNES solve canonical spheres within budget
 4. meta-learning recovers a planted quadratic subspace; random ones don't
 5. learned subspace starts higher and crosses the score threshold sooner
    than random-subspace baselines
 6. similar sources beat diverse beat dissimilar sources
 7. more source tasks never hurt (within one standard error)
 8. full meta-learning beats its ablated variants
 9. CMA-ES and sNES agree within seed noise on an in-subspace workload
10. zero-shot selection is reliable at dev size 64 and worse at 8
11. byte-identical re-runs; evaluation budget never exceeded
"""

import dataclasses
import math
import os
import time

import numpy as np
import pytest

from bsl.dfo import BudgetedObjective, TuneConfig, black_box_tune, \
    cmaes_minimize, snes_minimize
from bsl.harness.config import (FrozenNetFamilyConfig, QuadraticFamilyConfig,
                                load_config)
from bsl.harness.io import read_csv
from bsl.harness.runner import run_experiment
from bsl.meta import (MetaConfig, inner_adapt, inner_adapt_closed_form,
                      meta_train, outer_grads, pretrain_prompt)
from bsl.numerics import RngStream, finite_diff_grad
from bsl.subspace import (Subspace, random_subspace_normal,
                          random_subspace_uniform, subspace_alignment)

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def run_config(name, out_dir, seeds=None):
    cfg = load_config(os.path.join(CONFIG_DIR, name))
    started = time.perf_counter()
    summary = run_experiment(cfg, seed_override=seeds,
                             out_override=str(out_dir))
    elapsed = time.perf_counter() - started
    assert summary.errors == [], f"seed failures: {summary.errors}"
    return cfg, summary, elapsed


def metrics_by_seed(summary, key):
    return [entry["metrics"][key] for entry in summary.per_seed]


@pytest.fixture(scope="session")
def acceptance_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def curve_run(acceptance_dir):
    return run_config("curve.json", acceptance_dir / "curve")


@pytest.fixture(scope="session")
def similarity_run(acceptance_dir):
    return run_config("similarity.json", acceptance_dir / "similarity")


@pytest.fixture(scope="session")
def source_count_run(acceptance_dir):
    return run_config("source_count.json", acceptance_dir / "source_count")


@pytest.fixture(scope="session")
def ablation_mode_run(acceptance_dir):
    return run_config("ablation_mode.json", acceptance_dir / "ablation_mode")


@pytest.fixture(scope="session")
def ablation_dfo_run(acceptance_dir):
    return run_config("ablation_dfo.json", acceptance_dir / "ablation_dfo")


@pytest.fixture(scope="session")
def selection_run(acceptance_dir):
    return run_config("selection_success.json", acceptance_dir / "selection")


def test_criterion_01_gradient_oracles():
    """Analytic grad_prompt vs central finite differences, 20 probes per
    family, relative error < 1e-5, within 30 s."""
    started = time.perf_counter()
    quad = QuadraticFamilyConfig(family_seed=42, dim=128, planted_rank=4,
                                 num_tasks=12, source_tasks=8).build()
    frozen = load_config(os.path.join(CONFIG_DIR, "curve.json")).family.build()
    for family, probe_scale in ((quad, 2.0), (frozen, 1.0)):
        rng = RngStream(314)
        for i in range(20):
            task = family.tasks[i % len(family.tasks)]
            data = task.sample_dataset(16, rng.substream(i))
            p = probe_scale * rng.substream(100 + i).normal(family.prompt_dim)
            analytic = task.grad_prompt(data, p)
            numeric = finite_diff_grad(lambda v: task.loss(data, v), p)
            rel = np.linalg.norm(analytic - numeric) / max(
                np.linalg.norm(numeric), 1e-12)
            assert rel < 1e-5, f"probe {i}: rel error {rel:.2e}"
    assert time.perf_counter() - started < 30.0


def test_criterion_02_closed_form_updates():
    """Single-step inner adaptation matches its closed form to 1e-12; the
    outer projection gradient matches a finite-difference Jacobian in W to
    rel 1e-5; the two-dimensional worked example is reproduced exactly."""
    started = time.perf_counter()
    rng = RngStream(7)
    quad = QuadraticFamilyConfig(family_seed=21, dim=12, planted_rank=3,
                                 num_tasks=6, source_tasks=3).build()
    for i, task in enumerate(quad.tasks):
        r = rng.substream(i)
        sub = Subspace(r.normal((12, 4)), r.normal(12))
        data = task.sample_dataset(4, r.substream(1))
        one_step = inner_adapt(sub, task, data, 0.05, 1)
        closed = inner_adapt_closed_form(sub, task, data, 0.05)
        assert np.max(np.abs(one_step - closed)) < 1e-12

        q_i = r.substream(2).normal(4)
        grads = outer_grads(sub, q_i, task, data)
        flat_w = sub.projection.ravel().copy()

        def loss_of_w(w):
            s = Subspace(w.reshape(12, 4), sub.offset)
            return task.loss(data, s.projection @ q_i + s.offset)

        numeric = finite_diff_grad(loss_of_w, flat_w).reshape(12, 4)
        rel = np.linalg.norm(grads.grad_projection - numeric) / max(
            np.linalg.norm(numeric), 1e-12)
        assert rel < 1e-5

    # worked example: D=2, d=1, W=(1,0)^T, p0=0, target (2,0), alpha=0.1
    from bsl.tasks import QuadraticTask
    task = QuadraticTask(task_id="wk", family_id="wk", task_type_tag="quadratic",
                         target_point=np.array([2.0, 0.0]),
                         coords=np.array([2.0]))
    sub = Subspace(np.array([[1.0], [0.0]]), np.zeros(2))
    data = task.sample_dataset(1, RngStream(0))
    q_i = inner_adapt(sub, task, data, 0.1, 1)
    assert q_i[0] == 0.2  # exact in floating point
    grads = outer_grads(sub, q_i, task, data)
    assert grads.grad_offset[0] == 0.2 - 2.0
    assert grads.grad_offset[1] == 0.0
    assert grads.grad_projection[0, 0] == (0.2 - 2.0) * 0.2
    assert grads.grad_projection[0, 0] == pytest.approx(-0.36, abs=1e-15)
    assert grads.grad_projection[1, 0] == 0.0
    assert time.perf_counter() - started < 30.0


def test_criterion_03_dfo_correctness():
    """CMA-ES reaches sphere-d20 loss < 1e-8 in exactly 400 generations of
    8000 evaluations; sNES reaches sphere-d10 loss < 1e-6; best-so-far is
    monotone and the covariance stays positive definite; within 1 min."""
    started = time.perf_counter()

    def sphere(q):
        return float(q @ q)

    cfg = TuneConfig(budget=8000, population=20)
    obj = BudgetedObjective(sphere, cfg.budget)
    res = cmaes_minimize(obj, 20, cfg, RngStream(0))
    assert res.best_loss < 1e-8
    assert len(res.trace) == 400
    assert obj.call_count == 8000
    best = [rec.best_loss for rec in res.trace]
    assert all(b1 <= b0 for b0, b1 in zip(best, best[1:]))
    assert all(rec.cov_eig_min > 0.0 for rec in res.trace)
    assert all(rec.cov_eig_min > 1e-14 * rec.cov_eig_max for rec in res.trace)

    obj = BudgetedObjective(sphere, cfg.budget)
    res = snes_minimize(obj, 10, cfg, RngStream(1))
    assert res.best_loss < 1e-6
    best = [rec.best_loss for rec in res.trace]
    assert all(b1 <= b0 for b0, b1 in zip(best, best[1:]))
    assert time.perf_counter() - started < 60.0


def test_criterion_04_planted_subspace_recovery():
    """On a 128-dimensional quadratic family with a planted rank-4 subspace
    and 8 sources, the meta-learned 4-dimensional subspace tunes every
    held-out task below 1e-3 loss and aligns within 0.15 rad, while equal-d
    random subspaces stay above 1e-2 on every seed; within 3 min."""
    started = time.perf_counter()
    fc = QuadraticFamilyConfig(family_seed=42, dim=128, planted_rank=4,
                               num_tasks=13, source_tasks=8)
    family = fc.build()
    sources = family.tasks[:8]
    eval_task = family.tasks[8]
    held_out = family.tasks[9:13]
    basis = family.diagnostics()["planted_basis"]
    source_family = dataclasses.replace(family, tasks=tuple(sources))
    meta_cfg = MetaConfig(inner_lr=0.03, outer_lr=0.01, tasks_per_iteration=4,
                          inner_steps=24, inner_batch_size=8,
                          sampled_dataset_size=16, eval_every=400,
                          max_iterations=20000, subspace_dim=4,
                          eval_train_size=8, eval_test_size=8)
    tune_cfg = TuneConfig(budget=800, population=20, dev_eval_every=10)

    for seed in (0, 1, 2):
        rng = RngStream(seed)
        sub, _ = meta_train(source_family, eval_task, meta_cfg, rng.substream(1))
        angle = subspace_alignment(sub, basis)["max_angle"]
        assert angle < 0.15, f"seed {seed}: max principal angle {angle:.3f}"
        pre = pretrain_prompt(sources, 128, lr=0.5, steps=500,
                              rng=rng.substream(2), dataset_size=16)
        baselines = (
            random_subspace_uniform(128, 4, 0.5, rng.substream(3), offset=pre),
            random_subspace_normal(128, 4, 0.5, rng.substream(4), offset=pre),
        )
        for j, task in enumerate(held_out):
            train = task.sample_dataset(8, rng.substream(50 + j))
            dev = task.sample_dataset(8, rng.substream(70 + j))
            tuned = black_box_tune(sub, task, train, dev, tune_cfg,
                                   rng.substream(5).substream(j))
            assert tuned.best_train_loss < 1e-3, (
                f"seed {seed} task {j}: meta loss {tuned.best_train_loss:.2e}")
            for baseline in baselines:
                base = black_box_tune(baseline, task, train, dev, tune_cfg,
                                      rng.substream(6).substream(j))
                assert base.best_train_loss > 1e-2, (
                    f"seed {seed} task {j}: baseline loss "
                    f"{base.best_train_loss:.2e}")
    assert time.perf_counter() - started < 180.0


def test_criterion_05_convergence_vs_random_subspaces(curve_run):
    """The meta-learned subspace's zero-shot dev score exceeds both random
    baselines' and it crosses the score threshold in strictly fewer
    objective calls, on every one of 3 seeds; within 5 min."""
    cfg, summary, elapsed = curve_run
    assert len(summary.per_seed) == 3
    for entry in summary.per_seed:
        m = entry["metrics"]
        seed = entry["seed"]
        assert m["bsl_zero_shot"] > m["uniform_zero_shot"], (
            f"seed {seed}: zero-shot {m['bsl_zero_shot']} vs uniform "
            f"{m['uniform_zero_shot']}")
        assert m["bsl_zero_shot"] > m["normal_zero_shot"], (
            f"seed {seed}: zero-shot {m['bsl_zero_shot']} vs normal "
            f"{m['normal_zero_shot']}")
        ours = m["bsl_calls_to_threshold"]
        assert ours is not None, f"seed {seed}: never crossed threshold"
        for name in ("uniform", "normal"):
            theirs = m[f"{name}_calls_to_threshold"]
            theirs = math.inf if theirs is None else theirs
            assert ours < theirs, (
                f"seed {seed}: {ours} calls vs {name} {theirs}")
    assert elapsed < 300.0


def test_criterion_06_source_similarity_ordering(similarity_run):
    """Final tuned score orders similar > diverse > dissimilar in seed-mean,
    and the similar-dissimilar gap is positive on every seed; within 5 min."""
    cfg, summary, elapsed = similarity_run
    agg = summary.aggregate
    sim = agg["similar_final"]["mean"]
    div = agg["diverse_final"]["mean"]
    dis = agg["dissimilar_final"]["mean"]
    assert sim > div > dis, f"means: {sim:.4f}, {div:.4f}, {dis:.4f}"
    gaps = metrics_by_seed(summary, "similar_minus_dissimilar")
    assert all(g > 0 for g in gaps), f"per-seed gaps: {gaps}"
    assert elapsed < 300.0


def test_criterion_07_source_count_monotone(source_count_run):
    """Seed-mean final score is nondecreasing over source counts {1, 2, 4}
    within one standard error of the paired per-seed differences; 5 min."""
    cfg, summary, elapsed = source_count_run
    counts = cfg.options.counts
    finals = {c: np.array(metrics_by_seed(summary, f"count{c}_final"))
              for c in counts}
    for lo, hi in zip(counts, counts[1:]):
        diffs = finals[hi] - finals[lo]
        se = diffs.std(ddof=1) / np.sqrt(len(diffs))
        assert diffs.mean() >= -se, (
            f"count {lo}->{hi}: mean diff {diffs.mean():.4f}, SE {se:.4f}")
    assert elapsed < 300.0


def test_criterion_08_meta_variant_ablation(ablation_mode_run):
    """Full meta-learning (both W and p0, with inner adaptation) beats the
    ALL / SPC / INI ablations in seed-mean final score; within 8 min."""
    cfg, summary, elapsed = ablation_mode_run
    ours = summary.aggregate["BSL_final"]["mean"]
    for mode in ("ALL", "SPC", "INI"):
        theirs = summary.aggregate[f"{mode}_final"]["mean"]
        assert ours > theirs, f"BSL {ours:.4f} vs {mode} {theirs:.4f}"
    assert elapsed < 480.0


def test_criterion_09_dfo_robustness(ablation_dfo_run):
    """On the planted-in-subspace workload both optimizers reach the success
    threshold on every seed and their mean final scores differ by less than
    the cross-seed standard deviation; within 3 min."""
    cfg, summary, elapsed = ablation_dfo_run
    assert all(v == 1 for v in metrics_by_seed(summary, "cmaes_reached"))
    assert all(v == 1 for v in metrics_by_seed(summary, "snes_reached"))
    cma = np.array(metrics_by_seed(summary, "cmaes_final"))
    sns = np.array(metrics_by_seed(summary, "snes_final"))
    gap = abs(cma.mean() - sns.mean())
    spread = max(cma.std(ddof=1), sns.std(ddof=1))
    assert gap < spread, f"mean gap {gap:.3e} vs cross-seed std {spread:.3e}"
    assert elapsed < 180.0


def test_criterion_10_selection_success(selection_run):
    """Zero-shot subspace selection from a 5-entry catalog succeeds in at
    least 95% of 100 trials at dev size 64, and strictly less often at dev
    size 8; within 2 min."""
    cfg, summary, elapsed = selection_run
    m = summary.per_seed[0]["metrics"]
    assert m["rate_at_64"] >= 0.95, f"rate at 64: {m['rate_at_64']}"
    assert m["rate_at_8"] < m["rate_at_64"], (
        f"rate at 8 ({m['rate_at_8']}) not below rate at 64 "
        f"({m['rate_at_64']})")
    assert elapsed < 120.0


def test_criterion_11_determinism_and_budget(acceptance_dir, curve_run,
                                             similarity_run, ablation_dfo_run):
    """Re-running an experiment with the same config and seeds produces
    byte-identical CSV/JSON/subspace artifacts, and no recorded tuning run
    ever spends more objective calls than its budget."""
    out = acceptance_dir / "determinism"
    cfg = load_config(os.path.join(CONFIG_DIR, "tune.json"))

    def snapshot():
        return {p.name: p.read_bytes() for p in sorted(out.iterdir())
                if p.name != "timing.log"}

    first_summary = run_experiment(cfg, out_override=str(out))
    first = snapshot()
    run_experiment(cfg, out_override=str(out))
    assert snapshot() == first
    assert first_summary.per_seed[0]["metrics"]["objective_calls"] <= \
        cfg.tune.budget

    # every curve recorded by the expensive runs respects its call budget
    for run_cfg, summary, _ in (curve_run, similarity_run, ablation_dfo_run):
        budget = run_cfg.tune.budget
        base = summary.output_dir
        for entry in summary.per_seed:
            for name, rel in entry["artifacts"].items():
                if not rel.endswith("_curve.csv"):
                    continue
                rows = read_csv(os.path.join(base, rel))
                calls = [int(r[1]) for r in rows[1:]]
                assert max(calls) <= budget, f"{rel}: {max(calls)} > {budget}"
