"""Harness tests: config parsing/validation, deterministic atomic IO,
per-kind pipelines, the seed runner, summary reconciliation, and the CLI.

Pipelines run on a deliberately tiny quadratic family so every test stays
fast; geometry-dependent orderings are the acceptance suite's job."""

import json
import os

import numpy as np
import pytest

from bsl.errors import ConfigError, ShapeError
from bsl.harness.cli import main
from bsl.harness.config import (EXPERIMENT_KINDS, FrozenNetFamilyConfig,
                                QuadraticFamilyConfig, config_from_dict,
                                config_hash, load_config)
from bsl.harness.io import (atomic_write_bytes, atomic_write_text, cell,
                            read_csv, read_json, write_csv, write_json)
from bsl.harness.pipelines import PIPELINES, compare_methods, run_pipeline
from bsl.harness.runner import (_aggregate, _resolve_threads, load_summary,
                                run_experiment)
from bsl.meta import MetaTrace
from bsl.numerics import RngStream
from bsl.subspace import Subspace, save_subspace


def quad_config(kind="meta-train", **extra):
    """Small, fast quadratic experiment config as a plain JSON-style dict."""
    data = {
        "kind": kind,
        "name": f"test-{kind}",
        "seeds": [0, 1],
        "output_dir": "runs",
        "family": {
            "kind": "quadratic",
            "family_seed": 77,
            "dim": 16,
            "planted_rank": 2,
            "num_tasks": 6,
            "source_tasks": 2,
        },
        "meta": {
            "inner_lr": 0.1,
            "outer_lr": 0.02,
            "tasks_per_iteration": 2,
            "inner_steps": 4,
            "inner_batch_size": 4,
            "sampled_dataset_size": 8,
            "eval_every": 10,
            "max_iterations": 30,
            "subspace_dim": 2,
            "eval_train_size": 8,
            "eval_test_size": 8,
        },
        "tune": {"budget": 500, "population": 10, "dev_eval_every": 5},
        "options": {
            "train_size": 16,
            "dev_size": 32,
            "pretrain_lr": 0.5,
            "pretrain_steps": 50,
            "pretrain_dataset_size": 16,
            "threshold": -0.01,
        },
    }
    data.update(extra)
    return data


def run_one(tmp_path, data, seed=0):
    cfg = config_from_dict(data, base_dir=str(tmp_path))
    out = tmp_path / "out"
    out.mkdir(exist_ok=True)
    return cfg, run_pipeline(cfg, seed, str(out)), out


class TestConfigValidation:
    def test_minimal_config_fills_defaults(self):
        cfg = config_from_dict(quad_config())
        assert cfg.kind == "meta-train"
        assert cfg.seeds == (0, 1)
        assert cfg.name == "test-meta-train"
        assert isinstance(cfg.family, QuadraticFamilyConfig)
        assert cfg.meta.max_iterations == 30
        assert cfg.tune.budget == 500
        assert cfg.options.threshold == -0.01
        assert cfg.dissimilar_family is None

    def test_all_violations_collected_at_once(self):
        data = quad_config()
        data["kind"] = "nonsense"
        data["seeds"] = []
        del data["family"]
        data["mystery"] = 1
        data["meta"]["bogus_field"] = 3
        with pytest.raises(ConfigError) as exc:
            config_from_dict(data)
        text = "\n".join(exc.value.violations)
        assert len(exc.value.violations) >= 5
        for fragment in ("kind:", "seeds:", "family: required",
                         "mystery", "meta.bogus_field"):
            assert fragment in text

    def test_unknown_family_kind_rejected(self):
        data = quad_config()
        data["family"]["kind"] = "banana"
        with pytest.raises(ConfigError) as exc:
            config_from_dict(data)
        assert any("family.kind" in v for v in exc.value.violations)

    def test_nested_meta_violations_are_prefixed(self):
        data = quad_config()
        data["meta"]["inner_lr"] = -1.0
        with pytest.raises(ConfigError) as exc:
            config_from_dict(data)
        assert any(v.startswith("meta:") for v in exc.value.violations)

    def test_seeds_reject_booleans(self):
        data = quad_config()
        data["seeds"] = [0, True]
        with pytest.raises(ConfigError) as exc:
            config_from_dict(data)
        assert any("seeds" in v for v in exc.value.violations)

    def test_similarity_requires_second_family(self):
        data = quad_config(kind="similarity")
        with pytest.raises(ConfigError) as exc:
            config_from_dict(data)
        assert any("dissimilar_family" in v for v in exc.value.violations)

    def test_select_requires_catalog(self):
        data = quad_config(kind="select")
        with pytest.raises(ConfigError) as exc:
            config_from_dict(data)
        assert any("catalog_paths" in v for v in exc.value.violations)

    def test_target_count_checked_against_family_size(self):
        data = quad_config(kind="similarity")
        data["dissimilar_family"] = dict(data["family"], family_seed=99)
        data["options"]["target_count"] = 4  # needs 2 + 1 + 4 = 7 > 6 tasks
        with pytest.raises(ConfigError) as exc:
            config_from_dict(data)
        assert any("family.num_tasks" in v for v in exc.value.violations)

    def test_relative_output_dir_resolved_against_config_dir(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(quad_config()), encoding="utf-8")
        cfg = load_config(str(path))
        assert cfg.output_dir == str(tmp_path / "runs")

    def test_load_config_reports_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError) as exc:
            load_config(str(path))
        assert any("not valid JSON" in v for v in exc.value.violations)
        with pytest.raises(ConfigError) as exc:
            load_config(str(tmp_path / "absent.json"))
        assert any("cannot read" in v for v in exc.value.violations)

    def test_with_overrides(self):
        cfg = config_from_dict(quad_config())
        out = cfg.with_overrides(seeds=[7, 8], output_dir="elsewhere")
        assert out.seeds == (7, 8)
        assert out.output_dir == "elsewhere"
        # None keeps the original values
        same = cfg.with_overrides()
        assert same.seeds == cfg.seeds and same.output_dir == cfg.output_dir

    def test_config_hash_stable_and_sensitive(self):
        a = config_from_dict(quad_config())
        b = config_from_dict(quad_config())
        assert config_hash(a) == config_hash(b)
        assert len(config_hash(a)) == 64
        c = config_from_dict(quad_config(seeds=[0, 2]))
        assert config_hash(a) != config_hash(c)

    def test_every_kind_has_a_pipeline(self):
        assert set(PIPELINES) == set(EXPERIMENT_KINDS)


class TestFamilyConfigs:
    def test_quadratic_build(self):
        fc = QuadraticFamilyConfig(dim=16, planted_rank=2, num_tasks=5,
                                   source_tasks=2, family_seed=3)
        family = fc.build()
        assert fc.prompt_dim == 16
        assert family.prompt_dim == 16
        assert len(family.tasks) == 5
        assert "planted_basis" in family.diagnostics()
        # same seed, same family
        again = fc.build()
        assert np.array_equal(family.tasks[0].target_point,
                              again.tasks[0].target_point)

    def test_frozen_net_build(self):
        fc = FrozenNetFamilyConfig(layers=2, hidden=8, prompt_len=3,
                                   classes=2, num_tasks=4, source_tasks=2,
                                   family_seed=5)
        assert fc.prompt_dim == 2 * 8 * 3
        family = fc.build()
        assert family.prompt_dim == 48
        assert family.tasks[0].dim == 48

    def test_backbone_seed_shares_weights_across_families(self):
        base = dict(layers=2, hidden=8, prompt_len=2, classes=2,
                    num_tasks=4, source_tasks=2, backbone_seed=9)
        fam_a = FrozenNetFamilyConfig(family_seed=1, **base).build()
        fam_b = FrozenNetFamilyConfig(family_seed=2, **base).build()
        assert np.array_equal(fam_a.tasks[0].backbone.out_weights,
                              fam_b.tasks[0].backbone.out_weights)
        assert not np.array_equal(fam_a.diagnostics()["anchors"],
                                  fam_b.diagnostics()["anchors"])


class TestIO:
    def test_atomic_write_creates_parents_and_leaves_no_temp(self, tmp_path):
        target = tmp_path / "a" / "b" / "f.txt"
        atomic_write_text(str(target), "hello")
        assert target.read_text(encoding="utf-8") == "hello"
        assert [p.name for p in (tmp_path / "a" / "b").iterdir()] == ["f.txt"]

    def test_atomic_overwrite(self, tmp_path):
        target = tmp_path / "f.bin"
        atomic_write_bytes(str(target), b"one")
        atomic_write_bytes(str(target), b"two")
        assert target.read_bytes() == b"two"

    def test_failed_replace_cleans_up_temp_file(self, tmp_path, monkeypatch):
        target = tmp_path / "f.txt"
        atomic_write_text(str(target), "before")

        def boom(src, dst):
            raise OSError("disk says no")

        monkeypatch.setattr(os, "replace", boom)
        with pytest.raises(OSError):
            atomic_write_text(str(target), "after")
        monkeypatch.undo()
        assert target.read_text(encoding="utf-8") == "before"
        assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]

    def test_cell_formatting(self):
        assert cell(None) == ""
        assert cell(7) == "7"
        assert cell("x") == "x"
        assert cell(0.1) == "0.1"
        assert cell(1.0 / 3.0) == repr(1.0 / 3.0)

    def test_write_csv_exact_bytes(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(str(path), [("a", "b"), (1, 0.5), (None, "z")])
        assert path.read_bytes() == b"a,b\n1,0.5\n,z\n"

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(str(path), [("h1", "h2"), ("0.25", "-3")])
        assert read_csv(str(path)) == [["h1", "h2"], ["0.25", "-3"]]

    def test_json_write_is_sorted_and_stable(self, tmp_path):
        path = tmp_path / "t.json"
        write_json(str(path), {"b": 1, "a": [1.5, None]})
        first = path.read_bytes()
        write_json(str(path), {"a": [1.5, None], "b": 1})
        assert path.read_bytes() == first
        assert read_json(str(path)) == {"a": [1.5, None], "b": 1}


class TestCompareMethods:
    def test_hand_curve_threshold_and_auc(self):
        curves = {"m": [(0, 0.5), (100, 0.9)]}
        out = compare_methods(curves, 0.8)
        assert out["calls_to_threshold"]["m"] == 100
        assert out["auc"]["m"] == pytest.approx(0.5 * (0.5 + 0.9) * 100)

    def test_zero_calls_when_start_already_above(self):
        out = compare_methods({"m": [(0, 0.95), (50, 0.99)]}, 0.9)
        assert out["calls_to_threshold"]["m"] == 0

    def test_never_crossing_reports_none(self):
        out = compare_methods({"m": [(0, 0.1), (10, 0.2)]}, 0.9)
        assert out["calls_to_threshold"]["m"] is None
        assert out["auc"]["m"] == pytest.approx(0.5 * (0.1 + 0.2) * 10)

    def test_empty_curve_rejected(self):
        from bsl.errors import BslError
        with pytest.raises(BslError):
            compare_methods({"m": []}, 0.5)


class TestPipelines:
    def test_meta_train_pipeline(self, tmp_path):
        cfg, result, out = run_one(tmp_path, quad_config())
        assert set(result["metrics"]) == {"best_eval_score", "best_iteration",
                                          "zero_shot"}
        trace_path = out / result["artifacts"]["meta_trace"]
        sub_path = out / result["artifacts"]["subspace"]
        assert trace_path.exists() and sub_path.exists()
        rows = read_csv(str(trace_path))
        assert rows[0] == list(MetaTrace.CSV_HEADER)
        assert len(rows) == 1 + cfg.meta.max_iterations

    def test_tune_pipeline_metrics_match_curve(self, tmp_path):
        cfg, result, out = run_one(tmp_path, quad_config(kind="tune"))
        rows = read_csv(str(out / result["artifacts"]["curve"]))
        assert rows[0] == ["generation", "api_calls", "train_loss", "dev_score"]
        dev = [float(r[3]) for r in rows[1:] if r[3] != ""]
        assert result["metrics"]["final"] == max(dev)
        assert result["metrics"]["zero_shot"] == dev[0]
        assert result["metrics"]["objective_calls"] <= cfg.tune.budget

    def test_tune_accepts_pre_identified_subspace(self, tmp_path):
        sub = Subspace(RngStream(3).normal((16, 2)), np.zeros(16))
        sub_path = tmp_path / "given.bsl"
        save_subspace(sub, str(sub_path))
        data = quad_config(kind="tune")
        data["options"]["subspace_path"] = str(sub_path)
        cfg, result, out = run_one(tmp_path, data)
        assert "subspace" not in result["artifacts"]  # nothing re-learned
        assert "curve" in result["artifacts"]

    def test_curve_pipeline_baselines_share_offset(self, tmp_path):
        cfg, result, out = run_one(tmp_path, quad_config(kind="curve"))
        m = result["metrics"]
        # both random baselines start from the same pooled-pretrained
        # offset and are scored on the same dev set
        assert m["uniform_zero_shot"] == m["normal_zero_shot"]
        for name in ("bsl", "uniform", "normal"):
            assert f"{name}_final" in m
            assert f"{name}_auc" in m
            assert f"{name}_calls_to_threshold" in m
            assert (out / result["artifacts"][f"{name}_curve"]).exists()

    def test_select_pipeline_picks_best_offset(self, tmp_path):
        data = quad_config(kind="select")
        family = QuadraticFamilyConfig(**data["family"]).build()
        center = family.diagnostics()["center"]
        rng = RngStream(11)
        good = Subspace(rng.normal((16, 2)), center)
        poor = Subspace(rng.normal((16, 2)), center + 50.0)
        paths = []
        for i, sub in enumerate((poor, good)):
            p = tmp_path / f"cat{i}.bsl"
            save_subspace(sub, str(p))
            paths.append(str(p))
        data["options"]["catalog_paths"] = paths
        data["options"]["catalog_tags"] = ["quadratic", "quadratic"]
        data["options"]["target_type_tag"] = "quadratic"
        cfg, result, out = run_one(tmp_path, data)
        assert result["metrics"]["selected_index"] == 1
        assert result["metrics"]["type_selected_index"] == 0  # first tag match
        rows = read_csv(str(out / result["artifacts"]["selection"]))
        assert rows[0] == ["index", "tag", "zero_shot_score", "selected"]
        assert len(rows) == 3
        assert [r[3] for r in rows[1:]] == ["0", "1"]

    def test_ablation_dfo_both_algorithms_reach_planted_target(self, tmp_path):
        cfg, result, out = run_one(tmp_path, quad_config(kind="ablation-dfo"))
        m = result["metrics"]
        # optimum lies inside the planted subspace, so both must reach it
        assert m["cmaes_reached"] == 1
        assert m["snes_reached"] == 1
        assert m["cmaes_best_loss"] < 1e-2
        assert m["snes_best_loss"] < 1e-2

    def test_ablation_dfo_requires_planted_family(self, tmp_path):
        data = quad_config(kind="ablation-dfo")
        data["family"] = {
            "kind": "frozen_net", "family_seed": 5, "layers": 1, "hidden": 4,
            "prompt_len": 1, "classes": 2, "num_tasks": 4, "source_tasks": 2,
        }
        cfg = config_from_dict(data, base_dir=str(tmp_path))
        with pytest.raises(ConfigError):
            run_pipeline(cfg, 0, str(tmp_path / "out"))

    def test_ablation_mode_covers_all_modes(self, tmp_path):
        cfg, result, out = run_one(tmp_path, quad_config(kind="ablation-mode"))
        for mode in ("BSL", "ALL", "SPC", "INI"):
            assert isinstance(result["metrics"][f"{mode}_final"], float)
            assert (out / result["artifacts"][f"{mode.lower()}_t0_curve"]).exists()

    def test_source_count_pipeline(self, tmp_path):
        data = quad_config(kind="source-count")
        data["options"]["counts"] = [1, 2]
        cfg, result, out = run_one(tmp_path, data)
        assert set(result["metrics"]) == {"count1_final", "count2_final"}

    def test_source_count_rejects_excess_counts(self, tmp_path):
        data = quad_config(kind="source-count")
        data["options"]["counts"] = [1, 2, 4]  # only 2 sources exist
        cfg = config_from_dict(data, base_dir=str(tmp_path))
        with pytest.raises(ConfigError) as exc:
            run_pipeline(cfg, 0, str(tmp_path / "out"))
        assert any("exceeds available sources" in v for v in exc.value.violations)

    def test_similarity_pipeline(self, tmp_path):
        data = quad_config(kind="similarity")
        data["dissimilar_family"] = dict(data["family"], family_seed=99)
        cfg, result, out = run_one(tmp_path, data)
        m = result["metrics"]
        assert m["similar_minus_dissimilar"] == pytest.approx(
            m["similar_final"] - m["dissimilar_final"])
        for name in ("similar", "diverse", "dissimilar"):
            assert (out / result["artifacts"][f"{name}_t0_curve"]).exists()

    def test_selection_success_pipeline(self, tmp_path):
        data = quad_config(kind="selection-success")
        data["options"].update({"offset_gammas": [1.0, 0.0],
                                "dev_sizes": [4, 16], "trials": 8,
                                "best_entry": 0})
        cfg, result, out = run_one(tmp_path, data)
        m = result["metrics"]
        assert set(m) == {"rate_at_4", "rate_at_16"}
        assert all(0.0 <= v <= 1.0 for v in m.values())
        rows = read_csv(str(out / result["artifacts"]["success"]))
        assert len(rows) == 3

    def test_sweep_dim_pipeline(self, tmp_path):
        data = quad_config(kind="sweep-dim")
        data["options"]["values"] = [1, 2]
        cfg, result, out = run_one(tmp_path, data)
        m = result["metrics"]
        assert set(m) == {"dim1_final", "dim2_final", "spread"}
        assert m["spread"] == pytest.approx(
            max(m["dim1_final"], m["dim2_final"])
            - min(m["dim1_final"], m["dim2_final"]))

    def test_sweep_length_requires_frozen_net(self, tmp_path):
        data = quad_config(kind="sweep-length")
        data["options"]["values"] = [1, 2]
        cfg = config_from_dict(data, base_dir=str(tmp_path))
        with pytest.raises(ConfigError):
            run_pipeline(cfg, 0, str(tmp_path / "out"))

    def test_sweep_length_pipeline(self, tmp_path):
        data = quad_config(kind="sweep-length")
        data["family"] = {
            "kind": "frozen_net", "family_seed": 5, "layers": 1, "hidden": 4,
            "prompt_len": 2, "classes": 2, "num_tasks": 4, "source_tasks": 2,
        }
        data["meta"]["max_iterations"] = 10
        data["options"]["values"] = [1, 2]
        data["options"]["threshold"] = 0.9
        cfg, result, out = run_one(tmp_path, data)
        assert set(result["metrics"]) == {"len1_final", "len2_final", "spread"}


class TestRunner:
    def test_run_experiment_writes_summary_and_timing(self, tmp_path):
        cfg = config_from_dict(quad_config(), base_dir=str(tmp_path))
        summary = run_experiment(cfg)
        out = tmp_path / "runs"
        assert (out / "summary.json").exists()
        assert (out / "timing.log").exists()
        assert len(summary.per_seed) == 2
        assert summary.errors == []
        assert summary.config_hash == config_hash(cfg)
        on_disk = read_json(str(out / "summary.json"))
        assert on_disk == summary.to_json_dict()
        assert "wall_clock_seconds" not in on_disk
        agg = summary.aggregate["best_eval_score"]
        assert agg["n"] == 2
        values = [e["metrics"]["best_eval_score"] for e in summary.per_seed]
        assert agg["mean"] == pytest.approx(np.mean(values))
        assert agg["std"] == pytest.approx(np.std(values, ddof=1))

    def test_rerun_is_byte_identical_except_timing(self, tmp_path):
        cfg = config_from_dict(quad_config(kind="tune"), base_dir=str(tmp_path))
        out = tmp_path / "runs"

        def snapshot():
            return {
                p.name: p.read_bytes()
                for p in sorted(out.iterdir())
                if p.name != "timing.log"
            }

        run_experiment(cfg)
        first = snapshot()
        run_experiment(cfg)
        assert snapshot() == first
        assert len(first) > 2

    def test_threads_two_matches_sequential(self, tmp_path):
        data = quad_config(kind="tune")
        cfg = config_from_dict(data, base_dir=str(tmp_path))
        run_experiment(cfg, out_override=str(tmp_path / "seq"), threads=1)
        run_experiment(cfg, out_override=str(tmp_path / "par"), threads=2)
        seq = read_json(str(tmp_path / "seq" / "summary.json"))
        par = read_json(str(tmp_path / "par" / "summary.json"))
        # the hash covers output_dir; everything else must agree exactly
        seq.pop("config_hash")
        par.pop("config_hash")
        assert seq == par

    def test_seed_failures_recorded_not_raised(self, tmp_path):
        wrong = Subspace(RngStream(1).normal((8, 2)), np.zeros(8))  # dim 8 != 16
        sub_path = tmp_path / "wrong.bsl"
        save_subspace(wrong, str(sub_path))
        data = quad_config(kind="tune")
        data["options"]["subspace_path"] = str(sub_path)
        cfg = config_from_dict(data, base_dir=str(tmp_path))
        summary = run_experiment(cfg)
        assert summary.per_seed == []
        assert [e["seed"] for e in summary.errors] == [0, 1]
        assert all("ShapeError" in e["error"] for e in summary.errors)
        assert (tmp_path / "runs" / "summary.json").exists()

    def test_resolve_threads_honors_deterministic_env(self, monkeypatch):
        monkeypatch.delenv("BSL_DETERMINISTIC", raising=False)
        assert _resolve_threads(4) == 4
        assert _resolve_threads(0) == 1
        monkeypatch.setenv("BSL_DETERMINISTIC", "1")
        assert _resolve_threads(4) == 1

    def test_aggregate_handles_missing_metrics(self):
        per_seed = [
            {"seed": 0, "metrics": {"a": 1.0, "b": None}},
            {"seed": 1, "metrics": {"a": 3.0, "b": None}},
        ]
        agg = _aggregate(per_seed)
        assert agg["a"]["mean"] == pytest.approx(2.0)
        assert agg["a"]["std"] == pytest.approx(np.sqrt(2.0))
        assert agg["a"]["n"] == 2
        assert agg["b"] == {"mean": None, "std": None, "n": 0}

    def test_load_summary_reconciles_artifacts(self, tmp_path):
        cfg = config_from_dict(quad_config(kind="tune"), base_dir=str(tmp_path))
        run_experiment(cfg)
        out = tmp_path / "runs"
        summary_path = str(out / "summary.json")
        load_summary(summary_path)  # clean run passes

        curve = out / "seed0_tune_curve.csv"
        rows = read_csv(str(curve))
        for row in rows[1:]:
            if row[3] != "":
                row[3] = repr(float(row[3]) + 1.0)
        write_csv(str(curve), rows)
        with pytest.raises(ConfigError) as exc:
            load_summary(summary_path)
        assert any("does not match" in v for v in exc.value.violations)
        assert load_summary(summary_path, check_artifacts=False)

        curve.unlink()
        with pytest.raises(ConfigError) as exc:
            load_summary(summary_path)
        assert any("missing artifact" in v for v in exc.value.violations)


class TestCli:
    def write_config(self, tmp_path, data, name="cfg.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    def test_experiment_subcommand_runs(self, tmp_path, capsys):
        path = self.write_config(tmp_path, quad_config())
        assert main(["experiment", "--config", path]) == 0
        out = capsys.readouterr().out
        assert "2 seed(s) done" in out
        assert "summary:" in out
        assert (tmp_path / "runs" / "summary.json").exists()

    def test_kind_specific_subcommand_guards_kind(self, tmp_path, capsys):
        path = self.write_config(tmp_path, quad_config())
        assert main(["tune", "--config", path]) == 2
        err = capsys.readouterr().err
        assert "subcommand expects" in err

    def test_seed_and_out_overrides(self, tmp_path, capsys):
        path = self.write_config(tmp_path, quad_config())
        out_dir = str(tmp_path / "other")
        assert main(["meta-train", "--config", path,
                     "--seed-override", "5", "--out", out_dir]) == 0
        summary = read_json(os.path.join(out_dir, "summary.json"))
        assert summary["seeds"] == [5]

    def test_bad_seed_override_is_config_error(self, tmp_path, capsys):
        path = self.write_config(tmp_path, quad_config())
        assert main(["experiment", "--config", path,
                     "--seed-override", "a,b"]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_violations_listed_on_stderr(self, tmp_path, capsys):
        data = quad_config()
        data["seeds"] = []
        data["kind"] = "wrong"
        path = self.write_config(tmp_path, data)
        assert main(["experiment", "--config", path]) == 2
        err = capsys.readouterr().err
        assert "configuration error:" in err
        assert err.count("  - ") >= 2

    def test_failed_seeds_exit_nonzero(self, tmp_path, capsys):
        wrong = Subspace(RngStream(1).normal((8, 2)), np.zeros(8))
        sub_path = tmp_path / "wrong.bsl"
        save_subspace(wrong, str(sub_path))
        data = quad_config(kind="tune")
        data["options"]["subspace_path"] = str(sub_path)
        path = self.write_config(tmp_path, data)
        assert main(["tune", "--config", path]) == 1
        assert "failed" in capsys.readouterr().err

    def test_report_renders_and_writes_csv(self, tmp_path, capsys):
        path = self.write_config(tmp_path, quad_config(kind="tune"))
        assert main(["tune", "--config", path]) == 0
        summary_path = str(tmp_path / "runs" / "summary.json")
        report_dir = str(tmp_path / "report")
        assert main(["report", summary_path, "--out", report_dir]) == 0
        out = capsys.readouterr().out
        assert "test-tune" in out
        rows = read_csv(os.path.join(report_dir, "report.csv"))
        assert rows[0] == ["summary", "kind", "metric", "mean", "std", "n"]
        metrics = {r[2] for r in rows[1:]}
        assert "final" in metrics and "zero_shot" in metrics

    def test_report_checks_artifacts_unless_disabled(self, tmp_path, capsys):
        path = self.write_config(tmp_path, quad_config(kind="tune"))
        assert main(["tune", "--config", path]) == 0
        out = tmp_path / "runs"
        (out / "seed1_tune_curve.csv").unlink()
        summary_path = str(out / "summary.json")
        assert main(["report", summary_path]) == 2
        assert "missing artifact" in capsys.readouterr().err
        assert main(["report", summary_path, "--no-check"]) == 0
