"""Experiment configuration: JSON schema, validation, hashing.

A config file is a single JSON object:

    {
      "kind": "curve",              one of EXPERIMENT_KINDS
      "name": "curve-frozen-net",
      "seeds": [0, 1, 2],
      "output_dir": "runs/curve",
      "family": { ... },            task family geometry (see below)
      "dissimilar_family": { ... }, second family, similarity runs only
      "meta": { ... },              MetaConfig fields, all optional
      "tune": { ... },              TuneConfig fields, all optional
      "options": { ... }            kind-specific knobs, all optional
    }

Family objects carry a "kind" of "quadratic" or "frozen_net" plus the
geometry fields of the matching dataclass below. Validation collects
every violation before raising, so a bad file reports all its problems
at once.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields

from ..dfo import TuneConfig
from ..errors import ConfigError
from ..meta import MetaConfig
from ..numerics import RngStream
from ..tasks import (
    FrozenNetBackbone,
    FrozenNetFamilySpec,
    QuadraticFamilySpec,
    TaskFamily,
    make_frozen_net_family,
    make_quadratic_family,
)

EXPERIMENT_KINDS = (
    "meta-train",
    "tune",
    "select",
    "curve",
    "similarity",
    "source-count",
    "selection-success",
    "ablation-mode",
    "ablation-dfo",
    "sweep-length",
    "sweep-dim",
)

__all__ = [
    "EXPERIMENT_KINDS",
    "QuadraticFamilyConfig",
    "FrozenNetFamilyConfig",
    "ExperimentOptions",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "config_hash",
]


def _coerce_dataclass(cls, data, where, violations):
    """Build ``cls`` from a plain dict, recording unknown/missing keys."""
    if not isinstance(data, dict):
        violations.append(f"{where}: expected an object, got {type(data).__name__}")
        return None
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            violations.append(f"{where}.{key}: unknown field")
            continue
        kwargs[key] = value
    missing = [
        name
        for name, f in known.items()
        if name not in kwargs
        and f.default is dataclasses.MISSING
        and f.default_factory is dataclasses.MISSING
    ]
    if missing:
        violations.append(f"{where}: missing required fields {missing}")
        return None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        violations.append(f"{where}: {exc}")
        return None


@dataclass(frozen=True)
class QuadraticFamilyConfig:
    """Geometry of a planted-subspace quadratic family.

    The first ``source_tasks`` tasks are the meta-training sources; the
    next one is the meta-eval task; any remaining tasks are tuning
    targets. ``family_seed`` fixes the family across experiment seeds.
    """

    kind: str = "quadratic"
    family_seed: int = 1234
    dim: int = 128
    planted_rank: int = 4
    num_tasks: int = 16
    source_tasks: int = 8
    coord_scale: float = 1.0
    center_scale: float = 1.0

    def validate(self, where: str, violations: list) -> None:
        if self.kind != "quadratic":
            violations.append(f"{where}.kind: expected 'quadratic'")
        if self.dim < 1:
            violations.append(f"{where}.dim: must be >= 1")
        if not 1 <= self.planted_rank <= self.dim:
            violations.append(f"{where}.planted_rank: must be in [1, dim]")
        if self.source_tasks < 1:
            violations.append(f"{where}.source_tasks: must be >= 1")
        if self.num_tasks < self.source_tasks + 2:
            violations.append(
                f"{where}.num_tasks: needs >= source_tasks + 2 "
                "(sources, one eval task, one target)"
            )
        if self.coord_scale <= 0 or self.center_scale < 0:
            violations.append(f"{where}: scales must be positive")

    def build(self) -> TaskFamily:
        rng = RngStream(self.family_seed)
        spec = QuadraticFamilySpec.random(
            self.dim,
            self.planted_rank,
            rng.substream(0),
            coord_scale=self.coord_scale,
            center_scale=self.center_scale,
        )
        return make_quadratic_family(
            spec, self.num_tasks, rng.substream(1), family_id=f"quad{self.family_seed}"
        )

    @property
    def prompt_dim(self) -> int:
        return self.dim


@dataclass(frozen=True)
class FrozenNetFamilyConfig:
    """Geometry of a frozen-network classification family.

    Same source/eval/target split convention as the quadratic config.
    """

    kind: str = "frozen_net"
    family_seed: int = 1234
    backbone_seed: int | None = None
    layers: int = 4
    hidden: int = 16
    prompt_len: int = 4
    classes: int = 2
    num_tasks: int = 6
    source_tasks: int = 4
    anchor_scale: float = 1.3
    noise_std: float = 0.7
    shift_rank: int = 4
    shift_scale: float = 2.0
    scale_log_range: float = 1.0
    family_scale_log_range: float = 0.0
    weight_scale: float = 1.0
    out_scale: float = 4.0
    task_type_tag: str = "classification"

    def validate(self, where: str, violations: list) -> None:
        if self.kind != "frozen_net":
            violations.append(f"{where}.kind: expected 'frozen_net'")
        for name in ("layers", "hidden", "prompt_len", "classes", "shift_rank"):
            if getattr(self, name) < 1:
                violations.append(f"{where}.{name}: must be >= 1")
        if self.classes < 2:
            violations.append(f"{where}.classes: must be >= 2")
        if self.shift_rank > self.hidden:
            violations.append(f"{where}.shift_rank: must be <= hidden")
        if self.source_tasks < 1:
            violations.append(f"{where}.source_tasks: must be >= 1")
        if self.num_tasks < self.source_tasks + 2:
            violations.append(
                f"{where}.num_tasks: needs >= source_tasks + 2 "
                "(sources, one eval task, one target)"
            )
        if self.noise_std < 0 or self.anchor_scale <= 0:
            violations.append(f"{where}: anchor_scale must be > 0, noise_std >= 0")
        if not self.task_type_tag:
            violations.append(f"{where}.task_type_tag: must be nonempty")

    def build(self) -> TaskFamily:
        # a separate backbone seed lets two families share the frozen
        # model while differing in tasks (similarity experiments)
        backbone_rng = RngStream(
            self.family_seed if self.backbone_seed is None else self.backbone_seed
        )
        rng = RngStream(self.family_seed)
        backbone = FrozenNetBackbone.random(
            layers=self.layers,
            hidden=self.hidden,
            prompt_len=self.prompt_len,
            classes=self.classes,
            rng=backbone_rng.substream(0),
            weight_scale=self.weight_scale,
            out_scale=self.out_scale,
        )
        spec = FrozenNetFamilySpec.random(
            backbone,
            rng.substream(1),
            anchor_scale=self.anchor_scale,
            noise_std=self.noise_std,
            shift_rank=self.shift_rank,
            shift_scale=self.shift_scale,
            scale_log_range=self.scale_log_range,
            family_scale_log_range=self.family_scale_log_range,
        )
        return make_frozen_net_family(
            spec,
            self.num_tasks,
            rng.substream(2),
            family_id=f"fnet{self.family_seed}",
            task_type_tag=self.task_type_tag,
        )

    @property
    def prompt_dim(self) -> int:
        return self.prompt_len * self.layers * self.hidden


def _family_from_dict(data, where, violations):
    if not isinstance(data, dict):
        violations.append(f"{where}: expected an object")
        return None
    kind = data.get("kind")
    if kind == "quadratic":
        cfg = _coerce_dataclass(QuadraticFamilyConfig, data, where, violations)
    elif kind == "frozen_net":
        cfg = _coerce_dataclass(FrozenNetFamilyConfig, data, where, violations)
    else:
        violations.append(f"{where}.kind: must be 'quadratic' or 'frozen_net'")
        return None
    if cfg is not None:
        cfg.validate(where, violations)
    return cfg


@dataclass(frozen=True)
class ExperimentOptions:
    """Kind-specific knobs. Unused fields are ignored by pipelines.

    threshold          dev-score threshold for calls-to-threshold
    train_size         few-shot training set size for tuning
    dev_size           development set size for tuning
    target_count       held-out tasks averaged into "final" scores
                       (similarity, source-count, ablation-mode)
    pretrain_lr/steps  pooled-gradient baseline offset training
    pretrain_dataset_size  per-source-task sample count for pretraining
    baseline_half_width / baseline_std  random-projection entry scales
                       (default 1/sqrt(d) when null)
    counts             source-count sweep values
    dev_sizes/trials   selection-success experiment grid
    offset_gammas      catalog offsets as multiples of the pretrained
                       prompt (selection-success)
    best_entry         index of the planted best catalog entry
    modes              meta-variant ablation modes
    algorithms         optimizer ablation algorithms
    values             sweep-length / sweep-dim axis values
    subspace_path      pre-identified subspace for `tune`
    catalog_paths/tags selection inputs for `select`
    target_type_tag    type-based selection query for `select`
    """

    threshold: float = 0.85
    train_size: int = 128
    dev_size: int = 256
    target_count: int = 1
    pretrain_lr: float = 0.5
    pretrain_steps: int = 2000
    pretrain_dataset_size: int = 256
    baseline_half_width: float | None = None
    baseline_std: float | None = None
    counts: tuple = (1, 2, 4)
    dev_sizes: tuple = (8, 16, 32, 64, 128)
    trials: int = 100
    offset_gammas: tuple = (0.35, 0.2, 1.0, 0.5, 0.0)
    best_entry: int | None = None
    modes: tuple = ("BSL", "ALL", "SPC", "INI")
    algorithms: tuple = ("cmaes", "snes")
    values: tuple = ()
    subspace_path: str | None = None
    catalog_paths: tuple = ()
    catalog_tags: tuple = ()
    target_type_tag: str | None = None

    def __post_init__(self):
        for name in (
            "counts",
            "dev_sizes",
            "offset_gammas",
            "modes",
            "algorithms",
            "values",
            "catalog_paths",
            "catalog_tags",
        ):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def validate(self, kind: str, violations: list) -> None:
        if self.train_size < 1 or self.dev_size < 1:
            violations.append("options: train_size and dev_size must be >= 1")
        if self.target_count < 1:
            violations.append("options.target_count: must be >= 1")
        if self.pretrain_steps < 0 or self.pretrain_lr <= 0:
            violations.append("options: pretrain_steps >= 0 and pretrain_lr > 0 required")
        if kind == "selection-success":
            if self.trials < 1:
                violations.append("options.trials: must be >= 1")
            if not self.dev_sizes or any(s < 1 for s in self.dev_sizes):
                violations.append("options.dev_sizes: must be nonempty positive ints")
            if len(self.offset_gammas) < 2:
                violations.append("options.offset_gammas: need at least 2 catalog entries")
        if kind == "source-count" and (
            not self.counts or any(c < 1 for c in self.counts)
        ):
            violations.append("options.counts: must be nonempty positive ints")
        if kind == "ablation-mode":
            bad = [m for m in self.modes if m not in ("BSL", "ALL", "SPC", "INI")]
            if bad:
                violations.append(f"options.modes: unknown modes {bad}")
        if kind == "ablation-dfo":
            bad = [a for a in self.algorithms if a not in ("cmaes", "snes")]
            if bad:
                violations.append(f"options.algorithms: unknown algorithms {bad}")
        if kind in ("sweep-length", "sweep-dim") and not self.values:
            violations.append("options.values: sweep requires at least one value")
        if kind == "tune" and self.subspace_path is not None:
            if not os.path.exists(self.subspace_path):
                violations.append(
                    f"options.subspace_path: {self.subspace_path!r} does not exist"
                )
        if kind == "select":
            if not self.catalog_paths:
                violations.append("options.catalog_paths: select requires a catalog")
            for p in self.catalog_paths:
                if not os.path.exists(p):
                    violations.append(f"options.catalog_paths: {p!r} does not exist")
            if self.catalog_tags and len(self.catalog_tags) != len(self.catalog_paths):
                violations.append(
                    "options.catalog_tags: must match catalog_paths in length"
                )


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    name: str
    seeds: tuple
    output_dir: str
    family: QuadraticFamilyConfig | FrozenNetFamilyConfig
    dissimilar_family: FrozenNetFamilyConfig | None = None
    meta: MetaConfig = field(default_factory=MetaConfig)
    tune: TuneConfig = field(default_factory=TuneConfig)
    options: ExperimentOptions = field(default_factory=ExperimentOptions)

    def with_overrides(self, seeds=None, output_dir=None) -> "ExperimentConfig":
        return dataclasses.replace(
            self,
            seeds=tuple(seeds) if seeds is not None else self.seeds,
            output_dir=output_dir if output_dir is not None else self.output_dir,
        )


def config_from_dict(data: dict, base_dir: str = ".") -> ExperimentConfig:
    """Validate a parsed JSON object, collecting every violation."""
    violations: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["top level: expected a JSON object"])

    kind = data.get("kind")
    if kind not in EXPERIMENT_KINDS:
        violations.append(
            f"kind: {kind!r} is not one of {', '.join(EXPERIMENT_KINDS)}"
        )
    name = data.get("name", kind if isinstance(kind, str) else "experiment")
    if not isinstance(name, str) or not name:
        violations.append("name: must be a nonempty string")

    seeds = data.get("seeds")
    if not isinstance(seeds, list) or not seeds:
        violations.append("seeds: must be a nonempty list of integers")
        seeds = []
    elif not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        violations.append("seeds: must all be integers")
        seeds = []

    output_dir = data.get("output_dir", "runs")
    if not isinstance(output_dir, str) or not output_dir:
        violations.append("output_dir: must be a nonempty string")
    elif not os.path.isabs(output_dir):
        output_dir = os.path.join(base_dir, output_dir)

    family = None
    if "family" in data:
        family = _family_from_dict(data["family"], "family", violations)
    else:
        violations.append("family: required")

    dissimilar = None
    if data.get("dissimilar_family") is not None:
        dissimilar = _family_from_dict(
            data["dissimilar_family"], "dissimilar_family", violations
        )
    elif kind == "similarity":
        violations.append("dissimilar_family: required for similarity runs")

    meta = _coerce_dataclass(MetaConfig, data.get("meta", {}), "meta", violations)
    if meta is not None:
        try:
            meta.validate()
        except ConfigError as exc:
            violations.extend(f"meta: {v}" for v in exc.violations)

    tune = _coerce_dataclass(TuneConfig, data.get("tune", {}), "tune", violations)
    if tune is not None:
        try:
            tune.validate()
        except ConfigError as exc:
            violations.extend(f"tune: {v}" for v in exc.violations)

    options = _coerce_dataclass(
        ExperimentOptions, data.get("options", {}), "options", violations
    )
    if options is not None and isinstance(kind, str):
        options.validate(kind, violations)

    known_top = {
        "kind",
        "name",
        "seeds",
        "output_dir",
        "family",
        "dissimilar_family",
        "meta",
        "tune",
        "options",
    }
    for key in data:
        if key not in known_top:
            violations.append(f"{key}: unknown top-level field")

    if family is not None and options is not None and isinstance(kind, str):
        targets_needed = (
            options.target_count
            if kind in ("similarity", "source-count", "ablation-mode")
            else 1
        )
        needed = family.source_tasks + 1 + targets_needed
        if family.num_tasks < needed:
            violations.append(
                f"family.num_tasks: {family.num_tasks} but kind {kind!r} needs "
                f"{needed} (sources + eval + targets)"
            )

    if violations:
        raise ConfigError(violations)
    return ExperimentConfig(
        kind=kind,
        name=name,
        seeds=tuple(seeds),
        output_dir=output_dir,
        family=family,
        dissimilar_family=dissimilar,
        meta=meta,
        tune=tune,
        options=options,
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    return config_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def _jsonable(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _jsonable(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def config_hash(config: ExperimentConfig) -> str:
    """Stable content hash of a validated config (seeds included)."""
    canonical = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
