"""Choosing a subspace for a new task from a catalog of candidates.

Two criteria are supported: a task-type tag lookup, and zero-shot
scoring of each candidate's offset on a small development set. A
success-rate experiment measures how reliably the zero-shot criterion
finds the best candidate as the development set grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SelectionError, ShapeError
from .numerics import RngStream
from .subspace import Subspace
from .tasks import Dataset, Task, TaskFamily

__all__ = [
    "CatalogEntry",
    "SubspaceCatalog",
    "SelectionResult",
    "select_by_type",
    "select_by_zero_shot",
    "oracle_best_index",
    "SuccessRate",
    "selection_success_experiment",
    "success_csv_rows",
]


@dataclass(frozen=True)
class CatalogEntry:
    """One candidate subspace with its provenance tag."""

    subspace: Subspace
    task_type_tag: str
    source_description: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.subspace, Subspace):
            raise SelectionError("catalog entry needs a Subspace")
        if not self.task_type_tag:
            raise SelectionError("catalog entry tag must be nonempty")


@dataclass(frozen=True)
class SubspaceCatalog:
    """Immutable ordered collection of candidate subspaces."""

    entries: tuple[CatalogEntry, ...]

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise SelectionError("catalog must contain at least one entry")
        for e in entries:
            if not isinstance(e, CatalogEntry):
                raise SelectionError("catalog entries must be CatalogEntry")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> CatalogEntry:
        return self.entries[index]


def select_by_type(catalog: SubspaceCatalog, target_type_tag: str) -> Subspace:
    """Return the first catalog entry whose tag equals ``target_type_tag``.

    Raises SelectionError when no entry matches; callers typically fall
    back to select_by_zero_shot in that case.
    """
    for entry in catalog.entries:
        if entry.task_type_tag == target_type_tag:
            return entry.subspace
    raise SelectionError(f"no catalog entry tagged {target_type_tag!r}")


@dataclass(frozen=True)
class SelectionResult:
    subspace: Subspace
    index: int
    scores: tuple[float, ...]


def select_by_zero_shot(
    catalog: SubspaceCatalog, task: Task, dev: Dataset
) -> SelectionResult:
    """Pick the entry whose offset scores best on ``dev`` with no tuning.

    Each candidate is evaluated at q = 0, i.e. at its offset point.
    Exact ties resolve to the lowest catalog index.
    """
    if dev.size == 0:
        raise SelectionError("development set must be nonempty")
    scores: list[float] = []
    for entry in catalog.entries:
        if entry.subspace.full_dim != task.dim:
            raise ShapeError(
                f"catalog subspace has dim {entry.subspace.full_dim}, "
                f"task expects {task.dim}"
            )
        scores.append(float(task.score(dev, entry.subspace.offset)))
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return SelectionResult(
        subspace=catalog.entries[best].subspace,
        index=best,
        scores=tuple(scores),
    )


def oracle_best_index(
    catalog: SubspaceCatalog,
    family: TaskFamily,
    rng: RngStream,
    sample_size: int = 4096,
) -> int:
    """Designate the ground-truth best entry by large-sample evaluation.

    Scores every candidate offset on a freshly sampled dataset of
    ``sample_size`` points per family task and averages. An exact tie at
    the top means the catalog has no usable ground truth.
    """
    totals = np.zeros(len(catalog))
    for t_idx, task in enumerate(family.tasks):
        data = task.sample_dataset(sample_size, rng.substream(t_idx))
        for i, entry in enumerate(catalog.entries):
            totals[i] += float(task.score(data, entry.subspace.offset))
    totals /= len(family.tasks)
    order = np.argsort(-totals, kind="stable")
    if len(catalog) > 1 and totals[order[0]] == totals[order[1]]:
        raise ConfigError(["oracle evaluation ties; no unique best subspace"])
    return int(order[0])


@dataclass(frozen=True)
class SuccessRate:
    dev_size: int
    trials: int
    successes: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials


def selection_success_experiment(
    catalog: SubspaceCatalog,
    target_family: TaskFamily,
    dev_sizes: list[int],
    trials: int,
    rng: RngStream,
    best_index: int | None = None,
    oracle_sample_size: int = 4096,
) -> list[SuccessRate]:
    """Measure how often zero-shot selection recovers the best entry.

    For each dev size, ``trials`` independent development sets are
    sampled (cycling through the family's tasks) and the fraction of
    trials selecting the designated best entry is reported. The best
    entry is either passed in or designated by a large-sample oracle.
    Trial randomness comes from per-trial substreams keyed by
    (dev-size index, trial), so trials are independent and the whole
    experiment is reproducible regardless of evaluation order.
    """
    if trials < 1:
        raise ConfigError(["trials must be >= 1"])
    if not dev_sizes:
        raise ConfigError(["dev_sizes must be nonempty"])
    bad = [s for s in dev_sizes if s < 1]
    if bad:
        raise ConfigError([f"dev sizes must be >= 1, got {bad}"])
    if best_index is None:
        best_index = oracle_best_index(
            catalog, target_family, rng.substream(0), oracle_sample_size
        )
    if not 0 <= best_index < len(catalog):
        raise ConfigError([f"best_index {best_index} outside catalog"])

    tasks = target_family.tasks
    results: list[SuccessRate] = []
    for s_idx, dev_size in enumerate(dev_sizes):
        size_rng = rng.substream(1 + s_idx)
        successes = 0
        for trial in range(trials):
            task = tasks[trial % len(tasks)]
            dev = task.sample_dataset(dev_size, size_rng.substream(trial))
            picked = select_by_zero_shot(catalog, task, dev)
            if picked.index == best_index:
                successes += 1
        results.append(SuccessRate(dev_size=dev_size, trials=trials, successes=successes))
    return results


def success_csv_rows(results: list[SuccessRate]) -> list[tuple[str, ...]]:
    """Rows for the success-rate CSV: dev_size, trials, successes, rate."""
    rows = [("dev_size", "trials", "successes", "rate")]
    for r in results:
        rows.append((str(r.dev_size), str(r.trials), str(r.successes), repr(r.rate)))
    return rows
