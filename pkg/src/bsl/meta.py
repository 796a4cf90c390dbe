"""First-order meta-learning of an affine prompt subspace.

The trainable state is the projection W and offset p0 of a Subspace.
Each meta-iteration samples a handful of source tasks, adapts the
low-dimensional coordinates q from zero by plain gradient descent on a
freshly sampled support set, then updates W and p0 with first-order
outer gradients evaluated at the adapted prompt on a second sample:

    q_i   = adapt(q=0, support_i)            (stop-gradient)
    g2    = grad_prompt(query_i, W q_i + p0)
    dW    = g2 q_i^T        dp0 = g2

Both outer parameters are stepped by Adam on the task-mean gradients.
Ablation modes reuse the same loop with pieces disabled:

    BSL  - the default described above
    ALL  - q is also a persistent meta-parameter: the inner loop starts
           from meta-q and the outer step updates it with W^T g2
    SPC  - no inner adaptation; q stays frozen at one random draw
    INI  - only p0 is trained; W and q keep their random initial values

Checkpoint selection: every eval_every iterations the current subspace
is scored on a held-out task (adapt q on a fixed few-shot split, score
on a fixed test split) and the best-scoring snapshot is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, ShapeError, TrainingError
from .numerics import AdamState, RngStream, adam_step, as_vector
from .subspace import Subspace, reparameterize
from .tasks import Dataset, Task, TaskFamily

MODES = ("BSL", "ALL", "SPC", "INI")
INNER_OPTIMIZERS = ("gd", "adam")


@dataclass
class MetaConfig:
    inner_lr: float = 3e-4
    outer_lr: float = 3e-4
    tasks_per_iteration: int = 2
    inner_steps: int = 16
    inner_batch_size: int = 8
    sampled_dataset_size: int = 64
    eval_every: int = 200
    max_iterations: int = 2000
    subspace_dim: int = 8
    mode: str = "BSL"
    inner_optimizer: str = "gd"
    eval_train_size: int = 128
    eval_test_size: int = 256

    def validate(self) -> "MetaConfig":
        problems = []
        if self.inner_lr <= 0:
            problems.append("inner_lr must be positive")
        if self.outer_lr <= 0:
            problems.append("outer_lr must be positive")
        for name in ("tasks_per_iteration", "inner_steps", "inner_batch_size",
                     "sampled_dataset_size", "eval_every", "max_iterations",
                     "subspace_dim", "eval_train_size", "eval_test_size"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.inner_optimizer not in INNER_OPTIMIZERS:
            problems.append(
                f"inner_optimizer must be one of {INNER_OPTIMIZERS}, "
                f"got {self.inner_optimizer!r}"
            )
        if problems:
            raise ConfigError(problems)
        return self


@dataclass
class IterationRecord:
    iteration: int
    task_ids: list
    inner_loss_before: list
    inner_loss_after: list
    outer_loss: float
    eval_score: float | None = None


@dataclass
class MetaTrace:
    records: list = field(default_factory=list)
    best_checkpoint: Subspace | None = None
    best_eval_score: float | None = None
    best_iteration: int | None = None

    CSV_HEADER = ("iteration", "task_ids", "inner_loss_before",
                  "inner_loss_after", "outer_loss", "eval_score")

    def csv_rows(self):
        rows = [list(self.CSV_HEADER)]
        for r in self.records:
            rows.append([
                r.iteration,
                "+".join(r.task_ids),
                ";".join(repr(v) for v in r.inner_loss_before),
                ";".join(repr(v) for v in r.inner_loss_after),
                repr(r.outer_loss),
                "" if r.eval_score is None else repr(r.eval_score),
            ])
        return rows


def inner_adapt(s: Subspace, task: Task, data: Dataset, alpha: float, steps: int,
                batch_size: int | None = None, optimizer: str = "gd",
                q0: np.ndarray | None = None) -> np.ndarray:
    """Adapt the low-dimensional coordinates on one support set.

    Starts from q0 (zeros by default) and takes ``steps`` updates of the
    pulled-back gradient W^T grad_prompt on sequential mini-batches.
    W and p0 are never touched.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if optimizer not in INNER_OPTIMIZERS:
        raise ValueError(f"unknown inner optimizer {optimizer!r}")
    if q0 is None:
        q = np.zeros(s.low_dim)
    else:
        q = as_vector(q0, "q0").copy()
        if q.shape[0] != s.low_dim:
            raise ShapeError(f"q0 has length {q.shape[0]}, subspace needs {s.low_dim}")
    adam = AdamState.init(q.shape, alpha) if optimizer == "adam" else None
    for step in range(steps):
        batch = data if batch_size is None else data.cyclic_batch(step, batch_size)
        g_p = task.grad_prompt(batch, reparameterize(s, q))
        g_q = s.projection.T @ g_p
        if not np.all(np.isfinite(g_q)):
            raise NumericError(f"inner adaptation diverged at step {step}")
        if adam is None:
            q = q - alpha * g_q
        else:
            _, q = adam_step(adam, q, g_q)
    return q


def inner_adapt_closed_form(s: Subspace, task: Task, data: Dataset,
                            alpha: float) -> np.ndarray:
    """Single full-batch adaptation step from q = 0 in closed form:
    q = -alpha * W^T grad_prompt(data, p0)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    g_p = task.grad_prompt(data, reparameterize(s, np.zeros(s.low_dim)))
    return -alpha * (s.projection.T @ g_p)


@dataclass
class OuterGrads:
    grad_projection: np.ndarray  # (D, d)
    grad_offset: np.ndarray      # (D,)


def outer_grads(s: Subspace, q_i: np.ndarray, task: Task, data: Dataset) -> OuterGrads:
    """First-order outer gradients at the adapted prompt p_i = W q_i + p0.

    With q_i treated as a constant, dL/dW = g2 q_i^T and dL/dp0 = g2
    where g2 is the prompt gradient of the query loss at p_i.
    """
    q_i = as_vector(q_i, "q_i")
    if q_i.shape[0] != s.low_dim:
        raise ShapeError(f"q_i has length {q_i.shape[0]}, subspace needs {s.low_dim}")
    p_i = reparameterize(s, q_i)
    g2 = task.grad_prompt(data, p_i)
    return OuterGrads(grad_projection=np.outer(g2, q_i), grad_offset=g2)


def _pool_source(source) -> tuple[list, str, str]:
    families = [source] if isinstance(source, TaskFamily) else list(source)
    if not families:
        raise ConfigError(["meta_train needs at least one source family"])
    tasks = [t for fam in families for t in fam.tasks]
    if not tasks:
        raise ConfigError(["source families contain no tasks"])
    dim = tasks[0].dim
    if any(t.dim != dim for t in tasks):
        raise ShapeError("source tasks disagree on prompt dimension")
    family_id = "+".join(fam.family_id for fam in families)
    seen, tags = set(), []
    for fam in families:
        if fam.task_type_tag not in seen:
            seen.add(fam.task_type_tag)
            tags.append(fam.task_type_tag)
    return tasks, family_id, "+".join(tags)


def _eval_subspace(w: np.ndarray, p0: np.ndarray, eval_task: Task,
                   eval_train: Dataset, eval_test: Dataset,
                   cfg: MetaConfig) -> float:
    s = Subspace(w, p0)
    q = inner_adapt(s, eval_task, eval_train, cfg.inner_lr, cfg.inner_steps,
                    batch_size=cfg.inner_batch_size, optimizer=cfg.inner_optimizer)
    return eval_task.score(eval_test, reparameterize(s, q))


def meta_train(source, eval_task: Task, cfg: MetaConfig,
               rng: RngStream) -> tuple[Subspace, MetaTrace]:
    """Run the full meta-training loop and return the checkpoint with the
    best held-out eval score together with the iteration trace."""
    cfg.validate()
    tasks, family_id, type_tag = _pool_source(source)
    full_dim = tasks[0].dim
    d = cfg.subspace_dim
    if d > full_dim:
        raise ConfigError([f"subspace_dim {d} exceeds prompt dimension {full_dim}"])

    init_rng = rng.substream(0)
    w = init_rng.normal((full_dim, d)) / np.sqrt(d)
    p0 = np.zeros(full_dim)
    if np.linalg.matrix_rank(w) < d:
        raise TrainingError("random projection init is rank-deficient")
    q_frozen = init_rng.normal(d) if cfg.mode in ("SPC", "INI") else None
    meta_q = np.zeros(d) if cfg.mode == "ALL" else None

    eval_rng = rng.substream(1)
    eval_train = eval_task.sample_dataset(cfg.eval_train_size, eval_rng)
    eval_test = eval_task.sample_dataset(cfg.eval_test_size, eval_rng)

    adam_w = AdamState.init((full_dim, d), cfg.outer_lr)
    adam_p = AdamState.init((full_dim,), cfg.outer_lr)
    adam_q = AdamState.init((d,), cfg.outer_lr) if cfg.mode == "ALL" else None

    trace = MetaTrace()
    m = cfg.tasks_per_iteration
    n_tasks = len(tasks)
    best_w, best_p0 = w.copy(), p0.copy()

    for it in range(cfg.max_iterations):
        it_rng = rng.substream(2 + it)
        picked = it_rng.choice(n_tasks, m, replace=(m > n_tasks))
        s_now = Subspace(w, p0)
        gw_sum = np.zeros((full_dim, d))
        gp_sum = np.zeros(full_dim)
        before, after, outer_losses, ids = [], [], [], []
        for slot, ti in enumerate(picked):
            task = tasks[int(ti)]
            ids.append(task.task_id)
            t_rng = it_rng.substream(slot)
            support = task.sample_dataset(cfg.sampled_dataset_size, t_rng)
            if cfg.mode in ("BSL", "ALL"):
                q_start = meta_q if cfg.mode == "ALL" else np.zeros(d)
                before.append(task.loss(support, reparameterize(s_now, q_start)))
                q_i = inner_adapt(s_now, task, support, cfg.inner_lr,
                                  cfg.inner_steps, batch_size=cfg.inner_batch_size,
                                  optimizer=cfg.inner_optimizer,
                                  q0=meta_q if cfg.mode == "ALL" else None)
                after.append(task.loss(support, reparameterize(s_now, q_i)))
            else:
                q_i = q_frozen
                fixed_loss = task.loss(support, reparameterize(s_now, q_i))
                before.append(fixed_loss)
                after.append(fixed_loss)
            query = task.sample_dataset(cfg.sampled_dataset_size, t_rng)
            og = outer_grads(s_now, q_i, task, query)
            gw_sum += og.grad_projection
            gp_sum += og.grad_offset
            outer_losses.append(task.loss(query, reparameterize(s_now, q_i)))

        outer_loss = float(np.mean(outer_losses))
        gw_mean = gw_sum / m
        gp_mean = gp_sum / m
        if not (np.isfinite(outer_loss)
                and np.all(np.isfinite(gw_mean))
                and np.all(np.isfinite(gp_mean))):
            raise TrainingError(f"meta-training diverged at iteration {it}", trace)
        if cfg.mode == "ALL":
            gq_mean = w.T @ gp_mean
            _, meta_q = adam_step(adam_q, meta_q, gq_mean)
        if cfg.mode in ("BSL", "ALL", "SPC"):
            _, w = adam_step(adam_w, w, gw_mean)
        _, p0 = adam_step(adam_p, p0, gp_mean)

        eval_score = None
        if (it + 1) % cfg.eval_every == 0 or it == cfg.max_iterations - 1:
            eval_score = _eval_subspace(w, p0, eval_task, eval_train, eval_test, cfg)
            if trace.best_eval_score is None or eval_score > trace.best_eval_score:
                trace.best_eval_score = eval_score
                trace.best_iteration = it
                best_w, best_p0 = w.copy(), p0.copy()
        trace.records.append(IterationRecord(
            iteration=it,
            task_ids=ids,
            inner_loss_before=before,
            inner_loss_after=after,
            outer_loss=outer_loss,
            eval_score=eval_score,
        ))

    metadata = {
        "source_family_id": family_id,
        "task_type_tag": type_tag,
        "training_mode": cfg.mode,
        "creation_seed": int(rng.seed),
        "subspace_dim": int(d),
        "best_iteration": int(trace.best_iteration),
        "best_eval_score": float(trace.best_eval_score),
    }
    best = Subspace(best_w, best_p0, metadata)
    trace.best_checkpoint = best
    return best, trace


def pretrain_prompt(tasks, full_dim: int, lr: float, steps: int, rng: RngStream,
                    dataset_size: int = 256) -> np.ndarray:
    """Baseline prompt: plain gradient descent from zero on the mean loss
    over one pooled sample per source task.  steps=0 returns the zero
    prompt unchanged."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    tasks = list(tasks)
    if not tasks:
        raise ConfigError(["pretrain_prompt needs at least one task"])
    if any(t.dim != full_dim for t in tasks):
        raise ShapeError("task prompt dimensions disagree with full_dim")
    datasets = [t.sample_dataset(dataset_size, rng.substream(i))
                for i, t in enumerate(tasks)]
    p = np.zeros(full_dim)
    for step in range(steps):
        g = np.zeros(full_dim)
        for task, data in zip(tasks, datasets):
            g += task.grad_prompt(data, p)
        g /= len(tasks)
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"pretraining diverged at step {step}")
        p = p - lr * g
    return p
