"""Synthetic differentiable task families.

Two kinds are provided, both exposing the same surface (loss, analytic
prompt gradient, task-native score, dataset sampling):

* quadratic tasks whose optima sit on a planted low-dimensional affine
  subspace of the prompt space, and
* classification tasks through a frozen randomly-initialized deep net
  that consumes a long "prompt" vector as per-layer mean-pooled biases.

Tasks inside one family share generator structure (planted basis, or
frozen weights + label concept) and differ only in task-specific draws
(subspace coordinates, or input-domain shift/scale).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FamilySpecError, NumericError, ShapeError
from .numerics import RngStream, as_matrix, as_vector, orthonormalize


@dataclass
class Dataset:
    """A fixed batch of supervised records."""

    inputs: np.ndarray    # (n, feature_dim)
    targets: np.ndarray   # (n,)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2:
            raise ShapeError(f"inputs must be (n, features), got {self.inputs.shape}")
        self.targets = np.asarray(self.targets)
        if self.targets.ndim != 1:
            raise ShapeError(f"targets must be 1-d, got {self.targets.shape}")
        if len(self.inputs) != len(self.targets):
            raise ShapeError(
                f"{len(self.inputs)} inputs vs {len(self.targets)} targets"
            )
        if not np.all(np.isfinite(self.inputs)):
            raise NumericError("dataset inputs contain non-finite entries")

    @property
    def size(self) -> int:
        return len(self.targets)

    def cyclic_batch(self, step: int, batch_size: int) -> "Dataset":
        """Deterministic mini-batch window for sequential passes.

        Step k covers records [k*b, (k+1)*b) modulo the dataset size, so
        batches sweep the data without replacement and recycle once
        exhausted.
        """
        if batch_size <= 0:
            raise ValueError("batch_size must be positive")
        n = self.size
        if batch_size >= n:
            return self
        idx = (np.arange(batch_size) + step * batch_size) % n
        return Dataset(self.inputs[idx], self.targets[idx])


class Task:
    """Interface shared by all task kinds."""

    task_id: str
    family_id: str
    task_type_tag: str
    dim: int  # prompt dimension D

    def loss(self, data: Dataset, p: np.ndarray) -> float:
        raise NotImplementedError

    def grad_prompt(self, data: Dataset, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def score(self, data: Dataset, p: np.ndarray) -> float:
        raise NotImplementedError

    def sample_dataset(self, size: int, rng: RngStream) -> Dataset:
        raise NotImplementedError

    def _check_prompt(self, p) -> np.ndarray:
        p = as_vector(p, "prompt")
        if p.shape[0] != self.dim:
            raise ShapeError(f"prompt has length {p.shape[0]}, task needs {self.dim}")
        return p


@dataclass
class QuadraticTask(Task):
    """loss(p) = 0.5 * ||p - target||^2; optimum planted on the family's
    affine subspace.  Records are placeholders: the loss is data-free but
    the sampling interface is still honored."""

    task_id: str
    family_id: str
    task_type_tag: str
    target_point: np.ndarray
    coords: np.ndarray  # coordinates of the optimum in the planted basis

    def __post_init__(self):
        self.target_point = as_vector(self.target_point, "target_point")
        self.coords = as_vector(self.coords, "coords")
        self.dim = self.target_point.shape[0]

    def loss(self, data: Dataset, p: np.ndarray) -> float:
        p = self._check_prompt(p)
        diff = p - self.target_point
        return 0.5 * float(diff @ diff)

    def grad_prompt(self, data: Dataset, p: np.ndarray) -> np.ndarray:
        p = self._check_prompt(p)
        return p - self.target_point

    def score(self, data: Dataset, p: np.ndarray) -> float:
        return -self.loss(data, p)

    def sample_dataset(self, size: int, rng: RngStream) -> Dataset:
        if size <= 0:
            raise ValueError("dataset size must be positive")
        return Dataset(np.zeros((size, 1)), np.zeros(size))


@dataclass
class FrozenNetBackbone:
    """Frozen random deep net.  The prompt enters as L per-layer bias
    vectors, each the mean over prompt_len pooled prompt tokens."""

    layers: int
    hidden: int
    prompt_len: int
    classes: int
    a_weights: list      # layers x (hidden, hidden)
    b_weights: list      # layers x (hidden, hidden), applied to pooled prompt
    out_weights: np.ndarray  # (classes, hidden)

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1 or self.prompt_len < 1:
            raise FamilySpecError("layers, hidden and prompt_len must be >= 1")
        if self.classes < 2:
            raise FamilySpecError("need at least 2 classes")
        if len(self.a_weights) != self.layers or len(self.b_weights) != self.layers:
            raise FamilySpecError("weight list length must equal layers")
        self.a_weights = [as_matrix(w, "a_weight") for w in self.a_weights]
        self.b_weights = [as_matrix(w, "b_weight") for w in self.b_weights]
        self.out_weights = as_matrix(self.out_weights, "out_weights")
        h = self.hidden
        for w in self.a_weights + self.b_weights:
            if w.shape != (h, h):
                raise FamilySpecError(f"layer weight shape {w.shape}, expected {(h, h)}")
        if self.out_weights.shape != (self.classes, h):
            raise FamilySpecError("out_weights shape mismatch")

    @property
    def prompt_dim(self) -> int:
        return self.prompt_len * self.layers * self.hidden

    @classmethod
    def random(cls, layers: int, hidden: int, prompt_len: int, classes: int,
               rng: RngStream, weight_scale: float = 1.0,
               out_scale: float = 4.0) -> "FrozenNetBackbone":
        # out_scale sets the reachable logit magnitude; tanh activations are
        # bounded so without it confident margins are impossible
        s = weight_scale / np.sqrt(hidden)
        a = [s * rng.normal((hidden, hidden)) for _ in range(layers)]
        b = [s * rng.normal((hidden, hidden)) for _ in range(layers)]
        out = out_scale / np.sqrt(hidden) * rng.normal((classes, hidden))
        return cls(layers, hidden, prompt_len, classes, a, b, out)


def _pool_prompt(backbone: FrozenNetBackbone, p: np.ndarray) -> np.ndarray:
    """Split p into layers x prompt_len x hidden and mean-pool the tokens
    of each layer block down to one bias vector per layer."""
    blocks = p.reshape(backbone.layers, backbone.prompt_len, backbone.hidden)
    return blocks.mean(axis=1)


def _forward(backbone: FrozenNetBackbone, x: np.ndarray, p: np.ndarray):
    pooled = _pool_prompt(backbone, p)
    acts = []
    a = x
    for layer in range(backbone.layers):
        u = a @ backbone.a_weights[layer].T + pooled[layer]
        a = np.tanh(u)
        acts.append(a)
    logits = a @ backbone.out_weights.T
    return logits, acts


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


@dataclass
class FrozenNetTask(Task):
    """One domain of a frozen-net family: same weights and label concept,
    task-specific input translation and per-feature scaling."""

    task_id: str
    family_id: str
    task_type_tag: str
    backbone: FrozenNetBackbone
    anchors: np.ndarray        # (classes, hidden) label-concept anchors
    mix_weights: np.ndarray    # (classes,) class frequencies
    noise_std: float
    shift: np.ndarray          # (hidden,) input translation
    feature_scale: np.ndarray  # (hidden,) diagonal input scaling

    def __post_init__(self):
        self.anchors = as_matrix(self.anchors, "anchors")
        self.mix_weights = as_vector(self.mix_weights, "mix_weights")
        self.shift = as_vector(self.shift, "shift")
        self.feature_scale = as_vector(self.feature_scale, "feature_scale")
        self.dim = self.backbone.prompt_dim

    def loss(self, data: Dataset, p: np.ndarray) -> float:
        p = self._check_prompt(p)
        logits, _ = _forward(self.backbone, data.inputs, p)
        logp = _log_softmax(logits)
        y = data.targets.astype(np.int64)
        return -float(logp[np.arange(len(y)), y].mean())

    def grad_prompt(self, data: Dataset, p: np.ndarray) -> np.ndarray:
        p = self._check_prompt(p)
        bb = self.backbone
        logits, acts = _forward(bb, data.inputs, p)
        y = data.targets.astype(np.int64)
        n = len(y)
        probs = np.exp(_log_softmax(logits))
        probs[np.arange(n), y] -= 1.0
        dlogits = probs / n
        da = dlogits @ bb.out_weights
        pooled_grad = np.empty((bb.layers, bb.hidden))
        for layer in range(bb.layers - 1, -1, -1):
            du = da * (1.0 - acts[layer] ** 2)
            pooled_grad[layer] = du.sum(axis=0)
            da = du @ bb.a_weights[layer]
        # each pooled bias is the mean of prompt_len tokens, so the token
        # gradient is the pooled gradient divided by prompt_len
        g = np.broadcast_to(
            pooled_grad[:, None, :] / bb.prompt_len,
            (bb.layers, bb.prompt_len, bb.hidden),
        )
        return g.reshape(self.dim).copy()

    def score(self, data: Dataset, p: np.ndarray) -> float:
        """Classification accuracy on the given records."""
        p = self._check_prompt(p)
        logits, _ = _forward(self.backbone, data.inputs, p)
        y = data.targets.astype(np.int64)
        return float((logits.argmax(axis=1) == y).mean())

    def sample_dataset(self, size: int, rng: RngStream) -> Dataset:
        if size <= 0:
            raise ValueError("dataset size must be positive")
        y = rng.choice(self.backbone.classes, size, replace=True, p=self.mix_weights)
        z = self.anchors[y] + self.noise_std * rng.normal((size, self.backbone.hidden))
        x = self.shift + self.feature_scale * z
        return Dataset(x, y.astype(np.int64))


@dataclass
class TaskFamily:
    family_id: str
    task_type_tag: str
    prompt_dim: int
    tasks: list
    _diagnostics: dict = field(default_factory=dict, repr=False)

    def diagnostics(self) -> dict:
        """Generator internals (planted basis, concept anchors, ...) for
        analysis only; learners must not read these."""
        return dict(self._diagnostics)


@dataclass
class QuadraticFamilySpec:
    dim: int
    planted_rank: int
    basis: np.ndarray   # (dim, planted_rank), orthonormal columns
    center: np.ndarray  # (dim,)
    coord_scale: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise FamilySpecError("dim must be >= 1")
        if not (1 <= self.planted_rank <= self.dim):
            raise FamilySpecError(
                f"planted_rank must be in [1, {self.dim}], got {self.planted_rank}"
            )
        self.basis = as_matrix(self.basis, "basis")
        self.center = as_vector(self.center, "center")
        if self.basis.shape != (self.dim, self.planted_rank):
            raise FamilySpecError(
                f"basis shape {self.basis.shape}, expected {(self.dim, self.planted_rank)}"
            )
        if self.center.shape[0] != self.dim:
            raise FamilySpecError("center length must equal dim")
        gram = self.basis.T @ self.basis
        if not np.allclose(gram, np.eye(self.planted_rank), atol=1e-10):
            raise FamilySpecError("basis columns must be orthonormal (within 1e-10)")
        if self.coord_scale <= 0:
            raise FamilySpecError("coord_scale must be positive")

    @classmethod
    def random(cls, dim: int, planted_rank: int, rng: RngStream,
               coord_scale: float = 1.0, center_scale: float = 1.0) -> "QuadraticFamilySpec":
        basis = orthonormalize(rng.normal((dim, planted_rank)))
        center = center_scale * rng.normal(dim)
        return cls(dim, planted_rank, basis, center, coord_scale)


def make_quadratic_family(spec: QuadraticFamilySpec, num_tasks: int, rng: RngStream,
                          family_id: str = "quadratic",
                          task_type_tag: str = "quadratic") -> TaskFamily:
    if num_tasks < 1:
        raise FamilySpecError("num_tasks must be >= 1")
    tasks = []
    for i in range(num_tasks):
        coords = spec.coord_scale * rng.normal(spec.planted_rank)
        target = spec.center + spec.basis @ coords
        tasks.append(QuadraticTask(
            task_id=f"{family_id}/task{i}",
            family_id=family_id,
            task_type_tag=task_type_tag,
            target_point=target,
            coords=coords,
        ))
    return TaskFamily(
        family_id=family_id,
        task_type_tag=task_type_tag,
        prompt_dim=spec.dim,
        tasks=tasks,
        _diagnostics={"planted_basis": spec.basis.copy(), "center": spec.center.copy()},
    )


@dataclass
class FrozenNetFamilySpec:
    """Generator for one frozen-net task family.

    The label concept (class anchors in latent space) is shared by every
    task; the domain shift of task i is a translation drawn from a fixed
    low-rank shift basis plus a diagonal feature scaling that jitters
    around a family-wide base profile.  Families that should be
    dissimilar get independent anchors, shift basis, and base scaling
    while optionally sharing the same frozen backbone.
    """

    backbone: FrozenNetBackbone
    anchors: np.ndarray      # (classes, hidden)
    mix_weights: np.ndarray  # (classes,)
    noise_std: float
    shift_basis: np.ndarray  # (hidden, shift_rank), orthonormal
    shift_scale: float
    scale_log_range: float
    base_feature_scale: np.ndarray | None = None  # (hidden,), default ones

    def __post_init__(self):
        self.anchors = as_matrix(self.anchors, "anchors")
        self.mix_weights = as_vector(self.mix_weights, "mix_weights")
        self.shift_basis = as_matrix(self.shift_basis, "shift_basis")
        if self.base_feature_scale is None:
            self.base_feature_scale = np.ones(self.backbone.hidden)
        self.base_feature_scale = as_vector(self.base_feature_scale,
                                            "base_feature_scale")
        if self.base_feature_scale.shape[0] != self.backbone.hidden:
            raise FamilySpecError("base_feature_scale length must equal hidden")
        if np.any(self.base_feature_scale <= 0):
            raise FamilySpecError("base_feature_scale must be positive")
        bb = self.backbone
        if self.anchors.shape != (bb.classes, bb.hidden):
            raise FamilySpecError("anchors shape must be (classes, hidden)")
        if self.mix_weights.shape[0] != bb.classes:
            raise FamilySpecError("mix_weights length must equal classes")
        if np.any(self.mix_weights < 0) or not np.isclose(self.mix_weights.sum(), 1.0):
            raise FamilySpecError("mix_weights must be nonnegative and sum to 1")
        if self.noise_std <= 0:
            raise FamilySpecError("noise_std must be positive")
        if self.shift_basis.shape[0] != bb.hidden:
            raise FamilySpecError("shift_basis rows must equal hidden")
        if not (1 <= self.shift_basis.shape[1] <= bb.hidden):
            raise FamilySpecError("shift_basis rank must be in [1, hidden]")
        if self.shift_scale < 0 or self.scale_log_range < 0:
            raise FamilySpecError("shift_scale and scale_log_range must be >= 0")

    @classmethod
    def random(cls, backbone: FrozenNetBackbone, rng: RngStream,
               anchor_scale: float = 1.5, noise_std: float = 0.35,
               shift_rank: int = 4, shift_scale: float = 1.0,
               scale_log_range: float = 0.25,
               family_scale_log_range: float = 0.0) -> "FrozenNetFamilySpec":
        """Fresh label concept and domain-shift generator over a given
        backbone.  Calling this twice (same backbone, different rng use)
        yields dissimilar families.  family_scale_log_range > 0 gives the
        family a scale fingerprint that per-task scaling jitters around,
        so tasks inside one family stay closer to each other than to any
        other family's."""
        h = backbone.hidden
        anchors = anchor_scale / np.sqrt(h) * rng.normal((backbone.classes, h))
        mix = np.full(backbone.classes, 1.0 / backbone.classes)
        shift_basis = orthonormalize(rng.normal((h, shift_rank)))
        base_scale = np.exp(rng.uniform(-family_scale_log_range,
                                        family_scale_log_range, h))
        return cls(backbone, anchors, mix, noise_std, shift_basis,
                   shift_scale, scale_log_range, base_feature_scale=base_scale)


def make_frozen_net_family(spec: FrozenNetFamilySpec, num_tasks: int, rng: RngStream,
                           family_id: str = "frozen-net",
                           task_type_tag: str = "frozen-net") -> TaskFamily:
    if num_tasks < 1:
        raise FamilySpecError("num_tasks must be >= 1")
    bb = spec.backbone
    rank = spec.shift_basis.shape[1]
    tasks = []
    for i in range(num_tasks):
        latent = rng.normal(rank)
        shift = spec.shift_scale * (spec.shift_basis @ latent)
        feature_scale = spec.base_feature_scale * np.exp(
            rng.uniform(-spec.scale_log_range, spec.scale_log_range, bb.hidden))
        tasks.append(FrozenNetTask(
            task_id=f"{family_id}/task{i}",
            family_id=family_id,
            task_type_tag=task_type_tag,
            backbone=bb,
            anchors=spec.anchors,
            mix_weights=spec.mix_weights,
            noise_std=spec.noise_std,
            shift=shift,
            feature_scale=feature_scale,
        ))
    return TaskFamily(
        family_id=family_id,
        task_type_tag=task_type_tag,
        prompt_dim=bb.prompt_dim,
        tasks=tasks,
        _diagnostics={"anchors": spec.anchors.copy(),
                      "shift_basis": spec.shift_basis.copy(),
                      "base_feature_scale": spec.base_feature_scale.copy()},
    )


# Functional surface mirrored for callers that treat tasks generically.

def loss(task: Task, data: Dataset, p: np.ndarray) -> float:
    return task.loss(data, p)


def grad_prompt(task: Task, data: Dataset, p: np.ndarray) -> np.ndarray:
    return task.grad_prompt(data, p)


def score(task: Task, data: Dataset, p: np.ndarray) -> float:
    return task.score(data, p)


def sample_dataset(task: Task, size: int, rng: RngStream) -> Dataset:
    return task.sample_dataset(size, rng)
