"""Black-box prompt tuning in meta-learned affine subspaces.

A deep continuous prompt p lives in R^D. Optimizing it without
gradients is hopeless at that dimension, so p is reparameterized as
p = W q + p0 with a tall projection W and offset p0, and only the
low-dimensional q is tuned by derivative-free search under a hard
evaluation budget. W and p0 are meta-learned on differentiable source
tasks so the subspace transfers to unseen tasks from the same family.

Modules: numerics (seeded streams, Adam, orthonormalization), tasks
(synthetic differentiable families), subspace (representation and
serialization), meta (subspace learning), dfo (CMA-ES / separable NES
tuning), selection (catalog choice), harness (experiments and CLI).
"""

from .errors import (
    BslError,
    BudgetExceededError,
    ConfigError,
    DegeneracyError,
    FamilySpecError,
    NumericError,
    OptimizerError,
    SelectionError,
    ShapeError,
    SubspaceFormatError,
    TrainingError,
)
from .numerics import (
    AdamState,
    RngStream,
    adam_step,
    finite_diff_grad,
    matvec,
    orthonormalize,
    principal_angles,
)
from .tasks import (
    Dataset,
    FrozenNetBackbone,
    FrozenNetFamilySpec,
    FrozenNetTask,
    QuadraticFamilySpec,
    QuadraticTask,
    Task,
    TaskFamily,
    make_frozen_net_family,
    make_quadratic_family,
)
from .subspace import (
    Subspace,
    load_subspace,
    random_subspace_normal,
    random_subspace_uniform,
    reparameterize,
    save_subspace,
    subspace_alignment,
)
from .meta import (
    MetaConfig,
    MetaTrace,
    inner_adapt,
    inner_adapt_closed_form,
    meta_train,
    outer_grads,
    pretrain_prompt,
)
from .dfo import (
    BudgetedObjective,
    CurvePoint,
    TuneConfig,
    TuneResult,
    black_box_tune,
    cmaes_minimize,
    snes_minimize,
)
from .selection import (
    CatalogEntry,
    SelectionResult,
    SubspaceCatalog,
    select_by_type,
    select_by_zero_shot,
    selection_success_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BslError",
    "BudgetExceededError",
    "ConfigError",
    "DegeneracyError",
    "FamilySpecError",
    "NumericError",
    "OptimizerError",
    "SelectionError",
    "ShapeError",
    "SubspaceFormatError",
    "TrainingError",
    "AdamState",
    "RngStream",
    "adam_step",
    "finite_diff_grad",
    "matvec",
    "orthonormalize",
    "principal_angles",
    "Dataset",
    "FrozenNetBackbone",
    "FrozenNetFamilySpec",
    "FrozenNetTask",
    "QuadraticFamilySpec",
    "QuadraticTask",
    "Task",
    "TaskFamily",
    "make_frozen_net_family",
    "make_quadratic_family",
    "Subspace",
    "load_subspace",
    "random_subspace_normal",
    "random_subspace_uniform",
    "reparameterize",
    "save_subspace",
    "subspace_alignment",
    "MetaConfig",
    "MetaTrace",
    "inner_adapt",
    "inner_adapt_closed_form",
    "meta_train",
    "outer_grads",
    "pretrain_prompt",
    "BudgetedObjective",
    "CurvePoint",
    "TuneConfig",
    "TuneResult",
    "black_box_tune",
    "cmaes_minimize",
    "snes_minimize",
    "CatalogEntry",
    "SelectionResult",
    "SubspaceCatalog",
    "select_by_type",
    "select_by_zero_shot",
    "selection_success_experiment",
    "__version__",
]
