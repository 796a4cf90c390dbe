"""Deterministic numeric kernels: RNG streams, Adam, finite differences,
orthonormalization and principal angles.

All vectors and matrices are float64 numpy arrays.  Randomness flows only
through RngStream so every consumer is replayable from a (seed, stream_id)
pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, NumericError, ShapeError

_UINT64_MASK = 0xFFFFFFFFFFFFFFFF


def _splitmix64(x: int) -> int:
    # Standard splitmix64 finalizer; bijective on 64-bit ints, so distinct
    # inputs always map to distinct child ids.
    x = (x + 0x9E3779B97F4A7C15) & _UINT64_MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _UINT64_MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _UINT64_MASK
    return x ^ (x >> 31)


@dataclass
class RngStream:
    """Counter-based random stream addressed by (seed, stream_id).

    Backed by Philox, which is keyed rather than sequential: two streams
    with different ids never share state, so draws in one stream cannot
    perturb a sibling.  A stream is single-owner mutable; share the parent
    and hand out substream() children instead of sharing one instance.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.seed = int(self.seed) & _UINT64_MASK
        self.stream_id = int(self.stream_id) & _UINT64_MASK

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = np.array([self.seed, self.stream_id], dtype=np.uint64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def substream(self, index: int) -> "RngStream":
        """Derive the index-th child stream. Deterministic, collision-free
        across indices of the same parent."""
        if index < 0:
            raise ValueError("substream index must be >= 0")
        child_id = _splitmix64((self.stream_id ^ _splitmix64(index + 1)) & _UINT64_MASK)
        return RngStream(self.seed, child_id)

    # Draw helpers all return float64 and advance this stream's state.

    def normal(self, shape=None) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def uniform(self, low: float, high: float, shape=None) -> np.ndarray:
        return self.generator.uniform(low, high, shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self.generator.integers(low, high, size=shape)

    def choice(self, n: int, size: int, replace: bool = False, p=None) -> np.ndarray:
        return self.generator.choice(n, size=size, replace=replace, p=p)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericError(f"{name} contains non-finite entries")
    return v


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name} contains non-finite entries")
    return m


def matvec(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    """w @ q with explicit shape checking."""
    w = np.asarray(w, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if w.ndim != 2 or q.ndim != 1:
        raise ShapeError(f"matvec expects (2-d, 1-d), got {w.shape} and {q.shape}")
    if w.shape[1] != q.shape[0]:
        raise ShapeError(f"matvec inner dims differ: {w.shape[1]} vs {q.shape[0]}")
    return w @ q


@dataclass
class AdamState:
    """Per-parameter Adam accumulator.  Moments match the parameter shape."""

    learning_rate: float
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def init(cls, shape, learning_rate: float, beta1: float = 0.9,
             beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        return cls(
            learning_rate=learning_rate,
            first_moment=np.zeros(shape, dtype=np.float64),
            second_moment=np.zeros(shape, dtype=np.float64),
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray):
    """One Adam update.  Mutates ``state``, returns (state, new_params).

    m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2, both bias-corrected,
    then params - lr * m_hat / (sqrt(v_hat) + eps).
    """
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.shape != state.first_moment.shape:
        raise ShapeError(
            f"adam_step shape mismatch: params {params.shape}, grad {grad.shape}, "
            f"state {state.first_moment.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise NumericError("adam_step received a non-finite gradient")
    state.step_count += 1
    t = state.step_count
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad * grad
    m_hat = state.first_moment / (1.0 - state.beta1 ** t)
    v_hat = state.second_moment / (1.0 - state.beta2 ** t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return state, new_params


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at
    a time.  Slow by construction; this is the oracle other gradients are
    checked against."""
    x = as_vector(x, "finite_diff point")
    if h <= 0:
        raise ValueError("step size h must be positive")
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"objective non-finite near coordinate {i}")
        g[i] = (fp - fm) / (2.0 * h)
    return g


def orthonormalize(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis for the column span via modified Gram-Schmidt,
    run twice to keep orthogonality loss near machine precision.

    Raises DegeneracyError when a column is (numerically) linearly
    dependent on the previous ones.
    """
    a = as_matrix(a, "basis")
    n, k = a.shape
    if k == 0 or k > n:
        raise ShapeError(f"need 1 <= columns <= rows, got shape {a.shape}")
    q = a.copy()
    col_scale = np.sqrt((a * a).sum(axis=0))
    for j in range(k):
        if col_scale[j] <= 0.0:
            raise DegeneracyError(f"column {j} is identically zero")
        for _pass in range(2):
            for i in range(j):
                q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        norm = np.linalg.norm(q[:, j])
        if norm <= tol * col_scale[j]:
            raise DegeneracyError(
                f"column {j} is linearly dependent on the preceding columns"
            )
        q[:, j] /= norm
    return q


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles (radians, nondecreasing) between the column spans
    of two bases with an equal number of rows.

    Both bases are orthonormalized, then the angles are the arccosines of
    the singular values of the cross-Gram matrix.
    """
    a = as_matrix(a, "basis a")
    b = as_matrix(b, "basis b")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"bases live in different spaces: {a.shape} vs {b.shape}")
    qa = orthonormalize(a)
    qb = orthonormalize(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    s = np.clip(s, 0.0, 1.0)
    # svd returns s descending, so arccos comes out nondecreasing already
    return np.arccos(s)
