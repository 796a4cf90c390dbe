"""Derivative-free optimization of the low-dimensional coordinates under
a hard evaluation budget.

Two optimizers are provided with standard published defaults: full
CMA-ES (rank-one + rank-mu covariance adaptation, cumulative step-size
control) and separable natural evolution strategies with utility-shaped
fitness.  Both consume a BudgetedObjective that counts every candidate
evaluation and refuses to exceed its budget; with population size lambda
and budget B they run exactly floor(B / lambda) generations.

Only training-loss evaluations are charged to the budget.  Development
scoring during tuning is metered separately by black_box_tune.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BudgetExceededError, ConfigError, NumericError,
                     OptimizerError, ShapeError)
from .numerics import RngStream
from .subspace import Subspace, reparameterize
from .tasks import Dataset, Task

ALGORITHMS = ("cmaes", "snes")


@dataclass
class TuneConfig:
    budget: int = 8000
    population: int = 20
    dev_eval_every: int = 20
    initial_sigma: float = 1.0
    algorithm: str = "cmaes"

    def validate(self) -> "TuneConfig":
        problems = []
        if self.population < 2:
            problems.append("population must be >= 2")
        if self.budget < max(self.population, 1):
            problems.append("budget must be >= population")
        if self.dev_eval_every < 1:
            problems.append("dev_eval_every must be >= 1")
        if self.initial_sigma <= 0:
            problems.append("initial_sigma must be positive")
        if self.algorithm not in ALGORITHMS:
            problems.append(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if problems:
            raise ConfigError(problems)
        return self


class BudgetedObjective:
    """Wraps a scalar function with a hard call budget and best-so-far
    tracking.  best_loss is monotonically nonincreasing in call_count;
    ties keep the earlier candidate."""

    def __init__(self, fn, budget: int):
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self._fn = fn
        self.budget = int(budget)
        self.call_count = 0
        self.best_loss = math.inf
        self.best_q = None

    @property
    def remaining(self) -> int:
        return self.budget - self.call_count

    def __call__(self, q: np.ndarray) -> float:
        if self.call_count + 1 > self.budget:
            raise BudgetExceededError(
                f"call {self.call_count + 1} would exceed budget {self.budget}"
            )
        value = float(self._fn(q))
        self.call_count += 1
        if not math.isfinite(value):
            raise NumericError(f"objective returned {value} at call {self.call_count}")
        if value < self.best_loss:
            self.best_loss = value
            self.best_q = np.array(q, dtype=np.float64, copy=True)
        return value


@dataclass
class GenRecord:
    generation: int
    call_count: int
    best_loss: float
    sigma: float
    cov_eig_min: float
    cov_eig_max: float


@dataclass
class CmaEsState:
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    generation: int
    population: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c1: float
    c_mu: float
    chi_n: float

    @classmethod
    def init(cls, dim: int, population: int, initial_sigma: float) -> "CmaEsState":
        if dim < 1:
            raise ValueError("dim must be >= 1")
        lam = population
        mu = lam // 2
        raw = np.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
        weights = raw / raw.sum()
        mu_eff = 1.0 / float(weights @ weights)
        c_sigma = (mu_eff + 2.0) / (dim + mu_eff + 5.0)
        d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (dim + 1.0)) - 1.0) + c_sigma
        c_c = (4.0 + mu_eff / dim) / (dim + 4.0 + 2.0 * mu_eff / dim)
        c1 = 2.0 / ((dim + 1.3) ** 2 + mu_eff)
        c_mu = min(1.0 - c1,
                   2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dim + 2.0) ** 2 + mu_eff))
        chi_n = math.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim ** 2))
        return cls(
            mean=np.zeros(dim), sigma=float(initial_sigma),
            cov=np.eye(dim), p_sigma=np.zeros(dim), p_c=np.zeros(dim),
            generation=0, population=lam, mu=mu, weights=weights,
            mu_eff=mu_eff, c_sigma=c_sigma, d_sigma=d_sigma, c_c=c_c,
            c1=c1, c_mu=c_mu, chi_n=chi_n,
        )


@dataclass
class DfoResult:
    best_q: np.ndarray
    best_loss: float
    trace: list
    state: object


def _decompose_cov(cov: np.ndarray, trace: list):
    """Symmetrize and eigendecompose; one spectrum-lift repair attempt
    before giving up."""
    cov = (cov + cov.T) / 2.0
    vals, vecs = np.linalg.eigh(cov)
    if not np.all(np.isfinite(vals)):
        raise OptimizerError("covariance eigenvalues are non-finite", trace)
    if vals[0] <= vals[-1] * 1e-14:
        lift = max(vals[-1], 1.0) * 1e-12 - min(float(vals[0]), 0.0)
        cov = cov + lift * np.eye(cov.shape[0])
        vals, vecs = np.linalg.eigh(cov)
        if vals[0] <= 0.0:
            raise OptimizerError("covariance lost positive definiteness", trace)
    return cov, vals, vecs


def cmaes_minimize(obj: BudgetedObjective, dim: int, cfg: TuneConfig,
                   rng: RngStream, on_generation=None) -> DfoResult:
    """CMA-ES from mean 0 with standard strategy parameters; runs exactly
    floor(budget / population) generations."""
    cfg.validate()
    if obj.call_count != 0:
        raise ValueError("cmaes_minimize needs a fresh objective")
    st = CmaEsState.init(dim, cfg.population, cfg.initial_sigma)
    lam, mu = st.population, st.mu
    trace: list = []
    generations = obj.budget // lam
    for gen in range(generations):
        st.cov, vals, vecs = _decompose_cov(st.cov, trace)
        z = rng.normal((lam, dim))
        y = z @ (vecs * np.sqrt(vals)).T
        xs = st.mean + st.sigma * y
        fs = np.array([obj(xs[k]) for k in range(lam)])
        order = np.argsort(fs, kind="stable")
        y_sel = y[order[:mu]]
        y_w = st.weights @ y_sel

        inv_sqrt = vecs @ ((1.0 / np.sqrt(vals))[:, None] * vecs.T)
        st.p_sigma = ((1.0 - st.c_sigma) * st.p_sigma
                      + math.sqrt(st.c_sigma * (2.0 - st.c_sigma) * st.mu_eff)
                      * (inv_sqrt @ y_w))
        ps_norm2 = float(st.p_sigma @ st.p_sigma)
        decay = 1.0 - (1.0 - st.c_sigma) ** (2.0 * (gen + 1))
        h_sigma = 1.0 if ps_norm2 / dim / decay < 2.0 + 4.0 / (dim + 1.0) else 0.0
        st.p_c = ((1.0 - st.c_c) * st.p_c
                  + h_sigma * math.sqrt(st.c_c * (2.0 - st.c_c) * st.mu_eff) * y_w)
        c1a = st.c1 * (1.0 - (1.0 - h_sigma) * st.c_c * (2.0 - st.c_c))
        rank_mu = y_sel.T @ (st.weights[:, None] * y_sel)
        st.cov = ((1.0 - c1a - st.c_mu * st.weights.sum()) * st.cov
                  + st.c1 * np.outer(st.p_c, st.p_c)
                  + st.c_mu * rank_mu)
        st.sigma *= math.exp(min(1.0, (st.c_sigma / st.d_sigma)
                                 * (math.sqrt(ps_norm2) / st.chi_n - 1.0)))
        st.mean = xs[order[:mu]].T @ st.weights
        st.generation = gen + 1
        trace.append(GenRecord(gen + 1, obj.call_count, obj.best_loss,
                               st.sigma, float(vals[0]), float(vals[-1])))
        if on_generation is not None:
            on_generation(gen, trace[-1])
    return DfoResult(best_q=obj.best_q, best_loss=obj.best_loss, trace=trace, state=st)


@dataclass
class NesState:
    mean: np.ndarray
    log_sigma: np.ndarray
    generation: int
    population: int
    utilities: np.ndarray
    lr_mean: float
    lr_sigma: float

    @classmethod
    def init(cls, dim: int, population: int, initial_sigma: float) -> "NesState":
        if dim < 1:
            raise ValueError("dim must be >= 1")
        lam = population
        raw = np.maximum(0.0, np.log(lam / 2.0 + 1.0) - np.log(np.arange(1, lam + 1)))
        utilities = raw / raw.sum() - 1.0 / lam
        return cls(
            mean=np.zeros(dim),
            log_sigma=np.full(dim, math.log(initial_sigma)),
            generation=0,
            population=lam,
            utilities=utilities,
            lr_mean=1.0,
            lr_sigma=(3.0 + math.log(dim)) / (5.0 * math.sqrt(dim)),
        )


def nes_utilities(state: NesState, losses: np.ndarray) -> np.ndarray:
    """Per-candidate utility weights: rank-based shaping, with utilities
    averaged across exact loss ties so mirrored candidates with equal
    loss receive equal weight.  Utilities always sum to zero."""
    losses = np.asarray(losses, dtype=np.float64)
    order = np.argsort(losses, kind="stable")
    util = np.empty(state.population)
    util[order] = state.utilities
    uniq, inverse, counts = np.unique(losses, return_inverse=True, return_counts=True)
    if len(uniq) < len(losses):
        sums = np.zeros(len(uniq))
        np.add.at(sums, inverse, util)
        util = sums[inverse] / counts[inverse]
    return util


def snes_minimize(obj: BudgetedObjective, dim: int, cfg: TuneConfig,
                  rng: RngStream, on_generation=None) -> DfoResult:
    """Separable NES from mean 0: per-coordinate step sizes adapted in
    log space via the natural gradient on utility-shaped fitness."""
    cfg.validate()
    if obj.call_count != 0:
        raise ValueError("snes_minimize needs a fresh objective")
    st = NesState.init(dim, cfg.population, cfg.initial_sigma)
    lam = st.population
    trace: list = []
    generations = obj.budget // lam
    for gen in range(generations):
        sigma = np.exp(st.log_sigma)
        z = rng.normal((lam, dim))
        xs = st.mean + sigma * z
        fs = np.array([obj(xs[k]) for k in range(lam)])
        util = nes_utilities(st, fs)
        delta_mean = util @ z
        delta_log_sigma = util @ (z * z - 1.0)
        st.mean = st.mean + st.lr_mean * sigma * delta_mean
        st.log_sigma = st.log_sigma + 0.5 * st.lr_sigma * delta_log_sigma
        if not (np.all(np.isfinite(st.mean)) and np.all(np.isfinite(st.log_sigma))):
            raise OptimizerError(f"sNES state non-finite at generation {gen}", trace)
        st.generation = gen + 1
        geo_sigma = float(np.exp(st.log_sigma.mean()))
        # diagonal model: covariance eigenvalues are just the squared sigmas
        trace.append(GenRecord(gen + 1, obj.call_count, obj.best_loss, geo_sigma,
                               float(np.exp(2.0 * st.log_sigma.min())),
                               float(np.exp(2.0 * st.log_sigma.max()))))
        if on_generation is not None:
            on_generation(gen, trace[-1])
    return DfoResult(best_q=obj.best_q, best_loss=obj.best_loss, trace=trace, state=st)


@dataclass
class CurvePoint:
    generation: int
    api_calls: int
    train_loss: float
    dev_score: float | None


@dataclass
class TuneResult:
    q: np.ndarray
    prompt: np.ndarray
    best_dev_score: float
    best_train_loss: float
    curve: list
    objective_calls: int
    dev_eval_count: int
    optimizer_trace: list


def black_box_tune(s: Subspace, task: Task, train: Dataset, dev: Dataset,
                   cfg: TuneConfig, rng: RngStream) -> TuneResult:
    """Optimize q against the train loss under the call budget, scoring
    the best-so-far candidate on dev every dev_eval_every generations.

    The returned q is the dev-best candidate over {zero-shot q=0, every
    dev-scored best-so-far}; dev evaluations are counted separately and
    never charged against the budget.
    """
    cfg.validate()
    if s.full_dim != task.dim:
        raise ShapeError(
            f"subspace is {s.full_dim}-dimensional but task needs {task.dim}"
        )
    d = s.low_dim
    obj = BudgetedObjective(lambda q: task.loss(train, reparameterize(s, q)),
                            cfg.budget)
    dev_evals = 0

    q_zero = np.zeros(d)
    zero_train = task.loss(train, reparameterize(s, q_zero))
    zero_dev = task.score(dev, reparameterize(s, q_zero))
    dev_evals += 1
    curve = [CurvePoint(0, 0, zero_train, zero_dev)]
    best_q, best_dev = q_zero, zero_dev

    generations = cfg.budget // cfg.population

    def on_generation(gen: int, rec: GenRecord):
        nonlocal dev_evals, best_q, best_dev
        dev_score = None
        if (gen + 1) % cfg.dev_eval_every == 0 or gen + 1 == generations:
            cand = obj.best_q
            dev_score = task.score(dev, reparameterize(s, cand))
            dev_evals += 1
            if dev_score > best_dev:
                best_dev = dev_score
                best_q = cand.copy()
        curve.append(CurvePoint(gen + 1, rec.call_count, rec.best_loss, dev_score))

    minimize = cmaes_minimize if cfg.algorithm == "cmaes" else snes_minimize
    result = minimize(obj, d, cfg, rng, on_generation=on_generation)

    return TuneResult(
        q=best_q,
        prompt=reparameterize(s, best_q),
        best_dev_score=best_dev,
        best_train_loss=result.best_loss if result.best_loss != math.inf else zero_train,
        curve=curve,
        objective_calls=obj.call_count,
        dev_eval_count=dev_evals,
        optimizer_trace=result.trace,
    )
