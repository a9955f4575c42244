"""All-at-once baselines searching the full 4n-dimensional decision vector.

Every optimizer works in the unit cube given by `FarmCodec`: positions are
left unconstrained (infeasibility is penalized by the evaluator) and PTO
coordinates are clipped to [0, 1]. Each runner maximizes the evaluator's
fitness until `BudgetExhausted` and returns a `RunRecord` built from the
evaluator's best-so-far record.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .farm import BudgetExhausted, FarmCodec, FarmLayout, random_feasible_layout
from .nelder_mead import nelder_mead

__all__ = [
    "CMAES",
    "OptimizerConfig",
    "RunRecord",
    "default_cma_popsize",
    "default_de_popsize",
    "improvement_rate",
    "run_cma_es",
    "run_de",
    "run_nm_mutation",
    "run_one_plus_one",
    "run_pso",
]


def default_de_popsize(n):
    return 50 if n <= 4 else 30


def default_cma_popsize(dim):
    return 4 + int(3 * math.log(dim))


@dataclass
class OptimizerConfig:
    """Settings shared by the all-at-once baselines.

    `popsize` of ``None`` picks the method default for the farm size
    (CMA-ES ``4 + floor(3 ln D)``; DE and PSO 50 for n <= 4, else 30).
    `budget` is the evaluation horizon for schedules (PSO inertia) when the
    evaluator itself has no evaluation budget.
    """

    method: str = "cma-es"
    seed: int = 0
    popsize: int | None = None
    budget: int | None = None
    de_f: float = 0.5
    de_cr: float = 0.5
    pso_c1: float = 1.5
    pso_c2: float = 2.0
    pso_inertia_start: float = 1.0
    pso_inertia_floor: float = 0.4
    pso_vmax: float = 0.2
    ea_sigma: float = 0.1
    ea_per_buoy_mutation: bool = False
    nm_max_eval: int = 500
    nm_step: float = 0.05
    nm_mutation_sigma: float = 0.1
    cma_sigma0: float = 0.3

    def __post_init__(self):
        if self.popsize is not None and self.popsize < 2 and self.method in ("cma-es", "de", "pso"):
            raise ValueError("population methods need popsize >= 2")
        for name in ("de_f", "de_cr"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")


@dataclass
class RunRecord:
    """Outcome of one seeded optimization run.

    `trace[i]` is the best fitness after evaluation ``i + 1`` (``-inf``
    until a complete, eligible layout has been evaluated).
    """

    method: str
    seed: int
    best_layout: FarmLayout | None
    best_fitness: float
    trace: np.ndarray
    evaluations: int
    wall_seconds: float
    extras: dict = field(default_factory=dict)


def finish_run(method, seed, evaluator, started, extras=None):
    return RunRecord(
        method=method,
        seed=seed,
        best_layout=evaluator.best_layout,
        best_fitness=evaluator.best_fitness,
        trace=np.array(evaluator.trace, dtype=float),
        evaluations=evaluator.count,
        wall_seconds=time.perf_counter() - started,
        extras=extras or {},
    )


def budgeted(method):
    """Wrap ``body(evaluator, config, rng, extras)`` into a runner returning a RunRecord."""

    def decorate(body):
        @functools.wraps(body)
        def runner(evaluator, config):
            started = time.perf_counter()
            rng = np.random.default_rng(config.seed)
            extras = {}
            try:
                body(evaluator, config, rng, extras)
            except BudgetExhausted:
                pass
            return finish_run(method, config.seed, evaluator, started, extras)

        return runner

    return decorate


def improvement_rate(energy, best):
    """Relative improvement of `energy` over `best`, floored at 0."""
    if not energy > best:
        return 0.0
    if not math.isfinite(best) or best == 0:
        return 1.0
    return (energy - best) / abs(best)


def _unit_objective(evaluator, codec):
    def objective(u):
        return evaluator.fitness(codec.decode(u))[0]

    return objective


def _horizon(evaluator, config):
    if evaluator.max_evaluations is not None:
        return evaluator.max_evaluations
    return config.budget or 6000


class CMAES:
    """(mu/mu_w, lambda)-CMA-ES with the standard default parameters, maximizing.

    Parameters
    ----------
    mean : array_like
        Initial distribution mean.
    sigma : float
        Initial step size.
    rng : numpy.random.Generator
    popsize : int, optional
        lambda; defaults to ``4 + floor(3 ln N)``.
    mu : int, optional
        Number of recombined parents; defaults to ``lambda // 2``.
    """

    def __init__(self, mean, sigma, rng, popsize=None, mu=None):
        self.mean = np.array(mean, dtype=float)
        self.sigma = float(sigma)
        self.rng = rng
        N = self.dim = self.mean.size
        self.popsize = lam = popsize or default_cma_popsize(N)
        self.mu = mu = mu or lam // 2
        w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights**2)
        mueff = self.mueff
        self.cc = (4 + mueff / N) / (N + 4 + 2 * mueff / N)
        self.cs = (mueff + 2) / (N + mueff + 5)
        self.c1 = 2 / ((N + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((N + 2) ** 2 + mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (N + 1)) - 1) + self.cs
        self.chi_n = math.sqrt(N) * (1 - 1 / (4 * N) + 1 / (21 * N * N))
        self.pc = np.zeros(N)
        self.ps = np.zeros(N)
        self.B = np.eye(N)
        self.D = np.ones(N)
        self.C = np.eye(N)
        self.generation = 0

    def ask(self):
        z = self.rng.standard_normal((self.popsize, self.dim))
        return self.mean + self.sigma * (z * self.D) @ self.B.T

    def tell(self, solutions, values):
        """Update from evaluated `solutions` (rows) and their fitness `values`."""
        N = self.dim
        order = np.argsort(-np.asarray(values, dtype=float), kind="stable")[: self.mu]
        xs = np.asarray(solutions, dtype=float)[order]
        old = self.mean
        self.mean = self.weights @ xs
        y = (self.mean - old) / self.sigma
        inv_sqrt_c = self.B @ np.diag(1 / self.D) @ self.B.T
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * inv_sqrt_c @ y
        self.generation += 1
        ps_norm = np.linalg.norm(self.ps)
        hsig = ps_norm / math.sqrt(1 - (1 - self.cs) ** (2 * self.generation)) / self.chi_n < 1.4 + 2 / (N + 1)
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * y
        ys = (xs - old) / self.sigma
        rank_mu = (ys.T * self.weights) @ ys
        self.C = (
            (1 - self.c1 - self.cmu) * self.C
            + self.c1 * (np.outer(self.pc, self.pc) + (1 - hsig) * self.cc * (2 - self.cc) * self.C)
            + self.cmu * rank_mu
        )
        self.sigma *= math.exp((self.cs / self.damps) * (ps_norm / self.chi_n - 1))
        self.C = np.triu(self.C) + np.triu(self.C, 1).T
        eigvals, self.B = np.linalg.eigh(self.C)
        self.D = np.sqrt(np.maximum(eigvals, 1e-20))


@budgeted("cma-es")
def run_cma_es(evaluator, config, rng, extras):
    codec = FarmCodec(evaluator.bounds)
    objective = _unit_objective(evaluator, codec)
    start = codec.encode(random_feasible_layout(evaluator.bounds, rng))
    es = CMAES(start, config.cma_sigma0, rng, popsize=config.popsize)
    extras["popsize"] = es.popsize
    while True:
        candidates = np.array([codec.clip_pto(x) for x in es.ask()])
        values = [objective(x) for x in candidates]
        es.tell(candidates, values)


def de_generation(population, fitness, objective, rng, f_weight, cr, repair):
    """One synchronous rand/1/bin generation; returns the new population and fitness."""
    size, dim = population.shape
    trials = np.empty_like(population)
    for i in range(size):
        others = [j for j in range(size) if j != i]
        r1, r2, r3 = rng.choice(others, size=3, replace=False)
        mutant = population[r1] + f_weight * (population[r2] - population[r3])
        cross = rng.random(dim) < cr
        cross[rng.integers(dim)] = True
        trials[i] = repair(np.where(cross, mutant, population[i]))
    new_pop = population.copy()
    new_fit = fitness.copy()
    for i in range(size):
        value = objective(trials[i])
        if value >= fitness[i]:
            new_pop[i], new_fit[i] = trials[i], value
    return new_pop, new_fit


@budgeted("de")
def run_de(evaluator, config, rng, extras):
    bounds = evaluator.bounds
    codec = FarmCodec(bounds)
    objective = _unit_objective(evaluator, codec)
    size = config.popsize or default_de_popsize(bounds.n)
    extras["popsize"] = size
    population = np.array([codec.encode(random_feasible_layout(bounds, rng)) for _ in range(size)])
    fitness = np.array([objective(u) for u in population])
    while True:
        population, fitness = de_generation(
            population, fitness, objective, rng, config.de_f, config.de_cr, codec.clip_pto
        )


@budgeted("pso")
def run_pso(evaluator, config, rng, extras):
    bounds = evaluator.bounds
    codec = FarmCodec(bounds)
    objective = _unit_objective(evaluator, codec)
    size = config.popsize or default_de_popsize(bounds.n)
    horizon = _horizon(evaluator, config)
    vmax = config.pso_vmax
    extras["popsize"] = size

    x = np.array([codec.encode(random_feasible_layout(bounds, rng)) for _ in range(size)])
    v = rng.uniform(-vmax, vmax, size=x.shape)
    pbest = x.copy()
    pbest_f = np.full(size, -math.inf)
    gbest, gbest_f = x[0].copy(), -math.inf
    for i in range(size):
        pbest_f[i] = objective(x[i])
        if pbest_f[i] > gbest_f:
            gbest, gbest_f = x[i].copy(), pbest_f[i]

    while True:
        progress = min(1.0, evaluator.count / horizon)
        w = config.pso_inertia_start - (config.pso_inertia_start - config.pso_inertia_floor) * progress
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        v = w * v + config.pso_c1 * r1 * (pbest - x) + config.pso_c2 * r2 * (gbest - x)
        v = np.clip(v, -vmax, vmax)
        x = np.array([codec.clip_pto(row) for row in x + v])
        for i in range(size):
            value = objective(x[i])
            if value > pbest_f[i]:
                pbest[i], pbest_f[i] = x[i].copy(), value
                if value > gbest_f:
                    gbest, gbest_f = x[i].copy(), value


def mutation_mask(rng, n_buoys, dims_per_buoy, per_buoy):
    """Coordinates to mutate: each with probability 1/D (or each buoy with 1/n).

    At least one coordinate (buoy) is always selected.
    """
    if per_buoy:
        chosen = rng.random(n_buoys) < 1.0 / n_buoys
        if not chosen.any():
            chosen[rng.integers(n_buoys)] = True
        return np.repeat(chosen, dims_per_buoy)
    dim = n_buoys * dims_per_buoy
    mask = rng.random(dim) < 1.0 / dim
    if not mask.any():
        mask[rng.integers(dim)] = True
    return mask


@budgeted("1+1ea")
def run_one_plus_one(evaluator, config, rng, extras):
    bounds = evaluator.bounds
    codec = FarmCodec(bounds)
    objective = _unit_objective(evaluator, codec)
    parent = codec.encode(random_feasible_layout(bounds, rng))
    parent_f = objective(parent)
    while True:
        mask = mutation_mask(rng, bounds.n, 4, config.ea_per_buoy_mutation)
        child = parent.copy()
        child[mask] += rng.normal(0.0, config.ea_sigma, size=int(mask.sum()))
        child = codec.clip_pto(child)
        child_f = objective(child)
        if child_f >= parent_f:
            parent, parent_f = child, child_f


@budgeted("nm-m")
def run_nm_mutation(evaluator, config, rng, extras):
    codec = FarmCodec(evaluator.bounds)
    objective = _unit_objective(evaluator, codec)
    lower = np.where(codec.pto_mask, 0.0, -np.inf)
    upper = np.where(codec.pto_mask, 1.0, np.inf)
    current = codec.encode(random_feasible_layout(evaluator.bounds, rng))
    current_f = None
    best = -math.inf
    extras["nm_passes"] = 0
    extras["mutation_draws"] = 0
    while True:
        result = nelder_mead(
            objective, current, config.nm_step, config.nm_max_eval, f0=current_f, lower=lower, upper=upper
        )
        extras["nm_passes"] += 1  # completed passes only
        energy = result.f
        rate = improvement_rate(energy, best)
        if energy > best:
            best, current, current_f = energy, result.x, energy
        if rate == 0:
            while rate == 0:
                candidate = codec.clip_pto(current + rng.normal(0.0, config.nm_mutation_sigma, current.size))
                extras["mutation_draws"] += 1
                energy = objective(candidate)
                rate = improvement_rate(energy, best)
            best, current, current_f = energy, candidate, energy
