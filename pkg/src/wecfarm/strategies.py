"""Alternating (position/PTO) methods and sequential placement with backtracking.

Sequential placement methods build the farm one buoy at a time and only
ever keep feasible layouts; they switch the evaluator to feasible-only
best tracking. Nelder-Mead bursts over positions still spend evaluations on
infeasible proposals but treat them as rejected (``-inf``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .farm import (
    FarmLayout,
    PlacementError,
    _fits,
    is_feasible,
    random_feasible_layout,
    random_pto,
    uniform_feasible_position,
)
from .nelder_mead import nelder_mead
from .optimizers import (
    CMAES,
    budgeted,
    de_generation,
    default_de_popsize,
    improvement_rate,
    mutation_mask,
)

__all__ = [
    "AlternatingConfig",
    "BacktrackOutcome",
    "LsConfig",
    "SlsConfig",
    "backtrack",
    "backtrack_count",
    "run_alternating",
    "run_dual_de",
    "run_ls_nm",
    "run_sls_nm",
    "run_sls_nm_b",
]

IMPROVEMENT_THRESHOLD = 1e-4  # 0.01 %
BACKTRACK_STEP_RANGE = (0.1, 1.0)  # repeat passes scale the simplex step by a uniform draw


@dataclass
class AlternatingConfig:
    """Alternating position/PTO search.

    `phase_method` optimizes positions for `iterations` generations with
    population `popsize`; Nelder-Mead then tunes the best member's PTO block
    for ``iterations * popsize`` evaluations. ``None`` fields take the
    method defaults (CMA-ES: 25 iterations of lambda = mu = 2; DE: 25
    generations at the DE population size; 1+1EA: 200 iterations for
    n <= 4, else 50).
    """

    phase_method: str = "cma-es"
    seed: int = 0
    iterations: int | None = None
    popsize: int | None = None
    de_f: float = 0.5
    de_cr: float = 0.5
    ea_sigma: float = 0.1
    cma_sigma0: float = 0.3
    nm_step: float = 0.05

    def resolved(self, n):
        def pick(value, default):
            return default if value is None else value

        if self.phase_method == "cma-es":
            iterations, popsize = pick(self.iterations, 25), pick(self.popsize, 2)
        elif self.phase_method in ("de", "de-dual"):
            iterations, popsize = pick(self.iterations, 25), pick(self.popsize, default_de_popsize(n))
        elif self.phase_method == "1+1ea":
            iterations, popsize = pick(self.iterations, 200 if n <= 4 else 50), 1
        else:
            raise ValueError(f"unknown phase method {self.phase_method!r}")
        if iterations < 1 or popsize < 1:
            raise ValueError("iterations and popsize must be >= 1")
        return iterations, popsize


@dataclass
class LsConfig:
    """Gaussian local search around the last buoy (`samples` draws, sigma in m)."""

    samples: int = 16
    seed: int = 0
    sigma: float = 70.0
    max_tries: int = 1000
    nm_step: float = 0.05


@dataclass
class SlsConfig:
    """Symmetric local search settings.

    `start` places the first buoy: ``"C"`` bottom centre, ``"BR"`` bottom
    right (inset by the safety distance), ``"r"`` uniformly at random.
    `backtracking` is ``"none"``, ``"B1"`` (PTO then position, 2D each) or
    ``"B2"`` (joint 4D).
    """

    seed: int = 0
    start: str = "C"
    angles: tuple = tuple(float(a) for a in range(0, 360, 45))
    radius_band: float = 100.0
    refine_offset: float = 15.0
    nm_evals: int = 25
    position_nm_evals: int = 25
    threshold: float = IMPROVEMENT_THRESHOLD
    worst_fraction: float = 0.25
    backtracking: str = "none"
    single_pass: bool = False
    nm_step: float = 0.05

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles)
        if len(angles) != 8 or any(b <= a for a, b in zip(angles, angles[1:])):
            raise ValueError("angles must be 8 strictly increasing values")
        self.angles = angles
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.start not in ("C", "BR", "r"):
            raise ValueError(f"unknown start {self.start!r}")
        if self.backtracking not in ("none", "B1", "B2"):
            raise ValueError(f"unknown backtracking variant {self.backtracking!r}")


class _Tracker:
    """Fitness wrapper remembering the evaluation result of the best point."""

    def __init__(self, evaluator, build, feasible_only=False):
        self.evaluator = evaluator
        self.build = build
        self.feasible_only = feasible_only
        self.best_value = -math.inf
        self.best_result = None

    def __call__(self, x):
        layout = self.build(x)
        value, result = self.evaluator.fitness(layout)
        if self.feasible_only and not is_feasible(layout.positions, self.evaluator.bounds):
            return -math.inf
        if value > self.best_value:
            self.best_value, self.best_result = value, result
        return value


def _pto_step(bounds, fraction):
    return fraction * (bounds.pto_upper - bounds.pto_lower)


def tune_pto(evaluator, layout, i, max_evals, f0, step=0.05, feasible_only=True):
    """Nelder-Mead on buoy `i`'s (k, d); returns ``(layout, fitness, result)``."""
    bounds = evaluator.bounds
    tracker = _Tracker(evaluator, lambda x: layout.with_buoy(i, pto=x, bounds=bounds), feasible_only)
    res = nelder_mead(
        tracker, layout.ptos[i], _pto_step(bounds, step), max_evals, f0=f0,
        lower=bounds.pto_lower, upper=bounds.pto_upper,
    )
    if f0 is not None and not res.f > f0:
        return layout, f0, None
    return layout.with_buoy(i, pto=res.x, bounds=bounds), res.f, tracker.best_result


def tune_position(evaluator, layout, i, max_evals, f0, step=0.05):
    """Nelder-Mead on buoy `i`'s (x, y), rejecting infeasible points."""
    bounds = evaluator.bounds
    tracker = _Tracker(evaluator, lambda x: layout.with_buoy(i, position=x), feasible_only=True)
    res = nelder_mead(tracker, layout.positions[i], step * bounds.size, max_evals, f0=f0)
    if f0 is not None and not res.f > f0:
        return layout, f0, None
    return layout.with_buoy(i, position=res.x), res.f, tracker.best_result


def tune_joint(evaluator, layout, i, max_evals, f0, step=0.05):
    """Nelder-Mead on buoy `i`'s (x, y, k, d) together."""
    bounds = evaluator.bounds
    tracker = _Tracker(
        evaluator, lambda x: layout.with_buoy(i, position=x[:2], pto=x[2:], bounds=bounds), feasible_only=True
    )
    steps = np.concatenate([[step * bounds.size] * 2, _pto_step(bounds, step)])
    lower = np.concatenate([[-np.inf, -np.inf], bounds.pto_lower])
    upper = np.concatenate([[np.inf, np.inf], bounds.pto_upper])
    x0 = np.concatenate([layout.positions[i], layout.ptos[i]])
    res = nelder_mead(tracker, x0, steps, max_evals, f0=f0, lower=lower, upper=upper)
    if f0 is not None and not res.f > f0:
        return layout, f0, None
    return layout.with_buoy(i, position=res.x[:2], pto=res.x[2:], bounds=bounds), res.f, tracker.best_result


# ---------------------------------------------------------------------------
# alternating methods


def _positions_codec(bounds):
    size = bounds.size
    return (
        lambda layout: layout.positions.ravel() / size,
        lambda u: np.asarray(u).reshape(-1, 2) * size,
    )


def _nm_pto_block(evaluator, layout, max_evals, f0, step):
    bounds = evaluator.bounds
    n = layout.n
    lower = np.tile(bounds.pto_lower, n)
    upper = np.tile(bounds.pto_upper, n)
    tracker = _Tracker(evaluator, lambda x: layout.with_ptos(np.reshape(x, (n, 2)), bounds))
    res = nelder_mead(
        tracker, layout.ptos.ravel(), np.tile(_pto_step(bounds, step), n), max_evals,
        f0=f0, lower=lower, upper=upper,
    )
    return np.reshape(res.x, (n, 2)), res.f


def _alternating_cma(evaluator, config, rng, extras, iterations, popsize):
    """(mu+lambda) CMA-ES on positions: parents compete with their offspring."""
    bounds = evaluator.bounds
    encode, decode = _positions_codec(bounds)
    start = random_feasible_layout(bounds, rng)
    ptos = start.ptos
    es = CMAES(encode(start), config.cma_sigma0, rng, popsize=popsize, mu=popsize)
    parents = np.empty((0, es.dim))
    parent_values = np.empty(0)
    while True:
        for _ in range(iterations):
            offspring = es.ask()
            values = [evaluator.fitness(FarmLayout(decode(u), ptos, bounds))[0] for u in offspring]
            pool = np.vstack([offspring, parents])
            pool_values = np.concatenate([values, parent_values])
            es.tell(pool, pool_values)
            keep = np.argsort(-pool_values, kind="stable")[:popsize]
            parents, parent_values = pool[keep], pool_values[keep]
        extras["phases"] += 1
        best_member = FarmLayout(decode(parents[0]), ptos, bounds)
        ptos, value = _nm_pto_block(evaluator, best_member, iterations * popsize, parent_values[0], config.nm_step)
        # other parents were scored with the previous PTOs
        parent_values = np.full(len(parents), -math.inf)
        parent_values[0] = value


def _alternating_de(evaluator, config, rng, extras, iterations, popsize):
    bounds = evaluator.bounds
    encode, decode = _positions_codec(bounds)
    members = [random_feasible_layout(bounds, rng) for _ in range(popsize)]
    pop_ptos = [m.ptos for m in members]
    population = np.array([encode(m) for m in members])

    def member_objective(i):
        return lambda u: evaluator.fitness(FarmLayout(decode(u), pop_ptos[i], bounds))[0]

    fitness = np.array([member_objective(i)(population[i]) for i in range(popsize)])
    while True:
        for _ in range(iterations):
            population, fitness = _de_generation_per_member(
                population, fitness, member_objective, rng, config.de_f, config.de_cr
            )
        extras["phases"] += 1
        b = int(np.argmax(fitness))
        member = FarmLayout(decode(population[b]), pop_ptos[b], bounds)
        new_ptos, value = _nm_pto_block(evaluator, member, iterations * popsize, fitness[b], config.nm_step)
        if value > fitness[b]:
            pop_ptos[b], fitness[b] = new_ptos, value


def _de_generation_per_member(population, fitness, member_objective, rng, f_weight, cr):
    size, dim = population.shape
    trials = np.empty_like(population)
    for i in range(size):
        others = [j for j in range(size) if j != i]
        r1, r2, r3 = rng.choice(others, size=3, replace=False)
        mutant = population[r1] + f_weight * (population[r2] - population[r3])
        cross = rng.random(dim) < cr
        cross[rng.integers(dim)] = True
        trials[i] = np.where(cross, mutant, population[i])
    new_pop, new_fit = population.copy(), fitness.copy()
    for i in range(size):
        value = member_objective(i)(trials[i])
        if value >= fitness[i]:
            new_pop[i], new_fit[i] = trials[i], value
    return new_pop, new_fit


def _alternating_ea(evaluator, config, rng, extras, iterations, popsize):
    bounds = evaluator.bounds
    encode, decode = _positions_codec(bounds)
    start = random_feasible_layout(bounds, rng)
    ptos = start.ptos
    parent = encode(start)
    parent_f = evaluator.fitness(start)[0]
    while True:
        for _ in range(iterations):
            mask = mutation_mask(rng, bounds.n, 2, per_buoy=False)
            child = parent.copy()
            child[mask] += rng.normal(0.0, config.ea_sigma, size=int(mask.sum()))
            child_f = evaluator.fitness(FarmLayout(decode(child), ptos, bounds))[0]
            if child_f >= parent_f:
                parent, parent_f = child, child_f
        extras["phases"] += 1
        member = FarmLayout(decode(parent), ptos, bounds)
        new_ptos, value = _nm_pto_block(evaluator, member, iterations * popsize, parent_f, config.nm_step)
        if value > parent_f:
            ptos, parent_f = new_ptos, value


def run_alternating(evaluator, config):
    """Alternate position search (CMA-ES, DE or 1+1EA) with Nelder-Mead PTO tuning."""
    iterations, popsize = config.resolved(evaluator.bounds.n)
    phase = {
        "cma-es": _alternating_cma,
        "de": _alternating_de,
        "1+1ea": _alternating_ea,
    }[config.phase_method]
    tag = {"cma-es": "cmaes-nm", "de": "de-nm", "1+1ea": "1+1ea-nm"}[config.phase_method]

    @budgeted(tag)
    def body(evaluator, config, rng, extras):
        extras.update(phases=0, iterations=iterations, popsize=popsize)
        phase(evaluator, config, rng, extras, iterations, popsize)

    return body(evaluator, config)


@budgeted("dual-de")
def run_dual_de(evaluator, config, rng, extras):
    """Two DE populations (positions | PTOs) exchanging their best blocks.

    Each population is evaluated against the other's current best block;
    every `iterations` generations the bests are exchanged and both
    populations are re-evaluated against their new complement.
    """
    bounds = evaluator.bounds
    n = bounds.n
    iterations, popsize = config.resolved(n)
    size = bounds.size
    pto_lo, pto_span = bounds.pto_lower, bounds.pto_upper - bounds.pto_lower
    extras.update(exchanges=0, iterations=iterations, popsize=popsize)

    shared = random_feasible_layout(bounds, rng)
    pos_complement = shared.ptos  # PTOs used while evolving positions
    pto_complement = shared.positions  # positions used while evolving PTOs

    pos_pop = np.array([random_feasible_layout(bounds, rng).positions.ravel() / size for _ in range(popsize)])
    pto_pop = rng.random((popsize, 2 * n))

    def pos_layout(u):
        return FarmLayout(np.reshape(u, (n, 2)) * size, pos_complement, bounds)

    def pto_layout(u):
        return FarmLayout(pto_complement, pto_lo + np.reshape(u, (n, 2)) * pto_span, bounds)

    def pos_objective(u):
        return evaluator.fitness(pos_layout(u))[0]

    def pto_objective(u):
        return evaluator.fitness(pto_layout(u))[0]

    def clip_unit(u):
        return np.clip(u, 0.0, 1.0)

    pos_fit = np.array([pos_objective(u) for u in pos_pop])
    pto_fit = np.array([pto_objective(u) for u in pto_pop])
    while True:
        for _ in range(iterations):
            pos_pop, pos_fit = de_generation(pos_pop, pos_fit, pos_objective, rng, config.de_f, config.de_cr, lambda u: u)
            pto_pop, pto_fit = de_generation(pto_pop, pto_fit, pto_objective, rng, config.de_f, config.de_cr, clip_unit)
        best_positions = np.reshape(pos_pop[int(np.argmax(pos_fit))], (n, 2)) * size
        best_ptos = pto_lo + np.reshape(pto_pop[int(np.argmax(pto_fit))], (n, 2)) * pto_span
        pos_complement, pto_complement = best_ptos, best_positions
        extras["exchanges"] += 1
        pos_fit = np.array([pos_objective(u) for u in pos_pop])
        pto_fit = np.array([pto_objective(u) for u in pto_pop])


# ---------------------------------------------------------------------------
# sequential placement


def _start_position(bounds, start, rng):
    size = bounds.size
    if start == "C":
        return np.array([size / 2, 0.0])
    if start == "BR":
        return np.array([size - bounds.safety, bounds.safety])
    return rng.uniform([bounds.x_lower, bounds.y_lower], [bounds.x_upper, bounds.y_upper])


def _gaussian_sample(prev, placed, bounds, rng, sigma, max_tries):
    for _ in range(max_tries):
        candidate = prev + rng.normal(0.0, sigma, 2)
        if _fits(candidate, placed, bounds):
            return candidate, False
    candidate = uniform_feasible_position(placed, bounds, rng)
    if candidate is None:
        raise PlacementError("no feasible position left for the next buoy")
    return candidate, True


def _ls_body(samples):
    @budgeted(f"ls-nm-{samples}")
    def body(evaluator, config, rng, extras):
        bounds = evaluator.bounds
        evaluator.feasible_best = True
        extras.update(fallbacks=0, selections=[])
        first = FarmLayout([_start_position(bounds, "C", rng)], [random_pto(bounds, rng)], bounds)
        layout, best_energy, _ = tune_pto(evaluator, first, 0, samples, None, config.nm_step)
        for i in range(1, bounds.n):
            prev, prev_pto = layout.positions[-1], layout.ptos[-1]
            best_energy, best_pos, seen = -math.inf, None, []
            for _ in range(samples):
                candidate, fell_back = _gaussian_sample(prev, layout.positions, bounds, rng, config.sigma, config.max_tries)
                extras["fallbacks"] += fell_back
                energy = evaluator.fitness(layout.append(candidate, prev_pto, bounds))[0]
                seen.append(energy)
                if best_pos is None or energy > best_energy:
                    best_energy, best_pos = energy, candidate
            extras["selections"].append((best_energy, seen))
            layout = layout.append(best_pos, prev_pto, bounds)
            layout, best_energy, _ = tune_pto(evaluator, layout, i, samples, best_energy, config.nm_step)

    return body


def run_ls_nm(evaluator, config):
    """Place buoys one at a time at the best of `samples` Gaussian offsets, then tune PTO."""
    return _ls_body(config.samples)(evaluator, config)


def _symmetric_sample(prev, angle, config, bounds, rng):
    r = rng.uniform(bounds.safety, bounds.safety + config.radius_band)
    a = math.radians(angle)
    return prev + r * np.array([math.cos(a), math.sin(a)])


def _place_symmetric(evaluator, layout, pto, config, rng, extras):
    """Sample around the last buoy and append the best candidate.

    Returns ``(layout, energy, result)``; only feasible candidates are
    evaluated.
    """
    bounds = evaluator.bounds
    prev = layout.positions[-1]
    candidates = []

    def try_sample(angle):
        pos = _symmetric_sample(prev, angle, config, bounds, rng)
        if not _fits(pos, layout.positions, bounds):
            return None
        value, result = evaluator.fitness(layout.append(pos, pto, bounds))
        candidates.append((value, pos, result, angle))
        return value

    best_angle, best_value = None, -math.inf
    for angle in config.angles:
        value = try_sample(angle)
        if value is not None and (best_angle is None or value > best_value):
            best_angle, best_value = angle, value
    if best_angle is None:
        pos = uniform_feasible_position(layout.positions, bounds, rng)
        if pos is None:
            raise PlacementError("no feasible position left for the next buoy")
        extras["fallbacks"] += 1
        value, result = evaluator.fitness(layout.append(pos, pto, bounds))
        candidates.append((value, pos, result, None))
    else:
        for offset in (-config.refine_offset, config.refine_offset):
            try_sample(best_angle + offset)

    chosen = max(range(len(candidates)), key=lambda j: (candidates[j][0], -j))
    value, pos, result, _ = candidates[chosen]
    extras["samples_per_buoy"].append(len(candidates))
    extras["selections"].append((value, [c[0] for c in candidates]))
    return layout.append(pos, pto, bounds), value, result


def _first_buoy(evaluator, config, rng, extras):
    bounds = evaluator.bounds
    layout = FarmLayout([_start_position(bounds, config.start, rng)], [random_pto(bounds, rng)], bounds)
    energy, result = evaluator.fitness(layout)
    tuned, tuned_energy, tuned_result = tune_pto(evaluator, layout, 0, config.nm_evals, energy, config.nm_step)
    return tuned, tuned_energy, tuned_result or result, improvement_rate(tuned_energy, energy)


def _new_extras(extras):
    extras.update(fallbacks=0, samples_per_buoy=[], selections=[], branches=[])


@budgeted("sls-nm")
def run_sls_nm(evaluator, config, rng, extras):
    """Symmetric local search placement with PTO-first Nelder-Mead bursts."""
    bounds = evaluator.bounds
    evaluator.feasible_best = True
    _new_extras(extras)
    layout, energy, _, pto_rate = _first_buoy(evaluator, config, rng, extras)
    pos_rate = 1.0
    for i in range(1, bounds.n):
        layout, placed_energy, _ = _place_symmetric(evaluator, layout, layout.ptos[-1], config, rng, extras)
        if pto_rate >= config.threshold:
            branch = "pto"
        elif pos_rate >= config.threshold:
            branch = "position"
        else:
            branch = "pto" if rng.random() < 0.5 else "position"
        extras["branches"].append(branch)
        if branch == "pto":
            layout, energy, _ = tune_pto(evaluator, layout, i, config.nm_evals, placed_energy, config.nm_step)
            pto_rate = improvement_rate(energy, placed_energy)
        else:
            layout, energy, _ = tune_position(evaluator, layout, i, config.position_nm_evals, placed_energy, config.nm_step)
            pos_rate = improvement_rate(energy, placed_energy)


def backtrack_count(n, fraction=0.25):
    """Number of worst buoys revisited: ``round(n * fraction)``, halves rounded up."""
    return int(math.floor(n * fraction + 0.5))


class BacktrackOutcome(NamedTuple):
    layout: FarmLayout
    fitness: float
    result: object
    revisited: list


def backtrack(evaluator, layout, per_buoy_power, variant, fitness=None, config=None, step=None):
    """Re-optimize the lowest-power buoys of a complete layout.

    Parameters
    ----------
    evaluator : Evaluator
    layout : FarmLayout
    per_buoy_power : array_like
        Power of each buoy; ties resolve to the lowest index.
    variant : {"B1", "B2"}
        ``B1`` runs Nelder-Mead on the buoy's PTO then on its position
        (2D each); ``B2`` runs one joint 4D search with twice the budget.
    fitness : float, optional
        Known fitness of `layout` (evaluated once otherwise).
    config : SlsConfig, optional
        Supplies the burst sizes, worst fraction and simplex step.
    step : float, optional
        Initial simplex step overriding ``config.nm_step``.
    """
    config = config or SlsConfig()
    step = config.nm_step if step is None else step
    result = None
    if fitness is None:
        fitness, result = evaluator.fitness(layout)
    order = np.argsort(np.asarray(per_buoy_power, dtype=float), kind="stable")
    worst = [int(i) for i in order[: backtrack_count(layout.n, config.worst_fraction)]]
    for i in worst:
        if variant == "B1":
            steps = [
                (tune_pto, config.nm_evals),
                (tune_position, config.position_nm_evals),
            ]
        elif variant == "B2":
            steps = [(tune_joint, config.nm_evals + config.position_nm_evals)]
        else:
            raise ValueError(f"unknown backtracking variant {variant!r}")
        for tune, evals in steps:
            new_layout, new_fitness, new_result = tune(evaluator, layout, i, evals, fitness, step)
            if new_fitness > fitness:
                layout, fitness, result = new_layout, new_fitness, new_result
    return BacktrackOutcome(layout, fitness, result, worst)


def run_sls_nm_b(evaluator, config):
    """Symmetric local search with a shared first-buoy PTO, then backtracking passes."""
    if config.backtracking not in ("B1", "B2"):
        raise ValueError("run_sls_nm_b needs backtracking 'B1' or 'B2'")

    @budgeted(f"sls-nm-{config.backtracking.lower()}")
    def body(evaluator, config, rng, extras):
        bounds = evaluator.bounds
        evaluator.feasible_best = True
        _new_extras(extras)
        extras.update(backtrack_passes=0, placement_evaluations=None)
        layout, energy, result, _ = _first_buoy(evaluator, config, rng, extras)
        shared_pto = layout.ptos[0]
        for i in range(1, bounds.n):
            layout, placed_energy, placed_result = _place_symmetric(evaluator, layout, shared_pto, config, rng, extras)
            layout, energy, tuned_result = tune_position(
                evaluator, layout, i, config.position_nm_evals, placed_energy, config.nm_step
            )
            result = tuned_result or placed_result
        extras["placement_evaluations"] = evaluator.count
        step = config.nm_step
        while True:
            outcome = backtrack(evaluator, layout, result.per_buoy_power if result is not None else np.zeros(layout.n),
                                config.backtracking, energy, config, step)
            layout, energy = outcome.layout, outcome.fitness
            result = outcome.result or result
            extras["backtrack_passes"] += 1
            if config.single_pass:
                break
            # NM is deterministic, so a repeat pass from an unchanged layout
            # needs a different simplex to do anything
            step = config.nm_step * rng.uniform(BACKTRACK_STEP_RANGE[0], BACKTRACK_STEP_RANGE[1])

    return body(evaluator, config)
