"""Decision vectors, constraints and the budget-accounted fitness function."""

from __future__ import annotations

import math
import threading
import time
from dataclasses import InitVar, dataclass, field
from pathlib import Path

import numpy as np

from .hydro import EvaluationError, EvaluationResult, farm_power

__all__ = [
    "AREA_PER_BUOY",
    "BudgetExhausted",
    "Evaluator",
    "FarmBounds",
    "FarmCodec",
    "FarmLayout",
    "LayoutError",
    "PlacementError",
    "clamp_pto",
    "distance_penalty",
    "is_feasible",
    "random_feasible_layout",
    "read_layout",
    "write_layout",
]

AREA_PER_BUOY = 20000.0
PENALTY_EXPONENT = 20

_MAX_REJECTIONS = 10_000
_MAX_RESTARTS = 100


class BudgetExhausted(Exception):
    """Raised by the evaluator once its evaluation or time budget is spent."""


class PlacementError(RuntimeError):
    """Random placement could not fit the buoys at the safety distance."""


class LayoutError(ValueError):
    """Malformed layout file or array."""


@dataclass(frozen=True)
class FarmBounds:
    """Search-space limits for an `n`-buoy farm.

    The farm is the square ``[0, sqrt(n * 20000)]^2`` (20000 m^2 per buoy);
    buoys must stay `safety` meters apart.
    """

    n: int
    safety: float = 50.0
    k_lower: float = 1.0
    k_upper: float = 5.5e5
    d_lower: float = 5.0e4
    d_upper: float = 4.0e5

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one buoy")

    @property
    def size(self):
        return math.sqrt(self.n * AREA_PER_BUOY)

    @property
    def x_lower(self):
        return 0.0

    @property
    def x_upper(self):
        return self.size

    @property
    def y_lower(self):
        return 0.0

    @property
    def y_upper(self):
        return self.size

    @property
    def pto_lower(self):
        return np.array([self.k_lower, self.d_lower])

    @property
    def pto_upper(self):
        return np.array([self.k_upper, self.d_upper])


def clamp_pto(pto, bounds):
    """Move PTO (stiffness, damping) pairs to the nearest value inside bounds."""
    pto = np.asarray(pto, dtype=float)
    return np.clip(pto, bounds.pto_lower, bounds.pto_upper)


@dataclass(frozen=True, eq=False)
class FarmLayout:
    """Buoy positions ``(n, 2)`` in meters and PTO pairs ``(n, 2)`` as (k, d).

    Passing `bounds` clamps the PTO pairs into range.
    """

    positions: np.ndarray
    ptos: np.ndarray
    bounds: InitVar[FarmBounds | None] = None

    def __post_init__(self, bounds):
        positions = np.array(self.positions, dtype=float).reshape(-1, 2)
        ptos = np.array(self.ptos, dtype=float).reshape(-1, 2)
        if len(positions) != len(ptos):
            raise LayoutError(f"{len(positions)} positions but {len(ptos)} PTO pairs")
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(ptos))):
            raise LayoutError("layout values must be finite")
        if bounds is not None:
            ptos = clamp_pto(ptos, bounds)
        positions.setflags(write=False)
        ptos.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "ptos", ptos)

    @property
    def n(self):
        return len(self.positions)

    def __eq__(self, other):
        if not isinstance(other, FarmLayout):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(
            self.ptos, other.ptos
        )

    __hash__ = None

    def flat(self):
        """Interleaved ``[x1, y1, k1, d1, x2, ...]`` vector."""
        return np.hstack([self.positions, self.ptos]).ravel()

    @classmethod
    def from_flat(cls, vector, bounds=None):
        v = np.asarray(vector, dtype=float).reshape(-1, 4)
        return cls(v[:, :2], v[:, 2:], bounds)

    def with_buoy(self, i, position=None, pto=None, bounds=None):
        """Copy with buoy `i` moved and/or retuned."""
        positions = np.array(self.positions)
        ptos = np.array(self.ptos)
        if position is not None:
            positions[i] = position
        if pto is not None:
            ptos[i] = pto
        return FarmLayout(positions, ptos, bounds)

    def with_ptos(self, ptos, bounds=None):
        return FarmLayout(self.positions, ptos, bounds)

    def with_positions(self, positions, bounds=None):
        return FarmLayout(positions, self.ptos, bounds)

    def append(self, position, pto, bounds=None):
        return FarmLayout(
            np.vstack([self.positions, np.reshape(position, (1, 2))]),
            np.vstack([self.ptos, np.reshape(pto, (1, 2))]),
            bounds,
        )


def _box_shortfall(positions, bounds):
    dx = np.maximum.reduce([bounds.x_lower - positions[:, 0], positions[:, 0] - bounds.x_upper, np.zeros(len(positions))])
    dy = np.maximum.reduce([bounds.y_lower - positions[:, 1], positions[:, 1] - bounds.y_upper, np.zeros(len(positions))])
    return np.sqrt(dx * dx + dy * dy)


def distance_penalty(positions, bounds, paper_literal=False):
    """Constraint violation (m) and its power penalty (W).

    The violation sums ``safety - dist`` over buoy pairs closer than the
    safety distance plus each buoy's distance outside the farm box. The
    penalty is ``(violation + 1)^20 - 1`` so feasible layouts cost nothing.

    With `paper_literal`, pair terms are ``dist - safety`` (negative) and the
    penalty is ``(violation + 1)^20`` without the offset.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    with np.errstate(over="ignore"):
        return _violation_and_penalty(positions, bounds, paper_literal)


def _violation_and_penalty(positions, bounds, paper_literal):
    n = len(positions)
    terms = []
    if n > 1:
        i, j = np.triu_indices(n, k=1)
        diff = positions[i] - positions[j]
        dist = np.sqrt(diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1])
        close = dist < bounds.safety
        if paper_literal:
            terms.extend((dist[close] - bounds.safety).tolist())
        else:
            terms.extend((bounds.safety - dist[close]).tolist())
    shortfall = _box_shortfall(positions, bounds)
    terms.extend(shortfall[shortfall > 0].tolist())
    violation = math.fsum(terms)
    try:
        penalty = math.pow(violation + 1.0, PENALTY_EXPONENT)
    except OverflowError:
        penalty = math.inf
    if not paper_literal:
        penalty -= 1.0
    return violation, penalty


def is_feasible(positions, bounds):
    """True when all buoys are inside the box and pairwise >= safety apart."""
    violation, _ = distance_penalty(positions, bounds)
    return violation == 0.0


def _fits(candidate, placed, bounds):
    if not (bounds.x_lower <= candidate[0] <= bounds.x_upper and bounds.y_lower <= candidate[1] <= bounds.y_upper):
        return False
    if len(placed) == 0:
        return True
    diff = np.asarray(placed) - candidate
    return bool(np.all(np.sqrt(diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1]) >= bounds.safety))


def uniform_feasible_position(placed, bounds, rng, max_rejections=_MAX_REJECTIONS):
    """Uniform point in the box at least `safety` from every placed buoy, or None."""
    lo = [bounds.x_lower, bounds.y_lower]
    hi = [bounds.x_upper, bounds.y_upper]
    placed = np.asarray(placed, dtype=float).reshape(-1, 2)
    drawn, block = 0, 1
    while drawn < max_rejections:
        # draws come in doubling blocks; the first fitting draw in order wins
        size = min(block, max_rejections - drawn)
        candidates = rng.uniform(lo, hi, size=(size, 2))
        ok = np.ones(size, dtype=bool)
        if len(placed):
            diff = candidates[:, None, :] - placed[None, :, :]
            dist = np.sqrt(diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1])
            ok = np.all(dist >= bounds.safety, axis=1)
        hits = np.flatnonzero(ok)
        if hits.size:
            return candidates[hits[0]]
        drawn += size
        block = min(2 * block, 1024)
    return None


def random_pto(bounds, rng, size=None):
    shape = (2,) if size is None else (size, 2)
    return rng.uniform(bounds.pto_lower, bounds.pto_upper, size=shape)


def random_feasible_layout(bounds, rng, n=None):
    """Uniformly random layout satisfying the spacing and box constraints.

    Each buoy is rejection-sampled (up to 10,000 draws) against those already
    placed; a failed buoy restarts the whole layout, at most 100 times.
    """
    n = bounds.n if n is None else n
    for _ in range(_MAX_RESTARTS):
        placed = []
        for _ in range(n):
            candidate = uniform_feasible_position(placed, bounds, rng)
            if candidate is None:
                break
            placed.append(candidate)
        if len(placed) == n:
            return FarmLayout(np.array(placed), random_pto(bounds, rng, n), bounds)
    raise PlacementError(f"could not place {n} buoys {bounds.safety} m apart in a {bounds.size:.1f} m box")


class FarmCodec:
    """Affine map between layouts and the unit cube.

    Coordinates are interleaved per buoy as ``(x, y, k, d)``. Positions map
    ``[0, size] -> [0, 1]`` without clipping; PTO values are clamped when a
    vector is decoded.
    """

    def __init__(self, bounds, n=None):
        self.bounds = bounds
        self.n = bounds.n if n is None else n
        per_buoy_lo = np.array([bounds.x_lower, bounds.y_lower, bounds.k_lower, bounds.d_lower])
        per_buoy_hi = np.array([bounds.x_upper, bounds.y_upper, bounds.k_upper, bounds.d_upper])
        self.lower = np.tile(per_buoy_lo, self.n)
        self.upper = np.tile(per_buoy_hi, self.n)
        self.span = self.upper - self.lower
        self.pto_mask = np.tile([False, False, True, True], self.n)

    @property
    def dim(self):
        return 4 * self.n

    def encode(self, layout):
        return (layout.flat() - self.lower) / self.span

    def to_physical(self, u):
        return self.lower + np.asarray(u, dtype=float) * self.span

    def decode(self, u):
        return FarmLayout.from_flat(self.to_physical(u), self.bounds)

    def clip_pto(self, u):
        """Clip the PTO coordinates of a unit-cube vector into [0, 1]."""
        u = np.array(u, dtype=float)
        u[self.pto_mask] = np.clip(u[self.pto_mask], 0.0, 1.0)
        return u


@dataclass
class Evaluator:
    """Budget-accounted fitness ``power - penalty`` with a best-so-far record.

    Parameters
    ----------
    model : HydroModel
    scenario : WaveScenario
    bounds : FarmBounds
    max_evaluations : int, optional
        Evaluation budget; ``None`` for unlimited.
    wall_seconds : float, optional
        Wall-clock budget measured from the first call.
    objective : callable, optional
        Replaces the hydrodynamic model: ``objective(layout)`` returns a power
        value or an `EvaluationResult`. Used for analytic test problems.
    penalize : bool
        Subtract the distance/boundary penalty.
    paper_literal : bool
        Use the literal penalty variant (see `distance_penalty`).
    feasible_best : bool
        Only layouts with zero violation may become the best-so-far.

    Only complete layouts (``bounds.n`` buoys) enter the best-so-far record;
    partial layouts from sequential placement are counted but not recorded.
    """

    model: object = None
    scenario: object = None
    bounds: FarmBounds = None
    max_evaluations: int | None = None
    wall_seconds: float | None = None
    objective: object = None
    penalize: bool = True
    paper_literal: bool = False
    feasible_best: bool = False

    count: int = field(default=0, init=False)
    failures: int = field(default=0, init=False)
    best_fitness: float = field(default=-math.inf, init=False)
    best_layout: FarmLayout | None = field(default=None, init=False)
    best_result: EvaluationResult | None = field(default=None, init=False)
    best_index: int = field(default=0, init=False)
    best_time: float = field(default=0.0, init=False)
    trace: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        if self.bounds is None:
            raise ValueError("bounds are required")
        if self.objective is None and (self.model is None or self.scenario is None):
            raise ValueError("need a hydro model and scenario, or a custom objective")
        self._lock = threading.Lock()
        self._start = None

    @property
    def remaining(self):
        if self.max_evaluations is None:
            return math.inf
        return self.max_evaluations - self.count

    def exhausted(self):
        if self.max_evaluations is not None and self.count >= self.max_evaluations:
            return True
        if self.wall_seconds is not None and self._start is not None:
            return time.perf_counter() - self._start >= self.wall_seconds
        return False

    def _power(self, layout):
        if self.objective is not None:
            value = self.objective(layout)
            if isinstance(value, EvaluationResult):
                return value.total_power, value
            return float(value), None
        result = farm_power(self.model, self.scenario, layout, q_factor=False)
        return result.total_power, result

    def fitness(self, layout):
        """Evaluate `layout`; returns ``(fitness, result)``.

        A failed hydrodynamic solve yields fitness ``-inf`` and is still
        counted. Raises `BudgetExhausted` without counting once the budget
        is spent.
        """
        with self._lock:
            if self._start is None:
                self._start = time.perf_counter()
            if self.exhausted():
                raise BudgetExhausted(f"budget spent after {self.count} evaluations")
            self.count += 1
            index = self.count

        try:
            power_value, result = self._power(layout)
        except (EvaluationError, ValueError):
            power_value, result = -math.inf, None
            with self._lock:
                self.failures += 1
        violation, penalty = (0.0, 0.0)
        if self.penalize:
            violation, penalty = distance_penalty(layout.positions, self.bounds, self.paper_literal)
        value = power_value - penalty if self.penalize else power_value
        if math.isnan(value):
            value = -math.inf

        with self._lock:
            complete = layout.n == self.bounds.n
            eligible = complete and (not self.feasible_best or violation == 0.0)
            if eligible and value > self.best_fitness:
                self.best_fitness = value
                self.best_layout = layout
                self.best_result = result
                self.best_index = index
                self.best_time = time.perf_counter() - self._start
            self.trace.append(self.best_fitness)
        return value, result

    def elapsed(self):
        return 0.0 if self._start is None else time.perf_counter() - self._start


def write_layout(layout, path, scenario_name="none"):
    lines = [f"layout n={layout.n} scenario={scenario_name}"]
    for (x, y), (k, d) in zip(layout.positions, layout.ptos):
        lines.append(f"{float(x)!r} {float(y)!r} {float(k)!r} {float(d)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_layout(path, bounds=None):
    """Read a layout file; returns ``(layout, scenario_name)``."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if not lines or not lines[0].startswith("layout"):
        raise LayoutError(f"{path}: missing 'layout n=<n> scenario=<name>' header")
    header = dict(tok.split("=", 1) for tok in lines[0].split()[1:] if "=" in tok)
    try:
        n = int(header["n"])
        rows = np.array([[float(t) for t in ln.split()] for ln in lines[1:]], dtype=float)
    except (KeyError, ValueError) as exc:
        raise LayoutError(f"{path}: {exc}") from None
    if rows.shape != (n, 4):
        raise LayoutError(f"{path}: expected {n} rows of 'x y k d', got shape {rows.shape}")
    return FarmLayout(rows[:, :2], rows[:, 2:], bounds), header.get("scenario", "none")
