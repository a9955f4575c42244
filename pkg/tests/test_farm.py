import math
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wecfarm.farm import (
    BudgetExhausted,
    Evaluator,
    FarmBounds,
    FarmCodec,
    FarmLayout,
    LayoutError,
    PlacementError,
    clamp_pto,
    distance_penalty,
    is_feasible,
    random_feasible_layout,
    read_layout,
    write_layout,
)
from wecfarm.hydro import EvaluationResult, farm_power


def brute_force_penalty(points, bounds, paper_literal=False):
    """Plain-loop recomputation of the violation and penalty."""
    terms = []
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            dx = points[i][0] - points[j][0]
            dy = points[i][1] - points[j][1]
            dist = math.sqrt(dx * dx + dy * dy)
            if dist < bounds.safety:
                terms.append(dist - bounds.safety if paper_literal else bounds.safety - dist)
    for x, y in points:
        cx = min(max(x, bounds.x_lower), bounds.x_upper)
        cy = min(max(y, bounds.y_lower), bounds.y_upper)
        dx, dy = x - cx, y - cy
        short = math.sqrt(dx * dx + dy * dy)
        if short > 0:
            terms.append(short)
    v = math.fsum(terms)
    try:
        p = math.pow(v + 1.0, 20)
    except OverflowError:
        p = math.inf
    return v, p if paper_literal else p - 1.0


# --- bounds and layout -----------------------------------------------------

def test_bounds_values():
    b4, b16 = FarmBounds(4), FarmBounds(16)
    assert b4.size == math.sqrt(4 * 20000) and b4.size == pytest.approx(282.8427, abs=1e-4)
    assert b16.size == pytest.approx(565.6854, abs=1e-4)
    assert (b4.x_lower, b4.y_lower, b4.x_upper, b4.y_upper) == (0.0, 0.0, b4.size, b4.size)
    assert np.array_equal(b4.pto_lower, [1.0, 5e4]) and np.array_equal(b4.pto_upper, [5.5e5, 4e5])
    assert b4.safety == 50.0


@pytest.mark.parametrize(
    "pto,expected",
    [((6e5, 1e5), (5.5e5, 1e5)), ((2e5, 2e5), (2e5, 2e5)), ((-5, 1e4), (1, 5e4))],
)
def test_clamp_pto_examples(pto, expected):
    assert np.array_equal(clamp_pto(pto, FarmBounds(4)), expected)


def test_layout_clamps_with_bounds_and_keeps_positions():
    layout = FarmLayout([[-10.0, 900.0]], [[6e5, 1.0]], FarmBounds(1))
    assert np.array_equal(layout.ptos, [[5.5e5, 5e4]])
    assert np.array_equal(layout.positions, [[-10.0, 900.0]])


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_layout_rejects_non_finite(bad):
    with pytest.raises(LayoutError):
        FarmLayout([[bad, 0.0]], [[1e5, 1e5]])


def test_layout_shape_mismatch():
    with pytest.raises(LayoutError):
        FarmLayout([[0, 0], [1, 1]], [[1e5, 1e5]])


def test_layout_is_immutable_and_helpers_copy():
    layout = FarmLayout([[0, 0], [100, 0]], [[1e5, 1e5], [2e5, 2e5]])
    with pytest.raises(ValueError):
        layout.positions[0, 0] = 5
    moved = layout.with_buoy(1, position=[100, 100], pto=[3e5, 3e5])
    assert np.array_equal(layout.positions[1], [100, 0])
    assert np.array_equal(moved.positions[1], [100, 100]) and np.array_equal(moved.ptos[1], [3e5, 3e5])
    grown = layout.append([200, 0], [1e5, 1e5])
    assert grown.n == 3 and layout.n == 2
    assert FarmLayout.from_flat(layout.flat()) == layout


# --- penalty ---------------------------------------------------------------

def test_penalty_one_meter_violation():
    v, p = distance_penalty([[0, 0], [0, 49]], FarmBounds(2))
    assert v == 1.0 and p == 2**20 - 1 == 1_048_575


def test_penalty_boundary_case():
    assert distance_penalty([[0, 0], [0, 50]], FarmBounds(2)) == (0.0, 0.0)


def test_penalty_equilateral_triangle():
    h = 40 * math.sqrt(3) / 2
    pts = [[100, 100], [140, 100], [120, 100 + h]]
    v, p = distance_penalty(pts, FarmBounds(3))
    assert v == pytest.approx(30.0, abs=1e-12)
    assert p == pytest.approx(31.0**20 - 1, rel=1e-12)


def test_penalty_exact_constants():
    # integer-exact distances: pairs at 40 m in a line spaced 0/40/80 -> violations 10, 10 (80 m pair is fine)
    v, p = distance_penalty([[100, 100], [140, 100], [180, 100]], FarmBounds(3))
    assert v == 20.0 and p == 21.0**20 - 1
    v, p = distance_penalty([[100, 100], [100, 120], [100, 140]], FarmBounds(3))
    assert v == 30.0 + 30.0 + 10.0


def test_penalty_box_shortfall_is_euclidean():
    b = FarmBounds(4)
    v, _ = distance_penalty([[-3.0, -4.0]], b)
    assert v == 5.0


def test_paper_literal_variant():
    b = FarmBounds(2)
    assert distance_penalty([[0, 0], [0, 49]], b, paper_literal=True) == (-1.0, 0.0)
    assert distance_penalty([[0, 0], [0, 60]], b, paper_literal=True) == (0.0, 1.0)


def test_penalty_overflow_is_infinite():
    v, p = distance_penalty([[0, 0], [1e200, 0]], FarmBounds(2))
    assert p == math.inf


@st.composite
def position_sets(draw):
    n = draw(st.integers(1, 12))
    coords = st.floats(-100, 500, allow_nan=False)
    return [(draw(coords), draw(coords)) for _ in range(n)]


@given(position_sets(), st.booleans())
def test_penalty_matches_brute_force(points, literal):
    b = FarmBounds(max(len(points), 1))
    assert distance_penalty(points, b, literal) == brute_force_penalty(points, b, literal)


@given(position_sets())
def test_feasible_iff_zero_violation(points):
    b = FarmBounds(len(points))
    v, p = distance_penalty(points, b)
    assert is_feasible(points, b) == (v == 0.0)
    assert v >= 0.0 and p >= 0.0
    if v == 0.0:
        assert p == 0.0


# --- sampling --------------------------------------------------------------

@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 4, 16]))
def test_random_feasible_layout(seed, n):
    b = FarmBounds(n)
    layout = random_feasible_layout(b, np.random.default_rng(seed))
    assert layout.n == n and is_feasible(layout.positions, b)
    assert np.all(layout.positions >= 0) and np.all(layout.positions <= b.size)
    assert np.all(layout.ptos >= b.pto_lower) and np.all(layout.ptos <= b.pto_upper)
    assert layout == random_feasible_layout(b, np.random.default_rng(seed))


def test_random_layout_capacity_failure():
    b = FarmBounds(4, safety=500.0)
    with pytest.raises(PlacementError):
        random_feasible_layout(b, np.random.default_rng(0))


# --- codec -----------------------------------------------------------------

@given(st.integers(0, 10_000), st.sampled_from([1, 4, 16]))
def test_codec_round_trip(seed, n):
    b = FarmBounds(n)
    codec = FarmCodec(b)
    layout = random_feasible_layout(b, np.random.default_rng(seed))
    u = codec.encode(layout)
    assert u.shape == (codec.dim,)
    np.testing.assert_allclose(codec.to_physical(u), layout.flat(), rtol=0, atol=1e-12 * 5.5e5)
    back = codec.decode(u)
    np.testing.assert_allclose(back.flat(), layout.flat(), rtol=1e-12)


def test_codec_clamps_pto_only():
    b = FarmBounds(1)
    codec = FarmCodec(b)
    layout = codec.decode([-0.5, 1.5, 2.0, -1.0])
    assert np.array_equal(layout.ptos, [[5.5e5, 5e4]])
    assert layout.positions[0, 0] < 0 and layout.positions[0, 1] > b.size
    assert np.array_equal(codec.clip_pto([-0.5, 1.5, 2.0, -1.0]), [-0.5, 1.5, 1.0, 0.0])


# --- evaluator -------------------------------------------------------------

def test_fitness_feasible_single_buoy(model, perth):
    b = FarmBounds(1)
    ev = Evaluator(model, perth, b, max_evaluations=5)
    layout = FarmLayout([[50.0, 50.0]], [[3e5, 1e5]])
    value, result = ev.fitness(layout)
    assert value == farm_power(model, perth, layout, q_factor=False).total_power
    assert result.total_power == value and ev.count == 1


def test_fitness_subtracts_penalty(model, mono):
    b = FarmBounds(2)
    ev = Evaluator(model, mono, b)
    layout = FarmLayout([[100.0, 100.0], [100.0, 149.0]], [[3e5, 1e5]] * 2)
    value, result = ev.fitness(layout)
    assert value == result.total_power - 1_048_575


def test_budget_exhaustion_does_not_count(model, mono):
    ev = Evaluator(model, mono, FarmBounds(1), max_evaluations=2)
    layout = FarmLayout([[10.0, 10.0]], [[3e5, 1e5]])
    ev.fitness(layout)
    ev.fitness(layout)
    with pytest.raises(BudgetExhausted):
        ev.fitness(layout)
    assert ev.count == 2 and ev.remaining == 0 and ev.exhausted()


def test_zero_budget(model, mono):
    ev = Evaluator(model, mono, FarmBounds(1), max_evaluations=0)
    with pytest.raises(BudgetExhausted):
        ev.fitness(FarmLayout([[10.0, 10.0]], [[3e5, 1e5]]))
    assert ev.count == 0 and ev.best_fitness == -math.inf and ev.trace == []


def test_wall_clock_budget(model, mono):
    layout = FarmLayout([[10.0, 10.0]], [[3e5, 1e5]])
    ev = Evaluator(model, mono, FarmBounds(1), wall_seconds=0.0)
    with pytest.raises(BudgetExhausted):
        ev.fitness(layout)
    assert ev.count == 0
    ev = Evaluator(model, mono, FarmBounds(1), wall_seconds=60.0)
    ev.fitness(layout)
    assert ev.count == 1 and not ev.exhausted()


def test_failed_evaluation_counted(model, mono):
    ev = Evaluator(model, mono, FarmBounds(2))
    value, result = ev.fitness(FarmLayout([[1.0, 1.0], [1.0, 1.0]], [[3e5, 1e5]] * 2))
    assert value == -math.inf and result is None and ev.count == 1 and ev.failures == 1


def test_partial_layouts_never_become_best():
    b = FarmBounds(2)
    ev = Evaluator(bounds=b, objective=lambda layout: 100.0 * layout.n)
    ev.fitness(FarmLayout([[10.0, 10.0]], [[1e5, 1e5]]))
    assert ev.best_layout is None and ev.trace == [-math.inf]
    ev.fitness(FarmLayout([[10.0, 10.0], [100.0, 100.0]], [[1e5, 1e5]] * 2))
    assert ev.best_fitness == 200.0 and ev.best_index == 2


def test_feasible_best_only():
    b = FarmBounds(2)
    ev = Evaluator(bounds=b, objective=lambda layout: 1e9, feasible_best=True)
    ev.fitness(FarmLayout([[10.0, 10.0], [10.0, 20.0]], [[1e5, 1e5]] * 2))
    assert ev.best_layout is None
    ev.fitness(FarmLayout([[10.0, 10.0], [10.0, 80.0]], [[1e5, 1e5]] * 2))
    assert ev.best_fitness == 1e9


def test_objective_may_return_result():
    b = FarmBounds(1)
    res = EvaluationResult(7.0, np.array([7.0]))
    ev = Evaluator(bounds=b, objective=lambda layout: res, penalize=False)
    assert ev.fitness(FarmLayout([[-5.0, 0.0]], [[1e5, 1e5]])) == (7.0, res)


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60))
def test_trace_is_running_maximum(values):
    it = iter(values)
    b = FarmBounds(1)
    ev = Evaluator(bounds=b, objective=lambda layout: next(it), penalize=False)
    layout = FarmLayout([[10.0, 10.0]], [[1e5, 1e5]])
    for _ in values:
        ev.fitness(layout)
    assert ev.trace == list(np.maximum.accumulate(values))
    assert ev.best_fitness == max(values) and ev.count == len(values)


def test_concurrent_calls_are_counted_once_each():
    b = FarmBounds(1)
    ev = Evaluator(bounds=b, objective=lambda layout: float(layout.positions[0, 0]),
                   max_evaluations=400, penalize=False)
    layouts = [FarmLayout([[float(i), 0.0]], [[1e5, 1e5]]) for i in range(400)]

    def work(chunk):
        for layout in chunk:
            ev.fitness(layout)

    threads = [threading.Thread(target=work, args=(layouts[i::4],)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert ev.count == 400 and len(ev.trace) == 400
    assert ev.best_fitness == 399.0 and np.all(np.diff(ev.trace) >= 0)


def test_evaluator_requires_model_or_objective():
    with pytest.raises(ValueError):
        Evaluator(bounds=FarmBounds(1))


# --- serialization ---------------------------------------------------------

@given(st.integers(0, 10_000))
def test_layout_file_round_trip(tmp_path_factory, seed):
    layout = random_feasible_layout(FarmBounds(4), np.random.default_rng(seed))
    path = tmp_path_factory.mktemp("lay") / "x.lay"
    write_layout(layout, path, "perth_like")
    back, name = read_layout(path)
    assert back == layout and name == "perth_like"
    assert path.read_text().splitlines()[0] == "layout n=4 scenario=perth_like"


@pytest.mark.parametrize(
    "text", ["", "layout n=2 scenario=x\n1 2 3 4\n", "nonsense\n", "layout n=1\n1 2 3\n", "layout n=1\n1 2 a 4\n"]
)
def test_bad_layout_files(tmp_path, text):
    p = tmp_path / "bad.lay"
    p.write_text(text)
    with pytest.raises(LayoutError):
        read_layout(p)
