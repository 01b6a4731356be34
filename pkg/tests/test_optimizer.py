import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qonn.optimizer import (
    BoundedProblem,
    TrainRecord,
    TrainResult,
    crs_global,
    freeze_corrections,
    local_refine,
    run_seed,
    train,
    train_once,
)


class BoxWatch:
    """Objective wrapper recording every point it is asked to evaluate."""

    def __init__(self, f, lower, upper):
        self.f, self.lower, self.upper = f, lower, upper
        self.violations = 0
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        if np.any(x < self.lower) or np.any(x > self.upper):
            self.violations += 1
        return self.f(x)


def sphere(center):
    return lambda x: float(np.sum((x - center) ** 2))


def rastrigin(x):
    return float(10 * x.size + np.sum(x**2 - 10 * np.cos(2 * np.pi * x)))


def test_problem_validation():
    with pytest.raises(ValueError):
        BoundedProblem(np.zeros(2), np.ones(3), sphere(0))
    with pytest.raises(ValueError):
        BoundedProblem(np.ones(2), np.zeros(2), sphere(0))
    with pytest.raises(ValueError):
        BoundedProblem(np.zeros(1), np.array([np.inf]), sphere(0))
    assert BoundedProblem(np.zeros(4), np.ones(4), sphere(0)).population_size() == 50


@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
@settings(max_examples=15)
def test_bounds_never_violated(n, seed):
    rng = np.random.default_rng(seed)
    lower, upper = -rng.uniform(0.5, 2, n), rng.uniform(0.5, 2, n)
    # minimum outside the box pushes both stages against the bounds
    watch = BoxWatch(sphere(upper + 1.0), lower, upper)
    rec = train_once(BoundedProblem(lower, upper, watch, budget=3000), seed)
    assert watch.violations == 0
    assert np.all(np.asarray(rec.best_x) <= upper) and np.all(np.asarray(rec.best_x) >= lower)
    np.testing.assert_allclose(rec.best_x, upper, atol=1e-5)


def test_deterministic_given_seed():
    p = BoundedProblem(-5.12 * np.ones(3), 5.12 * np.ones(3), rastrigin)
    a, b = train_once(p, 11), train_once(p, 11)
    assert a.best_cost == b.best_cost and a.evaluations == b.evaluations and a.best_x == b.best_x
    assert train_once(p, 12).evaluations != a.evaluations


def test_separable_convex_at_largest_scale():
    n = 62
    center = np.linspace(0.3, 2.8, n)
    p = BoundedProblem(np.zeros(n), np.full(n, np.pi), sphere(center))
    rec = train_once(p, run_seed(0, 0))
    assert rec.best_cost < 1e-10
    assert rec.evaluations <= 2 * p.budget


def test_trace_monotone_and_counts():
    p = BoundedProblem(-5.12 * np.ones(2), 5.12 * np.ones(2), rastrigin)
    rec = train_once(p, 5)
    evals = [e for e, _ in rec.trace]
    costs = [c for _, c in rec.trace]
    assert evals == sorted(evals) and evals[-1] <= rec.evaluations
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert costs[-1] == rec.best_cost
    assert rec.global_iterations > 0 and rec.local_iterations > 0


def test_crs_finds_global_basin():
    # two-dimensional Rastrigin: global minimum 0 at the origin among many local minima
    p = BoundedProblem(-5.12 * np.ones(2), 5.12 * np.ones(2), rastrigin)
    best = train(p, runs=5, seed=1, workers=1).best
    assert best.best_cost < 1e-10


def test_crs_stops_on_small_improvement():
    p = BoundedProblem(-np.ones(3), np.ones(3), sphere(np.zeros(3)))
    rec = crs_global(p, 0, tol=1e-4)
    assert rec.status == "ftol"
    assert rec.evaluations < p.budget


def test_budget_exhaustion_flagged():
    p = BoundedProblem(-5.12 * np.ones(4), 5.12 * np.ones(4), rastrigin, budget=200)
    rec = crs_global(p, 0, tol=0.0)
    assert rec.budget_exhausted and rec.evaluations == 200
    rec = local_refine(p, np.full(4, 3.0), budget=30, tol=0.0)
    assert rec.evaluations <= 30


def test_local_refine_quadratic():
    center = np.array([0.2, -0.7, 0.5])
    p = BoundedProblem(-np.ones(3), np.ones(3), sphere(center))
    rec = local_refine(p, np.zeros(3))
    assert rec.best_cost < 1e-14
    np.testing.assert_allclose(rec.best_x, center, atol=1e-7)


def test_local_refine_one_dimension():
    p = BoundedProblem(np.zeros(1), np.full(1, 2.0), sphere(np.array([1.3])))
    assert local_refine(p, [0.1]).best_cost < 1e-12


def test_train_parallel_matches_serial():
    p = BoundedProblem(-5.12 * np.ones(2), 5.12 * np.ones(2), rastrigin)
    serial = train(p, runs=3, seed=2, workers=1)
    parallel = train(p, runs=3, seed=2, workers=2)
    assert [r.to_dict() for r in serial.records] == [r.to_dict() for r in parallel.records]


def test_tie_break_lowest_seed():
    recs = [TrainRecord(seed=s, best_x=[0.0], best_cost=0.0, evaluations=1, run=r) for r, s in [(2, 9), (0, 7), (1, 5)]]
    assert TrainResult(recs).best.seed == 5


def test_record_round_trip():
    p = BoundedProblem(-np.ones(2), np.ones(2), sphere(np.zeros(2)))
    rec = train_once(p, 3, run=4)
    assert TrainRecord.from_dict(rec.to_dict()) == rec
    assert rec.run == 4 and rec.budget == p.budget


def test_run_seed_distinct():
    seeds = {run_seed(0, r) for r in range(100)}
    assert len(seeds) == 100
    assert run_seed(1, 0) != run_seed(0, 0)


def test_freeze_corrections():
    calls = []

    def f(x):
        calls.append(np.array(x))
        return float(np.sum(x**2))

    p = BoundedProblem(np.zeros(5), np.ones(5), f, correction_slots=(2, 5))
    frozen = freeze_corrections(p)
    assert frozen.dim == 2 and frozen.correction_slots is None
    frozen.objective(np.array([0.5, 0.25]))
    np.testing.assert_array_equal(calls[-1], [0.5, 0.25, 0, 0, 0])
    with pytest.raises(ValueError):
        freeze_corrections(frozen)


def test_train_rejects_zero_runs():
    with pytest.raises(ValueError):
        train(BoundedProblem(np.zeros(1), np.ones(1), sphere(0)), runs=0)
