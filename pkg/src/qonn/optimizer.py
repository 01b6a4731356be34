"""Two-stage derivative-free training: CRS2 with local mutation, then BOBYQA.

The global stage is a controlled random search over a population of
10 (P + 1) points and stops at the first improvement of the population best
that is smaller than ``tol_global``. Its best point seeds a bound-constrained
quadratic-model trust-region search (BOBYQA, 2P + 1 interpolation points,
NLopt implementation) run to ``tol_local``.
"""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import nlopt
import numpy as np

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 100_000
TOL_GLOBAL = 1e-4
TOL_LOCAL = 1e-14
WORKERS_ENV = "QONN_WORKERS"
MAX_LOCAL_RESTARTS = 3


@dataclass
class BoundedProblem:
    lower: np.ndarray
    upper: np.ndarray
    objective: Callable[[np.ndarray], float]
    budget: int = DEFAULT_BUDGET
    name: str = ""
    # [start, stop) of the correction phases inside the parameter vector
    correction_slots: tuple[int, int] | None = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("bounds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("bounds must be finite")
        if np.any(self.upper < self.lower):
            raise ValueError("upper bound below lower bound")

    @property
    def dim(self) -> int:
        return self.lower.size

    def population_size(self) -> int:
        return 10 * (self.dim + 1)


@dataclass
class TrainRecord:
    seed: int
    best_x: list[float]
    best_cost: float
    evaluations: int
    global_iterations: int = 0
    local_iterations: int = 0
    global_cost: float = float("nan")
    trace: list[tuple[int, float]] = field(default_factory=list)
    budget_exhausted: bool = False
    status: str = ""
    run: int = 0
    budget: int = DEFAULT_BUDGET

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trace"] = [[int(i), float(c)] for i, c in self.trace]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainRecord":
        d = dict(d)
        d["trace"] = [(int(i), float(c)) for i, c in d.get("trace", [])]
        return cls(**d)


@dataclass
class TrainResult:
    records: list[TrainRecord]

    @property
    def best(self) -> TrainRecord:
        # ties go to the lowest seed
        return min(self.records, key=lambda r: (r.best_cost, r.seed))

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.best_cost for r in self.records])


class _Tracker:
    """Counts evaluations, keeps the best point and the best-so-far trace."""

    def __init__(self, objective, budget: int, offset: int = 0, best_cost=np.inf, best_x=None):
        self.objective = objective
        self.budget = budget
        self.evals = offset
        self.best_cost = best_cost
        self.best_x = best_x
        self.trace: list[tuple[int, float]] = []

    @property
    def exhausted(self) -> bool:
        return self.evals >= self.budget

    def __call__(self, x: np.ndarray) -> float:
        f = float(self.objective(x))
        if np.isnan(f):
            f = np.inf
        self.evals += 1
        if f < self.best_cost:
            self.best_cost = f
            self.best_x = np.array(x, dtype=float)
            self.trace.append((self.evals, f))
        return f


def run_seed(master_seed: int, run: int) -> int:
    """Per-run seed derived from (master seed, run index)."""
    return int(np.random.SeedSequence([master_seed, run]).generate_state(1)[0])


def crs_global(
    problem: BoundedProblem,
    seed: int,
    tol: float = TOL_GLOBAL,
    budget: int | None = None,
) -> TrainRecord:
    """Controlled random search (CRS2 with local mutation) inside the bound box."""
    budget = problem.budget if budget is None else budget
    rng = np.random.default_rng(seed)
    lo, hi = problem.lower, problem.upper
    n = problem.dim
    size = problem.population_size()
    track = _Tracker(problem.objective, budget)

    size = min(size, budget)
    pop = lo + (hi - lo) * rng.random((size, n))
    fvals = np.array([track(x) for x in pop])
    best = int(np.argmin(fvals))
    iterations = 0
    status = "budget"
    n_pick = min(n, size - 1)

    def reflect() -> np.ndarray:
        picks = rng.choice(size - 1, size=n_pick, replace=False)
        picks[picks >= best] += 1
        pivot = picks[rng.integers(n_pick)]
        members = np.concatenate([[best], picks[picks != pivot]])
        centroid = pop[members].mean(axis=0)
        return np.clip(2.0 * centroid - pop[pivot], lo, hi)

    while not track.exhausted and n_pick >= 1:
        worst = int(np.argmax(fvals))
        trial = reflect()
        mutated = False
        while True:
            f = track(trial)
            if f < fvals[worst] or track.exhausted:
                break
            if not mutated:
                w = rng.random(n)
                trial = np.clip((1.0 + w) * pop[best] - w * trial, lo, hi)
                mutated = True
            else:
                trial = reflect()
                mutated = False
        if f >= fvals[worst]:
            break
        pop[worst] = trial
        fvals[worst] = f
        iterations += 1
        if f < fvals[best]:
            gain = fvals[best] - f
            best = worst
            if gain < tol:
                status = "ftol"
                break

    return TrainRecord(
        seed=seed,
        best_x=[float(v) for v in pop[best]],
        best_cost=float(fvals[best]),
        evaluations=track.evals,
        global_iterations=iterations,
        global_cost=float(fvals[best]),
        trace=track.trace,
        budget_exhausted=status == "budget",
        status=status,
        budget=budget,
    )


_NLOPT_STATUS = {
    nlopt.SUCCESS: "success",
    nlopt.STOPVAL_REACHED: "stopval",
    nlopt.FTOL_REACHED: "ftol",
    nlopt.XTOL_REACHED: "xtol",
    nlopt.MAXEVAL_REACHED: "budget",
    nlopt.MAXTIME_REACHED: "maxtime",
}


def local_refine(
    problem: BoundedProblem,
    start: Sequence[float],
    seed: int = 0,
    tol: float = TOL_LOCAL,
    budget: int | None = None,
    initial_step: float | None = None,
) -> TrainRecord:
    """Bounded quadratic-model trust-region refinement from ``start``.

    On a breakdown of the interpolation model (NLopt reports a roundoff
    limit or a generic failure) the search restarts from the best point with
    a ten times smaller initial radius, at most ``MAX_LOCAL_RESTARTS`` times.
    """
    budget = problem.budget if budget is None else budget
    x = np.clip(np.asarray(start, dtype=float), problem.lower, problem.upper)
    n = problem.dim
    track = _Tracker(problem.objective, budget)
    f0 = track(x)
    algorithm = nlopt.LN_BOBYQA if n >= 2 else nlopt.LN_COBYLA
    if initial_step is None:
        initial_step = 0.1 * float(np.min(problem.upper - problem.lower))
    step = initial_step
    status = "budget"
    for attempt in range(MAX_LOCAL_RESTARTS + 1):
        remaining = budget - track.evals
        if remaining <= 0:
            break
        opt = nlopt.opt(algorithm, n)
        opt.set_lower_bounds(problem.lower)
        opt.set_upper_bounds(problem.upper)
        opt.set_min_objective(lambda v, grad: track(v))
        opt.set_ftol_abs(tol)
        opt.set_maxeval(remaining)
        opt.set_initial_step(np.minimum(step, 0.5 * (problem.upper - problem.lower)))
        try:
            opt.optimize(np.clip(track.best_x, problem.lower, problem.upper))
            status = _NLOPT_STATUS.get(opt.last_optimize_result(), "failure")
            break
        except nlopt.RoundoffLimited:
            status = "roundoff"
        except (RuntimeError, ValueError) as err:
            log.debug("local stage failed: %s", err)
            status = "failure"
        step *= 0.1
    else:
        status = f"{status}-persistent"
    return TrainRecord(
        seed=seed,
        best_x=[float(v) for v in track.best_x],
        best_cost=float(track.best_cost),
        evaluations=track.evals,
        local_iterations=track.evals,
        global_cost=float(f0),
        trace=track.trace,
        budget_exhausted=status == "budget",
        status=status,
        budget=budget,
    )


def train_once(
    problem: BoundedProblem,
    seed: int,
    run: int = 0,
    tol_global: float = TOL_GLOBAL,
    tol_local: float = TOL_LOCAL,
) -> TrainRecord:
    """One run: uniform random population, CRS, then local refinement."""
    coarse = crs_global(problem, seed, tol=tol_global)
    fine = local_refine(problem, coarse.best_x, seed, tol=tol_local)
    offset = coarse.evaluations
    trace = list(coarse.trace)
    for i, c in fine.trace:
        if c < trace[-1][1]:
            trace.append((offset + i, c))
    if fine.best_cost <= coarse.best_cost:
        best_x, best_cost = fine.best_x, fine.best_cost
    else:
        best_x, best_cost = coarse.best_x, coarse.best_cost
    return TrainRecord(
        seed=seed,
        best_x=best_x,
        best_cost=best_cost,
        evaluations=coarse.evaluations + fine.evaluations,
        global_iterations=coarse.global_iterations,
        local_iterations=fine.local_iterations,
        global_cost=coarse.best_cost,
        trace=trace,
        budget_exhausted=coarse.budget_exhausted or fine.budget_exhausted,
        status=f"{coarse.status}/{fine.status}",
        run=run,
        budget=problem.budget,
    )


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def train(
    problem: BoundedProblem,
    runs: int = 50,
    seed: int = 0,
    workers: int | None = None,
    tol_global: float = TOL_GLOBAL,
    tol_local: float = TOL_LOCAL,
) -> TrainResult:
    """Independent multi-start training; the best run is ``result.best``."""
    if runs < 1:
        raise ValueError("need at least one run")
    workers = default_workers() if workers is None else workers
    seeds = [run_seed(seed, r) for r in range(runs)]
    if workers > 1:
        from joblib import Parallel, delayed

        records = Parallel(n_jobs=workers)(
            delayed(train_once)(problem, s, r, tol_global, tol_local) for r, s in enumerate(seeds)
        )
    else:
        records = [train_once(problem, s, r, tol_global, tol_local) for r, s in enumerate(seeds)]
    return TrainResult(list(records))


class _FrozenObjective:
    def __init__(self, objective, full_dim: int, slots: tuple[int, int], values: np.ndarray):
        self.objective = objective
        self.full_dim = full_dim
        self.slots = slots
        self.values = values

    def expand(self, x: np.ndarray) -> np.ndarray:
        a, b = self.slots
        return np.concatenate([x[:a], self.values, x[a:]])

    def __call__(self, x: np.ndarray) -> float:
        return self.objective(self.expand(np.asarray(x, dtype=float)))


def freeze_corrections(problem: BoundedProblem, values: Sequence[float] | None = None) -> BoundedProblem:
    """Drop the correction phases, pinning them (by default to the identity setting 0)."""
    if problem.correction_slots is None:
        raise ValueError("problem has no correction coordinates")
    a, b = problem.correction_slots
    values = np.zeros(b - a) if values is None else np.asarray(values, dtype=float)
    keep = np.r_[0:a, b : problem.dim]
    return replace(
        problem,
        lower=problem.lower[keep],
        upper=problem.upper[keep],
        objective=_FrozenObjective(problem.objective, problem.dim, (a, b), values),
        correction_slots=None,
        name=f"{problem.name} (corrections frozen)".strip(),
    )
