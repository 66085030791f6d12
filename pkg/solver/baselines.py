"""Exhaustive and greedy reference solvers."""
import logging
import time

import numpy as np

from assembly.models import Solution
from .models import OversizedProblemError

logger = logging.getLogger(__name__)

CHUNK = 1 << 15


def region_options(problem, lower=None, upper=None):
    """Per region, the instance indices it may take (-1 = unassigned)."""
    n_r, n_j = problem.n_regions, problem.n_instances
    lower = np.zeros(problem.n_x) if lower is None else lower
    upper = np.ones(problem.n_x) if upper is None else upper
    options = []
    for i in range(n_r):
        block = slice(i * n_j, (i + 1) * n_j)
        forced = np.flatnonzero(lower[block])
        if forced.size:
            options.append(forced[:1])
        else:
            options.append(np.concatenate([[-1], np.flatnonzero(upper[block])]))
    return options


def completion_count(options):
    return int(np.prod([len(o) for o in options], dtype=np.float64))


def enumerate_best(problem, options):
    """Best feasible completion over every combination of region options, or None.

    Combinations are visited in mixed-radix order; ties keep the first.
    """
    n_r, n_j = problem.n_regions, problem.n_instances
    dims = tuple(len(o) for o in options)
    total = int(np.prod(dims, dtype=np.int64)) if dims else 1
    best = None
    for start in range(0, total, CHUNK):
        codes = np.arange(start, min(start + CHUNK, total))
        digits = np.unravel_index(codes, dims) if dims else ()
        X = np.zeros((codes.size, n_r, n_j))
        for i, digit in enumerate(digits):
            choice = options[i][digit]
            chosen = choice >= 0
            X[np.flatnonzero(chosen), i, choice[chosen]] = 1.0
        X = X.reshape(codes.size, -1)
        Y, E, objective, feasible = problem.complete_batch(X)
        if not feasible.any():
            continue
        k = int(np.argmin(np.where(feasible, objective, np.inf)))
        if best is None or objective[k] < best.objective:
            best = Solution(x=X[k].astype(np.int8), y=Y[k].astype(np.int8), e=E[k],
                            objective=float(objective[k]), is_feasible=True)
    return best


def exhaustive_oracle(problem, limit=20):
    """True global optimum by enumeration; refuses more than `limit` x variables."""
    if problem.n_x > limit:
        raise OversizedProblemError(f"{problem.n_x} edge variables exceed the enumeration limit of {limit}")
    start = time.perf_counter()
    best = enumerate_best(problem, region_options(problem))
    best.bound = best.objective
    best.status = 'exhaustive'
    best.wall_time = time.perf_counter() - start
    return best


def greedy_baseline(problem, options=None):
    """Group one person at a time: each round solves every remaining instance's
    single-instance problem over the unused regions and keeps the cheapest.
    """
    from .branching import branch_and_bound

    start = time.perf_counter()
    n_r, n_j = problem.n_regions, problem.n_instances
    fixed = np.zeros(problem.n_x)
    decided = np.zeros(problem.n_x, dtype=bool)
    remaining = list(range(n_j))
    nodes = 0
    while remaining:
        used = fixed.reshape(n_r, n_j).any(axis=1)
        best, best_j = None, None
        for j in remaining:
            upper = fixed.copy()
            free = np.zeros((n_r, n_j), dtype=bool)
            free[~used, j] = True
            upper[free.ravel() & ~decided] = 1
            solution = branch_and_bound(problem, options=options, lower=fixed, upper=upper)
            nodes += solution.nodes
            if best is None or solution.objective < best.objective:
                best, best_j = solution, j
        remaining.remove(best_j)
        column = np.zeros((n_r, n_j), dtype=bool)
        column[:, best_j] = True
        decided |= column.ravel()
        fixed = np.where(decided, best.x, fixed)
        logger.debug("greedy: instance %d grouped, objective %.6f", best_j, best.objective)
    current = problem.complete(fixed)
    current.bound = -np.inf
    current.status = 'greedy'
    current.nodes = nodes
    current.wall_time = time.perf_counter() - start
    return current
