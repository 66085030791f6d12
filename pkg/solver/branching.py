"""Best-bound branch and bound over Lagrangian lower bounds."""
import heapq
import itertools
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import completion_count, enumerate_best, region_options
from .lagrangian import complementary_multipliers, dual_ascent, lagrangian
from .models import BnBNode, SolverOptions

logger = logging.getLogger(__name__)

# rows settled by y and e alone once x is fixed
SETTLED_BY_COMPLETION = ('coupling', 'soft_size')


class Incumbent:
    """Best feasible solution so far; shared between worker threads."""

    def __init__(self, solution):
        self._lock = threading.Lock()
        self.solution = solution

    @property
    def objective(self):
        with self._lock:
            return np.inf if self.solution is None else self.solution.objective

    def snapshot(self):
        with self._lock:
            return self.solution

    def offer(self, solution):
        if solution is None or not solution.is_feasible:
            return False
        with self._lock:
            if self.solution is None or solution.objective < self.solution.objective:
                self.solution = solution
                return True
        return False


def pins_infeasible(problem, lower, upper, tolerance=1e-9):
    """True when some row cannot hold for any point inside the pins."""
    if problem.n_x and lower.reshape(problem.n_regions, problem.n_instances).sum(axis=1).max() > 1:
        return True
    if problem.n_rows == 0:
        return False
    B = problem.B
    least = B.maximum(0) @ lower + B.minimum(0) @ upper
    least += np.asarray(problem.D.minimum(0).sum(axis=1)).ravel()
    least += problem.slack_bound * np.asarray(problem.C.minimum(0).sum(axis=1)).ravel()
    return bool(np.any(least > problem.f + tolerance))


def fix_by_reduced_cost(problem, nu, value, ceiling, lower, upper):
    """Pins implied by the bound `value` = L(nu) under (lower, upper).

    Restricting region i to option o changes the bound to
    value - best_i + c_io; options whose bound reaches `ceiling` are dropped.
    A region that may not stay unassigned and keeps a single instance gets it
    pinned. Returns (lower, upper), or None when some region has no option left.
    """
    n_r, n_j = problem.n_regions, problem.n_instances
    if n_r * n_j == 0 or not np.isfinite(ceiling):
        return lower, upper
    cx = (problem.g + problem.B.T @ nu).reshape(n_r, n_j)
    forced = lower.reshape(n_r, n_j) > 0
    pinned = forced.any(axis=1)
    allowed = upper.reshape(n_r, n_j) > 0
    grid = np.where(allowed, cx, np.inf)
    best = np.minimum(grid.min(axis=1), 0.0)
    room = ceiling - value + best
    keep = allowed & (grid < room[:, None])
    keep[pinned] = forced[pinned]
    must = ~pinned & (room <= 0.0)
    count = keep.sum(axis=1)
    if np.any(must & (count == 0)):
        return None
    fixed_lower = forced.copy()
    single = must & (count == 1)
    fixed_lower[single] = keep[single]
    return fixed_lower.ravel().astype(np.float64), keep.ravel().astype(np.float64)


def _grow(problem, x, best, candidates, taken):
    for k in candidates:
        region = k // problem.n_instances
        if taken[region]:
            continue
        trial = x.copy()
        trial[k] = 1.0
        solution = problem.complete(trial)
        if solution.is_feasible and solution.objective < best.objective:
            x, best = trial, solution
            taken[region] = True
    return best


def repair(problem, hint, lower, upper, costs=None):
    """Feasible point grown from the pinned ones by adding hinted edges, cheapest first,
    then any other negative-cost edge of a region still unassigned.

    Edges are admitted while the rows y and e cannot settle stay satisfied; when
    the completed point is infeasible or worse than the pins alone, the edges are
    retried one completion at a time.
    """
    x = lower.astype(np.float64)
    best = problem.complete(x)
    if not best.is_feasible:
        return None
    costs = problem.g if costs is None else costs
    free = (upper > 0) & (lower == 0)
    hinted = np.flatnonzero((hint > 0) & free)
    others = np.flatnonzero((hint <= 0) & free & (problem.g < 0))
    candidates = np.concatenate([
        group[np.argsort(costs[group], kind='stable')] for group in (hinted, others)
    ]).astype(np.int64)
    taken = x.reshape(problem.n_regions, problem.n_instances).any(axis=1)

    hard = np.flatnonzero(~np.isin(np.asarray(problem.row_tags), SETTLED_BY_COMPLETION))
    rows = problem.B[hard].tocsc()
    activity = rows @ x - problem.f[hard]
    grown, admitted = x.copy(), taken.copy()
    for k in candidates:
        region = k // problem.n_instances
        if admitted[region] or problem.g[k] >= 0:
            continue
        start, end = rows.indptr[k], rows.indptr[k + 1]
        touched, coef = rows.indices[start:end], rows.data[start:end]
        if np.any(activity[touched] + coef > 1e-9):
            continue
        activity[touched] += coef
        grown[k] = 1.0
        admitted[region] = True
    solution = problem.complete(grown)
    if solution.is_feasible and solution.objective <= best.objective:
        return solution
    return _grow(problem, x, best, candidates, taken)


def branch_variable(problem, free, residual, nu, tolerance):
    """x index in the most violated relaxed row, largest coefficient first; else the most ambiguous free x."""
    B = problem.B
    for row in np.argsort(-residual, kind='stable'):
        if residual[row] <= tolerance:
            break
        start, end = B.indptr[row], B.indptr[row + 1]
        columns, coefficients = B.indices[start:end], B.data[start:end]
        usable = free[columns]
        if usable.any():
            columns, coefficients = columns[usable], np.abs(coefficients[usable])
            order = np.lexsort((columns, -coefficients))
            return int(columns[order[0]])
    candidates = np.flatnonzero(free)
    if candidates.size == 0:
        return None
    reduced = np.abs(problem.g[candidates] + problem.B[:, candidates].T @ nu)
    return int(candidates[np.argmin(reduced)])


class BranchAndBound:
    def __init__(self, problem, options, lower=None, upper=None):
        self.problem = problem
        self.options = options
        self.lower = np.zeros(problem.n_x) if lower is None else np.asarray(lower, dtype=np.float64)
        self.upper = np.ones(problem.n_x) if upper is None else np.asarray(upper, dtype=np.float64)
        self.incumbent = Incumbent(None)
        self.counter = itertools.count()
        self.nodes = 0

    def _snapped(self, nu, lower, upper):
        """Complementary multipliers of the incumbent with their bound, or None."""
        solution = self.incumbent.snapshot()
        if solution is None or self.problem.n_rows == 0:
            return None
        snapped = complementary_multipliers(self.problem, solution, nu)
        return snapped, lagrangian(self.problem, snapped, lower, upper)[0]

    def _close_leaf(self, lower, upper):
        choices = region_options(self.problem, lower, upper)
        if completion_count(choices) <= self.options.leaf_size:
            self.incumbent.offer(enumerate_best(self.problem, choices))
            return True
        return False

    def evaluate(self, node, root=False):
        """Bound one node. Returns its children, or [] when it is closed."""
        problem, options = self.problem, self.options
        tolerance = options.tolerance
        if pins_infeasible(problem, node.lower, node.upper):
            return []
        if node.bound >= self.incumbent.objective - tolerance:
            return []
        if self._close_leaf(node.lower, node.upper):
            return []

        warm = node.nu
        snapped = self._snapped(node.nu, node.lower, node.upper)
        if snapped is not None and snapped[1] > lagrangian(problem, warm, node.lower, node.upper)[0]:
            warm = snapped[0]
        incumbent = self.incumbent.objective
        state = dual_ascent(
            problem,
            iterations=options.iterations if root else options.node_iterations,
            step=options.step,
            schedule=options.schedule if root else options.node_schedule,
            warm=warm,
            target=incumbent if np.isfinite(incumbent) else None,
            cutoff=incumbent - tolerance if np.isfinite(incumbent) else None,
            lower=node.lower,
            upper=node.upper,
        )
        reduced = problem.g + problem.B.T @ state.best_nu
        self.incumbent.offer(repair(problem, state.x, node.lower, node.upper, reduced))
        if root:
            self.incumbent.offer(repair(problem, (problem.g < 0).astype(np.float64), node.lower, node.upper))

        nu, value = state.best_nu, state.best_bound
        snapped = self._snapped(nu, node.lower, node.upper)
        if snapped is not None and snapped[1] > value:
            nu, value = snapped
        bound = max(value, node.bound)
        if root:
            logger.debug("root bound %.6f after %d %s iterations", bound, state.iterations, options.schedule)
        ceiling = self.incumbent.objective - tolerance
        if bound >= ceiling:
            return []

        pins = fix_by_reduced_cost(problem, nu, value, ceiling, node.lower, node.upper)
        if pins is None:
            return []
        lower, upper = pins
        if pins_infeasible(problem, lower, upper) or self._close_leaf(lower, upper):
            return []
        k = branch_variable(problem, lower != upper, state.residual, nu, tolerance)
        if k is None:
            return []
        parent = BnBNode(lower=lower, upper=upper, nu=nu, bound=bound, depth=node.depth)
        return [parent.pin(k, 1, problem.n_instances), parent.pin(k, 0, problem.n_instances)]

    def run(self):
        problem, options = self.problem, self.options
        start = time.perf_counter()
        self.incumbent.offer(problem.complete(self.lower))
        root = BnBNode(lower=self.lower, upper=self.upper, nu=np.zeros(problem.n_rows), bound=-np.inf)
        heap = []
        self.nodes = 1
        for child in self.evaluate(root, root=True):
            heapq.heappush(heap, (child.bound, next(self.counter), child))

        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            while heap and self.nodes < options.node_budget:
                if heap[0][0] >= self.incumbent.objective - options.tolerance:
                    heap.clear()
                    break
                batch = []
                while heap and len(batch) < options.threads and self.nodes + len(batch) < options.node_budget:
                    batch.append(heapq.heappop(heap)[2])
                for children in pool.map(self.evaluate, batch):
                    for child in children:
                        heapq.heappush(heap, (child.bound, next(self.counter), child))
                self.nodes += len(batch)

        solution = self.incumbent.solution
        if solution is None:
            solution = problem.complete(self.lower)
            solution.status, solution.nodes = 'infeasible', self.nodes
            logger.warning("no feasible point satisfies the pins")
            return solution
        objective = solution.objective
        open_bound = min((entry[0] for entry in heap), default=np.inf)
        solution.bound = min(objective, open_bound)
        solution.status = 'optimal' if solution.gap <= options.tolerance else 'budget'
        solution.nodes = self.nodes
        solution.wall_time = time.perf_counter() - start
        if solution.status == 'budget':
            logger.warning("node budget of %d exhausted; gap %.6g remains", options.node_budget, solution.gap)
        logger.info("branch and bound: objective %.6f, %d nodes, %.3fs",
                    objective, self.nodes, solution.wall_time)
        return solution


def branch_and_bound(problem, options=None, lower=None, upper=None, **overrides):
    """Globally optimal Solution within `tolerance`, or the incumbent with its gap once
    the node budget runs out.
    """
    options = (options or SolverOptions.from_settings()).override(**overrides)
    return BranchAndBound(problem, options, lower, upper).run()
