"""Lagrangian dual of the assembly program.

Relaxing the coupling rows B x + C e + D y <= f leaves three separable
subproblems: x under the one-instance-per-region rows, y in {0, 1} and e in [0, M].
"""
import logging

import numpy as np
from django.conf import settings
from scipy import sparse
from scipy.optimize import linprog

from .models import DualState, DualityViolationError, SCHEDULES

logger = logging.getLogger(__name__)

POLYAK_PATIENCE = 10
MASTER_TOLERANCE = 1e-10
MASTER_OPTIONS = {'primal_feasibility_tolerance': MASTER_TOLERANCE,
                  'dual_feasibility_tolerance': MASTER_TOLERANCE}


def solve_P1(coefficients, n_regions, n_instances, lower=None, upper=None):
    """Per region, link the most negative instance; no link when none is negative.

    Ties go to the smallest instance index. `lower`/`upper` pin entries of x.
    """
    if n_regions * n_instances == 0:
        return np.zeros(n_regions * n_instances, dtype=np.int8)
    grid = np.asarray(coefficients, dtype=np.float64).reshape(n_regions, n_instances)
    if upper is not None:
        grid = np.where(upper.reshape(n_regions, n_instances) > 0, grid, np.inf)
    rows = np.arange(n_regions)
    best = np.argmin(grid, axis=1)
    take = grid[rows, best] < 0
    if lower is not None:
        forced = lower.reshape(n_regions, n_instances) > 0
        pinned = forced.any(axis=1)
        best = np.where(pinned, forced.argmax(axis=1), best)
        take |= pinned
    x = np.zeros((n_regions, n_instances), dtype=np.int8)
    x[rows[take], best[take]] = 1
    return x.ravel()


def solve_P2(coefficients):
    return (np.asarray(coefficients) < 0).astype(np.int8)


def solve_P3(coefficients, bound):
    return np.where(np.asarray(coefficients) < 0, float(bound), 0.0)


def _tight_slack(problem, ce, x, y, e):
    """Slack for zero-cost e entries set to what their rows ask for.

    Any e in [0, M] minimizes a zero coefficient, so the residual of this
    choice is as valid a subgradient as the one of e = 0.
    """
    free = np.flatnonzero(ce == 0)
    if free.size == 0:
        return e
    base = problem.residual(x, y, np.zeros_like(e))
    C = problem.C.tocsc()
    e = e.copy()
    for k in free:
        rows, coef = C.indices[C.indptr[k]:C.indptr[k + 1]], C.data[C.indptr[k]:C.indptr[k + 1]]
        rows, coef = rows[coef < 0], coef[coef < 0]
        need = (base[rows] / -coef).max(initial=0.0)
        e[k] = min(max(need, 0.0), problem.slack_bound)
    return e


def lagrangian(problem, nu, lower=None, upper=None):
    """L(nu) with its inner minimizers and the residual B x + C e + D y - f."""
    cx = problem.g + problem.B.T @ nu
    cy = problem.w + problem.D.T @ nu
    ce = problem.phi + problem.C.T @ nu
    x = solve_P1(cx, problem.n_regions, problem.n_instances, lower, upper)
    y = solve_P2(cy)
    e = solve_P3(ce, problem.slack_bound)
    value = float(cx @ x + cy @ y + ce @ e - nu @ problem.f)
    return value, x, y, e, problem.residual(x, y, _tight_slack(problem, ce, x, y, e))


def complementary_multipliers(problem, solution, nu, tolerance=1e-9):
    """`nu` moved towards complementary slackness with a feasible `solution`.

    Rows the solution leaves slack get zero. A soft size pair whose slack sits
    strictly inside (0, M) puts phi on its active row, the price at which that
    slack costs nothing.
    """
    residual = problem.residual(solution.x, solution.y, solution.e)
    snapped = np.where(residual < -tolerance, 0.0, np.asarray(nu, dtype=np.float64))
    C = problem.C.tocsc()
    for j in range(problem.n_instances):
        if not tolerance < solution.e[j] < problem.slack_bound - tolerance:
            continue
        rows, coef = C.indices[C.indptr[j]:C.indptr[j + 1]], C.data[C.indptr[j]:C.indptr[j + 1]]
        active = (residual[rows] >= -tolerance) & (coef < 0)
        if active.sum() == 1:
            snapped[rows[active]] = problem.phi / -coef[active]
    return snapped


def _step_length(schedule, step, k, value, target, residual_norm2, scale):
    if schedule == 'constant':
        return step
    if schedule == 'diminishing' or target is None or not np.isfinite(target):
        return step / (np.sqrt(k) * np.sqrt(residual_norm2))
    return scale * (target - value) / residual_norm2


def _cut_key(x, y, e):
    return x.tobytes() + y.tobytes() + np.round(e, 12).tobytes()


class CuttingPlanes:
    """Outer model of L(nu) built from the inner minimizers seen so far.

    Every point v of the inner feasible set gives the cut
    L(nu) <= c v + nu (B x + C e + D y - f); the master maximizes the minimum
    of the cuts over nu >= 0 with HiGHS.
    """

    def __init__(self, problem):
        self.problem = problem
        self.keys = set()
        self.objectives = []
        self.residuals = []

    def add(self, x, y, e, residual=None):
        key = _cut_key(x, y, e)
        if key in self.keys:
            return False
        if residual is None:
            residual = self.problem.residual(x, y, e)
        self.keys.add(key)
        self.objectives.append(self.problem.objective(x, y, e))
        self.residuals.append(np.asarray(residual, dtype=np.float64))
        return True

    def __contains__(self, point):
        return _cut_key(*point) in self.keys

    def master(self):
        """(nu, t) maximizing the model, or None when HiGHS finds no optimum."""
        m = self.problem.n_rows
        A = sparse.hstack([-sparse.csr_matrix(np.vstack(self.residuals)),
                           sparse.csr_matrix(np.ones((len(self.residuals), 1)))]).tocsr()
        c = np.zeros(m + 1)
        c[-1] = -1.0
        bounds = [(0, None)] * m + [(None, None)]
        result = linprog(c, A_ub=A, b_ub=np.asarray(self.objectives), bounds=bounds, method='highs',
                         options=MASTER_OPTIONS)
        if result.status != 0:
            logger.debug("cutting-plane master stopped: %s", result.message)
            return None
        return np.maximum(result.x[:m], 0.0), float(result.x[m])


def _polish(problem, state, cuts, budget, lower, upper, cutoff, check):
    """Kelley steps on the cut model until L(nu) meets the model's maximum."""
    used = 0
    while used < budget:
        if cutoff is not None and state.best_bound >= cutoff:
            break
        found = cuts.master()
        if found is None:
            break
        nu, ceiling = found
        value, x, y, e, residual = lagrangian(problem, nu, lower, upper)
        used += 1
        state.iterations += 1
        state.history.append(value)
        if check is not None and value > check + 1e-6 * (1 + abs(check)):
            raise DualityViolationError(f"bound {value} exceeds feasible objective {check}")
        if value > state.best_bound:
            state.best_nu, state.best_bound = nu, value
            state.x, state.y, state.e, state.residual = x, y, e, residual
        state.nu = nu
        if value >= ceiling - 1e-9 * (1 + abs(ceiling)) or not cuts.add(x, y, e):
            break
    return used


def dual_ascent(problem, iterations=500, step=1e-6, schedule='constant', warm=None,
                target=None, cutoff=None, lower=None, upper=None, check=None, polish=None):
    """Subgradient ascent on L(nu), nu starting at zero or at `warm`.

    'diminishing' takes steps of step / sqrt(k) along the unit subgradient.
    'polyak' steps towards `target`, an upper bound such as an incumbent
    objective; without one it falls back to the diminishing schedule. With
    `polish` (the default for 'diminishing') a tenth of the iterations go to
    subgradient steps and the rest to cutting-plane steps, which reach the
    value of the linear relaxation. The run stops early once the bound reaches
    `cutoff`. `check` is an objective of a feasible point every bound is
    verified against; it defaults to the empty assignment when DEBUG is on.
    """
    if iterations < 1 or step <= 0:
        raise ValueError("dual ascent needs iterations >= 1 and a positive step")
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown step schedule {schedule!r}")
    if polish is None:
        polish = schedule == 'diminishing'
    if check is None and settings.DEBUG and lower is None and upper is None:
        check = problem.empty_solution().objective
    cuts = CuttingPlanes(problem) if polish and problem.n_rows else None
    ascent = max(1, iterations // 10) if cuts is not None else iterations
    nu = np.zeros(problem.n_rows) if warm is None else np.array(warm, dtype=np.float64)
    state = None
    scale, stalled = 1.0, 0
    for k in range(1, ascent + 1):
        value, x, y, e, residual = lagrangian(problem, nu, lower, upper)
        if check is not None and value > check + 1e-6 * (1 + abs(check)):
            raise DualityViolationError(f"bound {value} exceeds feasible objective {check}")
        if cuts is not None:
            cuts.add(x, y, e)
        if state is None or value > state.best_bound:
            state = DualState(nu=nu, best_nu=nu, best_bound=value, x=x, y=y, e=e, residual=residual,
                              iterations=state.iterations if state else 0, history=state.history if state else [])
            stalled = 0
        else:
            stalled += 1
            if stalled >= POLYAK_PATIENCE:
                scale, stalled = scale / 2, 0
        state.iterations = k
        state.history.append(value)
        if cutoff is not None and state.best_bound >= cutoff:
            break
        direction = np.where((nu <= 0) & (residual < 0), 0.0, residual)
        norm2 = float(direction @ direction)
        if norm2 == 0:
            break
        length = _step_length(schedule, step, k, value, target, norm2, scale)
        if length <= 0:
            break
        nu = np.maximum(0.0, nu + length * residual)
    state.nu = nu
    if cuts is not None and iterations > state.iterations:
        lowest = np.zeros(problem.n_x) if lower is None else np.asarray(lower, dtype=np.float64)
        anchor = problem.complete(lowest)
        if anchor.is_feasible:
            cuts.add(anchor.x, anchor.y, anchor.e)
        _polish(problem, state, cuts, iterations - state.iterations, lower, upper, cutoff, check)
    logger.debug("dual ascent: %d iterations, bound %.6f", state.iterations, state.best_bound)
    return state
